#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fluxvm/value.hpp"

namespace fluxvm::bench {

enum class Variant { ClassicFibo, FastFibo, FastestFibo, ReflectiveFibo };
enum class Config { Plain, Transformed, Before, After, BeforeAfter };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(Config c) noexcept;
std::optional<Variant> parse_variant(std::string_view text);
std::optional<Config> parse_config(std::string_view text);

inline const std::vector<Config>& all_configs() {
    static const std::vector<Config> all{Config::Plain, Config::Transformed, Config::Before, Config::After,
                                         Config::BeforeAfter};
    return all;
}

struct BenchSpec {
    std::string source;  // path to fibo.fas
    Variant variant = Variant::ClassicFibo;
    std::vector<Config> configs = all_configs();  // first one is the baseline
    int n = 20;
    int runs = 10;
    std::string platform = "fluxvm";
};

/// Order statistics of a sample set. Q2 and Q4 use the nearest-rank rule: the ceil(p*N)-th
/// smallest sample.
struct Quartiles {
    double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

Quartiles quartiles(std::vector<double> samples);

/// `(median / baseline_median - 1) * 100`
double overhead_percent(double median, double baseline_median);

struct BenchRow {
    Config config = Config::Plain;
    std::string impl;
    std::vector<double> samples_ms;
    Quartiles q;
    double overhead = 0.0;
    std::optional<std::int64_t> result;
    std::optional<std::string> error;  // trap that aborted the row
};

struct BenchReport {
    std::string platform;
    Variant variant = Variant::ClassicFibo;
    int n = 0;
    int runs = 0;
    std::vector<BenchRow> rows;

    /// All rows that completed computed the same value.
    bool results_agree() const;

    /// Exec. Plat. | Impl. | Q1-min | Q2-25% | Q3-median | Q4-75% | Q5-max | Overhead
    std::string to_table() const;
    std::string to_json() const;
};

BenchReport run_benchmark(const BenchSpec& spec);

/// Calls made by naive recursive fib(n), counted by running that recursion.
std::uint64_t count_calls_oracle(int n);

}  // namespace fluxvm::bench
