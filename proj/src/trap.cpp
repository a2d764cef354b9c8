#include "fluxvm/trap.hpp"

namespace fluxvm {

std::string_view to_string(TrapKind kind) noexcept {
    switch (kind) {
        case TrapKind::Internal: return "internal";
        case TrapKind::UnknownMethod: return "unknown-method";
        case TrapKind::DoesNotImplement: return "does-not-implement";
        case TrapKind::NullReceiver: return "null-receiver";
        case TrapKind::Type: return "type";
        case TrapKind::Cast: return "cast";
        case TrapKind::ArrayLength: return "array-length";
        case TrapKind::Structural: return "structural";
        case TrapKind::Bootstrap: return "bootstrap";
        case TrapKind::StackOverflow: return "stack-overflow";
    }
    return "?";
}

std::string Trap::describe() const {
    std::string out = std::string(to_string(kind_)) + " trap";
    if (located_) out += " at " + class_name_ + "." + method_ + " pc=" + std::to_string(pc_);
    return out + ": " + what();
}

}  // namespace fluxvm
