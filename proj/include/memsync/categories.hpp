#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "memsync/core.hpp"

namespace memsync {

/// The five ways of collapsing a {t,s,d,i} path into error / no-error.
enum class ErrorCategory { any_error, sync_error, substitution_error, insertion_error, deletion_error };

inline constexpr std::array<ErrorCategory, 5> kAllCategories = {
    ErrorCategory::any_error, ErrorCategory::sync_error, ErrorCategory::substitution_error,
    ErrorCategory::insertion_error, ErrorCategory::deletion_error};

/// CLI spelling: any-error | sync | subst | ins | del.
constexpr std::string_view category_name(ErrorCategory c) noexcept {
    switch (c) {
        case ErrorCategory::any_error: return "any-error";
        case ErrorCategory::sync_error: return "sync";
        case ErrorCategory::substitution_error: return "subst";
        case ErrorCategory::insertion_error: return "ins";
        case ErrorCategory::deletion_error: return "del";
    }
    return "";
}

inline ErrorCategory parse_category(std::string_view name) {
    for (auto c : kAllCategories)
        if (category_name(c) == name) return c;
    throw InputError("unknown error category '" + std::string(name) + "'");
}

/// Whether state `s` counts as an error under `category`.
constexpr bool is_error(SyncState s, ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::any_error: return s != SyncState::transmission;
        case ErrorCategory::sync_error: return s == SyncState::insertion || s == SyncState::deletion;
        case ErrorCategory::substitution_error: return s == SyncState::substitution;
        case ErrorCategory::insertion_error: return s == SyncState::insertion;
        case ErrorCategory::deletion_error: return s == SyncState::deletion;
    }
    return false;
}

/// Position-by-position error indicator; output length equals input length.
inline BinaryErrorSequence binarize(std::span<const SyncState> seq, ErrorCategory category) {
    BinaryErrorSequence out(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) out[k] = is_error(seq[k], category) ? 1 : 0;
    return out;
}

}  // namespace memsync
