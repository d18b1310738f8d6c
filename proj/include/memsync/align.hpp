#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "memsync/core.hpp"

namespace memsync {

struct AlignmentResult {
    std::size_t cost = 0;
    SyncErrorSequence path;
};

struct ChannelProbEstimate {
    double p_t = 0.0;
    double p_s = 0.0;
    double p_i = 0.0;
    double p_d = 0.0;
    std::size_t total_states = 0;
};

namespace detail {

inline void require_same_alphabet(const SymbolSequence& tx, const SymbolSequence& rx) {
    if (!(tx.alphabet() == rx.alphabet()))
        throw InputError("tx and rx use different alphabets ('" + tx.alphabet().symbols() + "' vs '" +
                         rx.alphabet().symbols() + "')");
}

// Unit-cost Levenshtein distance with two rolling rows.
template <class T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t diag = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({diag, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

enum : std::uint8_t { kDiag = 1, kUp = 2, kLeft = 4 };

// Full-table alignment. Each cell records which predecessor moves are optimal; the
// traceback from the terminal cell then prefers diagonal, then deletion (up), then
// insertion (left).
template <class T>
AlignmentResult align(std::span<const T> tx, std::span<const T> rx) {
    const std::size_t n = tx.size(), m = rx.size();
    const std::size_t width = m + 1;
    std::vector<std::uint8_t> moves((n + 1) * width, 0);
    std::vector<std::size_t> prev(width), cur(width);

    for (std::size_t j = 0; j <= m; ++j) {
        prev[j] = j;
        if (j > 0) moves[j] = kLeft;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        moves[i * width] = kUp;
        const T a = tx[i - 1];
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = prev[j - 1] + (a == rx[j - 1] ? 0 : 1);
            const std::size_t up = prev[j] + 1;
            const std::size_t left = cur[j - 1] + 1;
            const std::size_t best = std::min({diag, up, left});
            cur[j] = best;
            moves[i * width + j] = static_cast<std::uint8_t>((diag == best ? kDiag : 0) | (up == best ? kUp : 0) |
                                                             (left == best ? kLeft : 0));
        }
        std::swap(prev, cur);
    }

    AlignmentResult result;
    result.cost = prev[m];
    result.path.reserve(std::max(n, m) + result.cost);
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        const std::uint8_t mv = moves[i * width + j];
        if (mv & kDiag) {
            result.path.push_back(tx[i - 1] == rx[j - 1] ? SyncState::transmission : SyncState::substitution);
            --i;
            --j;
        } else if (mv & kUp) {
            result.path.push_back(SyncState::deletion);
            --i;
        } else {
            result.path.push_back(SyncState::insertion);
            --j;
        }
    }
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

}  // namespace detail

/// Minimal number of unit-cost insertions, deletions and substitutions turning tx into rx.
inline std::size_t edit_distance(const SymbolSequence& tx, const SymbolSequence& rx) {
    detail::require_same_alphabet(tx, rx);
    return detail::levenshtein(tx.data(), rx.data());
}

/// Minimum-edit state path explaining rx as a channel output of tx.
///
/// Matching aligned positions become t, mismatching aligned positions s, rx-only
/// positions i and tx-only positions d. Among equally minimal paths the one chosen
/// by an end-anchored traceback preferring diagonal > deletion > insertion is returned.
/// The path is the cheapest explanation, not necessarily what the channel did.
inline AlignmentResult infer_sync_sequence(const SymbolSequence& tx, const SymbolSequence& rx) {
    detail::require_same_alphabet(tx, rx);
    return detail::align(tx.data(), rx.data());
}

/// State fractions of a path; each probability is count / length.
inline ChannelProbEstimate estimate_probs(std::span<const SyncState> seq) {
    if (seq.empty()) throw InputError("cannot estimate probabilities from an empty sequence");
    const auto c = count_states(seq);
    const double n = static_cast<double>(seq.size());
    return {static_cast<double>(c.t) / n, static_cast<double>(c.s) / n, static_cast<double>(c.i) / n,
            static_cast<double>(c.d) / n, seq.size()};
}

using Frame = std::pair<SymbolSequence, SymbolSequence>;

struct FrameAlignment {
    /// Per-frame paths joined in frame order. Boundaries live only in `offsets`.
    SyncErrorSequence concatenated;
    std::vector<AlignmentResult> per_frame;
    /// Start of each frame's path inside `concatenated`.
    std::vector<std::size_t> offsets;

    /// Path of frame `k` as a view into `concatenated`.
    std::span<const SyncState> frame_path(std::size_t k) const {
        return std::span<const SyncState>(concatenated).subspan(offsets[k], per_frame[k].path.size());
    }
};

/// Aligns every frame (in parallel when `threads` > 1) and concatenates the paths in frame order.
inline FrameAlignment align_frames(std::span<const Frame> frames, unsigned threads = 0) {
    FrameAlignment out;
    out.per_frame.resize(frames.size());
    std::vector<std::exception_ptr> errors(frames.size());

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, frames.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < frames.size(); k = next++) {
            try {
                out.per_frame[k] = infer_sync_sequence(frames[k].first, frames[k].second);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (!errors[k]) continue;
        try {
            std::rethrow_exception(errors[k]);
        } catch (const InputError& e) {
            throw InputError("frame " + std::to_string(k) + ": " + e.what());
        }
    }

    std::size_t total = 0;
    for (const auto& r : out.per_frame) total += r.path.size();
    out.concatenated.reserve(total);
    for (const auto& r : out.per_frame) {
        out.offsets.push_back(out.concatenated.size());
        out.concatenated.insert(out.concatenated.end(), r.path.begin(), r.path.end());
    }
    return out;
}

}  // namespace memsync
