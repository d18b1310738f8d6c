#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "memsync/core.hpp"

namespace memsync {

enum class RunKind {
    error_free,  // runs of 0s following a 1: Pr(0^m | 1)
    error,       // runs of 1s following a 0: Pr(1^m | 0)
};

/// Multiset of run lengths with "m or more" survival.
///
/// A run that is cut off by the end of its sequence is still counted but also recorded in
/// `censored`, so consumers can drop it. Leading runs (no preceding opposite symbol) are
/// never counted.
class RunDistribution {
public:
    RunDistribution() = default;

    void add(std::size_t length, bool is_censored = false, std::size_t times = 1) {
        if (length == 0 || times == 0) return;
        counts_[length] += times;
        total_ += times;
        if (is_censored) censored_[length] += times;
    }

    /// Exact-length counts, keyed by m.
    const std::map<std::size_t, std::size_t>& counts() const noexcept { return counts_; }
    const std::map<std::size_t, std::size_t>& censored() const noexcept { return censored_; }

    std::size_t total_runs() const noexcept { return total_; }
    bool includes_censored_tail() const noexcept { return !censored_.empty(); }
    std::size_t max_length() const noexcept { return counts_.empty() ? 0 : counts_.rbegin()->first; }

    std::size_t count_exact(std::size_t m) const {
        auto it = counts_.find(m);
        return it == counts_.end() ? 0 : it->second;
    }

    std::size_t count_at_least(std::size_t m) const {
        std::size_t c = 0;
        for (auto it = counts_.lower_bound(m); it != counts_.end(); ++it) c += it->second;
        return c;
    }

    /// Pr(run >= m); zero when there are no runs.
    double survival(std::size_t m) const {
        if (total_ == 0) return 0.0;
        return static_cast<double>(count_at_least(m)) / static_cast<double>(total_);
    }

    /// survival(1..m_max) in one pass.
    std::vector<double> survival_curve(std::size_t m_max) const {
        std::vector<double> out(m_max, 0.0);
        if (total_ == 0) return out;
        std::size_t remaining = total_;
        auto it = counts_.begin();
        for (std::size_t m = 1; m <= m_max; ++m) {
            while (it != counts_.end() && it->first < m) remaining -= (it++)->second;
            out[m - 1] = static_cast<double>(remaining) / static_cast<double>(total_);
        }
        return out;
    }

    /// Copy with censored runs removed.
    RunDistribution without_censored() const {
        RunDistribution out;
        for (auto [m, c] : counts_) {
            auto it = censored_.find(m);
            std::size_t keep = c - (it == censored_.end() ? 0 : it->second);
            out.add(m, false, keep);
        }
        return out;
    }

    void merge(const RunDistribution& other) {
        for (auto [m, c] : other.counts_) {
            auto it = other.censored_.find(m);
            std::size_t cens = it == other.censored_.end() ? 0 : it->second;
            add(m, false, c - cens);
            add(m, true, cens);
        }
    }

    bool operator==(const RunDistribution&) const = default;

private:
    std::map<std::size_t, std::size_t> counts_;
    std::map<std::size_t, std::size_t> censored_;
    std::size_t total_ = 0;
};

namespace detail {

// Maximal runs of `symbol` that start right after the opposite symbol.
inline void collect_runs(std::span<const std::uint8_t> seq, std::uint8_t symbol, RunDistribution& out) {
    std::size_t k = 0;
    const std::size_t n = seq.size();
    // Skip the leading run of `symbol`: nothing precedes it.
    while (k < n && seq[k] == symbol) ++k;
    while (k < n) {
        while (k < n && seq[k] != symbol) ++k;
        const std::size_t start = k;
        while (k < n && seq[k] == symbol) ++k;
        if (k > start) out.add(k - start, k == n);
    }
}

}  // namespace detail

/// Runs of 0s following a 1. The trailing run is kept and marked censored.
inline RunDistribution error_free_runs(std::span<const std::uint8_t> seq) {
    RunDistribution out;
    detail::collect_runs(seq, 0, out);
    return out;
}

/// Runs of 1s following a 0. The trailing run is kept and marked censored.
inline RunDistribution error_runs(std::span<const std::uint8_t> seq) {
    RunDistribution out;
    detail::collect_runs(seq, 1, out);
    return out;
}

inline RunDistribution runs_of(RunKind kind, std::span<const std::uint8_t> seq) {
    return kind == RunKind::error_free ? error_free_runs(seq) : error_runs(seq);
}

/// Runs over independent segments (frames). A segment boundary ends any run in progress
/// (as censored) and the next segment's leading run is excluded.
inline RunDistribution runs_of(RunKind kind, std::span<const BinaryErrorSequence> segments) {
    RunDistribution out;
    for (const auto& seg : segments) out.merge(runs_of(kind, seg));
    return out;
}

// ---------------------------------------------------------------------------
// Single-error-state Fritchman closed forms
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t single_error_state(const MarkovModel& model) {
    if (model.kind != ModelKind::fritchman || !model.good_count)
        throw ModelError("closed forms need a Fritchman model");
    if (*model.good_count + 1 != model.n_states())
        throw ModelError("closed forms are implemented for a single error state only (K = N - 1)");
    return model.n_states() - 1;
}

}  // namespace detail

/// Pr(0^m | 1) for m = 1..m_max: the probability that an error is followed by at least m
/// error-free symbols, sum_k a_Nk * a_kk^(m-1) over the good states k.
inline std::vector<double> fritchman_efr_closed_form(const MarkovModel& model, std::size_t m_max) {
    const std::size_t bad = detail::single_error_state(model);
    std::vector<double> out(m_max, 0.0);
    for (std::size_t k = 0; k < bad; ++k) {
        const double enter = model.transition(bad, k);
        const double stay = model.transition(k, k);
        double term = enter;
        for (std::size_t m = 1; m <= m_max; ++m) {
            out[m - 1] += term;
            term *= stay;
        }
    }
    return out;
}

/// Pr(1^m | 0) for m = 1..m_max: the sojourn law of the single bad state, a_NN^(m-1).
inline std::vector<double> fritchman_er_closed_form(const MarkovModel& model, std::size_t m_max) {
    const std::size_t bad = detail::single_error_state(model);
    const double stay = model.transition(bad, bad);
    std::vector<double> out(m_max, 0.0);
    double term = 1.0;
    for (std::size_t m = 1; m <= m_max; ++m) {
        out[m - 1] = term;
        term *= stay;
    }
    return out;
}

/// Error-free run survival conditioned on a run having started (an error followed by at
/// least one 0), i.e. Pr(0^m | 1) / Pr(0^1 | 1). This is the quantity the empirical
/// RunDistribution::survival estimates, since every collected run has length >= 1.
inline std::vector<double> fritchman_efr_run_survival(const MarkovModel& model, std::size_t m_max) {
    auto out = fritchman_efr_closed_form(model, m_max);
    if (m_max == 0) return out;
    const double first = out[0];
    if (first <= 0.0) throw ModelError("the error state never leaves itself; no error-free runs exist");
    for (auto& v : out) v /= first;
    return out;
}

}  // namespace memsync
