#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "memsync/core.hpp"
#include "memsync/rng.hpp"

namespace memsync {

/// Emission-symbol indices observed from a model (0/1 for Fritchman, t/s/d/i for IDS).
using ObservationSequence = std::vector<std::uint8_t>;

struct FitReport {
    MarkovModel model;
    std::vector<double> initial;  // initial-state distribution at the returned parameters
    std::vector<double> log_likelihood_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

struct BaumWelchOptions {
    bool estimate_emission = false;
    std::size_t max_iters = 500;
    double tol = 1e-6;
    /// Starting initial-state law; empty means uniform over observed states.
    std::vector<double> initial;
};

namespace detail {

struct Accumulators {
    Matrix trans_num;
    std::vector<double> trans_den;
    Matrix emit_num;
    std::vector<double> emit_den;
    std::vector<double> initial;
    double log_likelihood = 0.0;

    Accumulators(std::size_t n, std::size_t m)
        : trans_num(n, n), trans_den(n, 0.0), emit_num(m, n), emit_den(n, 0.0), initial(n, 0.0) {}
};

// Scaled forward-backward over one sequence, adding expected counts into `acc`.
inline void forward_backward(const MarkovModel& model, std::span<const double> pi, std::span<const std::uint8_t> obs,
                             std::size_t seq_index, Accumulators& acc) {
    const std::size_t n = model.n_states();
    const std::size_t len = obs.size();
    if (len == 0) return;
    const Matrix& a = model.transition;
    const Matrix& b = model.emission;

    std::vector<double> alpha(len * n), beta(len * n), scale(len);
    auto fail = [&](std::size_t t) {
        throw FitError("observation sequence " + std::to_string(seq_index) + " has zero likelihood at position " +
                       std::to_string(t) + " under the current model");
    };

    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        alpha[j] = pi[j] * b(obs[0], j);
        c += alpha[j];
    }
    if (!(c > 0.0)) fail(0);
    scale[0] = c;
    for (std::size_t j = 0; j < n; ++j) alpha[j] /= c;

    for (std::size_t t = 1; t < len; ++t) {
        const double* prev = &alpha[(t - 1) * n];
        double* cur = &alpha[t * n];
        c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += prev[i] * a(i, j);
            cur[j] = s * b(obs[t], j);
            c += cur[j];
        }
        if (!(c > 0.0)) fail(t);
        scale[t] = c;
        for (std::size_t j = 0; j < n; ++j) cur[j] /= c;
    }

    for (std::size_t j = 0; j < n; ++j) beta[(len - 1) * n + j] = 1.0;
    for (std::size_t t = len - 1; t-- > 0;) {
        const double* next = &beta[(t + 1) * n];
        double* cur = &beta[t * n];
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a(i, j) * b(obs[t + 1], j) * next[j];
            cur[i] = s / scale[t + 1];
        }
    }

    for (std::size_t t = 0; t < len; ++t) {
        acc.log_likelihood += std::log(scale[t]);
        const double* al = &alpha[t * n];
        const double* be = &beta[t * n];
        for (std::size_t j = 0; j < n; ++j) {
            const double gamma = al[j] * be[j];
            if (t == 0) acc.initial[j] += gamma;
            acc.emit_num(obs[t], j) += gamma;
            acc.emit_den[j] += gamma;
            if (t + 1 < len) acc.trans_den[j] += gamma;
        }
        if (t + 1 < len) {
            const double* be_next = &beta[(t + 1) * n];
            const double inv = 1.0 / scale[t + 1];
            for (std::size_t i = 0; i < n; ++i) {
                if (al[i] == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    const double aij = a(i, j);
                    if (aij == 0.0) continue;
                    acc.trans_num(i, j) += al[i] * aij * b(obs[t + 1], j) * be_next[j] * inv;
                }
            }
        }
    }
}

inline std::vector<double> default_initial(const MarkovModel& m) {
    std::vector<double> pi(m.n_states(), 0.0);
    std::size_t observed = 0;
    for (std::size_t s = 0; s < m.n_states(); ++s) observed += m.unobserved[s] ? 0 : 1;
    for (std::size_t s = 0; s < m.n_states(); ++s)
        pi[s] = m.unobserved[s] || observed == 0 ? 0.0 : 1.0 / static_cast<double>(observed);
    return pi;
}

}  // namespace detail

/// Baum-Welch re-estimation over one or more observation sequences (e.g. frames).
///
/// Expected counts are pooled across sequences before each update. Zero transitions in
/// `init` stay zero. A state with no expected outgoing transitions gets an all-zero row
/// flagged unobserved. With `estimate_emission` off the emission matrix is never touched.
///
/// The trace holds the log-likelihood of every parameter set evaluated; iteration stops
/// once the improvement falls below `tol` (the evaluated model is returned) or after
/// `max_iters` evaluations (the last re-estimate is returned).
inline FitReport baum_welch(std::span<const ObservationSequence> sequences, MarkovModel init,
                            const BaumWelchOptions& options = {}) {
    validate_model(init, kIngestTolerance);
    const std::size_t n = init.n_states();
    const std::size_t m = init.n_symbols();
    std::size_t total = 0;
    for (std::size_t k = 0; k < sequences.size(); ++k) {
        for (auto o : sequences[k])
            if (o >= m) throw InputError("observation symbol " + std::to_string(o) + " outside emission alphabet");
        total += sequences[k].size();
    }
    if (total == 0) throw FitError("no observations to fit");

    FitReport report;
    report.model = std::move(init);
    std::vector<double> pi = options.initial.empty() ? detail::default_initial(report.model) : options.initial;
    if (pi.size() != n) throw InputError("initial distribution has wrong size");

    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        detail::Accumulators acc(n, m);
        for (std::size_t k = 0; k < sequences.size(); ++k)
            detail::forward_backward(report.model, pi, sequences[k], k, acc);

        report.log_likelihood_trace.push_back(acc.log_likelihood);
        report.iterations = iter + 1;
        if (iter > 0 && acc.log_likelihood - previous < options.tol) {
            report.converged = true;
            break;
        }
        previous = acc.log_likelihood;

        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            if (acc.trans_den[i] <= 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) a(i, j) = acc.trans_num(i, j) / acc.trans_den[i];
        }
        auto validated = validate_transition_matrix(std::move(a), kIngestTolerance);
        report.model.transition = std::move(validated.matrix);
        report.model.unobserved = std::move(validated.unobserved);

        if (options.estimate_emission) {
            for (std::size_t j = 0; j < n; ++j) {
                if (acc.emit_den[j] <= 0.0) continue;
                for (std::size_t k = 0; k < m; ++k) report.model.emission(k, j) = acc.emit_num(k, j) / acc.emit_den[j];
            }
        }

        double pi_total = 0.0;
        for (double v : acc.initial) pi_total += v;
        for (std::size_t j = 0; j < n; ++j) pi[j] = acc.initial[j] / pi_total;
    }
    report.initial = std::move(pi);
    return report;
}

inline FitReport baum_welch(const ObservationSequence& obs, MarkovModel init, const BaumWelchOptions& options = {}) {
    return baum_welch(std::span<const ObservationSequence>(&obs, 1), std::move(init), options);
}

// ---------------------------------------------------------------------------
// Visible four-state chain
// ---------------------------------------------------------------------------

/// 4x4 tallies of consecutive (from, to) state pairs, counted within each sequence only.
inline Matrix transition_counts(std::span<const SyncErrorSequence> sequences) {
    Matrix counts(kSyncStateCount, kSyncStateCount);
    for (const auto& seq : sequences)
        for (std::size_t k = 1; k < seq.size(); ++k) counts(index_of(seq[k - 1]), index_of(seq[k])) += 1.0;
    return counts;
}

/// Maximum-likelihood transition matrix of the visible IDS chain: a_ij = n_ij / n_i.
/// States never left get an all-zero row flagged unobserved.
inline MarkovModel count_mle(std::span<const SyncErrorSequence> sequences) {
    Matrix counts = transition_counts(sequences);
    Matrix a(kSyncStateCount, kSyncStateCount);
    double transitions = 0.0;
    for (std::size_t i = 0; i < kSyncStateCount; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < kSyncStateCount; ++j) row += counts(i, j);
        transitions += row;
        if (row == 0.0) continue;
        for (std::size_t j = 0; j < kSyncStateCount; ++j) a(i, j) = counts(i, j) / row;
    }
    if (transitions == 0.0) throw FitError("sequence has no transitions to count");
    return make_ids_model(std::move(a));
}

inline MarkovModel count_mle(const SyncErrorSequence& seq) {
    if (seq.empty()) throw InputError("cannot fit an empty sequence");
    return count_mle(std::span<const SyncErrorSequence>(&seq, 1));
}

/// Four-state IDS model with uniform transitions; a neutral Baum-Welch starting point.
inline MarkovModel uniform_ids_model() {
    return make_ids_model(Matrix(kSyncStateCount, kSyncStateCount, 1.0 / kSyncStateCount));
}

inline ObservationSequence to_observations(std::span<const SyncState> seq) {
    ObservationSequence out(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) out[k] = static_cast<std::uint8_t>(index_of(seq[k]));
    return out;
}

// ---------------------------------------------------------------------------
// Fritchman initialization
// ---------------------------------------------------------------------------

/// Random Fritchman starting model with states [0, K) good and [K, N) bad.
///
/// Good states only move to themselves or to bad states (no good-to-good cross
/// transitions); bad states may move anywhere. Good self-loops start in [0.5, 0.99) so
/// the initial model already produces long error-free runs.
inline MarkovModel fritchman_init(std::size_t n_states, std::size_t good_count, Seed seed, std::uint64_t stream = 0) {
    if (n_states < 2 || good_count < 1 || good_count >= n_states)
        throw InputError("Fritchman partition needs 1 <= K < N (K=" + std::to_string(good_count) +
                         ", N=" + std::to_string(n_states) + ")");
    auto rng = rng_stream(seed, stream);
    Matrix a(n_states, n_states);
    for (std::size_t g = 0; g < good_count; ++g) {
        const double stay = 0.5 + 0.49 * rng.uniform();
        a(g, g) = stay;
        std::vector<double> w(n_states - good_count);
        double wsum = 0.0;
        for (auto& v : w) wsum += (v = 0.1 + rng.uniform());
        for (std::size_t b = good_count; b < n_states; ++b) a(g, b) = (1.0 - stay) * w[b - good_count] / wsum;
    }
    for (std::size_t b = good_count; b < n_states; ++b) {
        std::vector<double> w(n_states);
        double wsum = 0.0;
        for (auto& v : w) wsum += (v = 0.1 + rng.uniform());
        for (std::size_t j = 0; j < n_states; ++j) a(b, j) = w[j] / wsum;
    }
    return make_fritchman_model(std::move(a), good_count);
}

}  // namespace memsync
