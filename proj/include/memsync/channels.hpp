#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memsync/core.hpp"
#include "memsync/rng.hpp"

namespace memsync {

// ---------------------------------------------------------------------------
// Davey-MacKay insertion/deletion/substitution channel
// ---------------------------------------------------------------------------

struct DmOutput {
    SymbolSequence rx;
    SyncErrorSequence truth;  // exact state path taken by the channel
};

namespace detail {

inline std::uint8_t substitute_symbol(RngStream& rng, std::uint8_t original, std::size_t q) {
    auto r = static_cast<std::uint8_t>(rng.below(q - 1));
    return r >= original ? static_cast<std::uint8_t>(r + 1) : r;
}

}  // namespace detail

/// Pushes every symbol of `tx` through a memoryless DM channel.
///
/// For each queued symbol the channel inserts a uniformly random symbol with probability
/// p_i, at most `max_insertions` times; it then deletes the symbol with probability
/// p_d / (p_d + p_t) or transmits it, flipping a transmitted symbol to one of the other
/// q - 1 symbols with probability p_s. Once the insertion limit is hit the insertion
/// mass is shared between delete and transmit in proportion.
inline DmOutput simulate_dm(const DmParams& params, const SymbolSequence& tx, Seed seed, std::uint64_t stream = 0) {
    params.validate();
    const auto q = tx.alphabet().size();
    const double p_t = std::max(0.0, params.p_t());
    // p_i == 1 leaves nothing to redistribute; the forced step then transmits.
    const double p_delete_given_stop = (params.p_d + p_t) > 0.0 ? params.p_d / (params.p_d + p_t) : 0.0;

    auto rng = rng_stream(seed, stream);
    DmOutput out{SymbolSequence(tx.alphabet()), {}};
    out.rx.reserve(tx.size() + tx.size() / 8);
    out.truth.reserve(tx.size() + tx.size() / 8);

    for (std::uint8_t symbol : tx.data()) {
        std::size_t inserted = 0;
        while (inserted < params.max_insertions && rng.uniform() < params.p_i) {
            out.rx.push_back(static_cast<std::uint8_t>(rng.below(q)));
            out.truth.push_back(SyncState::insertion);
            ++inserted;
        }
        if (rng.uniform() < p_delete_given_stop) {
            out.truth.push_back(SyncState::deletion);
        } else if (rng.uniform() < params.p_s) {
            out.rx.push_back(detail::substitute_symbol(rng, symbol, q));
            out.truth.push_back(SyncState::substitution);
        } else {
            out.rx.push_back(symbol);
            out.truth.push_back(SyncState::transmission);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// IID binary error source
// ---------------------------------------------------------------------------

inline BinaryErrorSequence simulate_iid(const IidParams& params, std::size_t n, Seed seed, std::uint64_t stream = 0) {
    params.validate();
    auto rng = rng_stream(seed, stream);
    BinaryErrorSequence out(n);
    for (auto& b : out) b = rng.uniform() < params.p_e ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Labelled Markov chains (Fritchman, four-state IDS, general)
// ---------------------------------------------------------------------------

/// Starting state for simulate_markov: a fixed state or a draw from the stationary law.
struct InitialState {
    bool stationary = false;
    std::size_t state = 0;

    static InitialState at(std::size_t s) { return {false, s}; }
    static InitialState stationary_draw() { return {true, 0}; }
};

/// Stationary distribution by power iteration on the lazy chain (A + I) / 2, which has the
/// same fixed point as A and avoids oscillation on periodic chains. Starts from the
/// uniform law over observed states.
inline std::vector<double> stationary_distribution(const MarkovModel& model, std::size_t max_iters = 200000,
                                                   double tol = 1e-15) {
    const auto n = model.n_states();
    std::vector<double> pi(n, 0.0), next(n);
    std::size_t observed = 0;
    for (std::size_t s = 0; s < n; ++s) observed += model.unobserved[s] ? 0 : 1;
    if (observed == 0) throw SimulationError("every state is unobserved");
    for (std::size_t s = 0; s < n; ++s) pi[s] = model.unobserved[s] ? 0.0 : 1.0 / static_cast<double>(observed);

    for (std::size_t it = 0; it < max_iters; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            next[r] += 0.5 * pi[r];
            for (std::size_t c = 0; c < n; ++c) next[c] += 0.5 * pi[r] * model.transition(r, c);
        }
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) delta = std::max(delta, std::abs(next[s] - pi[s]));
        pi.swap(next);
        if (delta < tol) break;
    }
    for (std::size_t s = 0; s < n; ++s)
        if (model.unobserved[s] && pi[s] > 1e-12)
            throw SimulationError("stationary mass reaches unobserved state '" + model.state_labels[s] + "'");
    double total = 0.0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;
    return pi;
}

struct MarkovSample {
    std::vector<std::size_t> states;
    std::vector<std::uint8_t> emissions;  // emission-symbol indices
};

/// Draws a state path of length n from the transition matrix and an emission per step.
inline MarkovSample simulate_markov(const MarkovModel& model, std::size_t n, Seed seed,
                                    InitialState initial = InitialState::at(0), std::uint64_t stream = 0) {
    const auto ns = model.n_states();
    if (ns == 0) throw SimulationError("model has no states");
    if (model.unobserved.size() != ns) throw ValidationError("unobserved flags missing");
    auto rng = rng_stream(seed, stream);

    auto enter = [&](std::size_t s) {
        if (model.unobserved[s])
            throw SimulationError("chain entered unobserved state '" + model.state_labels.at(s) + "'");
        return s;
    };

    std::size_t state;
    if (initial.stationary) {
        auto pi = stationary_distribution(model);
        state = rng.categorical(pi);
    } else {
        if (initial.state >= ns) throw InputError("initial state out of range");
        state = initial.state;
    }

    // Emission columns that put all mass on one symbol skip the random draw.
    std::vector<int> fixed_emission(ns, -1);
    std::vector<std::vector<double>> emission_cols(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        emission_cols[s].resize(model.n_symbols());
        for (std::size_t k = 0; k < model.n_symbols(); ++k) {
            emission_cols[s][k] = model.emission(k, s);
            if (model.emission(k, s) == 1.0) fixed_emission[s] = static_cast<int>(k);
        }
    }

    MarkovSample out;
    out.states.reserve(n);
    out.emissions.reserve(n);
    if (n == 0) return out;
    enter(state);
    for (std::size_t step = 0; step < n; ++step) {
        if (step > 0) state = enter(rng.categorical(model.transition.row(state)));
        out.states.push_back(state);
        out.emissions.push_back(static_cast<std::uint8_t>(
            fixed_emission[state] >= 0 ? static_cast<std::size_t>(fixed_emission[state])
                                       : rng.categorical(emission_cols[state])));
    }
    return out;
}

/// Binary error sequence from a Fritchman model (starts in the first good state by default).
inline BinaryErrorSequence simulate_fritchman(const MarkovModel& model, std::size_t n, Seed seed,
                                              InitialState initial = InitialState::at(0), std::uint64_t stream = 0) {
    if (model.kind != ModelKind::fritchman) throw ModelError("model is not a Fritchman model");
    return simulate_markov(model, n, seed, initial, stream).emissions;
}

/// {t,s,d,i} path from a four-state IDS model (starts in t by default).
inline SyncErrorSequence simulate_ids(const MarkovModel& model, std::size_t n, Seed seed,
                                      InitialState initial = InitialState::at(0), std::uint64_t stream = 0) {
    if (model.kind != ModelKind::ids) throw ModelError("model is not a four-state IDS model");
    auto sample = simulate_markov(model, n, seed, initial, stream);
    SyncErrorSequence out(sample.emissions.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = kCanonicalStateOrder[sample.emissions[k]];
    return out;
}

// ---------------------------------------------------------------------------
// Realizing a state path
// ---------------------------------------------------------------------------

/// Runs `tx` through the given state path. `choose(state, original, out_index)` supplies the
/// symbol emitted for s and i steps; `original` is the tx symbol for s (0 for i) and
/// `out_index` the position being written in rx.
template <class Chooser>
SymbolSequence apply_sync_seq(const SymbolSequence& tx, std::span<const SyncState> seq, Chooser&& choose) {
    const auto c = count_states(seq);
    if (c.consumed() != tx.size())
        throw InputError("path consumes " + std::to_string(c.consumed()) + " symbols but tx has " +
                         std::to_string(tx.size()));
    SymbolSequence rx(tx.alphabet());
    rx.reserve(c.produced());
    std::size_t pos = 0;
    for (auto s : seq) {
        switch (s) {
            case SyncState::transmission: rx.push_back(tx[pos++]); break;
            case SyncState::substitution: rx.push_back(choose(s, tx[pos++], rx.size())); break;
            case SyncState::deletion: ++pos; break;
            case SyncState::insertion: rx.push_back(choose(s, std::uint8_t{0}, rx.size())); break;
        }
    }
    return rx;
}

/// Random realization: substitutions uniform over the other symbols, insertions uniform.
inline SymbolSequence apply_sync_seq(const SymbolSequence& tx, std::span<const SyncState> seq, Seed seed,
                                     std::uint64_t stream = 0) {
    auto rng = rng_stream(seed, stream);
    const auto q = tx.alphabet().size();
    return apply_sync_seq(tx, seq, [&](SyncState s, std::uint8_t original, std::size_t) {
        return s == SyncState::substitution ? detail::substitute_symbol(rng, original, q)
                                            : static_cast<std::uint8_t>(rng.below(q));
    });
}

/// Replays an alignment path against its own rx: s and i steps take the next rx symbol.
/// Reproduces rx exactly when `path` came from aligning tx with rx.
inline SymbolSequence replay_sync_seq(const SymbolSequence& tx, std::span<const SyncState> path,
                                      const SymbolSequence& rx) {
    if (count_states(path).produced() != rx.size()) throw InputError("path does not produce rx.size() symbols");
    return apply_sync_seq(tx, path, [&](SyncState, std::uint8_t, std::size_t out_index) { return rx[out_index]; });
}

}  // namespace memsync
