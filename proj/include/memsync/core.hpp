#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memsync/error.hpp"

namespace memsync {

// ---------------------------------------------------------------------------
// Alphabets and symbol streams
// ---------------------------------------------------------------------------

/// Ordered set of distinct single-character symbols, size >= 2.
class Alphabet {
public:
    explicit Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
        if (symbols_.size() < 2)
            throw InputError("alphabet needs at least 2 symbols, got " + std::to_string(symbols_.size()));
        if (symbols_.size() > 256)
            throw InputError("alphabet larger than 256 symbols is not supported");
        std::string sorted = symbols_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw InputError("alphabet '" + symbols_ + "' has duplicate symbols");
    }

    static Alphabet binary() { return Alphabet("01"); }

    std::size_t size() const noexcept { return symbols_.size(); }
    char symbol(std::size_t index) const { return symbols_.at(index); }
    const std::string& symbols() const noexcept { return symbols_; }

    std::optional<std::uint8_t> index_of(char c) const noexcept {
        auto pos = symbols_.find(c);
        if (pos == std::string::npos) return std::nullopt;
        return static_cast<std::uint8_t>(pos);
    }

    bool operator==(const Alphabet&) const = default;

private:
    std::string symbols_;
};

/// A finite stream of symbol indices over an alphabet (one tx or rx frame).
class SymbolSequence {
public:
    explicit SymbolSequence(Alphabet alphabet) : alphabet_(std::move(alphabet)) {}

    SymbolSequence(Alphabet alphabet, std::vector<std::uint8_t> data)
        : alphabet_(std::move(alphabet)), data_(std::move(data)) {
        for (auto v : data_)
            if (v >= alphabet_.size())
                throw InputError("symbol index " + std::to_string(v) + " outside alphabet of size " +
                                 std::to_string(alphabet_.size()));
    }

    static SymbolSequence from_string(const Alphabet& alphabet, std::string_view text) {
        std::vector<std::uint8_t> data;
        data.reserve(text.size());
        for (char c : text) {
            auto idx = alphabet.index_of(c);
            if (!idx)
                throw InputError(std::string("symbol '") + c + "' not in alphabet '" + alphabet.symbols() + "'");
            data.push_back(*idx);
        }
        return SymbolSequence(alphabet, std::move(data));
    }

    std::string to_string() const {
        std::string out;
        out.reserve(data_.size());
        for (auto v : data_) out.push_back(alphabet_.symbol(v));
        return out;
    }

    const Alphabet& alphabet() const noexcept { return alphabet_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::uint8_t operator[](std::size_t i) const { return data_[i]; }

    void push_back(std::uint8_t v) {
        if (v >= alphabet_.size()) throw InputError("symbol index outside alphabet");
        data_.push_back(v);
    }
    void reserve(std::size_t n) { data_.reserve(n); }

    bool operator==(const SymbolSequence&) const = default;

private:
    Alphabet alphabet_;
    std::vector<std::uint8_t> data_;
};

// ---------------------------------------------------------------------------
// Channel state paths
// ---------------------------------------------------------------------------

/// Channel state per step. Enumerator values follow the canonical IDS order (t, s, d, i),
/// so a state's value is also its row/column in four-state transition matrices.
enum class SyncState : std::uint8_t { transmission = 0, substitution = 1, deletion = 2, insertion = 3 };

inline constexpr std::size_t kSyncStateCount = 4;
inline constexpr std::array<SyncState, 4> kCanonicalStateOrder = {
    SyncState::transmission, SyncState::substitution, SyncState::deletion, SyncState::insertion};

using SyncErrorSequence = std::vector<SyncState>;
using BinaryErrorSequence = std::vector<std::uint8_t>;

constexpr char to_char(SyncState s) noexcept {
    switch (s) {
        case SyncState::transmission: return 't';
        case SyncState::substitution: return 's';
        case SyncState::deletion: return 'd';
        case SyncState::insertion: return 'i';
    }
    return '?';
}

inline SyncState sync_state_from_char(char c) {
    switch (c) {
        case 't': return SyncState::transmission;
        case 's': return SyncState::substitution;
        case 'd': return SyncState::deletion;
        case 'i': return SyncState::insertion;
        default: throw InputError(std::string("invalid sync state '") + c + "'");
    }
}

constexpr std::size_t index_of(SyncState s) noexcept { return static_cast<std::size_t>(s); }

/// Per-state tallies of a path.
struct StateCounts {
    std::size_t t = 0, s = 0, d = 0, i = 0;

    std::size_t total() const noexcept { return t + s + d + i; }
    std::size_t edits() const noexcept { return s + d + i; }
    /// Symbols consumed from the transmitted stream.
    std::size_t consumed() const noexcept { return t + s + d; }
    /// Symbols produced into the received stream.
    std::size_t produced() const noexcept { return t + s + i; }
};

inline StateCounts count_states(std::span<const SyncState> seq) noexcept {
    StateCounts c;
    for (auto s : seq) {
        switch (s) {
            case SyncState::transmission: ++c.t; break;
            case SyncState::substitution: ++c.s; break;
            case SyncState::deletion: ++c.d; break;
            case SyncState::insertion: ++c.i; break;
        }
    }
    return c;
}

/// Compact text form, e.g. "ttsd".
inline std::string format_sync(std::span<const SyncState> seq) {
    std::string out;
    out.reserve(seq.size());
    for (auto s : seq) out.push_back(to_char(s));
    return out;
}

/// Accepts both compact ("ttsd") and comma-separated ("t,t,s,d") forms; whitespace is ignored.
inline SyncErrorSequence parse_sync(std::string_view text) {
    SyncErrorSequence out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        out.push_back(sync_state_from_char(c));
    }
    return out;
}

inline std::string format_binary(std::span<const std::uint8_t> seq) {
    std::string out;
    out.reserve(seq.size());
    for (auto b : seq) out.push_back(b ? '1' : '0');
    return out;
}

inline BinaryErrorSequence parse_binary(std::string_view text) {
    BinaryErrorSequence out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        if (c != '0' && c != '1') throw InputError(std::string("invalid binary symbol '") + c + "'");
        out.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct DmParams {
    double p_i = 0.0;
    double p_d = 0.0;
    double p_s = 0.0;
    std::size_t max_insertions = 1;

    double p_t() const noexcept { return 1.0 - p_i - p_d; }

    void validate() const {
        auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in_unit(p_i) || !in_unit(p_d) || !in_unit(p_s))
            throw ValidationError("DM probabilities must lie in [0,1]");
        if (p_i + p_d > 1.0 + 1e-12) throw ValidationError("DM parameters need p_i + p_d <= 1");
        if (max_insertions == 0) throw ValidationError("max_insertions must be positive");
    }
};

struct IidParams {
    double p_e = 0.0;

    void validate() const {
        if (!(p_e >= 0.0 && p_e <= 1.0)) throw ValidationError("p_e must lie in [0,1]");
    }
};

struct Seed {
    std::uint64_t value = 0;
};

// ---------------------------------------------------------------------------
// Dense matrices and transition-matrix validation
// ---------------------------------------------------------------------------

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_) throw InputError("ragged matrix rows");
            std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(r * m.cols_));
        }
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<std::vector<double>> to_rows() const {
        std::vector<std::vector<double>> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Row-sum tolerance for matrices read from files (covers 4-decimal printed values).
inline constexpr double kIngestTolerance = 1e-3;
/// Row-sum tolerance for matrices the library produced itself.
inline constexpr double kInternalTolerance = 1e-9;

struct ValidatedMatrix {
    Matrix matrix;
    std::vector<bool> unobserved;  // all-zero rows
};

namespace detail {

// Rescales a row to sum to one and folds the residual rounding into the largest entry.
inline void renormalize_row(std::span<double> row) {
    double sum = 0.0;
    for (double v : row) sum += v;
    for (double& v : row) v /= sum;
    auto largest = std::max_element(row.begin(), row.end());
    double rest = 0.0;
    for (auto it = row.begin(); it != row.end(); ++it)
        if (it != largest) rest += *it;
    *largest = 1.0 - rest;
}

}  // namespace detail

/// Checks a square transition matrix, renormalizes rows that sum to 1 within `tol`,
/// and flags all-zero rows as unobserved instead of rejecting them.
inline ValidatedMatrix validate_transition_matrix(Matrix a, double tol = kIngestTolerance) {
    if (!a.square()) throw ValidationError("transition matrix must be square");
    ValidatedMatrix out{std::move(a), {}};
    out.unobserved.assign(out.matrix.rows(), false);
    for (std::size_t r = 0; r < out.matrix.rows(); ++r) {
        auto row = out.matrix.row(r);
        double sum = 0.0;
        bool all_zero = true;
        for (std::size_t c = 0; c < row.size(); ++c) {
            double v = row[c];
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("entry (" + std::to_string(r) + "," + std::to_string(c) +
                                      ") is negative or not finite");
            if (v > 1.0 + tol)
                throw ValidationError("entry (" + std::to_string(r) + "," + std::to_string(c) + ") exceeds 1");
            if (v != 0.0) all_zero = false;
            sum += v;
        }
        if (all_zero) {
            out.unobserved[r] = true;
            continue;
        }
        if (std::abs(sum - 1.0) > tol)
            throw ValidationError("row " + std::to_string(r) + " sums to " + std::to_string(sum) +
                                  ", outside tolerance");
        detail::renormalize_row(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Markov models
// ---------------------------------------------------------------------------

enum class ModelKind { general, fritchman, ids };

/// N-state Markov model with M emission symbols.
///
/// `emission` is indexed (emission symbol x state), i.e. M x N, with each column a
/// distribution over emission symbols. For Fritchman models M = 2 (symbol 0 = no error,
/// symbol 1 = error); for four-state IDS models the emission is the 4x4 identity in
/// (t, s, d, i) order.
struct MarkovModel {
    ModelKind kind = ModelKind::general;
    Matrix transition;
    Matrix emission;
    std::vector<std::string> state_labels;
    std::vector<std::string> emission_labels;
    std::vector<bool> unobserved;
    std::optional<std::size_t> good_count;  // Fritchman: states [0, K) are good

    std::size_t n_states() const noexcept { return transition.rows(); }
    std::size_t n_symbols() const noexcept { return emission.rows(); }

    bool is_good(std::size_t state) const { return good_count && state < *good_count; }
};

namespace detail {

inline void check_emission(const MarkovModel& m) {
    const auto n = m.n_states();
    if (m.emission.cols() != n)
        throw ValidationError("emission matrix must have one column per state");
    for (std::size_t s = 0; s < n; ++s) {
        double sum = 0.0;
        for (std::size_t k = 0; k < m.emission.rows(); ++k) {
            double v = m.emission(k, s);
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("emission entry outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("emission column " + std::to_string(s) + " does not sum to 1");
    }
}

}  // namespace detail

/// Emission matrix of a Fritchman model: good states emit 0, bad states emit 1.
inline Matrix fritchman_emission(std::size_t n_states, std::size_t good_count) {
    Matrix b(2, n_states);
    for (std::size_t s = 0; s < n_states; ++s) b(s < good_count ? 0 : 1, s) = 1.0;
    return b;
}

/// Validates `transition` (tolerance `tol`) and assembles a Fritchman model.
inline MarkovModel make_fritchman_model(Matrix transition, std::size_t good_count,
                                        double tol = kInternalTolerance) {
    auto v = validate_transition_matrix(std::move(transition), tol);
    const auto n = v.matrix.rows();
    if (good_count < 1 || good_count >= n)
        throw InputError("Fritchman partition needs 1 <= K < N (K=" + std::to_string(good_count) +
                         ", N=" + std::to_string(n) + ")");
    MarkovModel m;
    m.kind = ModelKind::fritchman;
    m.transition = std::move(v.matrix);
    m.unobserved = std::move(v.unobserved);
    m.emission = fritchman_emission(n, good_count);
    m.good_count = good_count;
    for (std::size_t s = 0; s < n; ++s)
        m.state_labels.push_back((s < good_count ? "G" : "B") + std::to_string(s + 1));
    m.emission_labels = {"0", "1"};
    return m;
}

inline std::vector<std::string> ids_labels() { return {"t", "s", "d", "i"}; }

/// Four-state IDS chain in canonical (t, s, d, i) order with identity emission.
inline MarkovModel make_ids_model(Matrix transition, double tol = kInternalTolerance) {
    if (transition.rows() != kSyncStateCount || transition.cols() != kSyncStateCount)
        throw ValidationError("IDS model needs a 4x4 transition matrix");
    auto v = validate_transition_matrix(std::move(transition), tol);
    MarkovModel m;
    m.kind = ModelKind::ids;
    m.transition = std::move(v.matrix);
    m.unobserved = std::move(v.unobserved);
    m.emission = Matrix::identity(kSyncStateCount);
    m.state_labels = ids_labels();
    m.emission_labels = ids_labels();
    return m;
}

/// General labelled chain. `emission` must be M x N with stochastic columns.
inline MarkovModel make_general_model(Matrix transition, Matrix emission, std::vector<std::string> state_labels,
                                      std::vector<std::string> emission_labels, double tol = kInternalTolerance) {
    auto v = validate_transition_matrix(std::move(transition), tol);
    MarkovModel m;
    m.transition = std::move(v.matrix);
    m.unobserved = std::move(v.unobserved);
    m.emission = std::move(emission);
    m.state_labels = std::move(state_labels);
    m.emission_labels = std::move(emission_labels);
    if (m.state_labels.size() != m.n_states()) throw ValidationError("one label per state required");
    if (m.emission_labels.size() != m.emission.rows()) throw ValidationError("one label per emission symbol required");
    detail::check_emission(m);
    return m;
}

/// Structural checks for any model, including the Fritchman emission structure.
inline void validate_model(const MarkovModel& m, double tol = kInternalTolerance) {
    auto v = validate_transition_matrix(m.transition, tol);
    if (v.unobserved != m.unobserved) throw ValidationError("unobserved flags disagree with transition rows");
    detail::check_emission(m);
    if (m.kind == ModelKind::fritchman) {
        if (!m.good_count) throw ValidationError("Fritchman model without a good/bad partition");
        if (!(m.emission == fritchman_emission(m.n_states(), *m.good_count)))
            throw ValidationError("Fritchman emission must be 0 for good states and 1 for bad states");
    }
    if (m.kind == ModelKind::ids && !(m.emission == Matrix::identity(kSyncStateCount)))
        throw ValidationError("IDS model emission must be the identity");
}

}  // namespace memsync
