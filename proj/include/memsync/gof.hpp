#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsync/core.hpp"
#include "memsync/runstats.hpp"

namespace memsync {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
///
/// Series for P when x < a + 1, modified Lentz continued fraction for Q otherwise, so
/// deep upper tails keep full relative precision.
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0)) throw InputError("incomplete gamma needs a > 0");
    if (x < 0.0) throw InputError("incomplete gamma needs x >= 0");
    if (x == 0.0) return 1.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr double tiny = std::numeric_limits<double>::min() / eps;
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);

    if (x < a + 1.0) {
        double ap = a;
        double term = 1.0 / a;
        double sum = term;
        for (int n = 0; n < 100000; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * eps) break;
        }
        return std::max(0.0, 1.0 - sum * std::exp(log_prefactor));
    }

    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return std::exp(log_prefactor) * h;
}

/// Upper-tail probability of a chi-squared variable with `df` degrees of freedom.
/// With df = 0 (a single category) the test carries no information and p = 1.
inline double chi_squared_p_value(double chi2, std::size_t df) {
    if (chi2 < 0.0) throw InputError("chi-squared statistic must be non-negative");
    if (df == 0) return 1.0;
    return regularized_gamma_q(0.5 * static_cast<double>(df), 0.5 * chi2);
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

struct RunBin {
    std::size_t lo = 1;
    std::optional<std::size_t> hi;  // empty: open-ended tail
    double observed = 0.0;
    double expected = 0.0;
};

struct BinnedRuns {
    std::size_t bin_width = 1;
    std::vector<RunBin> bins;
    bool cutoff_applied = false;

    std::size_t k() const noexcept { return bins.size(); }
};

struct BinOptions {
    /// Scale expected counts so their total equals the observed total.
    bool rescale_expected = true;
    bool include_censored = true;
};

inline constexpr double kLargeCountsMinimum = 5.0;

/// Groups exact-length counts into [1..w], [w+1..2w], ... and merges the tail.
///
/// Scanning the expected counts in order, the first bin whose expected count is below 5
/// and every later bin collapse into one open-ended bin. Observed counts are binned the
/// same way, so the observed total is preserved.
inline BinnedRuns bin_runs(const RunDistribution& observed_in, const RunDistribution& expected_in, std::size_t width,
                           const BinOptions& options = {}) {
    if (width == 0) throw InputError("bin width must be positive");
    const RunDistribution observed = options.include_censored ? observed_in : observed_in.without_censored();
    const RunDistribution expected = options.include_censored ? expected_in : expected_in.without_censored();
    if (expected.total_runs() == 0) throw GofError("expected distribution has no runs");

    const double scale = options.rescale_expected ? static_cast<double>(observed.total_runs()) /
                                                        static_cast<double>(expected.total_runs())
                                                  : 1.0;
    const std::size_t max_m = std::max(observed.max_length(), expected.max_length());
    const std::size_t n_raw = (max_m + width - 1) / width;

    std::vector<double> o(n_raw, 0.0), e(n_raw, 0.0);
    for (auto [m, c] : observed.counts()) o[(m - 1) / width] += static_cast<double>(c);
    for (auto [m, c] : expected.counts()) e[(m - 1) / width] += scale * static_cast<double>(c);

    BinnedRuns out;
    out.bin_width = width;
    std::size_t cut = n_raw;
    for (std::size_t b = 0; b < n_raw; ++b) {
        if (e[b] < kLargeCountsMinimum) {
            cut = b;
            break;
        }
    }
    const std::size_t kept = std::min(cut, n_raw);
    for (std::size_t b = 0; b < kept; ++b) out.bins.push_back({b * width + 1, (b + 1) * width, o[b], e[b]});
    if (cut < n_raw) {
        RunBin tail{cut * width + 1, std::nullopt, 0.0, 0.0};
        for (std::size_t b = cut; b < n_raw; ++b) {
            tail.observed += o[b];
            tail.expected += e[b];
        }
        out.bins.push_back(tail);
        out.cutoff_applied = true;
    } else if (!out.bins.empty()) {
        out.bins.back().hi.reset();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

enum class Verdict { accept, reject };

inline constexpr double kDefaultSignificance = 0.01;

struct ChiSquaredResult {
    double chi2 = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    Verdict verdict = Verdict::accept;
};

struct GofReport {
    double chi2 = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    double significance = kDefaultSignificance;
    Verdict verdict = Verdict::accept;  // of the null hypothesis "same distribution"
    double mse = 0.0;
    std::size_t k = 0;
};

/// Null hypothesis is rejected only when p is strictly below the significance level.
inline Verdict verdict_for(double p_value, double significance) {
    return p_value < significance ? Verdict::reject : Verdict::accept;
}

inline void check_significance(double significance) {
    if (!(significance > 0.0 && significance < 1.0)) throw InputError("significance must lie in (0, 1)");
}

inline ChiSquaredResult chi_squared(const BinnedRuns& bins, double significance = kDefaultSignificance) {
    check_significance(significance);
    if (bins.bins.empty()) throw GofError("no bins");
    ChiSquaredResult r;
    for (const auto& b : bins.bins) {
        if (!(b.expected > 0.0)) throw GofError("expected count is zero in bin starting at m=" + std::to_string(b.lo));
        const double diff = b.observed - b.expected;
        r.chi2 += diff * diff / b.expected;
    }
    r.df = bins.k() - 1;
    r.p_value = chi_squared_p_value(r.chi2, r.df);
    r.verdict = verdict_for(r.p_value, significance);
    return r;
}

inline double mse(const BinnedRuns& bins) {
    if (bins.bins.empty()) throw GofError("no bins");
    double sum = 0.0;
    for (const auto& b : bins.bins) {
        const double diff = b.observed - b.expected;
        sum += diff * diff;
    }
    return sum / static_cast<double>(bins.k());
}

inline GofReport gof_report(const BinnedRuns& bins, double significance = kDefaultSignificance) {
    const auto c = chi_squared(bins, significance);
    return {c.chi2, c.df, c.p_value, significance, c.verdict, mse(bins), bins.k()};
}

/// One bin width's outcome; `report` is empty and `error` set when the test could not run.
struct WidthOutcome {
    std::size_t width = 0;
    std::optional<GofReport> report;
    std::string error;
};

/// Bins two run distributions at each width (second operand = expected) and tests each.
/// A failure at one width does not stop the others.
inline std::vector<WidthOutcome> compare_runs(const RunDistribution& observed, const RunDistribution& expected,
                                              std::span<const std::size_t> widths,
                                              double significance = kDefaultSignificance,
                                              const BinOptions& options = {}) {
    check_significance(significance);
    std::vector<WidthOutcome> out;
    for (auto w : widths) {
        WidthOutcome row{w, std::nullopt, {}};
        try {
            row.report = gof_report(bin_runs(observed, expected, w, options), significance);
        } catch (const GofError& e) {
            row.error = e.what();
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline std::vector<WidthOutcome> compare(std::span<const std::uint8_t> observed_seq,
                                         std::span<const std::uint8_t> expected_seq,
                                         std::span<const std::size_t> widths, RunKind kind,
                                         double significance = kDefaultSignificance, const BinOptions& options = {}) {
    if (observed_seq.empty() || expected_seq.empty()) throw InputError("compare needs two non-empty sequences");
    return compare_runs(runs_of(kind, observed_seq), runs_of(kind, expected_seq), widths, significance, options);
}

}  // namespace memsync
