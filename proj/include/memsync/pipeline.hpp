#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memsync/align.hpp"
#include "memsync/categories.hpp"
#include "memsync/channels.hpp"
#include "memsync/estimate.hpp"
#include "memsync/gof.hpp"
#include "memsync/io.hpp"
#include "memsync/runstats.hpp"

namespace memsync {

/// Which fitted model stands in the "Model" column of the comparison table.
enum class ModelChoice { dm, iid, fritchman, markov4 };

inline ModelChoice parse_model_choice(std::string_view name) {
    if (name == "dm") return ModelChoice::dm;
    if (name == "iid") return ModelChoice::iid;
    if (name == "fritchman") return ModelChoice::fritchman;
    if (name == "markov4") return ModelChoice::markov4;
    throw InputError("unknown model '" + std::string(name) + "' (expected dm, iid, fritchman or markov4)");
}

inline std::string_view model_choice_name(ModelChoice m) {
    switch (m) {
        case ModelChoice::dm: return "dm";
        case ModelChoice::iid: return "iid";
        case ModelChoice::fritchman: return "fritchman";
        case ModelChoice::markov4: return "markov4";
    }
    return "?";
}

struct RunConfig {
    ErrorCategory category = ErrorCategory::any_error;
    std::vector<std::size_t> widths{1, 5, 10};
    double significance = kDefaultSignificance;
    Seed seed;
    ModelChoice model = ModelChoice::fritchman;
    std::size_t max_insertions = kDefaultMaxInsertions;
    std::size_t fritchman_states = 3;
    std::size_t fritchman_good_states = 2;
    BaumWelchOptions fit;
    BinOptions bins;
    /// Independent simulations pooled into each expected distribution.
    std::size_t replicates = 10;
    /// Rounds of matching aligned DM output to the measured aligned rates; 0 keeps the raw
    /// estimate.
    std::size_t dm_calibration_rounds = 3;
    unsigned threads = 0;

    void validate() const {
        if (widths.empty()) throw InputError("at least one bin width is required");
        for (auto w : widths)
            if (w == 0) throw InputError("bin widths must be positive");
        check_significance(significance);
        if (max_insertions == 0) throw InputError("max_insertions must be positive");
        if (replicates == 0 || replicates > 255) throw InputError("replicates must lie in [1, 255]");
        if (dm_calibration_rounds > 255) throw InputError("dm calibration rounds must lie in [0, 255]");
        if (fritchman_good_states == 0 || fritchman_good_states >= fritchman_states)
            throw InputError("Fritchman partition needs 1 <= K < N");
    }
};

/// The four run-length distributions compared in the report, for one run kind.
/// Simulated entries pool every replicate.
struct RunSet {
    RunDistribution measured, model, dm, iid;
};

inline constexpr std::array<const char*, 4> kComparisonNames = {"IID vs Measured", "IID vs DM", "Model vs Measured",
                                                              "DM vs Measured"};

struct AnalysisBundle {
    RunConfig config;
    std::size_t frames = 0;
    SyncErrorSequence measured_sync;  // concatenated per-frame paths
    std::vector<std::size_t> segment_lengths;
    ChannelProbEstimate probs;
    /// DM parameters read straight off the aligned state fractions.
    DmParams dm_estimate;
    /// Parameters the DM baseline is simulated with, after calibration.
    DmParams dm;
    IidParams iid;
    /// Count MLE of the four-state chain over the measured paths.
    std::optional<MarkovModel> markov4;
    std::optional<FitReport> fritchman_fit;
    /// Why the Model column is empty, when it is.
    std::string model_note;
    RunSet efr, er;
    std::vector<GofRow> gof_efr, gof_er;
};

namespace detail {

// Stream ids keep every simulated quantity on its own reproducible RNG stream:
// kind in the top bits, replicate in bits 24..31, frame in the low 24 bits.
inline constexpr std::uint64_t kStreamTx = 1ull << 32;
inline constexpr std::uint64_t kStreamDm = 2ull << 32;
inline constexpr std::uint64_t kStreamIid = 3ull << 32;
inline constexpr std::uint64_t kStreamModel = 4ull << 32;
inline constexpr std::uint64_t kStreamFitInit = 5ull << 32;
inline constexpr std::uint64_t kStreamCalTx = 6ull << 32;
inline constexpr std::uint64_t kStreamCalDm = 7ull << 32;
inline constexpr std::size_t kMaxFrames = std::size_t{1} << 24;

inline std::uint64_t stream_id(std::uint64_t kind, std::size_t replicate, std::size_t frame) {
    return kind + (static_cast<std::uint64_t>(replicate) << 24) + frame;
}

inline std::vector<BinaryErrorSequence> binarize_segments(std::span<const SyncErrorSequence> paths, ErrorCategory c) {
    std::vector<BinaryErrorSequence> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(binarize(p, c));
    return out;
}

inline RunDistribution runs_over(RunKind kind, const std::vector<BinaryErrorSequence>& segments) {
    return runs_of(kind, std::span<const BinaryErrorSequence>(segments));
}

inline bool any_error(const std::vector<BinaryErrorSequence>& segments) {
    for (const auto& s : segments)
        if (std::find(s.begin(), s.end(), 1) != s.end()) return true;
    return false;
}

/// Replicates of one simulated baseline, each shaped like the measured frames.
struct Baseline {
    std::vector<std::vector<BinaryErrorSequence>> replicates;

    RunDistribution first(RunKind kind) const { return runs_over(kind, replicates.front()); }

    RunDistribution pooled(RunKind kind) const {
        RunDistribution out;
        for (const auto& r : replicates) out.merge(runs_over(kind, r));
        return out;
    }
};

/// Random tx per frame with the measured frame's tx length, sent through the DM channel
/// and aligned exactly like the measured frames.
inline FrameAlignment dm_aligned(std::span<const Frame> frames, const DmParams& dm, const RunConfig& cfg,
                                 std::uint64_t tx_kind, std::uint64_t dm_kind, std::size_t r) {
    std::vector<Frame> sim;
    sim.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& ref = frames[k].first;
        auto rng = rng_stream(cfg.seed, stream_id(tx_kind, r, k));
        SymbolSequence tx(ref.alphabet());
        tx.reserve(ref.size());
        for (std::size_t n = 0; n < ref.size(); ++n) tx.push_back(static_cast<std::uint8_t>(rng.below(ref.alphabet().size())));
        auto out = simulate_dm(dm, tx, cfg.seed, stream_id(dm_kind, r, k));
        sim.emplace_back(std::move(tx), std::move(out.rx));
    }
    return align_frames(std::span<const Frame>(sim), cfg.threads);
}

/// Alignment hides some edits (an adjacent i,d pair reads as s or t), so rates read off
/// aligned data sit below the channel parameters that produced them. Each round simulates
/// with the current parameters, aligns, and shifts every rate by the gap to the measured
/// fraction.
inline DmParams calibrate_dm(std::span<const Frame> frames, const ChannelProbEstimate& target, DmParams dm,
                             const RunConfig& cfg) {
    for (std::size_t round = 0; round < cfg.dm_calibration_rounds; ++round) {
        auto sim = estimate_probs(dm_aligned(frames, dm, cfg, kStreamCalTx, kStreamCalDm, round).concatenated);
        auto step = [](double current, double want, double got) {
            return want == 0.0 ? 0.0 : std::clamp(current + (want - got), 0.0, 1.0);
        };
        DmParams next = dm;
        next.p_i = step(dm.p_i, target.p_i, sim.p_i);
        next.p_d = step(dm.p_d, target.p_d, sim.p_d);
        next.p_s = step(dm.p_s, target.p_s, sim.p_s);
        if (next.p_i + next.p_d > 1.0) {
            const double scale = 1.0 / (next.p_i + next.p_d);
            next.p_i *= scale;
            next.p_d *= scale;
        }
        dm = next;
    }
    return dm;
}

/// DM baseline replicate, binarized.
inline std::vector<BinaryErrorSequence> dm_replicate(std::span<const Frame> frames, const DmParams& dm,
                                                     const RunConfig& cfg, std::size_t r) {
    auto aligned = dm_aligned(frames, dm, cfg, kStreamTx, kStreamDm, r);
    std::vector<BinaryErrorSequence> out;
    out.reserve(frames.size());
    for (const auto& a : aligned.per_frame) out.push_back(binarize(a.path, cfg.category));
    return out;
}

inline std::vector<GofRow> comparison_rows(RunKind kind, const RunDistribution& measured, const Baseline& iid,
                                           const Baseline& dm, const Baseline* model, const std::string& model_note,
                                           const RunConfig& cfg) {
    // "A vs B": B is observed, A supplies the expected counts (pooled over replicates).
    const auto iid_pooled = iid.pooled(kind);
    const auto dm_pooled = dm.pooled(kind);
    const auto dm_single = dm.first(kind);
    std::vector<GofRow> rows;
    auto add = [&](const char* name, const RunDistribution& observed, const RunDistribution& expected) {
        for (auto& outcome : compare_runs(observed, expected, cfg.widths, cfg.significance, cfg.bins))
            rows.push_back({name, outcome.width, outcome.report, outcome.error});
    };
    add(kComparisonNames[0], measured, iid_pooled);
    add(kComparisonNames[1], dm_single, iid_pooled);
    if (model) {
        add(kComparisonNames[2], measured, model->pooled(kind));
    } else {
        for (auto w : cfg.widths) rows.push_back({kComparisonNames[2], w, std::nullopt, model_note});
    }
    add(kComparisonNames[3], measured, dm_pooled);
    return rows;
}

}  // namespace detail

/// Align, estimate, fit, simulate baselines and compare run distributions.
/// Every simulated replicate mirrors the measured frame segmentation, so frame
/// boundaries break runs identically in data and simulation.
inline AnalysisBundle run_pipeline(std::span<const Frame> frames, const RunConfig& config) {
    config.validate();
    if (frames.empty()) throw InputError("no frames to analyse");
    if (frames.size() > detail::kMaxFrames) throw InputError("too many frames");

    AnalysisBundle b;
    b.config = config;
    b.frames = frames.size();

    auto aligned = align_frames(frames, config.threads);
    std::vector<SyncErrorSequence> paths;
    paths.reserve(frames.size());
    for (const auto& r : aligned.per_frame) {
        paths.push_back(r.path);
        b.segment_lengths.push_back(r.path.size());
    }
    b.measured_sync = std::move(aligned.concatenated);
    if (b.measured_sync.empty()) throw InputError("all frames are empty");

    b.probs = estimate_probs(b.measured_sync);
    b.dm_estimate = DmParams{b.probs.p_i, b.probs.p_d, b.probs.p_s, config.max_insertions};
    b.dm = detail::calibrate_dm(frames, b.probs, b.dm_estimate, config);

    const auto measured = detail::binarize_segments(paths, config.category);
    std::size_t ones = 0;
    for (const auto& s : measured) ones += static_cast<std::size_t>(std::count(s.begin(), s.end(), 1));
    b.iid = IidParams{static_cast<double>(ones) / static_cast<double>(b.measured_sync.size())};

    try {
        b.markov4 = count_mle(std::span<const SyncErrorSequence>(paths));
    } catch (const FitError&) {
        // Single-symbol frames only: no transitions to count.
    }

    detail::Baseline dm, iid;
    for (std::size_t r = 0; r < config.replicates; ++r) {
        dm.replicates.push_back(detail::dm_replicate(frames, b.dm, config, r));
        auto& rep = iid.replicates.emplace_back();
        for (std::size_t k = 0; k < paths.size(); ++k)
            rep.push_back(simulate_iid(b.iid, paths[k].size(), config.seed, detail::stream_id(detail::kStreamIid, r, k)));
    }

    std::optional<detail::Baseline> model;
    try {
        switch (config.model) {
            case ModelChoice::dm: model = dm; break;
            case ModelChoice::iid: model = iid; break;
            case ModelChoice::markov4: {
                if (!b.markov4) throw FitError("no transitions to fit the four-state model");
                detail::Baseline sim;
                for (std::size_t r = 0; r < config.replicates; ++r) {
                    auto& rep = sim.replicates.emplace_back();
                    for (std::size_t k = 0; k < paths.size(); ++k)
                        rep.push_back(binarize(simulate_ids(*b.markov4, paths[k].size(), config.seed,
                                                            InitialState::at(index_of(SyncState::transmission)),
                                                            detail::stream_id(detail::kStreamModel, r, k)),
                                               config.category));
                }
                model = std::move(sim);
                break;
            }
            case ModelChoice::fritchman: {
                if (!detail::any_error(measured))
                    throw FitError(std::string("no ") + std::string(category_name(config.category)) +
                                   " errors in the measured data");
                auto init = fritchman_init(config.fritchman_states, config.fritchman_good_states, config.seed,
                                           detail::kStreamFitInit);
                b.fritchman_fit = baum_welch(std::span<const ObservationSequence>(measured), init, config.fit);
                detail::Baseline sim;
                for (std::size_t r = 0; r < config.replicates; ++r) {
                    auto& rep = sim.replicates.emplace_back();
                    for (std::size_t k = 0; k < paths.size(); ++k)
                        rep.push_back(simulate_fritchman(b.fritchman_fit->model, paths[k].size(), config.seed,
                                                         InitialState::at(0),
                                                         detail::stream_id(detail::kStreamModel, r, k)));
                }
                model = std::move(sim);
                break;
            }
        }
    } catch (const AnalysisError& e) {
        b.model_note = e.what();
    }

    for (auto [kind, set] : {std::pair{RunKind::error_free, &b.efr}, std::pair{RunKind::error, &b.er}}) {
        set->measured = detail::runs_over(kind, measured);
        set->dm = dm.pooled(kind);
        set->iid = iid.pooled(kind);
        if (model) set->model = model->pooled(kind);
    }
    const detail::Baseline* model_ptr = model ? &*model : nullptr;
    b.gof_efr = detail::comparison_rows(RunKind::error_free, b.efr.measured, iid, dm, model_ptr, b.model_note, config);
    b.gof_er = detail::comparison_rows(RunKind::error, b.er.measured, iid, dm, model_ptr, b.model_note, config);
    return b;
}

inline AnalysisBundle run_pipeline(std::span<const FrameRecord> records, const RunConfig& config) {
    auto frames = to_frames(records);
    return run_pipeline(std::span<const Frame>(frames), config);
}

inline Json probs_json(const AnalysisBundle& b) {
    Json j;
    j["frames"] = b.frames;
    j["states"] = b.probs.total_states;
    j["p_t"] = b.probs.p_t;
    j["p_s"] = b.probs.p_s;
    j["p_i"] = b.probs.p_i;
    j["p_d"] = b.probs.p_d;
    j["dm_estimate"] = {{"p_i", b.dm_estimate.p_i},
                        {"p_d", b.dm_estimate.p_d},
                        {"p_s", b.dm_estimate.p_s},
                        {"max_insertions", b.dm_estimate.max_insertions}};
    j["dm_calibration_rounds"] = b.config.dm_calibration_rounds;
    j["dm"] = {{"p_i", b.dm.p_i}, {"p_d", b.dm.p_d}, {"p_s", b.dm.p_s}, {"max_insertions", b.dm.max_insertions}};
    j["category"] = category_name(b.config.category);
    j["iid"] = {{"p_e", b.iid.p_e}};
    return j;
}

/// Writes the report directory. Output is a pure function of the bundle.
inline std::vector<std::filesystem::path> emit_reports(const AnalysisBundle& b, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        auto path = out_dir / name;
        write_text_file(path, content);
        written.push_back(path);
    };

    emit("probs.json", probs_json(b).dump(2) + "\n");
    for (auto [kind, set] : {std::pair{"efr", &b.efr}, std::pair{"er", &b.er}}) {
        const std::string k = kind;
        emit("runs_" + k + "_measured.csv", to_text([&](std::ostream& o) { write_run_csv(o, set->measured); }));
        emit("runs_" + k + "_model.csv", to_text([&](std::ostream& o) { write_run_csv(o, set->model); }));
        emit("runs_" + k + "_dm.csv", to_text([&](std::ostream& o) { write_run_csv(o, set->dm); }));
        emit("runs_" + k + "_iid.csv", to_text([&](std::ostream& o) { write_run_csv(o, set->iid); }));
    }
    for (auto [kind, rows] : {std::pair{"efr", &b.gof_efr}, std::pair{"er", &b.gof_er}}) {
        const std::string k = kind;
        emit("gof_" + k + ".csv", to_text([&](std::ostream& o) { write_gof_csv(o, *rows); }));
        emit("gof_" + k + ".json", gof_json(*rows).dump(2) + "\n");
    }
    if (b.markov4) {
        emit("markov4.json", matrix_json(*b.markov4).dump(2) + "\n");
        emit("markov4.dot", to_text([&](std::ostream& o) { write_dot(o, *b.markov4); }));
        emit("markov4_heatmap.csv", to_text([&](std::ostream& o) { write_heatmap_csv(o, *b.markov4); }));
    }
    if (b.fritchman_fit) emit("fritchman_fit.json", fit_report_json(*b.fritchman_fit).dump(2) + "\n");
    return written;
}

}  // namespace memsync
