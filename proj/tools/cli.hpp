#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "memsync/memsync.hpp"

namespace memsync::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kAnalysisError = 2 };

struct Options {
    std::string input;
    std::string format = "jsonl";
    std::string category = "any-error";
    std::string widths = "1,5,10";
    double significance = kDefaultSignificance;
    std::uint64_t seed = 0;
    std::string out;
    std::string model;
    std::optional<std::size_t> frame_length;
    std::string alphabet;
    std::string config;
    std::string expected;
    std::string kind = "efr";
    std::optional<std::size_t> n;
    std::size_t states = 3;
    std::size_t good_states = 2;
    std::size_t max_insertions = kDefaultMaxInsertions;
    std::size_t max_iters = 500;
    std::size_t replicates = 10;
    std::size_t dm_calibration = 3;
    bool exclude_censored = false;
};

class Context {
public:
    Context(const Options& o, std::ostream& out) : o_(o), out_(out) {}

    /// Writes `content` to <out>/<name> when --out is set, else to stdout.
    void emit(const std::string& name, const std::string& content) const {
        if (o_.out.empty()) {
            out_ << content;
            return;
        }
        std::error_code ec;
        std::filesystem::create_directories(o_.out, ec);
        if (ec) throw IoError("cannot create '" + o_.out + "': " + ec.message());
        write_text_file(std::filesystem::path(o_.out) / name, content);
    }

    std::string input_text(const std::string& path, const char* what) const {
        if (path.empty()) throw InputError(std::string("missing ") + what);
        if (path == "-") {
            std::ostringstream ss;
            ss << std::cin.rdbuf();
            return ss.str();
        }
        return read_text_file(path);
    }

    std::vector<FrameRecord> frames() const {
        IngestOptions opts;
        if (!o_.alphabet.empty()) opts.alphabet = Alphabet(o_.alphabet);
        opts.frame_length = o_.frame_length;
        std::istringstream in(input_text(o_.input, "--input"));
        auto frames = ingest(in, parse_dataset_format(o_.format), opts);
        if (frames.empty()) throw IngestError("'" + o_.input + "' contains no frames");
        return frames;
    }

    std::vector<SyncErrorSequence> sync_segments() const {
        std::istringstream in(input_text(o_.input, "--input"));
        return read_sync_segments(in);
    }

    std::vector<BinaryErrorSequence> binary_segments(const std::string& path, const char* what) const {
        std::istringstream in(input_text(path, what));
        auto segs = read_binary_segments(in);
        if (segs.empty()) throw InputError(std::string(what) + " holds no sequences");
        return segs;
    }

    RunKind run_kind() const {
        if (o_.kind == "efr") return RunKind::error_free;
        if (o_.kind == "er") return RunKind::error;
        throw InputError("--kind must be efr or er");
    }

    const Options& options() const { return o_; }

private:
    const Options& o_;
    std::ostream& out_;
};

template <class Seq, class Format>
std::string lines(const std::vector<Seq>& segs, Format format) {
    std::string text;
    for (const auto& s : segs) text += format(s) + "\n";
    return text;
}

inline FrameAlignment align_all(const std::vector<FrameRecord>& records) {
    auto frames = to_frames(records);
    return align_frames(std::span<const Frame>(frames));
}

inline void cmd_align(const Context& ctx) {
    auto aligned = align_all(ctx.frames());
    std::string text;
    for (const auto& r : aligned.per_frame) text += format_sync(r.path) + "\n";
    ctx.emit("paths.txt", text);
}

inline void cmd_probs(const Context& ctx) {
    auto records = ctx.frames();
    auto aligned = align_all(records);
    auto p = estimate_probs(aligned.concatenated);
    std::ostringstream ss;
    ss << "frames " << records.size() << "\nstates " << p.total_states << "\np_t " << format_sig(p.p_t) << "\np_s "
       << format_sig(p.p_s) << "\np_i " << format_sig(p.p_i) << "\np_d " << format_sig(p.p_d) << "\n";
    ctx.emit("probs.txt", ss.str());
}

inline void cmd_binarize(const Context& ctx) {
    const auto c = parse_category(ctx.options().category);
    std::string text;
    for (const auto& s : ctx.sync_segments()) text += format_binary(binarize(s, c)) + "\n";
    ctx.emit("binary_" + std::string(category_name(c)) + ".txt", text);
}

inline void cmd_fit(const Context& ctx) {
    const auto& o = ctx.options();
    switch (parse_model_choice(o.model.empty() ? "fritchman" : o.model)) {
        case ModelChoice::fritchman: {
            auto segs = ctx.binary_segments(o.input, "--input");
            BaumWelchOptions bw;
            bw.max_iters = o.max_iters;
            auto fit = baum_welch(std::span<const ObservationSequence>(segs),
                                  fritchman_init(o.states, o.good_states, Seed{o.seed}), bw);
            ctx.emit("fritchman_fit.json", fit_report_json(fit).dump(2) + "\n");
            break;
        }
        case ModelChoice::markov4: {
            auto segs = ctx.sync_segments();
            if (segs.empty()) throw InputError("--input holds no sequences");
            auto m = count_mle(std::span<const SyncErrorSequence>(segs));
            ctx.emit("markov4.json", matrix_json(m).dump(2) + "\n");
            if (!o.out.empty()) {
                ctx.emit("markov4.dot", to_text([&](std::ostream& s) { write_dot(s, m); }));
                ctx.emit("markov4_heatmap.csv", to_text([&](std::ostream& s) { write_heatmap_csv(s, m); }));
            }
            break;
        }
        case ModelChoice::dm: {
            SyncErrorSequence all;
            for (const auto& s : ctx.sync_segments()) all.insert(all.end(), s.begin(), s.end());
            if (all.empty()) throw InputError("--input holds no states");
            auto p = estimate_probs(all);
            Json j{{"p_i", p.p_i}, {"p_d", p.p_d}, {"p_s", p.p_s}, {"max_insertions", o.max_insertions}};
            ctx.emit("dm.json", j.dump(2) + "\n");
            break;
        }
        case ModelChoice::iid: {
            std::size_t ones = 0, total = 0;
            for (const auto& s : ctx.binary_segments(o.input, "--input")) {
                ones += static_cast<std::size_t>(std::count(s.begin(), s.end(), 1));
                total += s.size();
            }
            if (total == 0) throw InputError("--input holds no symbols");
            Json j{{"p_e", static_cast<double>(ones) / static_cast<double>(total)}};
            ctx.emit("iid.json", j.dump(2) + "\n");
            break;
        }
    }
}

/// Splits n symbols into consecutive frames of --frame-length (one frame when unset).
inline std::vector<std::size_t> frame_sizes(std::size_t n, std::optional<std::size_t> frame_length) {
    if (frame_length && *frame_length == 0) throw InputError("--frame-length must be positive");
    const std::size_t len = frame_length.value_or(n);
    std::vector<std::size_t> out;
    for (std::size_t done = 0; done < n; done += len) out.push_back(std::min(len, n - done));
    return out;
}

inline void cmd_simulate(const Context& ctx, bool seed_given) {
    const auto& o = ctx.options();
    if (o.config.empty()) throw InputError("simulate needs --config");
    auto cfg = parse_simulation_config(read_json_file(o.config));
    if (seed_given) cfg.seed = Seed{o.seed};
    if (o.n) cfg.n = *o.n;
    const auto sizes = frame_sizes(cfg.n, o.frame_length);

    if (auto* dm = std::get_if<DmParams>(&cfg.params)) {
        std::vector<FrameRecord> frames;
        std::string truth;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            auto rng = rng_stream(cfg.seed, detail::kStreamTx + k);
            SymbolSequence tx(cfg.alphabet);
            for (std::size_t i = 0; i < sizes[k]; ++i)
                tx.push_back(static_cast<std::uint8_t>(rng.below(cfg.alphabet.size())));
            auto sim = simulate_dm(*dm, tx, cfg.seed, detail::kStreamDm + k);
            truth += format_sync(sim.truth) + "\n";
            frames.push_back({static_cast<std::int64_t>(k), std::move(tx), std::move(sim.rx)});
        }
        const auto fmt = parse_dataset_format(o.format);
        ctx.emit(fmt == DatasetFormat::jsonl ? "frames.jsonl" : "frames.tsv",
                 to_text([&](std::ostream& s) { write_frames(s, frames, fmt); }));
        if (!o.out.empty()) ctx.emit("truth.txt", truth);
    } else if (auto* iid = std::get_if<IidParams>(&cfg.params)) {
        std::string text;
        for (std::size_t k = 0; k < sizes.size(); ++k)
            text += format_binary(simulate_iid(*iid, sizes[k], cfg.seed, detail::kStreamIid + k)) + "\n";
        ctx.emit("binary.txt", text);
    } else {
        const auto& m = std::get<MarkovModel>(cfg.params);
        std::string text;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            auto sample = simulate_markov(m, sizes[k], cfg.seed, InitialState::at(0), detail::kStreamModel + k);
            if (m.kind == ModelKind::ids) {
                SyncErrorSequence s;
                for (auto e : sample.emissions) s.push_back(kCanonicalStateOrder[e]);
                text += format_sync(s) + "\n";
            } else {
                text += format_binary(sample.emissions) + "\n";
            }
        }
        ctx.emit(m.kind == ModelKind::ids ? "paths.txt" : "binary.txt", text);
    }
}

inline void cmd_runs(const Context& ctx) {
    const auto& o = ctx.options();
    auto segs = ctx.binary_segments(o.input, "--input");
    auto runs = runs_of(ctx.run_kind(), std::span<const BinaryErrorSequence>(segs));
    ctx.emit("runs_" + o.kind + ".csv", to_text([&](std::ostream& s) { write_run_csv(s, runs); }));
}

inline BinOptions bin_options(const Options& o) {
    BinOptions b;
    b.include_censored = !o.exclude_censored;
    return b;
}

inline void cmd_gof(const Context& ctx) {
    const auto& o = ctx.options();
    auto observed = ctx.binary_segments(o.input, "--input");
    auto expected = ctx.binary_segments(o.expected, "--expected");
    const auto kind = ctx.run_kind();
    const auto widths = parse_widths(o.widths);
    std::vector<GofRow> rows;
    for (auto& w : compare_runs(runs_of(kind, std::span<const BinaryErrorSequence>(observed)),
                                runs_of(kind, std::span<const BinaryErrorSequence>(expected)), widths,
                                o.significance, bin_options(o)))
        rows.push_back({"Expected vs Observed", w.width, w.report, w.error});
    ctx.emit("gof.csv", to_text([&](std::ostream& s) { write_gof_csv(s, rows); }));
    if (!o.out.empty()) ctx.emit("gof.json", gof_json(rows).dump(2) + "\n");
}

inline void cmd_report(const Context& ctx, std::ostream& out) {
    const auto& o = ctx.options();
    if (o.out.empty()) throw InputError("report needs --out DIR");
    RunConfig cfg;
    cfg.category = parse_category(o.category);
    cfg.widths = parse_widths(o.widths);
    cfg.significance = o.significance;
    cfg.seed = Seed{o.seed};
    cfg.model = parse_model_choice(o.model.empty() ? "fritchman" : o.model);
    cfg.max_insertions = o.max_insertions;
    cfg.fritchman_states = o.states;
    cfg.fritchman_good_states = o.good_states;
    cfg.fit.max_iters = o.max_iters;
    cfg.bins = bin_options(o);
    cfg.replicates = o.replicates;
    cfg.dm_calibration_rounds = o.dm_calibration;
    auto bundle = run_pipeline(std::span<const FrameRecord>(ctx.frames()), cfg);
    emit_reports(bundle, o.out);
    write_gof_csv(out, bundle.gof_efr);
}

/// Runs the command line; returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Synchronisation channel analysis with memory models"};
    app.name(args.empty() ? "memsync" : args.front());
    app.require_subcommand(1);

    auto frames_in = [&](CLI::App* sub) {
        sub->add_option("--input", o.input, "Frame dataset (- for stdin)")->required();
        sub->add_option("--format", o.format, "Dataset format")->check(CLI::IsMember({"jsonl", "tsv"}));
        sub->add_option("--frame-length", o.frame_length, "Require every tx to have this length");
        sub->add_option("--alphabet", o.alphabet, "Declared symbol alphabet, e.g. 01 or ACGT");
    };
    auto gof_opts = [&](CLI::App* sub) {
        sub->add_option("--widths", o.widths, "Comma-separated bin widths");
        sub->add_option("--significance", o.significance, "Significance level");
        sub->add_flag("--exclude-censored", o.exclude_censored, "Drop runs cut off by the end of a sequence");
    };
    auto out_opt = [&](CLI::App* sub) { sub->add_option("--out", o.out, "Output directory"); };
    auto fit_opts = [&](CLI::App* sub) {
        sub->add_option("--states", o.states, "Fritchman state count N");
        sub->add_option("--good-states", o.good_states, "Fritchman error-free state count K");
        sub->add_option("--max-iters", o.max_iters, "Baum-Welch iteration cap");
    };
    const auto models = CLI::IsMember({"dm", "iid", "fritchman", "markov4"});
    const auto categories = CLI::IsMember({"any-error", "sync", "subst", "ins", "del"});

    auto* align = app.add_subcommand("align", "Align tx/rx frames into t/s/d/i paths");
    frames_in(align);
    out_opt(align);

    auto* probs = app.add_subcommand("probs", "Estimate transmission, substitution, insertion and deletion rates");
    frames_in(probs);
    out_opt(probs);

    auto* binarize_cmd = app.add_subcommand("binarize", "Map t/s/d/i paths to binary error sequences");
    binarize_cmd->add_option("--input", o.input, "Path file, one sequence per line")->required();
    binarize_cmd->add_option("--category", o.category, "Error category")->check(categories);
    out_opt(binarize_cmd);

    auto* fit = app.add_subcommand("fit", "Fit a channel model");
    fit->add_option("--input", o.input, "Binary (fritchman, iid) or path (markov4, dm) sequences")->required();
    fit->add_option("--model", o.model, "Model to fit")->check(models);
    fit->add_option("--seed", o.seed, "Seed for the random starting model");
    fit->add_option("--max-insertions", o.max_insertions, "Insertion cap reported for dm");
    fit_opts(fit);
    out_opt(fit);

    auto* simulate = app.add_subcommand("simulate", "Simulate a channel from a JSON config");
    simulate->add_option("--config", o.config, "Simulation config JSON")->required();
    auto* seed_opt = simulate->add_option("--seed", o.seed, "Override the config seed");
    simulate->add_option("--n", o.n, "Override the config length");
    simulate->add_option("--frame-length", o.frame_length, "Split output into frames of this length");
    simulate->add_option("--format", o.format, "Frame output format (dm)")->check(CLI::IsMember({"jsonl", "tsv"}));
    out_opt(simulate);

    auto* runs = app.add_subcommand("runs", "Run-length distribution of binary sequences");
    runs->add_option("--input", o.input, "Binary sequences, one per line")->required();
    runs->add_option("--kind", o.kind, "efr (error-free runs) or er (error runs)")
        ->check(CLI::IsMember({"efr", "er"}));
    out_opt(runs);

    auto* gof = app.add_subcommand("gof", "Chi-squared comparison of two run distributions");
    gof->add_option("--input", o.input, "Observed binary sequences")->required();
    gof->add_option("--expected", o.expected, "Expected binary sequences")->required();
    gof->add_option("--kind", o.kind, "efr or er")->check(CLI::IsMember({"efr", "er"}));
    gof_opts(gof);
    out_opt(gof);

    auto* report = app.add_subcommand("report", "Full pipeline: align, fit, simulate, compare, write reports");
    frames_in(report);
    report->add_option("--category", o.category, "Error category")->check(categories);
    report->add_option("--model", o.model, "Model compared against the measured runs")->check(models);
    report->add_option("--seed", o.seed, "Simulation seed");
    report->add_option("--max-insertions", o.max_insertions, "DM insertion cap");
    report->add_option("--replicates", o.replicates, "Simulations pooled into each expected distribution");
    report->add_option("--dm-calibration", o.dm_calibration, "DM calibration rounds (0 uses the raw estimate)");
    gof_opts(report);
    fit_opts(report);
    out_opt(report);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kInputError;
    }

    try {
        Context ctx(o, out);
        if (*align) cmd_align(ctx);
        else if (*probs) cmd_probs(ctx);
        else if (*binarize_cmd) cmd_binarize(ctx);
        else if (*fit) cmd_fit(ctx);
        else if (*simulate) cmd_simulate(ctx, seed_opt->count() > 0);
        else if (*runs) cmd_runs(ctx);
        else if (*gof) cmd_gof(ctx);
        else if (*report) cmd_report(ctx, out);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const AnalysisError& e) {
        err << "analysis error: " << e.what() << "\n";
        return kAnalysisError;
    } catch (const std::exception& e) {
        err << "analysis error: " << e.what() << "\n";
        return kAnalysisError;
    }
    return kOk;
}

}  // namespace memsync::cli
