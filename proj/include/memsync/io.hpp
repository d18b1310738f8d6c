#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "memsync/align.hpp"
#include "memsync/core.hpp"
#include "memsync/estimate.hpp"
#include "memsync/gof.hpp"
#include "memsync/runstats.hpp"

namespace memsync {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::string format_fixed(double x, int decimals) {
    char buf[512];
    auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, decimals);
    return std::string(buf, r.ptr);
}

/// `digits` significant figures, switching to exponent form for small values.
inline std::string format_sig(double x, int digits = 4) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits);
    return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Parses a whole JSON document; syntax errors become IngestError.
inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    auto text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestError("'" + path.string() + "': invalid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Frame datasets
// ---------------------------------------------------------------------------

struct FrameRecord {
    std::int64_t frame_id = 0;
    SymbolSequence tx;
    SymbolSequence rx;
};

enum class DatasetFormat { jsonl, tsv };

inline DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "tsv") return DatasetFormat::tsv;
    throw InputError("unknown dataset format '" + std::string(name) + "' (expected jsonl or tsv)");
}

struct IngestOptions {
    /// Declared alphabet; inferred from the data when empty.
    std::optional<Alphabet> alphabet;
    /// Strict mode: every tx must have exactly this many symbols.
    std::optional<std::size_t> frame_length;
};

namespace detail {

struct RawFrame {
    std::size_t line = 0;
    std::int64_t frame_id = 0;
    std::string tx, rx;
};

inline RawFrame parse_jsonl_line(const std::string& line, std::size_t line_no, std::size_t index) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw IngestError("expected a JSON object", line_no);
    auto text_field = [&](const char* name) {
        auto it = j.find(name);
        if (it == j.end()) throw IngestError(std::string("missing field \"") + name + "\"", line_no);
        if (!it->is_string()) throw IngestError(std::string("field \"") + name + "\" must be a string", line_no);
        return it->get<std::string>();
    };
    RawFrame f{line_no, static_cast<std::int64_t>(index), text_field("tx"), text_field("rx")};
    if (auto it = j.find("frame_id"); it != j.end()) {
        if (!it->is_number_integer()) throw IngestError("field \"frame_id\" must be an integer", line_no);
        f.frame_id = it->get<std::int64_t>();
    }
    return f;
}

inline RawFrame parse_tsv_line(const std::string& line, std::size_t line_no, std::size_t index) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IngestError("expected tab-separated tx and rx columns", line_no);
    if (line.find('\t', tab + 1) != std::string::npos) throw IngestError("more than two columns", line_no);
    return {line_no, static_cast<std::int64_t>(index), line.substr(0, tab), line.substr(tab + 1)};
}

inline bool is_blank(std::string_view s) {
    return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

inline void check_symbols(const std::string& text, std::size_t line_no) {
    for (unsigned char c : text)
        if (std::isspace(c) || std::iscntrl(c))
            throw IngestError("whitespace or control character inside a sequence", line_no);
}

}  // namespace detail

/// Alphabet covering `seen`. Data using only '0'/'1' is read as binary.
inline Alphabet infer_alphabet(const std::set<char>& seen) {
    if (std::all_of(seen.begin(), seen.end(), [](char c) { return c == '0' || c == '1'; })) return Alphabet::binary();
    if (seen.size() < 2)
        throw IngestError("cannot infer an alphabet from a single symbol '" + std::string(1, *seen.begin()) +
                          "'; declare one");
    return Alphabet(std::string(seen.begin(), seen.end()));
}

inline std::vector<FrameRecord> ingest(std::istream& in, DatasetFormat format, const IngestOptions& options = {}) {
    std::vector<detail::RawFrame> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::is_blank(line)) continue;
        auto f = format == DatasetFormat::jsonl ? detail::parse_jsonl_line(line, line_no, raw.size())
                                                : detail::parse_tsv_line(line, line_no, raw.size());
        detail::check_symbols(f.tx, line_no);
        detail::check_symbols(f.rx, line_no);
        if (options.frame_length && f.tx.size() != *options.frame_length)
            throw IngestError("tx has " + std::to_string(f.tx.size()) + " symbols, expected frame length " +
                                  std::to_string(*options.frame_length),
                              line_no);
        raw.push_back(std::move(f));
    }
    if (raw.empty()) return {};

    std::optional<Alphabet> alphabet = options.alphabet;
    if (!alphabet) {
        std::set<char> seen;
        for (const auto& f : raw) {
            seen.insert(f.tx.begin(), f.tx.end());
            seen.insert(f.rx.begin(), f.rx.end());
        }
        alphabet = seen.empty() ? Alphabet::binary() : infer_alphabet(seen);
    }

    std::vector<FrameRecord> out;
    out.reserve(raw.size());
    for (const auto& f : raw) {
        try {
            out.push_back({f.frame_id, SymbolSequence::from_string(*alphabet, f.tx),
                           SymbolSequence::from_string(*alphabet, f.rx)});
        } catch (const IngestError&) {
            throw;
        } catch (const InputError& e) {
            throw IngestError(e.what(), f.line);
        }
    }
    return out;
}

inline std::vector<FrameRecord> ingest_file(const std::filesystem::path& path, DatasetFormat format,
                                            const IngestOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return ingest(in, format, options);
}

inline void write_frames(std::ostream& out, std::span<const FrameRecord> frames, DatasetFormat format) {
    for (const auto& f : frames) {
        if (format == DatasetFormat::jsonl) {
            Json j;
            j["frame_id"] = f.frame_id;
            j["tx"] = f.tx.to_string();
            j["rx"] = f.rx.to_string();
            out << j.dump() << '\n';
        } else {
            out << f.tx.to_string() << '\t' << f.rx.to_string() << '\n';
        }
    }
}

inline std::vector<Frame> to_frames(std::span<const FrameRecord> records) {
    std::vector<Frame> out;
    out.reserve(records.size());
    for (const auto& r : records) out.emplace_back(r.tx, r.rx);
    return out;
}

// ---------------------------------------------------------------------------
// Line-oriented sequence files (one segment per line)
// ---------------------------------------------------------------------------

template <class Parse>
auto read_segments(std::istream& in, Parse parse) {
    std::vector<decltype(parse(std::string_view{}))> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::is_blank(line)) continue;
        try {
            out.push_back(parse(line));
        } catch (const InputError& e) {
            throw IngestError(e.what(), line_no);
        }
    }
    return out;
}

inline std::vector<BinaryErrorSequence> read_binary_segments(std::istream& in) {
    return read_segments(in, [](std::string_view s) { return parse_binary(s); });
}

inline std::vector<SyncErrorSequence> read_sync_segments(std::istream& in) {
    return read_segments(in, [](std::string_view s) { return parse_sync(s); });
}

/// Comma-separated positive integers, e.g. "1,5,10".
inline std::vector<std::size_t> parse_widths(std::string_view text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        std::size_t value = 0;
        auto r = std::from_chars(item.data(), item.data() + item.size(), value);
        if (item.empty() || r.ec != std::errc{} || r.ptr != item.data() + item.size() || value == 0)
            throw InputError("bin widths must be positive integers, got '" + std::string(item) + "'");
        out.push_back(value);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix and model JSON
// ---------------------------------------------------------------------------

struct LabelledMatrix {
    std::vector<std::string> order;
    Matrix a;
    std::vector<bool> unobserved;
};

inline Json matrix_json(const Matrix& a, const std::vector<std::string>& order, const std::vector<bool>& unobserved) {
    Json j;
    j["order"] = order;
    j["A"] = a.to_rows();
    Json flagged = Json::array();
    for (std::size_t k = 0; k < unobserved.size(); ++k)
        if (unobserved[k]) flagged.push_back(order[k]);
    j["flags"]["unobserved_rows"] = flagged;
    return j;
}

inline Json matrix_json(const MarkovModel& m) { return matrix_json(m.transition, m.state_labels, m.unobserved); }

/// Reads {"order": [...], "A": [[...]], "flags": {...}}. "order" defaults to t,s,d,i for 4x4 input.
/// Rows are validated at `tol` and renormalized; declared flags must agree with the zero rows.
inline LabelledMatrix parse_matrix_json(const nlohmann::json& j, double tol = kIngestTolerance) {
    if (!j.is_object()) throw ValidationError("matrix JSON must be an object");
    auto it = j.find("A");
    if (it == j.end() || !it->is_array() || it->empty()) throw ValidationError("matrix JSON needs a non-empty \"A\"");
    std::vector<std::vector<double>> rows;
    for (const auto& row : *it) {
        if (!row.is_array()) throw ValidationError("\"A\" must be an array of rows");
        auto& r = rows.emplace_back();
        for (const auto& v : row) {
            if (!v.is_number()) throw ValidationError("\"A\" entries must be numbers");
            r.push_back(v.get<double>());
        }
    }
    const std::size_t n = rows.size();
    for (const auto& r : rows)
        if (r.size() != n) throw ValidationError("\"A\" must be square");

    LabelledMatrix out;
    if (auto o = j.find("order"); o != j.end()) {
        if (!o->is_array()) throw ValidationError("\"order\" must be an array of labels");
        for (const auto& label : *o) {
            if (!label.is_string()) throw ValidationError("\"order\" labels must be strings");
            out.order.push_back(label.get<std::string>());
        }
        if (out.order.size() != n) throw ValidationError("\"order\" length does not match \"A\"");
        if (std::set<std::string>(out.order.begin(), out.order.end()).size() != n)
            throw ValidationError("\"order\" has duplicate labels");
    } else if (n == kSyncStateCount) {
        out.order = ids_labels();
    } else {
        for (std::size_t k = 0; k < n; ++k) out.order.push_back("S" + std::to_string(k + 1));
    }

    auto v = validate_transition_matrix(Matrix::from_rows(rows), tol);
    out.a = std::move(v.matrix);
    out.unobserved = std::move(v.unobserved);

    if (auto f = j.find("flags"); f != j.end() && f->contains("unobserved_rows")) {
        std::vector<bool> declared(n, false);
        for (const auto& x : f->at("unobserved_rows")) {
            std::size_t idx = n;
            if (x.is_number_unsigned()) {
                idx = x.get<std::size_t>();
            } else if (x.is_string()) {
                auto pos = std::find(out.order.begin(), out.order.end(), x.get<std::string>());
                idx = static_cast<std::size_t>(pos - out.order.begin());
            }
            if (idx >= n) throw ValidationError("unknown row in \"unobserved_rows\": " + x.dump());
            declared[idx] = true;
        }
        if (declared != out.unobserved)
            throw ValidationError("\"unobserved_rows\" does not match the all-zero rows of \"A\"");
    }
    return out;
}

/// Permutes a labelled 4x4 matrix into canonical t,s,d,i order and builds the IDS model.
inline MarkovModel ids_model_from(const LabelledMatrix& lm) {
    const auto canon = ids_labels();
    if (lm.order.size() != canon.size() || !std::is_permutation(lm.order.begin(), lm.order.end(), canon.begin()))
        throw ValidationError("IDS matrix order must be a permutation of t,s,d,i");
    std::array<std::size_t, 4> src{};
    for (std::size_t k = 0; k < 4; ++k)
        src[k] = static_cast<std::size_t>(std::find(lm.order.begin(), lm.order.end(), canon[k]) - lm.order.begin());
    Matrix a(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) a(i, j) = lm.a(src[i], src[j]);
    return make_ids_model(std::move(a));
}

inline std::string_view model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::fritchman: return "fritchman";
        case ModelKind::ids: return "ids";
        case ModelKind::general: break;
    }
    return "general";
}

inline Json model_json(const MarkovModel& m) {
    Json j;
    j["kind"] = model_kind_name(m.kind);
    const Json a = matrix_json(m);
    for (auto it = a.begin(); it != a.end(); ++it) j[it.key()] = *it;
    if (m.good_count) j["good_states"] = *m.good_count;
    j["emission"]["symbols"] = m.emission_labels;
    j["emission"]["B"] = m.emission.to_rows();
    return j;
}

inline Json fit_report_json(const FitReport& r) {
    Json j = model_json(r.model);
    j["initial"] = r.initial;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["log_likelihood_trace"] = r.log_likelihood_trace;
    return j;
}

// ---------------------------------------------------------------------------
// Simulation configs: {"model": "dm"|"iid"|"markov", "params": {...}, "n": ..., "seed": ...}
// ---------------------------------------------------------------------------

struct SimulationConfig {
    std::variant<DmParams, IidParams, MarkovModel> params;
    std::size_t n = 0;
    Seed seed;
    /// DM only: alphabet of the random transmitted sequence.
    Alphabet alphabet = Alphabet::binary();

    std::string_view model_name() const {
        switch (params.index()) {
            case 0: return "dm";
            case 1: return "iid";
        }
        return "markov";
    }
};

namespace detail {

inline double number_field(const nlohmann::json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_number()) throw ValidationError(std::string("params need a number \"") + name + "\"");
    return it->get<double>();
}

inline std::size_t count_field(const nlohmann::json& j, const char* name, std::optional<std::size_t> fallback = {}) {
    auto it = j.find(name);
    if (it == j.end()) {
        if (fallback) return *fallback;
        throw ValidationError(std::string("missing \"") + name + "\"");
    }
    if (!it->is_number_unsigned()) throw ValidationError(std::string("\"") + name + "\" must be a non-negative integer");
    return it->get<std::size_t>();
}

}  // namespace detail

inline constexpr std::size_t kDefaultMaxInsertions = 10;

namespace detail {
inline SimulationConfig parse_simulation_config_unchecked(const nlohmann::json& j);
}

inline SimulationConfig parse_simulation_config(const nlohmann::json& j) {
    try {
        return detail::parse_simulation_config_unchecked(j);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("simulation config: ") + e.what());
    }
}

inline SimulationConfig detail::parse_simulation_config_unchecked(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("simulation config must be a JSON object");
    auto model = j.value("model", std::string{});
    if (!j.contains("params") || !j["params"].is_object()) throw ValidationError("simulation config needs \"params\"");
    const auto& p = j["params"];
    SimulationConfig cfg;
    cfg.n = detail::count_field(j, "n");
    cfg.seed = Seed{detail::count_field(j, "seed", 0)};
    if (model == "dm") {
        DmParams dm{detail::number_field(p, "p_i"), detail::number_field(p, "p_d"), detail::number_field(p, "p_s"),
                    detail::count_field(p, "max_insertions", kDefaultMaxInsertions)};
        dm.validate();
        cfg.params = dm;
        if (p.contains("alphabet")) cfg.alphabet = Alphabet(p["alphabet"].get<std::string>());
    } else if (model == "iid") {
        IidParams iid{detail::number_field(p, "p_e")};
        iid.validate();
        cfg.params = iid;
    } else if (model == "markov") {
        auto lm = parse_matrix_json(p);
        if (p.contains("good_states")) {
            cfg.params = make_fritchman_model(std::move(lm.a), detail::count_field(p, "good_states"));
        } else {
            cfg.params = ids_model_from(lm);
        }
    } else {
        throw ValidationError("simulation \"model\" must be dm, iid or markov");
    }
    return cfg;
}

inline Json simulation_config_json(const SimulationConfig& cfg) {
    Json j;
    j["model"] = cfg.model_name();
    Json p = Json::object();
    if (auto* dm = std::get_if<DmParams>(&cfg.params)) {
        p["p_i"] = dm->p_i;
        p["p_d"] = dm->p_d;
        p["p_s"] = dm->p_s;
        p["max_insertions"] = dm->max_insertions;
        p["alphabet"] = cfg.alphabet.symbols();
    } else if (auto* iid = std::get_if<IidParams>(&cfg.params)) {
        p["p_e"] = iid->p_e;
    } else {
        const auto& m = std::get<MarkovModel>(cfg.params);
        p = matrix_json(m);
        if (m.good_count) p["good_states"] = *m.good_count;
    }
    j["params"] = p;
    j["n"] = cfg.n;
    j["seed"] = cfg.seed.value;
    return j;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Columns m,count_exact,count_at_least,survival; closes with a zero row at max(m)+1.
inline void write_run_csv(std::ostream& out, const RunDistribution& runs) {
    out << "m,count_exact,count_at_least,survival\n";
    for (const auto& [m, count] : runs.counts())
        out << m << ',' << count << ',' << runs.count_at_least(m) << ',' << format_double(runs.survival(m)) << '\n';
    out << runs.max_length() + 1 << ",0,0,0\n";
}

struct GofRow {
    std::string comparison;
    std::size_t bin_width = 0;
    std::optional<GofReport> report;
    std::string note;  // why the row is inconclusive
};

inline std::string_view verdict_name(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

inline std::string_view verdict_name(const GofRow& row) {
    return row.report ? verdict_name(row.report->verdict) : std::string_view("inconclusive");
}

inline void write_gof_csv(std::ostream& out, std::span<const GofRow> rows) {
    out << "comparison,bin_width,chi2,p_value,df,verdict,mse,k\n";
    for (const auto& row : rows) {
        out << row.comparison << ',' << row.bin_width << ',';
        if (row.report) {
            const auto& r = *row.report;
            out << format_double(r.chi2) << ',' << format_double(r.p_value) << ',' << r.df << ','
                << verdict_name(r.verdict) << ',' << format_double(r.mse) << ',' << r.k << '\n';
        } else {
            out << ",,,inconclusive,,\n";
        }
    }
}

inline Json gof_json(std::span<const GofRow> rows) {
    Json arr = Json::array();
    for (const auto& row : rows) {
        Json j;
        j["comparison"] = row.comparison;
        j["bin_width"] = row.bin_width;
        if (row.report) {
            const auto& r = *row.report;
            j["chi2"] = r.chi2;
            j["p_value"] = r.p_value;
            j["df"] = r.df;
            j["verdict"] = verdict_name(r.verdict);
            j["mse"] = r.mse;
            j["k"] = r.k;
        } else {
            j["verdict"] = "inconclusive";
            j["note"] = row.note;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

namespace detail {

inline std::string dot_id(const std::string& label) {
    std::string out = "\"";
    for (char c : label) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace detail

/// One node per state, one edge per nonzero transition labelled to 4 decimals.
inline void write_dot(std::ostream& out, const MarkovModel& m) {
    out << "digraph memsync {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (std::size_t i = 0; i < m.n_states(); ++i) {
        out << "  " << detail::dot_id(m.state_labels[i]);
        if (m.unobserved[i]) out << " [style=dashed]";
        out << ";\n";
    }
    for (std::size_t i = 0; i < m.n_states(); ++i)
        for (std::size_t j = 0; j < m.n_states(); ++j)
            if (m.transition(i, j) != 0.0)
                out << "  " << detail::dot_id(m.state_labels[i]) << " -> " << detail::dot_id(m.state_labels[j])
                    << " [label=\"" << format_fixed(m.transition(i, j), 4) << "\"];\n";
    out << "}\n";
}

/// Row-major matrix with a header row and a leading column of state labels.
inline void write_heatmap_csv(std::ostream& out, const MarkovModel& m) {
    for (const auto& label : m.state_labels) out << ',' << label;
    out << '\n';
    for (std::size_t i = 0; i < m.n_states(); ++i) {
        out << m.state_labels[i];
        for (double v : m.transition.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

template <class Writer>
std::string to_text(Writer&& write) {
    std::ostringstream ss;
    write(ss);
    return ss.str();
}

}  // namespace memsync
