#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"

namespace memsync {
namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code;
    std::string out, err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "memsync");
    std::ostringstream out, err;
    int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("memsync_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        write_text_file(dir_ / name, content);
        return path(name);
    }

    fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"align"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"report", "--input", "x", "--category", "bogus"}).code, 1);
}

TEST_F(CliTest, InputErrorsExitOne) {
    auto missing = run({"align", "--input", path("nope.jsonl")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("nope.jsonl"), std::string::npos);

    auto bad = write("bad.jsonl", "{\"tx\":\"01\",\"rx\":\"01\"}\n{\"tx\":\"01\"}\n");
    auto r = run({"align", "--input", bad});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 2"), std::string::npos);

    auto strict = write("strict.tsv", "0101\t0101\n01\t01\n");
    EXPECT_EQ(run({"align", "--input", strict, "--format", "tsv", "--frame-length", "4"}).code, 1);
    EXPECT_EQ(run({"report", "--input", strict, "--format", "tsv"}).code, 1);  // no --out
    EXPECT_EQ(run({"gof", "--input", strict, "--expected", strict, "--widths", "1,0"}).code, 1);
}

TEST_F(CliTest, AnalysisErrorsExitTwo) {
    // t can reach s, but s has no outgoing transitions.
    auto cfg = write("cfg.json",
                     R"({"model":"markov","params":{"A":[[0.5,0.5,0,0],[0,0,0,0],[1,0,0,0],[1,0,0,0]]},"n":100,"seed":1})");
    auto r = run({"simulate", "--config", cfg});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("analysis error"), std::string::npos);
}

TEST_F(CliTest, AlignProbsBinarizeRunsChain) {
    auto data = write("d.tsv", "00110\t0110\n1010\t10110\n");
    auto aligned = run({"align", "--input", data, "--format", "tsv"});
    ASSERT_EQ(aligned.code, 0) << aligned.err;
    auto paths = write("paths.txt", aligned.out);
    std::istringstream in(aligned.out);
    auto segs = read_sync_segments(in);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(count_states(segs[0]).consumed(), 5u);
    EXPECT_EQ(count_states(segs[1]).produced(), 5u);

    auto probs = run({"probs", "--input", data, "--format", "tsv"});
    ASSERT_EQ(probs.code, 0);
    EXPECT_NE(probs.out.find("frames 2\n"), std::string::npos);

    auto bin = run({"binarize", "--input", paths, "--category", "sync"});
    ASSERT_EQ(bin.code, 0);
    std::string expected;
    for (const auto& s : segs) expected += format_binary(binarize(s, ErrorCategory::sync_error)) + "\n";
    EXPECT_EQ(bin.out, expected);

    auto runs = run({"runs", "--input", write("b.txt", "00100001000010000010\n")});
    ASSERT_EQ(runs.code, 0);
    EXPECT_EQ(runs.out, "m,count_exact,count_at_least,survival\n1,1,4,1\n4,2,3,0.75\n5,1,1,0.25\n6,0,0,0\n");
    auto er = run({"runs", "--input", path("b.txt"), "--kind", "er"});
    EXPECT_EQ(er.out, "m,count_exact,count_at_least,survival\n1,4,4,1\n2,0,0,0\n");
}

TEST_F(CliTest, SimulateThenReport) {
    auto cfg = write("dm.json", R"({"model":"dm","params":{"p_i":0.01,"p_d":0.01,"p_s":0.02,"max_insertions":2},)"
                                R"("n":20000,"seed":4})");
    auto sim = run({"simulate", "--config", cfg, "--frame-length", "500", "--out", path("sim")});
    ASSERT_EQ(sim.code, 0) << sim.err;
    auto frames = ingest_file(path("sim/frames.jsonl"), DatasetFormat::jsonl);
    ASSERT_EQ(frames.size(), 40u);
    EXPECT_EQ(frames[0].tx.size(), 500u);
    EXPECT_TRUE(fs::exists(path("sim/truth.txt")));

    auto again = run({"simulate", "--config", cfg, "--frame-length", "500"});
    EXPECT_EQ(again.out, read_text_file(path("sim/frames.jsonl")));
    auto reseeded = run({"simulate", "--config", cfg, "--frame-length", "500", "--seed", "5"});
    EXPECT_NE(reseeded.out, again.out);

    const std::vector<std::string> report = {"report",       "--input", path("sim/frames.jsonl"), "--seed", "3",
                                             "--replicates", "2",       "--max-iters",             "30"};
    auto a = report, b = report;
    a.insert(a.end(), {"--out", path("r1")});
    b.insert(b.end(), {"--out", path("r2")});
    auto ra = run(a), rb = run(b);
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0);
    EXPECT_EQ(ra.out, rb.out);
    EXPECT_EQ(ra.out.rfind("comparison,bin_width,chi2,p_value,df,verdict,mse,k\n", 0), 0u);
    for (const auto& e : fs::directory_iterator(path("r1")))
        EXPECT_EQ(read_text_file(e.path()), read_text_file(fs::path(path("r2")) / e.path().filename()))
            << e.path().filename();
}

TEST_F(CliTest, SimulateBinaryModels) {
    auto iid = write("iid.json", R"({"model":"iid","params":{"p_e":0.25},"n":1000,"seed":2})");
    auto r = run({"simulate", "--config", iid, "--frame-length", "300"});
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    auto segs = read_binary_segments(in);
    ASSERT_EQ(segs.size(), 4u);
    EXPECT_EQ(segs[3].size(), 100u);

    auto fr = write("fr.json", R"({"model":"markov","params":{"A":[[0,1],[1,0]],"good_states":1},"n":6,"seed":2})");
    EXPECT_EQ(run({"simulate", "--config", fr}).out, "010101\n");
    auto ids = write("ids.json",
                     R"({"model":"markov","params":{"A":[[0,1,0,0],[1,0,0,0],[1,0,0,0],[0,0,0,0]]},"n":5,"seed":2})");
    EXPECT_EQ(run({"simulate", "--config", ids}).out, "tstst\n");
}

TEST_F(CliTest, FitModels) {
    auto paths = write("paths.txt", "ttst\n");
    auto m = run({"fit", "--model", "markov4", "--input", paths});
    ASSERT_EQ(m.code, 0) << m.err;
    auto j = nlohmann::json::parse(m.out);
    EXPECT_EQ(j["A"][0], nlohmann::json({0.5, 0.5, 0.0, 0.0}));
    EXPECT_EQ(j["flags"]["unobserved_rows"], nlohmann::json({"d", "i"}));

    EXPECT_EQ(run({"fit", "--model", "markov4", "--input", paths, "--out", path("m4")}).code, 0);
    EXPECT_TRUE(fs::exists(path("m4/markov4.dot")));
    EXPECT_TRUE(fs::exists(path("m4/markov4_heatmap.csv")));

    auto bin = write("bin.txt", "0001000100000011000001\n000001\n");
    auto f = run({"fit", "--input", bin, "--max-iters", "20"});
    ASSERT_EQ(f.code, 0) << f.err;
    auto fj = nlohmann::json::parse(f.out);
    EXPECT_EQ(fj["kind"], "fritchman");
    EXPECT_FALSE(fj["log_likelihood_trace"].empty());

    auto iid = nlohmann::json::parse(run({"fit", "--model", "iid", "--input", bin}).out);
    EXPECT_DOUBLE_EQ(iid["p_e"].get<double>(), 6.0 / 28.0);
    auto dm = nlohmann::json::parse(run({"fit", "--model", "dm", "--input", write("p.txt", "tsid\ntttt\n")}).out);
    EXPECT_DOUBLE_EQ(dm["p_s"].get<double>(), 0.125);
}

TEST_F(CliTest, GofIdenticalInputs) {
    std::string seq;
    auto rng = rng_stream(Seed{3}, 0);
    for (int k = 0; k < 5000; ++k) seq.push_back(rng.bernoulli(0.2) ? '1' : '0');
    auto f = write("s.txt", seq + "\n");
    auto r = run({"gof", "--input", f, "--expected", f, "--widths", "1,5"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string header, row;
    std::getline(lines, header);
    EXPECT_EQ(header, "comparison,bin_width,chi2,p_value,df,verdict,mse,k");
    int rows = 0;
    while (std::getline(lines, row)) {
        ++rows;
        EXPECT_NE(row.find(",0,1,"), std::string::npos) << row;
        EXPECT_NE(row.find("accept"), std::string::npos);
    }
    EXPECT_EQ(rows, 2);
}

}  // namespace
}  // namespace memsync
