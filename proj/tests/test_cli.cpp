#include <gtest/gtest.h>

#include <wormsim/trace_io.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace wormsim;
namespace fs = std::filesystem;

namespace {

const std::string kCli = WORMSIM_CLI;
const std::string kConfigs = WORMSIM_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("wormsim_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Run {
    int code;
    std::string output;
};

Run run(const std::string& args, const fs::path& dir) {
    auto log = dir / "stdout.txt";
    std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string cfg(const std::string& name) { return "--config " + kConfigs + "/" + name; }

}  // namespace

TEST(Cli, RunOobReportsTwoUnits) {
    auto dir = scratch("oob");
    auto r = run("run-oob " + cfg("fig5b.yaml") + " --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    auto summary = slurp(dir / "summary.txt");
    EXPECT_NE(summary.find("wormhole path flow: 2"), std::string::npos) << summary;
    EXPECT_TRUE(fs::exists(dir / "rates.svg"));
    auto t = read_trace_table((dir / "trace.csv").string());
    int r_cols = 0;
    for (const auto& c : t.columns) r_cols += c.rfind("r_s", 0) == 0;
    EXPECT_EQ(r_cols, 6);
    EXPECT_EQ(t.columns.front(), "t");
    EXPECT_EQ(t.columns.back(), "x_compromise");
    EXPECT_EQ(t.find("detect_9") >= 0, true);
}

TEST(Cli, HeaderOrder) {
    auto dir = scratch("header");
    ASSERT_EQ(run("run-oob " + cfg("fig5b.yaml") + " --horizon 0 --no-plots --out " + dir.string(), dir).code, 0);
    auto t = read_trace_table((dir / "trace.csv").string());
    std::vector<std::string> head(t.columns.begin(), t.columns.begin() + 14);
    EXPECT_EQ(head, (std::vector<std::string>{"t", "r_s1_p1", "r_s1_p2", "r_s1_p3", "r_s2_p1", "r_s2_p2", "r_s2_p3",
                                              "q_s1_p1", "q_s1_p2", "q_s1_p3", "q_s2_p1", "q_s2_p2", "q_s2_p3",
                                              "rl_4"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_FALSE(fs::exists(dir / "rates.svg"));
}

TEST(Cli, PlantRunAddsFourColumns) {
    auto base = scratch("plant_base"), dir = scratch("plant");
    ASSERT_EQ(run("run-oob " + cfg("fig7b.yaml") + " --horizon 3 --no-plots --out " + base.string(), base).code, 0);
    auto r = run("run-plant " + cfg("fig7b.yaml") + " --horizon 3 --no-plots --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    auto a = read_trace_table((base / "trace.csv").string());
    auto b = read_trace_table((dir / "trace.csv").string());
    ASSERT_EQ(b.columns.size(), a.columns.size() + 4);
    std::vector<std::string> tail(b.columns.end() - 4, b.columns.end());
    EXPECT_EQ(tail, (std::vector<std::string>{"x_plant", "u", "tau", "dropped"}));
}

TEST(Cli, OracleSplitsParallelPathsEvenly) {
    auto dir = scratch("oracle");
    auto r = run("oracle " + cfg("two_parallel.yaml") + " --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    auto t = read_trace_table((dir / "trace.csv").string());
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_NEAR(t.rows[0][t.index("r_s1_p1")], 2.0, 1e-6);
    EXPECT_NEAR(t.rows[0][t.index("r_s1_p2")], 2.0, 1e-6);
}

TEST(Cli, MalformedKeyExitsOneWithLine) {
    auto dir = scratch("badkey");
    auto text = slurp(kConfigs + "/two_parallel.yaml");
    auto pos = text.find("sim:");
    ASSERT_NE(pos, std::string::npos);
    text.insert(pos + 4, "\n  stepsize: 0.1");
    auto path = dir / "bad.yaml";
    std::ofstream(path) << text;
    auto r = run("run-joint --config " + path.string() + " --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("line "), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("stepsize"), std::string::npos) << r.output;
}

TEST(Cli, BrokenYamlAndMissingFileExitOne) {
    auto dir = scratch("broken");
    auto path = dir / "broken.yaml";
    std::ofstream(path) << "name: x\nnetwork: [1, 2\n";
    auto r = run("run-joint --config " + path.string() + " --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("line "), std::string::npos) << r.output;
    EXPECT_EQ(run("run-joint --config " + (dir / "nope.yaml").string(), dir).code, 1);
    EXPECT_EQ(run("frobnicate", dir).code, 1);
}

TEST(Cli, WrongScenarioKindExitsOne) {
    auto dir = scratch("kind");
    EXPECT_EQ(run("run-ib " + cfg("fig5b.yaml") + " --out " + dir.string(), dir).code, 1);
    EXPECT_EQ(run("run-plant " + cfg("fig5b.yaml") + " --out " + dir.string(), dir).code, 1);
    EXPECT_EQ(run("run-oob " + cfg("fig5b.yaml") + " --dt -1 --out " + dir.string(), dir).code, 1);
}

TEST(Cli, AuditPassesOnOobAndFailsOnReroute) {
    auto dir = scratch("audit");
    ASSERT_EQ(run("run-oob " + cfg("fig5b.yaml") + " --no-plots --out " + dir.string(), dir).code, 0);
    auto r = run("audit " + cfg("fig5b.yaml") + " --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 0) << r.output;
    auto audit = slurp(dir / "audit.csv");
    EXPECT_EQ(audit.rfind("block,violations,max_violation,min_storage,min_margin,tol,passed\n", 0), 0u) << audit;
    EXPECT_NE(audit.find("\nflow,0,"), std::string::npos) << audit;
    auto ib = scratch("audit_ib");
    ASSERT_EQ(run("run-ib " + cfg("fig6b.yaml") + " --horizon 1 --no-plots --out " + ib.string(), ib).code, 0);
    EXPECT_EQ(run("audit " + cfg("fig6b.yaml") + " --out " + ib.string(), ib).code, 3);
}

TEST(Cli, AuditRejectsForeignTrace) {
    auto dir = scratch("foreign");
    ASSERT_EQ(run("run-oob " + cfg("fig5b.yaml") + " --horizon 1 --no-plots --out " + dir.string(), dir).code, 0);
    EXPECT_EQ(run("audit " + cfg("two_parallel.yaml") + " --trace " + (dir / "trace.csv").string() + " --out " +
                      dir.string(),
                  dir)
                  .code,
              3);
}

TEST(Cli, BetaWritesCurve) {
    auto dir = scratch("beta");
    auto r = run("beta " + cfg("ib_beta.yaml") + " --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    auto t = read_trace_table((dir / "beta.csv").string());
    EXPECT_EQ(t.columns, (std::vector<std::string>{"x", "beta", "se", "fit"}));
    EXPECT_GE(t.rows.size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "beta.svg"));
}

TEST(Cli, IdenticalRunsAreByteIdentical) {
    auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    const std::string args = "run-ib " + cfg("fig6b.yaml") + " --horizon 5 --no-plots --seed 3 --out ";
    ASSERT_EQ(run(args + a.string(), a).code, 0);
    ASSERT_EQ(run(args + b.string(), b).code, 0);
    EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
    ASSERT_EQ(run("run-ib " + cfg("fig6b.yaml") + " --horizon 5 --no-plots --seed 4 --out " + c.string(), c).code, 0);
    EXPECT_NE(slurp(a / "trace.csv"), slurp(c / "trace.csv"));
}

TEST(TraceIo, RoundTripIsExact) {
    auto as = assemble(fixtures::canonical_ib(true));
    auto tr = simulate(as, 2.0, 0.01);
    std::stringstream ss;
    write_trace(ss, tr);
    auto back = trace_from_table(as, read_trace_table(ss));
    ASSERT_EQ(back.rows.size(), tr.rows.size());
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        EXPECT_EQ(back.rows[k].t, tr.rows[k].t);
        EXPECT_EQ(back.rows[k].r, tr.rows[k].r);
        EXPECT_EQ(back.rows[k].q, tr.rows[k].q);
        EXPECT_EQ(back.rows[k].delay, tr.rows[k].delay);
        EXPECT_EQ(back.rows[k].detect, tr.rows[k].detect);
    }
}

TEST(TraceIo, BadCellsRejected) {
    std::stringstream a("t,x\n0,abc\n"), b("t,x\n0\n"), c("");
    EXPECT_THROW(read_trace_table(a), AuditError);
    EXPECT_THROW(read_trace_table(b), AuditError);
    EXPECT_THROW(read_trace_table(c), AuditError);
}

TEST(TraceIo, UnwritablePathIsIoError) {
    SimTrace tr = empty_trace(assemble(fixtures::canonical_oob()));
    EXPECT_THROW(emit_trace(tr, "/nonexistent_dir_for_wormsim/trace.csv"), IoError);
}
