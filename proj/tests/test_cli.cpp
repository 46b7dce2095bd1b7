// Runs the pqtable executable and checks its exit codes and JSON output.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int status = -1;
    std::vector<json> lines;
};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pqtable_cli";
    fs::create_directories(dir);
    return dir / name;
}

CliRun run(const std::string& args) {
    const std::string cmd = std::string(PQTABLE_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    CliRun r;
    if (pipe == nullptr) {
        return r;
    }
    std::string out;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) {
        out += buf;
    }
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::istringstream lines(out);
    for (std::string line; std::getline(lines, line);) {
        if (!line.empty()) {
            r.lines.push_back(json::parse(line));
        }
    }
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// N distinct points on a grid, written as fvecs.
std::vector<std::vector<float>> write_grid(const fs::path& p, std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(5);
    std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
    std::ofstream out(p, std::ios::binary);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            rows[i][j] = static_cast<float>(i) * (1.0f + static_cast<float>(j)) + static_cast<float>(rng() % 100) * 1e-3f;
        }
        const std::int32_t d = static_cast<std::int32_t>(dim);
        out.write(reinterpret_cast<const char*>(&d), 4);
        out.write(reinterpret_cast<const char*>(rows[i].data()), static_cast<std::streamsize>(4 * dim));
    }
    return rows;
}

// Each row is its own nearest neighbour; written as a one-column ivecs.
void write_identity_gt(const fs::path& p, std::size_t n) {
    std::ofstream out(p, std::ios::binary);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(n); ++i) {
        const std::int32_t one = 1;
        out.write(reinterpret_cast<const char*>(&one), 4);
        out.write(reinterpret_cast<const char*>(&i), 4);
    }
}

}  // namespace

TEST(Cli, MissingFileExitsWithTwo) {
    const CliRun r = run("train --data /nonexistent/base.fvecs --out " + scratch("x.pqcb").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_TRUE(r.lines.empty());
}

TEST(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run("").status, 2);
    EXPECT_EQ(run("train --synthetic clustered").status, 2);
    EXPECT_EQ(run("query --index a --queries b --mode fast").status, 2);
    EXPECT_EQ(run("train --out " + scratch("y.pqcb").string()).status, 2);
}

TEST(Cli, TrainAndBuildAreDeterministic) {
    const std::string data = "--synthetic clustered --n 3000 --dim 16";
    const auto cb1 = scratch("det1.pqcb");
    const auto cb2 = scratch("det2.pqcb");
    const CliRun t1 = run("train " + data + " --m 4 --k 64 --iters 5 --out " + cb1.string());
    const CliRun t2 = run("train " + data + " --m 4 --k 64 --iters 5 --out " + cb2.string());
    ASSERT_EQ(t1.status, 0);
    ASSERT_EQ(t2.status, 0);
    EXPECT_EQ(slurp(cb1), slurp(cb2));
    ASSERT_EQ(t1.lines.size(), 1u);
    EXPECT_EQ(t1.lines[0]["B"], 24);
    EXPECT_EQ(t1.lines[0]["quantization_error"], t2.lines[0]["quantization_error"]);

    const auto i1 = scratch("det1.pqtb");
    const auto i2 = scratch("det2.pqtb");
    const CliRun b1 = run("build --codebook " + cb1.string() + " " + data + " --out " + i1.string());
    const CliRun b2 = run("build --codebook " + cb1.string() + " " + data + " --out " + i2.string());
    ASSERT_EQ(b1.status, 0);
    ASSERT_EQ(b2.status, 0);
    EXPECT_EQ(slurp(i1), slurp(i2));
    EXPECT_EQ(b1.lines[0]["T_source"], "planned");
    EXPECT_EQ(b1.lines[0]["T"], 2);

    const CliRun forced = run("build --codebook " + cb1.string() + " " + data + " --tables 1 --out " + i2.string());
    ASSERT_EQ(forced.status, 0);
    EXPECT_EQ(forced.lines[0]["T"], 1);
    EXPECT_EQ(forced.lines[0]["T_source"], "override");
}

TEST(Cli, SelfRetrievalAndModesAgree) {
    const auto base = scratch("grid.fvecs");
    const auto gt = scratch("grid.ivecs");
    const auto cb = scratch("grid.pqcb");
    const auto idx = scratch("grid.pqtb");
    write_grid(base, 256, 4);
    write_identity_gt(gt, 256);
    // K = N: every sub-vector becomes a codeword, so each point quantizes to itself.
    ASSERT_EQ(run("train --data " + base.string() + " --m 2 --k 256 --iters 3 --out " + cb.string()).status, 0);
    ASSERT_EQ(run("build --codebook " + cb.string() + " --data " + base.string() + " --out " + idx.string()).status,
              0);
    const std::string q = "query --index " + idx.string() + " --queries " + base.string() + " --gt " +
                          gt.string() + " --topk 10";
    const CliRun table = run(q + " --mode table");
    const CliRun linear = run(q + " --mode linear");
    ASSERT_EQ(table.status, 0);
    ASSERT_EQ(linear.status, 0);
    EXPECT_EQ(table.lines[0]["recall"]["recall@1"], 1.0);
    EXPECT_EQ(table.lines[0]["recall"], linear.lines[0]["recall"]);
    EXPECT_FALSE(table.lines[0]["recall"].contains("recall@100"));
    EXPECT_TRUE(table.lines[0].contains("mean_hashings"));
    EXPECT_FALSE(linear.lines[0].contains("mean_hashings"));
}

TEST(Cli, QueryDimensionMismatch) {
    const auto base = scratch("dim4.fvecs");
    const auto other = scratch("dim8.fvecs");
    const auto cb = scratch("dim4.pqcb");
    const auto idx = scratch("dim4.pqtb");
    write_grid(base, 256, 4);
    write_grid(other, 10, 8);
    ASSERT_EQ(run("train --data " + base.string() + " --m 2 --k 16 --out " + cb.string()).status, 0);
    ASSERT_EQ(run("build --codebook " + cb.string() + " --data " + base.string() + " --out " + idx.string()).status,
              0);
    EXPECT_EQ(run("query --index " + idx.string() + " --queries " + other.string()).status, 2);
    EXPECT_EQ(run("query --index " + cb.string() + " --queries " + base.string()).status, 2);
}

TEST(Cli, AnalyzePlansAndHandlesEmpty) {
    const CliRun r = run("analyze --bits 64 --sizes 1e6,0,1");
    ASSERT_EQ(r.status, 0);
    ASSERT_EQ(r.lines.size(), 3u);
    EXPECT_EQ(r.lines[0]["T_star"], 4);
    EXPECT_TRUE(r.lines[1]["r"].is_null());
    EXPECT_TRUE(r.lines[1]["N_nnslot"].is_null());
    EXPECT_TRUE(r.lines[1]["T_star"].is_null());
    EXPECT_EQ(r.lines[1]["p"], 0.0);
    EXPECT_TRUE(r.lines[2]["T_star"].is_null());
    EXPECT_EQ(run("analyze --sizes 1.5").status, 2);
}

TEST(Cli, AnalyzeSimulationMatchesClosedForm) {
    const CliRun r = run("analyze --bits 12 --sizes 4096 --simulate --trials 1000000");
    ASSERT_EQ(r.status, 0);
    const double p = r.lines[0]["p"];
    const double sim = r.lines[0]["simulated"]["p"];
    EXPECT_LT(std::abs(sim - p) / p, 0.01);
    const CliRun huge = run("analyze --bits 32 --sizes 1e9 --simulate --trials 10");
    ASSERT_EQ(huge.status, 0);
    EXPECT_TRUE(huge.lines[0]["simulated"].is_null());
}

TEST(Cli, BenchReportsBothMethods) {
    const CliRun r = run("bench --synthetic clustered --n 3000 --dim 16 --sizes 2000 --bits 32 --topk 1,10 "
                      "--nq 10 --train 2000 --iters 3");
    ASSERT_EQ(r.status, 0);
    ASSERT_EQ(r.lines.size(), 2u);
    for (const json& line : r.lines) {
        EXPECT_EQ(line["table"]["recall"], line["linear"]["recall"]);
        EXPECT_GT(line["speedup"].get<double>(), 0.0);
    }
    EXPECT_EQ(r.lines[1]["L"], 10);
}

TEST(Cli, EmptyBenchSweep) {
    const CliRun r = run("bench --synthetic clustered --sizes \"\"");
    EXPECT_EQ(r.status, 0);
    EXPECT_TRUE(r.lines.empty());
}
