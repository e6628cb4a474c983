#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "zibcop/io.hpp"
#include "zibcop/simulate.hpp"

namespace fs = std::filesystem;
using namespace zibcop;

namespace {

struct Run {
  int code;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = fs::temp_directory_path() / ("zibcop_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args) {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(ZIBCOP_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_fixture(const PlantedTable& t, const std::string& name) {
  const fs::path p = scratch() / name;
  std::ofstream os(p);
  os << "sample";
  for (const auto& s : t.taxa) os << '\t' << s;
  os << '\n';
  for (Eigen::Index l = 0; l < t.x.rows(); ++l) {
    os << "s" << l;
    for (Eigen::Index c = 0; c < t.x.cols(); ++c) os << '\t' << fmt(t.x(l, c));
    os << '\n';
  }
  return p;
}

}  // namespace

TEST(Cli, SimulateIsByteIdenticalAcrossRunsAndThreads) {
  const fs::path a = scratch() / "sim_a", b = scratch() / "sim_b", c = scratch() / "sim_c";
  ASSERT_EQ(run("simulate --preset paper-grid --reps 5 --seed 1 --out-dir " + a.string()).code, 0);
  ASSERT_EQ(run("simulate --preset paper-grid --reps 5 --seed 1 --out-dir " + b.string()).code, 0);
  ASSERT_EQ(run("simulate --preset paper-grid --reps 5 --seed 1 --threads 3 --out-dir " + c.string()).code, 0);
  for (const char* f : {"study.tsv", "study.json"}) {
    EXPECT_FALSE(slurp(a / f).empty());
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
  }
  auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
  m["flags"].erase("out_dir");
  mb["flags"].erase("out_dir");
  EXPECT_EQ(m, mb);
  EXPECT_EQ(m["subcommand"], "simulate");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["flags"]["reps"], 5);
}

TEST(Cli, MissingInputIsDataError) {
  const auto r = run("network --input /no/such/table.tsv --out-dir " + (scratch() / "x").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/table.tsv"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("simulate --preset nope").code, 1);
  EXPECT_EQ(run("network --input x.tsv --alpha 2").code, 1);
  EXPECT_EQ(run("simulate --reps 0 --out-dir " + (scratch() / "y").string()).code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, MalformedTableIsDataError) {
  const fs::path p = scratch() / "bad.tsv";
  std::ofstream(p) << "sample\tA\tB\ns1\t1\tx\n";
  const auto r = run("network --input " + p.string() + " --out-dir " + (scratch() / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 2, column 3"), std::string::npos) << r.err;
}

TEST(Cli, NetworkRecoversPlantedPairs) {
  const auto t = sample_planted_table(150, 6, 2, 4.0, 21);
  const fs::path in = write_fixture(t, "planted.tsv");
  const fs::path out = scratch() / "net";
  ASSERT_EQ(run("network --input " + in.string() + " --normalize none --alpha 0.01 --clusters 2 --null-reps 200 " +
                "--seed 3 --out-dir " + out.string())
                .code,
            0);
  const std::string edges = slurp(out / "edges.tsv");
  EXPECT_NE(edges.find("taxon_01\ttaxon_02\t"), std::string::npos) << edges;
  EXPECT_NE(edges.find("taxon_03\ttaxon_04\t"), std::string::npos) << edges;
  for (const char* f : {"pairs.tsv", "adjacency.tsv", "nodes.tsv", "summary.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(s["pairs"], 15);
  EXPECT_EQ(s["null_model"]["reps"], 200);
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["inputs"][0]["path"], in.string());
  EXPECT_EQ(m["flags"]["alpha"], 0.01);
}

TEST(Cli, FitPairMatchesLibrary) {
  const auto t = sample_planted_table(120, 4, 1, 2.0, 22);
  const fs::path in = write_fixture(t, "pair.tsv");
  const fs::path out = scratch() / "fit" / "fit.json";
  ASSERT_EQ(run("fit-pair --input " + in.string() + " --normalize none --taxa taxon_01,taxon_02 --out " +
                out.string())
                .code,
            0);
  const auto j = nlohmann::json::parse(slurp(out));
  // Same ingestion as the CLI: all-zero samples are dropped, no rescaling.
  FilterOptions fo;
  fo.normalize = false;
  const auto table = filter_and_normalize(load_counts(in.string(), Orientation::TaxaAsColumns), fo);
  std::vector<PairObservation> obs;
  for (Eigen::Index l = 0; l < table.values.rows(); ++l) obs.emplace_back(table.values(l, 0), table.values(l, 1));
  const auto f = independence_test(obs);
  EXPECT_EQ(j["fit"]["theta"].get<double>(), f.theta_hat);
  EXPECT_EQ(j["fit"]["p_value"].get<double>(), f.p_value);
  EXPECT_EQ(j["fit"]["cov"].size(), 7u);
  EXPECT_EQ(run("fit-pair --input " + in.string() + " --normalize none --taxa taxon_01,nope").code, 2);
}

TEST(Cli, FitPairWithCovariates) {
  Rng rng(23);
  RegressionTruth truth;
  truth.rho_i = {-0.5, 0.7};
  truth.rho_j = {-0.3, 0.4};
  const auto s = sample_pair_regression(150, truth, 2.0, rng);
  const fs::path in = scratch() / "reg.tsv", cov = scratch() / "reg_cov.csv";
  {
    std::ofstream a(in), b(cov);
    a << "sample\tA\tB\n";
    b << "id,z,site\n";
    for (std::size_t l = 0; l < s.data.size(); ++l) {
      a << "s" << l << '\t' << fmt(s.data[l].xi) << '\t' << fmt(s.data[l].xj) << '\n';
      b << "s" << l << ',' << fmt(s.covariate_i[l]) << ',' << (l % 3 ? "x" : "y") << '\n';
    }
  }
  const fs::path out = scratch() / "reg.json";
  ASSERT_EQ(run("fit-pair --input " + in.string() + " --normalize none --taxa A,B --covariates " + cov.string() +
                " --p-formula z --out " + out.string())
                .code,
            0);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j["fit"]["margin_i"]["rho"].size(), 2u);
  EXPECT_EQ(j["fit"]["cov"].size(), 9u);
  EXPECT_EQ(run("fit-pair --input " + in.string() + " --taxa A,B --p-formula z").code, 1);
}

TEST(Cli, StabilityWritesReport) {
  const auto t = sample_planted_table(100, 4, 1, 5.0, 24);
  const fs::path in = write_fixture(t, "stab.tsv");
  const fs::path out = scratch() / "stab";
  ASSERT_EQ(run("stability --input " + in.string() + " --normalize none --boot 3 --alpha 0.05 --seed 2 --out-dir " +
                out.string())
                .code,
            0);
  const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_GE(s["mean_dice"].get<double>(), 0.0);
  EXPECT_LE(s["mean_dice"].get<double>(), 1.0);
  const std::string st = slurp(out / "stability.tsv");
  EXPECT_EQ(std::count(st.begin(), st.end(), '\n'), 4);
}
