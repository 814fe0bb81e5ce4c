#include "ptotr/changepoint.hpp"
#include "ptotr/estimator.hpp"
#include "ptotr/io.hpp"
#include "ptotr/synth.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace ptotr;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status = -1;
  std::string output;  // stdout and stderr
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ptotr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string("\"") + PTOTR_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = slurp(log);
  return r;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST(Cli, SimulateChangepointMatchesGenerator) {
  const fs::path dir = scratch("simulate");
  const CliRun r = run("--seed 12 --out " + dir.string() + " simulate changepoint --a 8 --tau 6", dir);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto series = load_tensor_list(dir / "series.dtns");
  Rng rng = Rng(12).derive("simulate-changepoint", 0);
  EXPECT_EQ(series, make_changepoint_series(10, 10, 15, 14, 6, 8.0, 1, rng));
}

TEST(Cli, FitSummaryMatchesLibrary) {
  const fs::path dir = scratch("fit");
  PtotrProblem p;
  for (double y : {3.0, 1.0, 4.0, 1.0, 5.0}) {
    p.responses.push_back(DenseTensor({1}, y));
    p.covariates.push_back(DenseTensor({1}, 1.0));
  }
  save_tensor_list(dir / "y.dtns", p.responses);
  save_tensor_list(dir / "x.dtns", p.covariates);
  const CliRun r = run("--seed 3 --out " + dir.string() + " fit --responses " + (dir / "y.dtns").string() +
                        " --covariates " + (dir / "x.dtns").string() + " --ranks 1 --restarts 2",
                    dir);
  ASSERT_EQ(r.status, 0) << r.output;
  FitConfig cfg;
  cfg.seed = 3;
  cfg.restarts = 2;
  const FitResult lib = fit(p, cfg);
  const auto rows = read_csv(dir / "summary.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][1], "loglik");
  EXPECT_EQ(rows[1][1], format_double(lib.loglik));
  EXPECT_EQ(rows[1][2], format_double(lib.bic));
  EXPECT_EQ(load_cp(dir / "coefficient_rank1.cp").weights, lib.coefficient.weights);
}

TEST(Cli, FitEmitsOneSummaryRowPerRank) {
  const fs::path dir = scratch("ranks");
  ASSERT_EQ(run("--seed 5 --out " + dir.string() + " simulate ptotr --cov-dims 3,2 --resp-dims 3 --rank 2 --n-obs 15",
                dir)
                .status,
            0);
  const CliRun r = run("--seed 5 --out " + dir.string() + " fit --responses " + (dir / "responses.dtns").string() +
                        " --covariates " + (dir / "covariates.dtns").string() +
                        " --ranks 2,4,6,8 --restarts 1 --max-sweeps 20",
                    dir);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto rows = read_csv(dir / "summary.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1][0], "2");
  EXPECT_EQ(rows[4][0], "8");
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_TRUE(fs::exists(dir / ("coefficient_rank" + rows[k][0] + ".cp")));
}

TEST(Cli, MalformedTensorFileNamesLine) {
  const fs::path dir = scratch("malformed");
  {
    std::ofstream out(dir / "bad.dtns");
    out << "DTNS1\n1\n2\ncolmajor\n1\nnope\n";
  }
  save_tensor_list(dir / "x.dtns", {DenseTensor({1}, 1.0)});
  const CliRun r = run("--seed 1 --out " + dir.string() + " fit --responses " + (dir / "bad.dtns").string() +
                        " --covariates " + (dir / "x.dtns").string(),
                    dir);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("line 6"), std::string::npos) << r.output;
}

TEST(Cli, ChangepointSingletonCandidate) {
  const fs::path dir = scratch("singleton");
  const CliRun r = run("--seed 2 --out " + dir.string() +
                        " changepoint --m1 3 --m2 3 --m3 4 --T 6 --tau 2 --rank 2 --restarts 2 --tau-candidates 3",
                    dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("tau_hat=3"), std::string::npos) << r.output;
  const auto rows = read_csv(dir / "loglik_by_tau.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "0");
  EXPECT_EQ(rows[2][0], "3");
}

TEST(Cli, BoundAndKlcheck) {
  const fs::path dir = scratch("bound");
  const CliRun b = run("--out " + dir.string() + " bound --bar-m 32 --bar-n 1 --rank 1 --alpha 2 --beta 1 --xi 1 --x-spec-norm-sq 1", dir);
  ASSERT_EQ(b.status, 0) << b.output;
  EXPECT_NE(b.output.find("bound=" + format_double(std::log(2.0) / 128.0)), std::string::npos) << b.output;
  EXPECT_NE(b.output.find("Poisson CP bound"), std::string::npos);
  const CliRun k = run("--seed 8 --out " + dir.string() + " klcheck --trials 100", dir);
  ASSERT_EQ(k.status, 0) << k.output;
  EXPECT_NE(k.output.find("klcheck: 100/100 pass"), std::string::npos) << k.output;
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# changepoint settings\nm1 = 3\nm2 = 3\nm3 = 4\nT = 5\ntau = 2\nrank = 1\nrestarts = 1\n"
        << "tau-candidates = 1\n";
  }
  const CliRun r = run("--seed 4 --out " + dir.string() + " --config " + (dir / "run.cfg").string() +
                        " changepoint --tau-candidates 4",
                    dir);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("tau_hat=4"), std::string::npos) << r.output;
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "rank = 1\nflavour = mint\n";
  }
  const CliRun bad = run("--seed 4 --out " + dir.string() + " --config " + (dir / "bad.cfg").string() + " changepoint", dir);
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.output.find("line 2"), std::string::npos) << bad.output;
}

TEST(Cli, MissingSeedIsRejected) {
  const fs::path dir = scratch("noseed");
  EXPECT_NE(run("--out " + dir.string() + " klcheck", dir).status, 0);
}

TEST(Cli, PetRunIsReproducible) {
  const std::string args = " pet --n 8 --resp-dims 2 --ranks 2 --fractions 0.5 --method both --iters 5 --mlem-iters 10";
  const fs::path a = scratch("pet_a");
  const fs::path b = scratch("pet_b");
  ASSERT_EQ(run("--seed 9 --out " + a.string() + args, a).status, 0);
  ASSERT_EQ(run("--seed 9 --threads 2 --out " + b.string() + args, b).status, 0);
  const std::string csv = slurp(a / "rmse_trajectory.csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(b / "rmse_trajectory.csv"));
}
