#include "ptotr/autoregressive.hpp"
#include "ptotr/changepoint.hpp"
#include "ptotr/diagnostics.hpp"
#include "ptotr/errors.hpp"
#include "ptotr/estimator.hpp"
#include "ptotr/io.hpp"
#include "ptotr/pet.hpp"
#include "ptotr/radon.hpp"
#include "ptotr/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ptotr;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out = ".";
  std::string config;
};

struct FitFlags {
  std::size_t restarts = 10;
  double outer_tol = 1e-6;
  double inner_tol = 1e-4;
  std::size_t inner_iters = 50;
  std::size_t max_sweeps = 500;
};

void add_fit_flags(CLI::App* sub, FitFlags& f) {
  sub->add_option("--restarts", f.restarts, "Random restarts per fit")->capture_default_str();
  sub->add_option("--outer-tol", f.outer_tol, "Relative log-likelihood change that stops the sweeps")->capture_default_str();
  sub->add_option("--inner-tol", f.inner_tol, "Relative objective change that stops a factor update")->capture_default_str();
  sub->add_option("--inner-iters", f.inner_iters, "Iteration cap per factor update")->capture_default_str();
  sub->add_option("--max-sweeps", f.max_sweeps, "Sweep cap")->capture_default_str();
}

FitConfig make_config(const FitFlags& f, const Common& c, std::size_t rank) {
  FitConfig cfg;
  cfg.rank = rank;
  cfg.restarts = f.restarts;
  cfg.outer_tol = f.outer_tol;
  cfg.inner_tol = f.inner_tol;
  cfg.inner_max_iter = f.inner_iters;
  cfg.outer_max_sweeps = f.max_sweeps;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  return cfg;
}

std::ofstream open_out(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  std::ofstream out(fs::path(c.out) / name);
  if (!out) throw Error("cannot write '" + (fs::path(c.out) / name).string() + "'");
  return out;
}

Dims to_dims(const std::vector<std::size_t>& v, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string(what) + " must list at least one extent");
  for (std::size_t d : v) {
    if (d == 0) throw InvalidArgument(std::string(what) + " extents must be >= 1");
  }
  return v;
}

PhantomKind phantom_kind(const std::string& s) {
  if (s == "shepp") return PhantomKind::shepp_logan_like;
  if (s == "blocks") return PhantomKind::blocks;
  if (s == "uniform") return PhantomKind::uniform;
  throw InvalidArgument("unknown phantom '" + s + "'");
}

void print_warnings(const std::vector<std::string>& warnings, const std::string& prefix) {
  for (const auto& w : warnings) std::cerr << "warning: " << prefix << w << '\n';
}

std::string dne_field(const std::vector<std::vector<std::size_t>>& dne) {
  std::string s;
  for (std::size_t p = 0; p < dne.size(); ++p) {
    if (dne[p].empty()) continue;
    if (!s.empty()) s += ';';
    s += "mode" + std::to_string(p + 1) + ":";
    for (std::size_t k = 0; k < dne[p].size(); ++k) s += (k ? " " : "") + std::to_string(dne[p][k]);
  }
  return s.empty() ? "none" : s;
}

// Options named in a config file are inserted as "--key=value" right after the
// subcommand; flags given on the command line take precedence.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  std::string path;
  std::size_t sub_pos = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (!sub) {
      for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; })) {
        if (s->get_name() == args[k]) {
          sub = s;
          sub_pos = k;
        }
      }
    }
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty() || !sub) return args;
  std::set<std::string> allowed;
  auto collect = [&](const CLI::App* a) {
    for (const CLI::Option* o : a->get_options()) {
      for (const auto& n : o->get_lnames()) {
        if (n != "help" && n != "config") allowed.insert(n);
      }
    }
  };
  collect(&app);
  collect(sub);
  const RunConfig cfg = RunConfig::load(path, allowed);
  // Keys repeated on the command line are skipped; list options would otherwise accumulate.
  auto on_command_line = [&args](const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.entries()) {
    if (!on_command_line(key)) injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), injected.begin(), injected.end());
  return args;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::size_t m1 = 10, m2 = 10, m3 = 15, t_len = 14, tau = 6, topic = 1;
  double a = 8.0;
  std::vector<std::size_t> cov_dims{3, 3};
  std::vector<std::size_t> resp_dims{2, 2};
  std::size_t rank = 2;
  std::size_t n_obs = 20;
  double mean_rate = 5.0;
  std::size_t n = 32;
  std::size_t angles = 0;
  std::size_t bins = 0;
  double fraction = 1.0;
  std::string phantom = "shepp";
  double floor = 0.1;
  double scale = 10.0;
  std::size_t burn_in = 50;
  double coupling = 0.3;
  bool binary = false;
};

int run_simulate(const SimulateArgs& s, const Common& c) {
  Rng rng(c.seed);
  if (s.scenario == "changepoint") {
    Rng r = rng.derive("simulate-changepoint", 0);
    const auto series = make_changepoint_series(s.m1, s.m2, s.m3, s.t_len, s.tau, s.a, s.topic, r);
    fs::create_directories(c.out);
    save_tensor_list(fs::path(c.out) / "series.dtns", series, s.binary);
    std::cout << "wrote " << series.size() << " tensors to " << (fs::path(c.out) / "series.dtns").string() << '\n';
    return 0;
  }
  if (s.scenario == "ptotr") {
    Rng r = rng.derive("simulate-ptotr", 0);
    const auto ds = make_ptotr_dataset(to_dims(s.cov_dims, "--cov-dims"), to_dims(s.resp_dims, "--resp-dims"), s.rank,
                                       s.n_obs, s.mean_rate, r);
    fs::create_directories(c.out);
    save_tensor_list(fs::path(c.out) / "responses.dtns", ds.problem.responses, s.binary);
    save_tensor_list(fs::path(c.out) / "covariates.dtns", ds.problem.covariates, s.binary);
    save_cp(fs::path(c.out) / "truth.cp", ds.truth);
    std::cout << "wrote " << ds.problem.size() << " observations to " << c.out << '\n';
    return 0;
  }
  if (s.scenario == "pet") {
    Rng r = rng.derive("simulate-pet", 0);
    auto op = std::make_shared<const RadonOperator>(s.n, s.n, s.angles == 0 ? s.n : s.angles, s.bins);
    const DenseTensor truth = make_pet_truth(make_phantom(s.n, s.n, phantom_kind(s.phantom), s.floor),
                                             to_dims(s.resp_dims, "--resp-dims"), s.scale);
    const PetProblem pet = pet_simulate(truth, op, s.fraction, r);
    const PtotrProblem pp = pet_to_ptotr(pet);
    fs::create_directories(c.out);
    save_tensor(fs::path(c.out) / "truth.dtns", truth, s.binary);
    save_tensor_list(fs::path(c.out) / "responses.dtns", pp.responses, s.binary);
    save_tensor_list(fs::path(c.out) / "covariates.dtns", pp.covariates, s.binary);
    std::cout << "wrote " << pp.size() << " sinogram cells to " << c.out << '\n';
    return 0;
  }
  if (s.scenario == "ar") {
    ArSpec spec;
    spec.include_intercept_slab = true;
    spec.lag_blocks = {{1}, {2, 3, 4, 5}};
    const Dims resp = to_dims(s.resp_dims, "--resp-dims");
    Rng r = rng.derive("simulate-ar", 0);
    CpTensor b = random_cp_start(spec.covariate_dims(resp), resp, s.rank, r);
    // With unit-sum factors and lambda = M / R the intercept adds mean_rate per
    // entry on average and each lag slab adds coupling / (S - 1) times the lagged mean.
    b.weights = Vector::Constant(static_cast<Eigen::Index>(s.rank),
                                 static_cast<double>(num_elements(resp)) / static_cast<double>(s.rank));
    Matrix& slab_factor = b.covariate_factors.back();
    slab_factor.row(0).setConstant(s.mean_rate);
    for (Eigen::Index k = 1; k < slab_factor.rows(); ++k) {
      slab_factor.row(k).setConstant(s.coupling / static_cast<double>(slab_factor.rows() - 1));
    }
    b = normalize_cp(std::move(b));
    const auto series = make_ar_series(b, spec, s.t_len, s.burn_in, r);
    const auto pairs = build_ar_covariates(series, spec);
    std::vector<DenseTensor> xs;
    std::vector<DenseTensor> ys;
    for (const auto& [x, y] : pairs) {
      xs.push_back(x);
      ys.push_back(y);
    }
    fs::create_directories(c.out);
    save_tensor_list(fs::path(c.out) / "series.dtns", series, s.binary);
    save_tensor_list(fs::path(c.out) / "responses.dtns", ys, s.binary);
    save_tensor_list(fs::path(c.out) / "covariates.dtns", xs, s.binary);
    save_cp(fs::path(c.out) / "truth.cp", b);
    std::cout << "wrote " << pairs.size() << " autoregressive pairs to " << c.out << '\n';
    return 0;
  }
  throw InvalidArgument("unknown scenario '" + s.scenario + "'");
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string responses;
  std::string covariates;
  std::vector<std::size_t> ranks{1};
  std::string param_count = "raw";
  FitFlags flags;
};

int run_fit(const FitArgs& f, const Common& c) {
  PtotrProblem problem;
  problem.responses = load_tensor_list(f.responses);
  problem.covariates = load_tensor_list(f.covariates);
  problem.validate();
  auto traj = open_out(c, "trajectory.csv");
  auto summ = open_out(c, "summary.csv");
  CsvWriter tw(traj, {"rank", "sweep", "loglik"});
  CsvWriter sw(summ, {"rank", "loglik", "bic", "param_count", "dne_warnings", "sweeps", "converged", "best_restart"});
  for (std::size_t rank : f.ranks) {
    FitConfig cfg = make_config(f.flags, c, rank);
    if (f.param_count == "constrained") {
      cfg.param_count = ParamCountConvention::constrained;
    } else if (f.param_count != "raw") {
      throw InvalidArgument("--param-count must be raw or constrained");
    }
    const FitResult res = fit(problem, cfg);
    print_warnings(res.warnings, "rank " + std::to_string(rank) + ": ");
    save_cp(fs::path(c.out) / ("coefficient_rank" + std::to_string(rank) + ".cp"), res.coefficient);
    for (std::size_t s = 0; s < res.loglik_trajectory.size(); ++s) tw.row(rank, s, res.loglik_trajectory[s]);
    sw.row(rank, res.loglik, res.bic, res.param_count, dne_field(res.dne_warnings), res.sweeps, res.converged,
           res.best_restart);
    std::cout << "rank " << rank << ": loglik " << format_double(res.loglik) << ", BIC " << format_double(res.bic)
              << '\n';
  }
  return 0;
}

// ---- changepoint -----------------------------------------------------------

struct ChangepointArgs {
  std::string series;
  std::size_t m1 = 10, m2 = 10, m3 = 15, t_len = 14, tau = 6, topic = 1;
  double a = 8.0;
  std::size_t rank = 4;
  std::vector<std::size_t> tau_candidates;
  FitFlags flags;
};

int run_changepoint(const ChangepointArgs& a, const Common& c) {
  std::vector<DenseTensor> series;
  if (!a.series.empty()) {
    series = load_tensor_list(a.series);
  } else {
    Rng r = Rng(c.seed).derive("simulate-changepoint", 0);
    series = make_changepoint_series(a.m1, a.m2, a.m3, a.t_len, a.tau, a.a, a.topic, r);
  }
  const FitConfig cfg = make_config(a.flags, c, a.rank);
  const ChangePointResult res = changepoint_scan(series, cfg, a.tau_candidates);
  auto out = open_out(c, "loglik_by_tau.csv");
  CsvWriter w(out, {"tau", "loglik", "lambda"});
  w.row(std::size_t{0}, res.null_loglik, 0.0);
  for (std::size_t k = 0; k < res.taus.size(); ++k) w.row(res.taus[k], res.loglik_by_tau[k], res.lambda_by_tau[k]);
  if (res.tie) std::cerr << "warning: several candidates share the maximum; the smallest tau is reported\n";
  std::cout << "null_loglik=" << format_double(res.null_loglik) << '\n';
  std::cout << "tau_hat=" << res.tau_hat << '\n';
  return 0;
}

// ---- pet -------------------------------------------------------------------

struct PetArgs {
  std::size_t n = 32;
  std::vector<std::size_t> resp_dims{2, 2};
  std::size_t angles = 0;
  std::size_t bins = 0;
  std::string binning = "nearest";
  std::vector<double> fractions{0.25, 1.0};
  std::vector<std::size_t> ranks{4, 16};
  std::string method = "both";
  std::size_t iters = 120;
  std::size_t mlem_iters = 200;
  std::string phantom = "shepp";
  double floor = 0.1;
  double scale = 10.0;
  bool binary = false;
  FitFlags flags{1, 1e-12, 1e-4, 10, 120};
};

int run_pet(const PetArgs& p, const Common& c) {
  if (p.method != "mlem" && p.method != "ptotr" && p.method != "both") {
    throw InvalidArgument("--method must be mlem, ptotr or both");
  }
  if (p.binning != "nearest" && p.binning != "linear") throw InvalidArgument("--binning must be nearest or linear");
  auto op = std::make_shared<const RadonOperator>(p.n, p.n, p.angles == 0 ? p.n : p.angles, p.bins,
                                                  p.binning == "linear" ? RadonBinning::linear : RadonBinning::nearest);
  const DenseTensor truth =
      make_pet_truth(make_phantom(p.n, p.n, phantom_kind(p.phantom), p.floor), to_dims(p.resp_dims, "--resp-dims"), p.scale);
  fs::create_directories(c.out);
  save_tensor(fs::path(c.out) / "truth.dtns", truth, p.binary);
  auto csv = open_out(c, "rmse_trajectory.csv");
  CsvWriter w(csv, {"method", "rank", "fraction", "iteration", "rmse"});
  const Rng master(c.seed);
  for (std::size_t fi = 0; fi < p.fractions.size(); ++fi) {
    const double frac = p.fractions[fi];
    Rng r = master.derive("pet-simulate", fi);
    const PetProblem pet = pet_simulate(truth, op, frac, r);
    const std::string tag = "f" + format_double(frac);
    if (p.method != "ptotr") {
      const MlemResult m = pet_reconstruct_mlem(pet, p.mlem_iters);
      for (std::size_t k = 0; k < m.rmse_trajectory.size(); ++k) w.row("mlem", std::size_t{0}, frac, k, m.rmse_trajectory[k]);
      save_tensor(fs::path(c.out) / ("recon_mlem_" + tag + ".dtns"), m.estimate, p.binary);
      std::cout << "mlem fraction " << format_double(frac) << ": final rmse "
                << format_double(m.rmse_trajectory.back()) << '\n';
    }
    if (p.method != "mlem") {
      for (std::size_t rank : p.ranks) {
        FitConfig cfg = make_config(p.flags, c, rank);
        cfg.outer_max_sweeps = p.iters;
        const PetPtotrResult res = pet_reconstruct_ptotr(pet, cfg);
        for (std::size_t k = 0; k < res.rmse_trajectory.size(); ++k) {
          w.row("ptotr", rank, frac, k + 1, res.rmse_trajectory[k]);
        }
        save_tensor(fs::path(c.out) / ("recon_ptotr_r" + std::to_string(rank) + "_" + tag + ".dtns"), res.estimate,
                    p.binary);
        std::cout << "ptotr rank " << rank << " fraction " << format_double(frac) << ": final rmse "
                  << format_double(res.rmse_trajectory.empty() ? 0.0 : res.rmse_trajectory.back()) << '\n';
      }
    }
  }
  return 0;
}

// ---- bound / klcheck -------------------------------------------------------

struct BoundArgs {
  double bar_m = 32, bar_n = 1;
  std::size_t p = 1, q = 1, rank = 1;
  double alpha = 2.0, beta = 1.0, xi = 1.0, x_spec_norm_sq = 1.0;
  std::string covariates;
};

int run_bound(const BoundArgs& b, const Common& c) {
  BoundInputs in;
  in.bar_m = b.bar_m;
  in.bar_n = b.bar_n;
  in.p = b.p;
  in.q = b.q;
  in.rank = b.rank;
  in.alpha = b.alpha;
  in.beta = b.beta;
  in.xi = b.xi;
  in.x_spec_norm_sq = b.x_spec_norm_sq;
  if (!b.covariates.empty()) {
    PtotrProblem pr;
    pr.covariates = load_tensor_list(b.covariates);
    pr.responses.assign(pr.covariates.size(), DenseTensor(Dims{1}, 0.0));
    fill_covariate_terms(in, pr);
  }
  const BoundReport rep = minimax_bound(in);
  print_warnings(rep.warnings, "");
  auto out = open_out(c, "bound.csv");
  CsvWriter w(out, {"bar_m", "bar_n", "P", "Q", "rank", "alpha", "beta", "xi", "x_spec_norm_sq", "bound", "condition_holds"});
  w.row(in.bar_m, in.bar_n, in.p, in.q, in.rank, in.alpha, in.beta, in.xi, in.x_spec_norm_sq, rep.bound,
        rep.condition_holds);
  std::cout << "bound=" << format_double(rep.bound) << '\n'
            << "condition_holds=" << (rep.condition_holds ? "true" : "false") << '\n';
  if (b.covariates.empty() && in.xi == 1.0 && in.x_spec_norm_sq == 1.0) {
    std::cout << "scalar covariate X = 1: this is the Poisson CP bound (beta ln2 / 128)(JR/16 - 1)\n";
  }
  return 0;
}

int run_klcheck(std::size_t trials, const Common& c) {
  Rng r = Rng(c.seed).derive("klcheck", 0);
  const KlTrialSummary sum = kl_bound_random_trials(trials, r);
  auto out = open_out(c, "klcheck.csv");
  CsvWriter w(out, {"trial", "lhs", "rhs", "pass"});
  for (std::size_t k = 0; k < sum.reports.size(); ++k) {
    w.row(k + 1, sum.reports[k].lhs, sum.reports[k].rhs, sum.reports[k].pass);
  }
  std::cout << "klcheck: " << sum.passed << "/" << sum.trials << " pass\n";
  return sum.passed == sum.trials ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson tensor-on-tensor regression toolkit"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  auto* seed_opt = app.add_option("--seed", common.seed, "Seed for every random stream");
  app.add_option("--threads", common.threads, "Worker threads; 0 uses every core")->capture_default_str();
  app.add_option("--out", common.out, "Output directory")->capture_default_str();
  app.add_option("--config", common.config, "key = value file; command-line flags override it");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("scenario", sim.scenario, "changepoint | ptotr | pet | ar")->required();
  simulate->add_option("--m1", sim.m1)->capture_default_str();
  simulate->add_option("--m2", sim.m2)->capture_default_str();
  simulate->add_option("--m3", sim.m3)->capture_default_str();
  simulate->add_option("--T", sim.t_len, "Series length")->capture_default_str();
  simulate->add_option("--tau", sim.tau, "Change point (0 = none)")->capture_default_str();
  simulate->add_option("--a", sim.a, "Elevated rate after the change")->capture_default_str();
  simulate->add_option("--topic", sim.topic, "1-based mode-3 slab that changes")->capture_default_str();
  simulate->add_option("--cov-dims", sim.cov_dims)->delimiter(',')->capture_default_str();
  simulate->add_option("--resp-dims", sim.resp_dims)->delimiter(',')->capture_default_str();
  simulate->add_option("--rank", sim.rank)->capture_default_str();
  simulate->add_option("--n-obs", sim.n_obs)->capture_default_str();
  simulate->add_option("--mean-rate", sim.mean_rate)->capture_default_str();
  simulate->add_option("--n", sim.n, "PET image side")->capture_default_str();
  simulate->add_option("--angles", sim.angles, "Projection angles (0 = image side)")->capture_default_str();
  simulate->add_option("--bins", sim.bins, "Radial bins (0 = 4 x image side)")->capture_default_str();
  simulate->add_option("--fraction", sim.fraction)->capture_default_str();
  simulate->add_option("--phantom", sim.phantom, "shepp | blocks | uniform")->capture_default_str();
  simulate->add_option("--floor", sim.floor)->capture_default_str();
  simulate->add_option("--scale", sim.scale)->capture_default_str();
  simulate->add_option("--burn-in", sim.burn_in)->capture_default_str();
  simulate->add_option("--coupling", sim.coupling, "Scale of the lag slabs")->capture_default_str();
  simulate->add_flag("--binary", sim.binary, "Write binary tensor files");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "Fit the regression at one or more ranks");
  fitc->add_option("--responses", fa.responses, "Response tensor list")->required();
  fitc->add_option("--covariates", fa.covariates, "Covariate tensor list")->required();
  fitc->add_option("--ranks", fa.ranks, "Comma-separated CP ranks")->delimiter(',')->capture_default_str();
  fitc->add_option("--param-count", fa.param_count, "raw | constrained")->capture_default_str();
  add_fit_flags(fitc, fa.flags);

  ChangepointArgs ca;
  auto* cp = app.add_subcommand("changepoint", "Scan candidate change points");
  cp->add_option("--series", ca.series, "Series tensor list; simulated when omitted");
  cp->add_option("--m1", ca.m1)->capture_default_str();
  cp->add_option("--m2", ca.m2)->capture_default_str();
  cp->add_option("--m3", ca.m3)->capture_default_str();
  cp->add_option("--T", ca.t_len)->capture_default_str();
  cp->add_option("--tau", ca.tau)->capture_default_str();
  cp->add_option("--a", ca.a)->capture_default_str();
  cp->add_option("--topic", ca.topic)->capture_default_str();
  cp->add_option("--rank", ca.rank)->capture_default_str();
  cp->add_option("--tau-candidates", ca.tau_candidates, "Comma-separated candidates (default 1..T-1)")->delimiter(',');
  add_fit_flags(cp, ca.flags);

  PetArgs pa;
  auto* pet = app.add_subcommand("pet", "Simulated tomographic reconstruction");
  pet->add_option("--n", pa.n)->capture_default_str();
  pet->add_option("--resp-dims", pa.resp_dims)->delimiter(',')->capture_default_str();
  pet->add_option("--angles", pa.angles, "0 = image side")->capture_default_str();
  pet->add_option("--bins", pa.bins, "0 = 4 x image side")->capture_default_str();
  pet->add_option("--binning", pa.binning, "nearest | linear")->capture_default_str();
  pet->add_option("--fractions", pa.fractions)->delimiter(',')->capture_default_str();
  pet->add_option("--ranks", pa.ranks)->delimiter(',')->capture_default_str();
  pet->add_option("--method", pa.method, "mlem | ptotr | both")->capture_default_str();
  pet->add_option("--iters", pa.iters, "Sweeps of the low-rank fit")->capture_default_str();
  pet->add_option("--mlem-iters", pa.mlem_iters)->capture_default_str();
  pet->add_option("--phantom", pa.phantom)->capture_default_str();
  pet->add_option("--floor", pa.floor)->capture_default_str();
  pet->add_option("--scale", pa.scale)->capture_default_str();
  pet->add_flag("--binary", pa.binary);
  add_fit_flags(pet, pa.flags);

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Minimax lower bound report");
  bound->add_option("--bar-m", ba.bar_m)->capture_default_str();
  bound->add_option("--bar-n", ba.bar_n)->capture_default_str();
  bound->add_option("--P", ba.p)->capture_default_str();
  bound->add_option("--Q", ba.q)->capture_default_str();
  bound->add_option("--rank", ba.rank)->capture_default_str();
  bound->add_option("--alpha", ba.alpha)->capture_default_str();
  bound->add_option("--beta", ba.beta)->capture_default_str();
  bound->add_option("--xi", ba.xi)->capture_default_str();
  bound->add_option("--x-spec-norm-sq", ba.x_spec_norm_sq)->capture_default_str();
  bound->add_option("--covariates", ba.covariates, "Derive xi and ||X||_2^2 from a covariate list");

  std::size_t trials = 100;
  auto* kl = app.add_subcommand("klcheck", "Randomized KL inequality check");
  kl->add_option("--trials", trials)->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const FormatError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    const bool stochastic = !bound->parsed();
    if (stochastic && seed_opt->count() == 0) {
      std::cerr << "error: --seed is required for this command\n";
      return 2;
    }
    if (simulate->parsed()) return run_simulate(sim, common);
    if (fitc->parsed()) return run_fit(fa, common);
    if (cp->parsed()) return run_changepoint(ca, common);
    if (pet->parsed()) return run_pet(pa, common);
    if (bound->parsed()) return run_bound(ba, common);
    if (kl->parsed()) return run_klcheck(trials, common);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const NonexistenceError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
