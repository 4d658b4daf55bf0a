#include "mlta/cli.hpp"

#include "mlta/data.hpp"
#include "mlta/em.hpp"
#include "mlta/inference.hpp"
#include "mlta/metrics.hpp"
#include "mlta/parallel.hpp"
#include "mlta/selection.hpp"
#include "mlta/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>

namespace mlta::cli {

namespace {

// Numeric defaults for every subcommand.
struct CliConfig {
  std::uint64_t seed = 1;
  int threads = 0;
  int starts = 10;
  double tol = 1e-6;
  int max_iter = 500;
  int inner_iters = 100;
  int boot = 100;

  // simulate / replicate
  int N = 500;
  int R = 7;
  int H = 20;
  int B = 10;

  // model dimensions (ranges for select)
  std::string G = "3";
  std::string D = "1";
  std::string Q = "2";
  bool parsimonious = false;
  bool multistart = false;

  std::string input;
  std::string model;
  std::string truth;
  std::string out;
  std::string best;
  std::string out_prefix = "study";
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FitConfig fit_config(const CliConfig& c) {
  FitConfig f;
  f.n_starts = c.starts;
  f.outer_tol = c.tol;
  f.max_outer_iters = c.max_iter;
  f.inner_iters = c.inner_iters;
  f.seed = c.seed;
  f.threads = resolve_threads(c.threads);
  f.validate();
  return f;
}

int single_value(const std::string& flag, const std::string& text) {
  const IntRange r = parse_range(text);
  if (r.lo != r.hi) throw CLI::ValidationError(flag, "expects a single value, got " + text);
  return r.lo;
}

ModelDims model_dims(const CliConfig& c) {
  return ModelDims{single_value("--G", c.G), single_value("--D", c.D), single_value("--Q", c.Q),
                   c.parsimonious};
}

void print_config(std::ostream& out, const std::string& cmd,
                  const std::vector<std::pair<std::string, std::string>>& kv) {
  out << "[" << cmd << "]\n";
  for (const auto& [k, v] : kv) out << "  " << k << " = " << v << "\n";
}

std::vector<std::pair<std::string, std::string>> fit_kv(const CliConfig& c, const FitConfig& f) {
  return {{"seed", std::to_string(f.seed)},          {"threads", std::to_string(f.threads)},
          {"starts", std::to_string(f.n_starts)},    {"tol", fmt(f.outer_tol)},
          {"max_iter", std::to_string(f.max_outer_iters)},
          {"inner_iters", std::to_string(f.inner_iters)},
          {"parsimonious", c.parsimonious ? "true" : "false"}};
}

int cmd_simulate(const CliConfig& c, std::ostream& out) {
  SimSpec spec;
  spec.N = c.N;
  spec.R = c.R;
  spec.H = c.H;
  spec.G = single_value("--G", c.G);
  spec.D = single_value("--D", c.D);
  spec.Q = single_value("--Q", c.Q);
  spec.seed = c.seed;
  spec.validate();
  print_config(out, "simulate",
               {{"N", std::to_string(spec.N)}, {"R", std::to_string(spec.R)},
                {"H", std::to_string(spec.H)}, {"G", std::to_string(spec.G)},
                {"D", std::to_string(spec.D)}, {"Q", std::to_string(spec.Q)},
                {"seed", std::to_string(spec.seed)}, {"out", c.out}, {"truth", c.truth}});
  const SimResult sim = simulate_network(spec);
  write_network(sim.data, c.out);
  if (!c.truth.empty()) write_truth(sim.truth, c.truth);
  out << "wrote " << c.out << " (" << sim.data.N() << " rows, " << sim.data.H() << " layers)\n";
  return kExitOk;
}

int cmd_fit(const CliConfig& c, std::ostream& out) {
  const FitConfig f = fit_config(c);
  const ModelDims dims = model_dims(c);
  auto kv = fit_kv(c, f);
  kv.insert(kv.begin(), {{"input", c.input},
                         {"G", std::to_string(dims.G)},
                         {"D", std::to_string(dims.D)},
                         {"Q", std::to_string(dims.Q)},
                         {"out", c.out}});
  print_config(out, "fit", kv);
  const NetworkData data = load_network(c.input);
  const MultiStartResult ms = fit_multistart_detailed(data, dims, f);
  for (const auto& s : ms.starts)
    out << "  start " << s.start << ": "
        << (s.ok ? (s.degenerate ? "degenerate" : "loglik " + fmt(s.loglik)) : "failed: " + s.error)
        << "\n";
  write_model(ms.best, c.out);
  out << "best start " << ms.best.start_index << ", loglik " << fmt(ms.best.loglik) << ", BIC "
      << fmt(ms.best.bic) << ", converged " << (ms.best.converged ? "true" : "false") << "\n";
  return kExitOk;
}

int cmd_select(const CliConfig& c, std::ostream& out) {
  const FitConfig f = fit_config(c);
  GridSpec grid{parse_range(c.G), parse_range(c.D), parse_range(c.Q), c.parsimonious};
  grid.validate();
  auto kv = fit_kv(c, f);
  kv.insert(kv.begin(), {{"input", c.input}, {"G", c.G}, {"D", c.D}, {"Q", c.Q},
                         {"out", c.out}, {"best", c.best}});
  print_config(out, "select", kv);
  const NetworkData data = load_network(c.input);
  const SelectionResult sel = select_model(data, grid, f);
  write_file_atomic(c.out, format_bic_table(sel.table));
  if (!c.best.empty()) write_model(sel.best, c.best);
  out << "selected G=" << sel.best.dims.G << " D=" << sel.best.dims.D << " Q=" << sel.best.dims.Q
      << " (BIC " << fmt(sel.best.bic) << ") over " << sel.table.size() << " cells\n";
  return kExitOk;
}

int cmd_bootstrap(const CliConfig& c, std::ostream& out) {
  const FitConfig f = fit_config(c);
  auto kv = fit_kv(c, f);
  kv.insert(kv.begin(), {{"input", c.input}, {"model", c.model}, {"boot", std::to_string(c.boot)},
                         {"multistart", c.multistart ? "true" : "false"}, {"out", c.out}});
  print_config(out, "bootstrap", kv);
  const NetworkData data = load_network(c.input);
  const FitResult fitted = read_model(c.model);
  BootstrapConfig b;
  b.replicates = c.boot;
  b.multistart = c.multistart;
  const BootstrapResult res = bootstrap_se(data, fitted.dims, fitted, b, f);
  write_file_atomic(c.out, format_bootstrap_table(res));
  out << "bootstrap: " << res.S << " replicates used, " << res.n_failed << " failed\n";
  return kExitOk;
}

int cmd_evaluate(const CliConfig& c, std::ostream& out) {
  print_config(out, "evaluate", {{"model", c.model}, {"truth", c.truth}, {"out", c.out}});
  const FitResult fit = read_model(c.model);
  const Truth truth = read_truth(c.truth);
  const EvalReport rep = evaluate(fit, truth);
  write_file_atomic(c.out, eval_to_json(rep).dump(1) + "\n");
  out << "ARI nodes " << fmt(rep.ari_nodes) << ", ARI layers " << fmt(rep.ari_layers) << "\n";
  return kExitOk;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

int cmd_replicate(const CliConfig& c, std::ostream& out) {
  FitConfig f = fit_config(c);
  SimSpec spec;
  spec.N = c.N;
  spec.R = c.R;
  spec.H = c.H;
  spec.G = single_value("--G", c.G);
  spec.D = single_value("--D", c.D);
  spec.Q = single_value("--Q", c.Q);
  spec.seed = c.seed;
  spec.validate();
  const ModelDims dims{spec.G, spec.D, spec.Q, true};
  auto kv = fit_kv(c, f);
  kv[6].second = "true";
  kv.insert(kv.begin(), {{"N", std::to_string(spec.N)}, {"R", std::to_string(spec.R)},
                         {"H", std::to_string(spec.H)}, {"G", std::to_string(spec.G)},
                         {"D", std::to_string(spec.D)}, {"Q", std::to_string(spec.Q)},
                         {"B", std::to_string(c.B)}, {"out_prefix", c.out_prefix}});
  print_config(out, "replicate", kv);

  const auto outcomes = replicate_study(spec, dims, f, c.B);
  std::string per_rep = "replicate,sim_seed,ok,loglik,ari_nodes,ari_layers\n";
  std::vector<double> an, al;
  std::vector<VectorXd> mb, mg, mr;
  for (const auto& o : outcomes) {
    per_rep += std::to_string(o.replicate) + "," + std::to_string(o.sim_seed) + "," +
               (o.ok ? "true," + fmt(o.loglik) + "," + fmt(o.report.ari_nodes) + "," +
                           fmt(o.report.ari_layers)
                     : std::string("false,,,")) +
               "\n";
    if (!o.ok) continue;
    an.push_back(o.report.ari_nodes);
    al.push_back(o.report.ari_layers);
    mb.push_back(o.report.mse_beta);
    mg.push_back(o.report.mse_gamma);
    mr.push_back(o.report.mse_rho);
  }
  if (an.empty()) throw NumericalError("replicate: every replicate failed");
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const std::string key =
      std::to_string(spec.N) + "," + std::to_string(spec.R) + "," + std::to_string(spec.Q) + ",";
  const std::string ari_csv =
      "N,R,Q,ari_nodes_mean,ari_nodes_median,ari_layers_mean,ari_layers_median\n" + key +
      fmt(mean(an)) + "," + fmt(median(an)) + "," + fmt(mean(al)) + "," + fmt(median(al)) + "\n";

  std::string mse_csv = "N,R,Q,parameter,mse\n";
  const auto emit = [&](const std::vector<VectorXd>& v, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      double s = 0.0;
      for (const auto& x : v) s += x(static_cast<Eigen::Index>(j));
      mse_csv += key + names[j] + "," + fmt(s / static_cast<double>(v.size())) + "\n";
    }
  };
  std::vector<std::string> beta_names;
  for (int g = 2; g <= spec.G; ++g) {
    beta_names.push_back("beta[" + std::to_string(g) + ",intercept]");
    beta_names.push_back("beta[" + std::to_string(g) + ",x1]");
  }
  std::vector<std::string> gamma_names, rho_names;
  for (int q = 2; q <= spec.Q; ++q) gamma_names.push_back("gamma[" + std::to_string(q) + "]-gamma[1]");
  for (int q = 1; q <= spec.Q; ++q) rho_names.push_back("rho[" + std::to_string(q) + "]");
  emit(mb, beta_names);
  emit(mg, gamma_names);
  emit(mr, rho_names);

  write_file_atomic(c.out_prefix + "_replicates.csv", per_rep);
  write_file_atomic(c.out_prefix + "_ari.csv", ari_csv);
  write_file_atomic(c.out_prefix + "_mse.csv", mse_csv);
  out << "mean ARI nodes " << fmt(mean(an)) << ", layers " << fmt(mean(al)) << " over "
      << an.size() << " replicates\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Multilevel mixture of latent trait analyzers for multi-layer bipartite networks",
               "mlta"};
  app.require_subcommand(1);

  auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", c.seed, "64-bit RNG seed")->capture_default_str();
  };
  auto add_fit_flags = [&](CLI::App* s) {
    add_seed(s);
    s->add_option("--starts", c.starts, "random starts per fit")->capture_default_str()
        ->check(CLI::PositiveNumber);
    s->add_option("--tol", c.tol, "relative log-likelihood tolerance")->capture_default_str()
        ->check(CLI::PositiveNumber);
    s->add_option("--max-iter", c.max_iter, "maximum outer EM iterations")->capture_default_str()
        ->check(CLI::PositiveNumber);
    s->add_option("--inner-iters", c.inner_iters, "maximum inner EM iterations")
        ->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--threads", c.threads, "worker threads (default: MLTA_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_dims = [&](CLI::App* s) {
    s->add_option("--G", c.G, "sending-node groups")->capture_default_str();
    s->add_option("--D", c.D, "latent trait dimension")->capture_default_str();
    s->add_option("--Q", c.Q, "layer groups")->capture_default_str();
  };

  CLI::App* sim = app.add_subcommand("simulate", "draw a synthetic network");
  sim->add_option("--N", c.N, "sending nodes")->capture_default_str();
  sim->add_option("--R", c.R, "receiving nodes")->capture_default_str();
  sim->add_option("--H", c.H, "layers")->capture_default_str();
  add_dims(sim);
  add_seed(sim);
  sim->add_option("--out", c.out, "network.csv path")->required();
  sim->add_option("--truth", c.truth, "truth.json path");

  CLI::App* fit = app.add_subcommand("fit", "fit one model with multiple starts");
  fit->add_option("--input", c.input, "network.csv")->required();
  add_dims(fit);
  fit->add_flag("--parsimonious", c.parsimonious, "share loadings across groups");
  add_fit_flags(fit);
  fit->add_option("--out", c.out, "model.json path")->required();

  CLI::App* sel = app.add_subcommand("select", "BIC grid search over G, D, Q");
  sel->add_option("--input", c.input, "network.csv")->required();
  add_dims(sel);
  sel->add_flag("--parsimonious", c.parsimonious, "share loadings across groups");
  add_fit_flags(sel);
  sel->add_option("--out", c.out, "bic_table.csv path")->required();
  sel->add_option("--best", c.best, "model.json path for the selected fit");

  CLI::App* boot = app.add_subcommand("bootstrap", "layer-stratified bootstrap standard errors");
  boot->add_option("--input", c.input, "network.csv")->required();
  boot->add_option("--model", c.model, "fitted model.json")->required();
  boot->add_option("--boot", c.boot, "bootstrap replicates")->capture_default_str()
      ->check(CLI::PositiveNumber);
  boot->add_flag("--multistart", c.multistart, "refit replicates from random starts");
  add_fit_flags(boot);
  boot->add_option("--out", c.out, "bootstrap.csv path")->required();

  CLI::App* eval = app.add_subcommand("evaluate", "compare a fit with simulation truth");
  eval->add_option("--model", c.model, "model.json")->required();
  eval->add_option("--truth", c.truth, "truth.json")->required();
  eval->add_option("--out", c.out, "eval.json path")->required();

  CLI::App* rep = app.add_subcommand("replicate", "simulation study over B replicates");
  rep->add_option("--N", c.N, "sending nodes")->capture_default_str();
  rep->add_option("--R", c.R, "receiving nodes")->capture_default_str();
  rep->add_option("--H", c.H, "layers")->capture_default_str();
  add_dims(rep);
  rep->add_option("--B", c.B, "replicates")->capture_default_str()->check(CLI::PositiveNumber);
  add_fit_flags(rep);
  rep->add_option("--out-prefix", c.out_prefix, "prefix for the output CSV files")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(c, out);
    if (*fit) return cmd_fit(c, out);
    if (*sel) return cmd_select(c, out);
    if (*boot) return cmd_bootstrap(c, out);
    if (*eval) return cmd_evaluate(c, out);
    if (*rep) return cmd_replicate(c, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mlta::cli
