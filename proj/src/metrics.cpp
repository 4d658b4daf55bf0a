#include "mlta/metrics.hpp"

#include "mlta/inference.hpp"
#include "mlta/parallel.hpp"
#include "mlta/varcore.hpp"

#include <map>
#include <utility>

namespace mlta {

namespace {

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("ari: label vectors differ in length");
  if (a.size() < 2) throw Error("ari: need at least two items");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, n] : joint) index += choose2(n);
  double sum_rows = 0.0;
  for (const auto& [key, n] : rows) sum_rows += choose2(n);
  double sum_cols = 0.0;
  for (const auto& [key, n] : cols) sum_cols += choose2(n);
  const double expected = sum_rows * sum_cols / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  // Both partitions trivial (all singletons or a single block): identical.
  if (denom == 0.0) return index == expected ? 1.0 : 0.0;
  return (index - expected) / denom;
}

VectorXd mse(const VectorXd& est, const VectorXd& truth) {
  if (est.size() != truth.size()) throw Error("mse: vectors differ in length");
  return (est - truth).array().square().matrix();
}

MatrixXd predicted_probs(const Params& params) {
  return params.b.unaryExpr([](double v) { return logistic(v); });
}

EvalReport evaluate(const FitResult& fit, const Truth& truth) {
  const Params& tp = truth.params;
  const Params& fp = fit.params;
  if (fp.G() != tp.G() || fp.Q() != tp.Q() || fp.R() != tp.R() || fp.D() != tp.D() ||
      fp.beta.cols() != tp.beta.cols())
    throw Error("evaluate: fitted dimensions do not match the truth");
  if (fit.node_map.size() != truth.node_labels.size() ||
      fit.layer_map.size() != truth.layer_labels.size())
    throw Error("evaluate: label vectors do not match the truth");

  // Compare like with like: shared loadings on both sides.
  Params fp_cmp = fp;
  Params tp_cmp = tp;
  if (fp_cmp.w.size() != tp_cmp.w.size()) {
    fp_cmp.w.resize(1);
    tp_cmp.w.resize(1);
  }
  const Alignment a = find_alignment(tp_cmp, fp_cmp);
  const Params aligned = apply_alignment(fp, a);

  EvalReport r;
  r.alignment_exact = a.exact;
  r.ari_nodes = ari(fit.node_map, truth.node_labels);
  r.ari_layers = fit.layer_map.size() >= 2 ? ari(fit.layer_map, truth.layer_labels) : 1.0;

  const auto flat = [](const MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    return VectorXd(Eigen::Map<const VectorXd>(rm.data(), rm.size()));
  };
  r.mse_beta = mse(flat(aligned.beta), flat(tp.beta));
  const int Q = tp.Q();
  r.mse_gamma = mse(aligned.gamma.tail(Q - 1), tp.gamma.tail(Q - 1));
  const double shift = (truth.gamma_raw - aligned.gamma).mean();
  r.mse_gamma_raw = mse(aligned.gamma.array() + shift, truth.gamma_raw);
  r.mse_rho = mse(aligned.rho, tp.rho);
  r.prob_table = predicted_probs(aligned);
  return r;
}

nlohmann::json eval_to_json(const EvalReport& r) {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json probs = nlohmann::json::array();
  for (Eigen::Index g = 0; g < r.prob_table.rows(); ++g) {
    const VectorXd row = r.prob_table.row(g).transpose();
    probs.push_back(vec(row));
  }
  return {{"ari_nodes", r.ari_nodes},     {"ari_layers", r.ari_layers},
          {"mse_beta", vec(r.mse_beta)},   {"mse_gamma", vec(r.mse_gamma)},
          {"mse_gamma_raw", vec(r.mse_gamma_raw)}, {"mse_rho", vec(r.mse_rho)},
          {"prob_table", probs},           {"alignment_exact", r.alignment_exact}};
}

std::uint64_t replicate_seed(std::uint64_t base, int b) {
  Rng rng = substream(base, static_cast<std::uint64_t>(b));
  return rng();
}

std::vector<ReplicateOutcome> replicate_study(const SimSpec& spec, const ModelDims& dims,
                                              const FitConfig& cfg, int B) {
  if (B < 1) throw Error("replicate_study: B must be >= 1");
  std::vector<ReplicateOutcome> out(B);
  FitConfig fit_cfg = cfg;
  fit_cfg.threads = 1;
  parallel_for(B, resolve_threads(cfg.threads), [&](int b) {
    ReplicateOutcome& o = out[b];
    o.replicate = b;
    SimSpec s = spec;
    s.seed = o.sim_seed = replicate_seed(spec.seed, b);
    try {
      const SimResult sim = simulate_network(s);
      FitConfig c = fit_cfg;
      c.seed = replicate_seed(cfg.seed, b);
      const FitResult fit = fit_multistart(sim.data, dims, c);
      o.loglik = fit.loglik;
      o.report = evaluate(fit, sim.truth);
      o.ok = true;
    } catch (const Error& e) {
      o.error = e.what();
    }
  });
  return out;
}

}  // namespace mlta
