#include "mlta/simulate.hpp"

#include "mlta/data.hpp"
#include "mlta/varcore.hpp"

#include <cmath>
#include <cstdio>

namespace mlta {

void SimSpec::validate() const {
  if (N < 1 || R < 1 || H < 1 || G < 1 || D < 1 || Q < 1)
    throw Error("simulation: all dimensions must be >= 1");
  if (N % H != 0)
    throw Error("simulation: N=" + std::to_string(N) + " is not divisible by H=" +
                std::to_string(H));
  if (Q > H) throw Error("simulation: Q exceeds H");
  if (D > kMaxTraitDim) throw Error("simulation: D too large");
  if (beta && (beta->rows() != G - 1 || beta->cols() != 2))
    throw Error("simulation: beta must be (G-1) x 2");
  if (gamma && gamma->size() != Q) throw Error("simulation: gamma must have Q entries");
  if (rho && rho->size() != Q) throw Error("simulation: rho must have Q entries");
  if (b && (b->rows() != G || b->cols() != R)) throw Error("simulation: b must be G x R");
  if (w && (w->rows() != R || w->cols() != D)) throw Error("simulation: w must be R x D");
}

Params default_truth(const SimSpec& spec, Rng& rng) {
  spec.validate();
  Params p;
  if (spec.beta) {
    p.beta = *spec.beta;
  } else {
    if (spec.G != 3) throw Error("simulation: default beta requires G=3; pass beta explicitly");
    p.beta.resize(2, 2);
    p.beta << 1.0, -0.4, 1.5, -0.9;
  }

  if (spec.gamma) {
    p.gamma = *spec.gamma;
  } else if (spec.Q == 1) {
    p.gamma = VectorXd::Zero(1);
  } else if (spec.Q == 2) {
    p.gamma = (VectorXd(2) << -0.5, 1.5).finished();
  } else if (spec.Q == 3) {
    p.gamma = (VectorXd(3) << -0.5, 1.5, 2.5).finished();
  } else {
    throw Error("simulation: default gamma exists only for Q <= 3; pass gamma explicitly");
  }

  if (spec.rho) {
    p.rho = *spec.rho;
  } else if (spec.Q == 1) {
    p.rho = VectorXd::Ones(1);
  } else if (spec.Q == 2) {
    p.rho = (VectorXd(2) << 0.3, 0.7).finished();
  } else if (spec.Q == 3) {
    p.rho = VectorXd::Constant(3, 0.33);
  } else {
    throw Error("simulation: default rho exists only for Q <= 3; pass rho explicitly");
  }
  if ((p.rho.array() < 0.0).any() || p.rho.sum() <= 0.0)
    throw Error("simulation: rho must be non-negative with positive sum");
  p.rho /= p.rho.sum();

  std::normal_distribution<double> normal(0.0, 1.0);
  if (spec.b) {
    p.b = *spec.b;
  } else {
    if (spec.G != 3) throw Error("simulation: default b requires G=3; pass b explicitly");
    const double means[3] = {-3.0, 0.0, 3.0};
    p.b.resize(3, spec.R);
    for (int g = 0; g < 3; ++g)
      for (int k = 0; k < spec.R; ++k) p.b(g, k) = means[g] + normal(rng);
  }
  if (spec.w) {
    p.w = {*spec.w};
  } else {
    MatrixXd w(spec.R, spec.D);
    for (int k = 0; k < spec.R; ++k)
      for (int d = 0; d < spec.D; ++d) w(k, d) = normal(rng);
    p.w = {w};
  }
  return p;
}

Params gauge_fix(const Params& raw) {
  Params p = raw;
  const double shift = raw.gamma(0);
  p.gamma.array() -= shift;
  p.gamma(0) = 0.0;
  if (p.beta.rows() > 0) p.beta.col(0).array() += shift;
  return p;
}

SimResult simulate_network(const SimSpec& spec) {
  spec.validate();
  Rng rng = substream(spec.seed, 0);
  const Params raw = default_truth(spec, rng);

  const int n_h = spec.N / spec.H;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::discrete_distribution<int> layer_group(raw.rho.data(), raw.rho.data() + raw.rho.size());

  SimResult out;
  NetworkData& d = out.data;
  d.Y.resize(spec.N, spec.R);
  d.X.resize(spec.N, 2);
  const int width = static_cast<int>(std::to_string(spec.H).size());
  std::vector<double> logits(spec.G);
  std::vector<double> eta(spec.G);
  VectorXd u(spec.D);
  int row = 0;
  for (int h = 0; h < spec.H; ++h) {
    char id[32];
    std::snprintf(id, sizeof id, "L%0*d", width, h + 1);
    d.layer_ids.emplace_back(id);
    d.layer_sizes.push_back(n_h);
    const int v = layer_group(rng);
    out.truth.layer_labels.push_back(v);
    for (int i = 0; i < n_h; ++i, ++row) {
      const double x = 1.0 + normal(rng);
      d.X(row, 0) = 1.0;
      d.X(row, 1) = x;

      double max_logit = 0.0;
      logits[0] = 0.0;
      for (int g = 1; g < spec.G; ++g) {
        logits[g] = raw.beta(g - 1, 0) + raw.beta(g - 1, 1) * x + raw.gamma(v);
        max_logit = std::max(max_logit, logits[g]);
      }
      double total = 0.0;
      for (int g = 0; g < spec.G; ++g) total += eta[g] = std::exp(logits[g] - max_logit);
      for (int g = 0; g < spec.G; ++g) eta[g] /= total;
      std::discrete_distribution<int> cls(eta.begin(), eta.end());
      const int z = cls(rng);
      out.truth.node_labels.push_back(z);

      for (int dd = 0; dd < spec.D; ++dd) u(dd) = normal(rng);
      const MatrixXd& w = raw.loadings(z);
      for (int k = 0; k < spec.R; ++k) {
        const double p = logistic(raw.b(z, k) + w.row(k).dot(u));
        d.Y(row, k) = unif(rng) < p ? 1.0 : 0.0;
      }
    }
  }
  d.validate();
  out.truth.gamma_raw = raw.gamma;
  out.truth.params = gauge_fix(raw);
  return out;
}

nlohmann::json truth_to_json(const Truth& t) {
  nlohmann::json raw = nlohmann::json::array();
  for (Eigen::Index q = 0; q < t.gamma_raw.size(); ++q) raw.push_back(t.gamma_raw(q));
  return {{"params", params_to_json(t.params)},
          {"gamma_raw", raw},
          {"node_labels", t.node_labels},
          {"layer_labels", t.layer_labels}};
}

Truth truth_from_json(const nlohmann::json& j) {
  for (const char* key : {"params", "gamma_raw", "node_labels", "layer_labels"})
    if (!j.contains(key)) throw SchemaError(std::string("truth: missing field '") + key + "'");
  Truth t;
  t.params = params_from_json(j.at("params"));
  const auto raw = j.at("gamma_raw").get<std::vector<double>>();
  t.gamma_raw = Eigen::Map<const VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  t.node_labels = j.at("node_labels").get<std::vector<int>>();
  t.layer_labels = j.at("layer_labels").get<std::vector<int>>();
  return t;
}

void write_truth(const Truth& t, const std::string& path) {
  write_file_atomic(path, truth_to_json(t).dump(1) + "\n");
}

Truth read_truth(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return truth_from_json(j);
}

}  // namespace mlta
