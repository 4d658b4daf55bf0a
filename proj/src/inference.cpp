#include "mlta/inference.hpp"

#include "mlta/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace mlta {

NetworkData resample_within_layers(const NetworkData& data, Rng& rng) {
  NetworkData out;
  out.layer_ids = data.layer_ids;
  out.layer_sizes = data.layer_sizes;
  out.Y.resize(data.N(), data.R());
  out.X.resize(data.N(), data.J());
  int start = 0;
  for (int h = 0; h < data.H(); ++h) {
    const int n = data.layer_sizes[h];
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < n; ++i) {
      const int src = start + pick(rng);
      out.Y.row(start + i) = data.Y.row(src);
      out.X.row(start + i) = data.X.row(src);
    }
    start += n;
  }
  return out;
}

// -------------------------------------------------------------------------
// Label alignment
// -------------------------------------------------------------------------

namespace {

constexpr int kMaxExhaustive = 8;

Params permute_groups(const Params& p, const std::vector<int>& perm, bool& exact) {
  const int G = p.G();
  const int J = static_cast<int>(p.beta.cols());
  Params out = p;
  for (int g = 0; g < G; ++g) {
    out.b.row(g) = p.b.row(perm[g]);
    if (p.w.size() > 1) out.w[g] = p.w[perm[g]];
  }
  if (G == 1) return out;

  // Full logit coefficients with the reference row at zero, re-anchored on
  // the class that becomes the new reference.
  MatrixXd full = MatrixXd::Zero(G, J);
  full.bottomRows(G - 1) = p.beta;
  const Eigen::RowVectorXd anchor = full.row(perm[0]);
  for (int g = 1; g < G; ++g) out.beta.row(g - 1) = full.row(perm[g]) - anchor;

  if (perm[0] != 0 && p.Q() > 1) {
    if (G == 2) {
      out.gamma = -p.gamma;
      out.gamma(0) = 0.0;
    } else {
      exact = false;
    }
  }
  return out;
}

Params permute_layers(const Params& p, const std::vector<int>& perm) {
  Params out = p;
  const double shift = p.gamma(perm[0]);
  for (int q = 0; q < p.Q(); ++q) {
    out.gamma(q) = p.gamma(perm[q]) - shift;
    out.rho(q) = p.rho(perm[q]);
  }
  out.gamma(0) = 0.0;
  if (out.beta.rows() > 0) out.beta.col(0).array() += shift;
  return out;
}

double layer_cost(const Params& ref, const Params& cand, const std::vector<int>& perm) {
  double c = 0.0;
  const double shift = cand.gamma(perm[0]);
  for (int q = 0; q < ref.Q(); ++q) {
    const double d = (cand.gamma(perm[q]) - shift) - ref.gamma(q);
    c += d * d;
  }
  return c;
}

std::vector<int> identity(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

double group_alignment_cost(const Params& ref, const Params& cand, const std::vector<int>& perm) {
  double c = 0.0;
  for (int g = 0; g < ref.G(); ++g) c += (ref.b.row(g) - cand.b.row(perm[g])).squaredNorm();
  return c;
}

Alignment find_alignment(const Params& ref, const Params& cand) {
  if (ref.G() != cand.G() || ref.Q() != cand.Q() || ref.R() != cand.R() || ref.D() != cand.D() ||
      ref.w.size() != cand.w.size() || ref.beta.cols() != cand.beta.cols())
    throw Error("align_labels: parameter shapes differ");
  if (ref.G() > kMaxExhaustive || ref.Q() > kMaxExhaustive)
    throw Error("align_labels: exhaustive alignment supports at most 8 groups; "
                "larger G needs an assignment solver");

  Alignment a;
  std::vector<int> perm = identity(ref.G());
  double best = std::numeric_limits<double>::infinity();
  do {
    const double c = group_alignment_cost(ref, cand, perm);
    if (c < best) {
      best = c;
      a.group_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  const Params grouped = permute_groups(cand, a.group_perm, a.exact);
  perm = identity(ref.Q());
  best = std::numeric_limits<double>::infinity();
  do {
    const double c = layer_cost(ref, grouped, perm);
    if (c < best) {
      best = c;
      a.layer_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // u -> -u on any trait axis leaves the likelihood unchanged.
  a.trait_sign.assign(ref.D(), 1);
  for (int d = 0; d < ref.D(); ++d) {
    double keep = 0.0;
    double flip = 0.0;
    for (int g = 0; g < static_cast<int>(ref.w.size()); ++g) {
      const auto r = ref.w[g].col(d);
      const auto c = grouped.w[g].col(d);
      keep += (r - c).squaredNorm();
      flip += (r + c).squaredNorm();
    }
    if (flip < keep) a.trait_sign[d] = -1;
  }
  return a;
}

Params apply_alignment(const Params& p, const Alignment& a) {
  bool exact = true;
  Params out = permute_layers(permute_groups(p, a.group_perm, exact), a.layer_perm);
  for (auto& m : out.w)
    for (int d = 0; d < static_cast<int>(a.trait_sign.size()); ++d)
      if (a.trait_sign[d] < 0) m.col(d) *= -1.0;
  return out;
}

FitResult apply_alignment(const FitResult& fit, const Alignment& a) {
  FitResult out = fit;
  out.params = apply_alignment(fit.params, a);
  for (int g = 0; g < fit.zhat.cols(); ++g) out.zhat.col(g) = fit.zhat.col(a.group_perm[g]);
  for (int q = 0; q < fit.vhat.cols(); ++q) out.vhat.col(q) = fit.vhat.col(a.layer_perm[q]);
  std::vector<int> group_inv(a.group_perm.size());
  for (std::size_t g = 0; g < a.group_perm.size(); ++g) group_inv[a.group_perm[g]] = static_cast<int>(g);
  std::vector<int> layer_inv(a.layer_perm.size());
  for (std::size_t q = 0; q < a.layer_perm.size(); ++q) layer_inv[a.layer_perm[q]] = static_cast<int>(q);
  for (auto& l : out.node_map) l = group_inv[l];
  for (auto& l : out.layer_map) l = layer_inv[l];
  return out;
}

Params align_labels(const Params& ref, const Params& cand) {
  return apply_alignment(cand, find_alignment(ref, cand));
}

// -------------------------------------------------------------------------
// Flattening
// -------------------------------------------------------------------------

VectorXd flatten_params(const Params& p) {
  std::vector<double> v;
  for (int g = 0; g < p.beta.rows(); ++g)
    for (int j = 0; j < p.beta.cols(); ++j) v.push_back(p.beta(g, j));
  for (int g = 0; g < p.G(); ++g)
    for (int k = 0; k < p.R(); ++k) v.push_back(p.b(g, k));
  for (const auto& m : p.w)
    for (int k = 0; k < m.rows(); ++k)
      for (int d = 0; d < m.cols(); ++d) v.push_back(m(k, d));
  for (int q = 1; q < p.Q(); ++q) v.push_back(p.gamma(q));
  for (int q = 0; q < p.Q(); ++q) v.push_back(p.rho(q));
  return Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::string> param_names(const Params& p) {
  std::vector<std::string> n;
  auto s = [](int i) { return std::to_string(i + 1); };
  for (int g = 0; g < p.beta.rows(); ++g)
    for (int j = 0; j < p.beta.cols(); ++j)
      n.push_back("beta[" + s(g + 1) + "," + (j == 0 ? std::string("intercept") : "x" + std::to_string(j)) + "]");
  for (int g = 0; g < p.G(); ++g)
    for (int k = 0; k < p.R(); ++k) n.push_back("b[" + s(g) + "," + s(k) + "]");
  const bool shared = p.w.size() == 1;
  for (int g = 0; g < static_cast<int>(p.w.size()); ++g)
    for (int k = 0; k < p.R(); ++k)
      for (int d = 0; d < p.D(); ++d)
        n.push_back(shared ? "w[" + s(k) + "," + s(d) + "]"
                           : "w[" + s(g) + "," + s(k) + "," + s(d) + "]");
  for (int q = 1; q < p.Q(); ++q) n.push_back("gamma[" + s(q) + "]");
  for (int q = 0; q < p.Q(); ++q) n.push_back("rho[" + s(q) + "]");
  return n;
}

// -------------------------------------------------------------------------
// Bootstrap
// -------------------------------------------------------------------------

MatrixXd bootstrap_covariance(const MatrixXd& estimates) {
  const double S = static_cast<double>(estimates.rows());
  const Eigen::RowVectorXd mean = estimates.colwise().mean();
  const MatrixXd centred = estimates.rowwise() - mean;
  return (centred.transpose() * centred) / S;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_se(const NetworkData& data, const ModelDims& dims,
                             const FitResult& fitted, const BootstrapConfig& bcfg,
                             const FitConfig& cfg) {
  if (bcfg.replicates < 1) throw Error("bootstrap: replicate count must be >= 1");
  if (!fitted.converged) throw Error("bootstrap: the point estimate has not converged");
  const int S = bcfg.replicates;
  const VectorXd point = flatten_params(fitted.params);
  const Eigen::Index p = point.size();

  std::vector<VectorXd> rows(S);
  std::vector<char> ok(S, 0);
  FitConfig replicate_cfg = cfg;
  replicate_cfg.threads = 1;
  parallel_for(S, resolve_threads(cfg.threads), [&](int s) {
    Rng rng = substream(cfg.seed, (std::uint64_t{1} << 32) + static_cast<std::uint64_t>(s));
    const NetworkData sample = resample_within_layers(data, rng);
    try {
      FitResult fit;
      if (bcfg.multistart) {
        FitConfig c = replicate_cfg;
        c.seed = rng();
        fit = fit_multistart(sample, dims, c);
      } else {
        fit = fit_one(sample, dims, fitted.params, replicate_cfg);
      }
      if (fit.degenerate) return;
      rows[s] = flatten_params(align_labels(fitted.params, fit.params));
      ok[s] = 1;
    } catch (const Error&) {
    }
  });

  BootstrapResult res;
  res.names = param_names(fitted.params);
  res.estimate = point;
  for (int s = 0; s < S; ++s) res.n_failed += ok[s] ? 0 : 1;
  if (res.n_failed > bcfg.max_failed_fraction * S)
    throw NumericalError("bootstrap: " + std::to_string(res.n_failed) + " of " +
                         std::to_string(S) + " replicates failed");
  res.S = S - res.n_failed;
  res.estimates.resize(res.S, p);
  for (int s = 0, r = 0; s < S; ++s)
    if (ok[s]) res.estimates.row(r++) = rows[s].transpose();
  res.covariance = bootstrap_covariance(res.estimates);
  res.se = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.ci.resize(p, 2);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col(res.estimates.col(j).data(), res.estimates.col(j).data() + res.S);
    res.ci(j, 0) = quantile(col, 0.025);
    res.ci(j, 1) = quantile(col, 0.975);
  }
  return res;
}

std::string format_bootstrap_table(const BootstrapResult& r) {
  std::string out = "name,estimate,se,ci_lo,ci_hi\n";
  char buf[160];
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", r.estimate(i), r.se(i),
                  r.ci(i, 0), r.ci(i, 1));
    out += "\"" + r.names[j] + "\"" + buf;
  }
  return out;
}

}  // namespace mlta
