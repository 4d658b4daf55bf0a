#include "mlta/em.hpp"

#include "mlta/parallel.hpp"
#include "mlta/rng.hpp"
#include "mlta/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mlta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRidge = 1e-8;
constexpr double kEmptyClassMass = 1e-6;
constexpr int kEmptyClassPatience = 3;

double log_sum_exp(const double* v, int n) {
  double m = kNegInf;
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Solves A x = rhs for symmetric positive (semi)definite A, retrying once with
// a small ridge. Returns false if the ridged system is still not PD.
bool solve_spd(MatrixXd A, const VectorXd& rhs, VectorXd& x, bool& ridged) {
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    A.diagonal().array() += kRidge;
    llt.compute(A);
    ridged = true;
    if (llt.info() != Eigen::Success) return false;
  }
  x = llt.solve(rhs);
  return x.allFinite();
}

}  // namespace

void FitConfig::validate() const {
  if (n_starts < 1 || max_outer_iters < 1 || inner_iters < 1 || nr_max_iters < 1)
    throw Error("fit config: all iteration counts must be >= 1");
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0) || !(nr_tol > 0.0))
    throw Error("fit config: tolerances must be > 0");
  if (!(xi_init > 0.0)) throw Error("fit config: xi_init must be > 0");
}

// -------------------------------------------------------------------------
// Class priors
// -------------------------------------------------------------------------

ClassPriors log_class_priors(const MatrixXd& X, const MatrixXd& beta, const VectorXd& gamma) {
  const Eigen::Index N = X.rows();
  const Eigen::Index G = beta.rows() + 1;
  const Eigen::Index Q = gamma.size();
  ClassPriors out(Q, MatrixXd::Zero(N, G));
  if (G == 1) return out;
  const MatrixXd linear = X * beta.transpose();  // N x (G-1)
  std::vector<double> logits(G);
  for (Eigen::Index q = 0; q < Q; ++q) {
    for (Eigen::Index i = 0; i < N; ++i) {
      logits[0] = 0.0;
      for (Eigen::Index g = 1; g < G; ++g) logits[g] = linear(i, g - 1) + gamma(q);
      const double lse = log_sum_exp(logits.data(), static_cast<int>(G));
      for (Eigen::Index g = 0; g < G; ++g) out[q](i, g) = logits[g] - lse;
    }
  }
  return out;
}

ClassPriors class_priors(const MatrixXd& X, const MatrixXd& beta, const VectorXd& gamma) {
  ClassPriors p = log_class_priors(X, beta, gamma);
  for (auto& m : p) m = m.array().exp().matrix();
  return p;
}

// -------------------------------------------------------------------------
// E-step
// -------------------------------------------------------------------------

EStepResult e_step_from_bounds(const NetworkData& data, const Params& params,
                               const MatrixXd& log_ftilde) {
  const int N = data.N();
  const int G = params.G();
  const int Q = params.Q();
  if (log_ftilde.rows() != N || log_ftilde.cols() != G)
    throw Error("e_step: log f~ table has the wrong shape");

  const ClassPriors log_eta = log_class_priors(data.X, params.beta, params.gamma);

  EStepResult res;
  res.post.vhat = MatrixXd::Zero(data.H(), Q);
  res.post.ahat.assign(Q, MatrixXd::Zero(N, G));
  res.post.zhat = MatrixXd::Zero(N, G);

  std::vector<double> terms(G);
  std::vector<double> layer_score(Q);
  MatrixXd row_mix(N, Q);  // log sum_g eta f~ per (row, q)
  for (int q = 0; q < Q; ++q) {
    for (int i = 0; i < N; ++i) {
      for (int g = 0; g < G; ++g) terms[g] = log_eta[q](i, g) + log_ftilde(i, g);
      const double lse = log_sum_exp(terms.data(), G);
      if (!std::isfinite(lse))
        throw NumericalError("mixture weight vanished for row " + std::to_string(i + 1) +
                             " (layer group " + std::to_string(q + 1) + ")");
      row_mix(i, q) = lse;
      for (int g = 0; g < G; ++g) res.post.ahat[q](i, g) = std::exp(terms[g] - lse);
    }
  }

  double loglik = 0.0;
  int start = 0;
  for (int h = 0; h < data.H(); ++h) {
    const int n = data.layer_sizes[h];
    for (int q = 0; q < Q; ++q) {
      double s = params.rho(q) > 0.0 ? std::log(params.rho(q)) : kNegInf;
      if (s != kNegInf)
        for (int i = start; i < start + n; ++i) s += row_mix(i, q);
      layer_score[q] = s;
    }
    const double lse = log_sum_exp(layer_score.data(), Q);
    if (!std::isfinite(lse))
      throw NumericalError("layer '" + data.layer_ids[h] + "' has zero likelihood");
    loglik += lse;
    for (int q = 0; q < Q; ++q) {
      const double v = std::exp(layer_score[q] - lse);
      res.post.vhat(h, q) = v;
      res.post.ahat[q].middleRows(start, n) *= v;
    }
    start += n;
  }
  for (int q = 0; q < Q; ++q) res.post.zhat += res.post.ahat[q];
  res.loglik = loglik;
  return res;
}

EStepResult e_step(const NetworkData& data, const Params& params, VarState& var) {
  const int N = data.N();
  const int G = params.G();
  if (var.G() != G || var.xi[0].rows() != N) throw Error("e_step: variational state shape");
  for (int i = 0; i < N; ++i) {
    for (int g = 0; g < G; ++g) {
      const ComponentMoments m =
          component_moments(data.Y.row(i).transpose(), var.xi[g].row(i).transpose(),
                            params.b.row(g).transpose(), params.loadings(g));
      var.mu[g].row(i) = m.mu.transpose();
      var.Sigma[static_cast<std::size_t>(i) * G + g] = m.Sigma;
      var.log_ftilde(i, g) = m.log_ftilde;
    }
  }
  return e_step_from_bounds(data, params, var.log_ftilde);
}

// -------------------------------------------------------------------------
// M-step: multinomial logit with layer-group offsets
// -------------------------------------------------------------------------

namespace {

// Shared evaluation of objective, gradient and (optionally) negative Hessian.
struct LogitEval {
  double objective = 0.0;
  VectorXd grad;
  MatrixXd neg_hess;
};

LogitEval evaluate_logit(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                         const MatrixXd& beta, const VectorXd& gamma, bool with_hessian) {
  const int N = static_cast<int>(X.rows());
  const int J = static_cast<int>(X.cols());
  const int G = static_cast<int>(beta.rows()) + 1;
  const int Q = static_cast<int>(gamma.size());
  const int P = (G - 1) * J + (Q - 1);
  const int gamma_off = (G - 1) * J;

  LogitEval ev;
  ev.grad = VectorXd::Zero(P);
  if (with_hessian) ev.neg_hess = MatrixXd::Zero(P, P);
  if (G == 1) return ev;

  const MatrixXd linear = X * beta.transpose();
  std::vector<double> logits(G);
  VectorXd eta(G);
  VectorXd zbar(P);
  MatrixXd& H = ev.neg_hess;
  for (int q = 0; q < Q; ++q) {
    const int qi = gamma_off + q - 1;
    for (int i = 0; i < N; ++i) {
      double n = 0.0;
      for (int g = 0; g < G; ++g) n += ahat[q](i, g);
      if (n <= 0.0) continue;
      logits[0] = 0.0;
      double top = 0.0;
      for (int g = 1; g < G; ++g) {
        logits[g] = linear(i, g - 1) + gamma(q);
        top = std::max(top, logits[g]);
      }
      double total = 0.0;
      for (int g = 0; g < G; ++g) total += (eta(g) = std::exp(logits[g] - top));
      const double lse = top + std::log(total);
      eta /= total;
      for (int g = 0; g < G; ++g) ev.objective += ahat[q](i, g) * (logits[g] - lse);
      const auto x = X.row(i);
      for (int g = 1; g < G; ++g) {
        const double resid = ahat[q](i, g) - n * eta(g);
        ev.grad.segment((g - 1) * J, J) += resid * x.transpose();
        if (q > 0) ev.grad(qi) += resid;
      }
      if (!with_hessian) continue;

      // -H += n [sum_g eta_g z_g z_g' - zbar zbar'], z_g the design row of class g.
      for (int g = 1; g < G; ++g) {
        const int o = (g - 1) * J;
        const double c = n * eta(g);
        for (int a = 0; a < J; ++a) {
          for (int bb = 0; bb < J; ++bb) H(o + a, o + bb) += c * x(a) * x(bb);
          if (q > 0) {
            H(o + a, qi) += c * x(a);
            H(qi, o + a) += c * x(a);
          }
        }
      }
      if (q > 0) H(qi, qi) += n * (1.0 - eta(0));
      for (int g = 1; g < G; ++g)
        for (int a = 0; a < J; ++a) zbar((g - 1) * J + a) = eta(g) * x(a);
      if (Q > 1) zbar.tail(Q - 1).setZero();
      if (q > 0) zbar(qi) = 1.0 - eta(0);
      H.selfadjointView<Eigen::Lower>().rankUpdate(zbar, -n);
    }
  }
  if (with_hessian) H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
  return ev;
}

VectorXd pack_logit(const MatrixXd& beta, const VectorXd& gamma) {
  const Eigen::Index J = beta.cols();
  VectorXd theta(beta.rows() * J + gamma.size() - 1);
  for (Eigen::Index g = 0; g < beta.rows(); ++g) theta.segment(g * J, J) = beta.row(g).transpose();
  theta.tail(gamma.size() - 1) = gamma.tail(gamma.size() - 1);
  return theta;
}

void unpack_logit(const VectorXd& theta, MatrixXd& beta, VectorXd& gamma) {
  const Eigen::Index J = beta.cols();
  for (Eigen::Index g = 0; g < beta.rows(); ++g) beta.row(g) = theta.segment(g * J, J).transpose();
  gamma(0) = 0.0;
  gamma.tail(gamma.size() - 1) = theta.tail(gamma.size() - 1);
}

}  // namespace

double logit_objective(const MatrixXd& X, const std::vector<MatrixXd>& ahat, const MatrixXd& beta,
                       const VectorXd& gamma) {
  return evaluate_logit(X, ahat, beta, gamma, false).objective;
}

VectorXd logit_gradient(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                        const MatrixXd& beta, const VectorXd& gamma) {
  return evaluate_logit(X, ahat, beta, gamma, false).grad;
}

LogitResult m_step_logit(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                         const MatrixXd& beta0, const VectorXd& gamma0, const NewtonConfig& cfg) {
  if (static_cast<Eigen::Index>(ahat.size()) != gamma0.size())
    throw Error("m_step_logit: ahat must have one slice per layer group");
  LogitResult res;
  res.beta = beta0;
  res.gamma = gamma0;
  if (beta0.rows() == 0) {
    // A single class: the priors are identically one and gamma is unidentified.
    res.gamma.setZero();
    res.converged = true;
    return res;
  }
  res.gamma(0) = 0.0;

  VectorXd theta = pack_logit(res.beta, res.gamma);
  LogitEval ev = evaluate_logit(X, ahat, res.beta, res.gamma, true);
  for (int it = 0; it < cfg.max_iters; ++it) {
    res.grad_norm = ev.grad.size() ? ev.grad.lpNorm<Eigen::Infinity>() : 0.0;
    if (res.grad_norm < cfg.tol) {
      res.converged = true;
      break;
    }
    VectorXd step;
    if (!solve_spd(ev.neg_hess, ev.grad, step, res.ridged))
      throw NumericalError("multinomial logit Hessian is singular after ridging");

    double scale = 1.0;
    bool improved = false;
    MatrixXd beta_try = res.beta;
    VectorXd gamma_try = res.gamma;
    for (int halving = 0; halving <= 20; ++halving, scale *= 0.5) {
      unpack_logit(theta + scale * step, beta_try, gamma_try);
      const double f = logit_objective(X, ahat, beta_try, gamma_try);
      if (std::isfinite(f) && f >= ev.objective) {
        improved = true;
        break;
      }
    }
    res.iterations = it + 1;
    if (!improved) break;
    theta += scale * step;
    res.beta = beta_try;
    res.gamma = gamma_try;
    ev = evaluate_logit(X, ahat, res.beta, res.gamma, true);
  }
  res.objective = ev.objective;
  res.grad_norm = ev.grad.size() ? ev.grad.lpNorm<Eigen::Infinity>() : 0.0;
  if (res.grad_norm < cfg.tol) res.converged = true;
  return res;
}

VectorXd update_rho(const MatrixXd& vhat) {
  VectorXd rho = vhat.colwise().mean().transpose();
  const double s = rho.sum();
  if (s > 0.0) rho /= s;
  return rho;
}

// -------------------------------------------------------------------------
// M-step: latent trait parameters
// -------------------------------------------------------------------------

namespace {

// Per (g, k): negative-definite curvature 2 sum_i z lambda E[alpha alpha'] and
// linear term sum_i z (y - 1/2) alpha, alpha = (mu', 1)'.
struct ZetaSystem {
  std::vector<MatrixXd> curv;  // index g * R + k, (D+1) x (D+1)
  std::vector<VectorXd> lin;
};

ZetaSystem accumulate_zeta(const NetworkData& data, const MatrixXd& zhat, const VarState& var) {
  const int N = data.N();
  const int R = data.R();
  const int G = var.G();
  const int D = static_cast<int>(var.mu[0].cols());
  ZetaSystem sys;
  sys.curv.assign(static_cast<std::size_t>(G) * R, MatrixXd::Zero(D + 1, D + 1));
  sys.lin.assign(static_cast<std::size_t>(G) * R, VectorXd::Zero(D + 1));
  MatrixXd second(D + 1, D + 1);
  VectorXd alpha(D + 1);
  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < N; ++i) {
      const double z = zhat(i, g);
      if (z <= 0.0) continue;
      const TraitMat& S = var.Sigma[static_cast<std::size_t>(i) * G + g];
      alpha.head(D) = var.mu[g].row(i).transpose();
      alpha(D) = 1.0;
      second = alpha * alpha.transpose();
      second.topLeftCorner(D, D) += S;
      for (int k = 0; k < R; ++k) {
        const std::size_t idx = static_cast<std::size_t>(g) * R + k;
        sys.curv[idx].noalias() += (2.0 * z * lambda_fn(var.xi[g](i, k))) * second;
        sys.lin[idx].noalias() += (z * (data.Y(i, k) - 0.5)) * alpha;
      }
    }
  }
  return sys;
}

}  // namespace

ZetaUpdate update_zeta(const NetworkData& data, const MatrixXd& zhat, const VarState& var,
                       bool parsimonious) {
  const int R = data.R();
  const int G = var.G();
  const int D = static_cast<int>(var.mu[0].cols());
  const ZetaSystem sys = accumulate_zeta(data, zhat, var);

  ZetaUpdate out;
  out.b = MatrixXd::Zero(G, R);
  VectorXd sol;
  if (!parsimonious || G == 1) {
    out.w.assign(parsimonious ? 1 : G, MatrixXd::Zero(R, D));
    for (int g = 0; g < G; ++g) {
      for (int k = 0; k < R; ++k) {
        const std::size_t idx = static_cast<std::size_t>(g) * R + k;
        if (!solve_spd(-sys.curv[idx], sys.lin[idx], sol, out.ridged))
          throw NumericalError("trait parameter system is singular after ridging");
        out.w[parsimonious ? 0 : g].row(k) = sol.head(D).transpose();
        out.b(g, k) = sol(D);
      }
    }
    return out;
  }

  // Shared loadings: unknowns (w_k, b_1k, ..., b_Gk) solved jointly per k.
  out.w.assign(1, MatrixXd::Zero(R, D));
  MatrixXd A(D + G, D + G);
  VectorXd rhs(D + G);
  for (int k = 0; k < R; ++k) {
    A.setZero();
    rhs.setZero();
    for (int g = 0; g < G; ++g) {
      const std::size_t idx = static_cast<std::size_t>(g) * R + k;
      const MatrixXd M = -sys.curv[idx];
      A.topLeftCorner(D, D) += M.topLeftCorner(D, D);
      A.block(0, D + g, D, 1) += M.block(0, D, D, 1);
      A.block(D + g, 0, 1, D) += M.block(D, 0, 1, D);
      A(D + g, D + g) += M(D, D);
      rhs.head(D) += sys.lin[idx].head(D);
      rhs(D + g) += sys.lin[idx](D);
    }
    if (!solve_spd(A, rhs, sol, out.ridged))
      throw NumericalError("shared-loading system is singular after ridging");
    out.w[0].row(k) = sol.head(D).transpose();
    for (int g = 0; g < G; ++g) out.b(g, k) = sol(D + g);
  }
  return out;
}

double expected_bound(const NetworkData& data, const MatrixXd& zhat, const VarState& var,
                      const MatrixXd& b, const std::vector<MatrixXd>& w) {
  const int N = data.N();
  const int R = data.R();
  const int G = var.G();
  double total = 0.0;
  for (int g = 0; g < G; ++g) {
    const MatrixXd& wg = w.size() == 1 ? w[0] : w[g];
    for (int i = 0; i < N; ++i) {
      const double z = zhat(i, g);
      if (z <= 0.0) continue;
      const TraitMat& S = var.Sigma[static_cast<std::size_t>(i) * G + g];
      const VectorXd mu = var.mu[g].row(i).transpose();
      double s = 0.0;
      for (int k = 0; k < R; ++k) {
        const double xi = var.xi[g](i, k);
        const double lam = lambda_fn(xi);
        const VectorXd wk = wg.row(k).transpose();
        const double mean = b(g, k) + wk.dot(mu);
        const double second = mean * mean + wk.dot(S * wk);
        s += log_logistic(xi) + (data.Y(i, k) - 0.5) * mean - 0.5 * xi +
             lam * (second - xi * xi);
      }
      total += z * s;
    }
  }
  return total;
}

// -------------------------------------------------------------------------
// Fitting loop
// -------------------------------------------------------------------------

void refresh_variational(const NetworkData& data, const Params& params, VarState& var,
                         int inner_iters, double inner_tol) {
  const int N = data.N();
  const int G = params.G();
  ComponentMoments m;
  for (int g = 0; g < G; ++g) {
    const MatrixXd& wg = params.loadings(g);
    const VectorXd bg = params.b.row(g).transpose();
    for (int i = 0; i < N; ++i) {
      inner_em_inplace(data.Y.row(i).transpose(), bg, wg, var.xi[g].row(i).transpose(),
                       inner_iters, inner_tol, m);
      var.mu[g].row(i) = m.mu.transpose();
      var.Sigma[static_cast<std::size_t>(i) * G + g] = m.Sigma;
      var.log_ftilde(i, g) = m.log_ftilde;
    }
  }
}

Params initial_params(const ModelDims& dims, int R, int J, std::uint64_t seed, int start) {
  Params p = Params::zeros(dims, R, J);
  Rng rng = substream(seed, static_cast<std::uint64_t>(start));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int g = 0; g < dims.G; ++g)
    for (int k = 0; k < R; ++k) p.b(g, k) = normal(rng);
  for (auto& m : p.w)
    for (int k = 0; k < R; ++k)
      for (int d = 0; d < dims.D; ++d) m(k, d) = normal(rng);
  // gamma equally spaced on [-1, 1], then shifted so gamma_1 = 0.
  for (int q = 1; q < dims.Q; ++q) p.gamma(q) = 2.0 * q / (dims.Q - 1);

  // Label convention: the reference class is the one with the lowest mean
  // intercept, the remaining classes follow in increasing order.
  std::vector<int> order(dims.G);
  std::iota(order.begin(), order.end(), 0);
  const VectorXd means = p.b.rowwise().mean();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int c) { return means(a) < means(c); });
  Params sorted = p;
  for (int g = 0; g < dims.G; ++g) {
    sorted.b.row(g) = p.b.row(order[g]);
    if (p.w.size() > 1) sorted.w[g] = p.w[order[g]];
  }
  return sorted;
}

FitResult fit_one(const NetworkData& data, const ModelDims& dims, const Params& init,
                  const FitConfig& cfg, FitTrace* trace) {
  cfg.validate();
  dims.validate(data.H());
  init.validate();
  if (init.G() != dims.G || init.Q() != dims.Q || init.D() != dims.D || init.R() != data.R() ||
      init.beta.cols() != data.J())
    throw Error("fit_one: initial parameters do not match the model dimensions");
  if (static_cast<int>(init.w.size()) != (dims.parsimonious ? 1 : dims.G))
    throw Error("fit_one: loading layout does not match the parsimonious flag");

  const int G = dims.G;
  Params params = init;
  VarState var = VarState::init(data.N(), data.R(), G, dims.D, cfg.xi_init);
  const NewtonConfig nr{cfg.nr_max_iters, cfg.nr_tol};

  FitResult best;
  best.dims = dims;
  best.loglik = kNegInf;
  Posteriors best_post;

  double prev = kNegInf;
  int empty_streak = 0;
  int it = 0;
  bool converged = false;
  bool degenerate = false;
  while (it < cfg.max_outer_iters) {
    ++it;
    refresh_variational(data, params, var, cfg.inner_iters, cfg.inner_tol);
    EStepResult es = e_step_from_bounds(data, params, var.log_ftilde);
    if (!std::isfinite(es.loglik))
      throw NumericalError("non-finite approximate log-likelihood at iteration " +
                           std::to_string(it));
    if (trace) trace->loglik.push_back(es.loglik);
    if (es.loglik > best.loglik) {
      best.loglik = es.loglik;
      best.params = params;
      best_post = es.post;
    }

    if (G > 1) {
      const bool empty = ((es.post.zhat.colwise().maxCoeff().array()) < kEmptyClassMass).any();
      empty_streak = empty ? empty_streak + 1 : 0;
      if (empty_streak >= kEmptyClassPatience) {
        degenerate = true;
        break;
      }
    }
    if (it > 1 && std::abs(es.loglik - prev) <= cfg.outer_tol * std::abs(prev)) {
      converged = true;
      break;
    }
    prev = es.loglik;

    const LogitResult logit = m_step_logit(data.X, es.post.ahat, params.beta, params.gamma, nr);
    params.beta = logit.beta;
    params.gamma = logit.gamma;
    params.rho = update_rho(es.post.vhat);
    ZetaUpdate zeta = update_zeta(data, es.post.zhat, var, dims.parsimonious);
    params.b = std::move(zeta.b);
    params.w = std::move(zeta.w);
  }

  best.zhat = std::move(best_post.zhat);
  best.vhat = std::move(best_post.vhat);
  best.node_map = map_labels(best.zhat);
  best.layer_map = map_labels(best.vhat);
  best.n_iterations = it;
  best.converged = converged;
  best.degenerate = degenerate;
  best.bic = bic(best.loglik, dims, data.R(), data.J(), data.N());
  return best;
}

MultiStartResult fit_multistart_detailed(const NetworkData& data, const ModelDims& dims,
                                         const FitConfig& cfg) {
  cfg.validate();
  dims.validate(data.H());
  const int S = cfg.n_starts;
  std::vector<FitResult> fits(S);
  std::vector<StartOutcome> outcomes(S);
  parallel_for(S, resolve_threads(cfg.threads), [&](int s) {
    StartOutcome& o = outcomes[s];
    o.start = s;
    try {
      const Params init = initial_params(dims, data.R(), data.J(), cfg.seed, s);
      fits[s] = fit_one(data, dims, init, cfg);
      fits[s].start_index = s;
      o.ok = true;
      o.degenerate = fits[s].degenerate;
      o.loglik = fits[s].loglik;
    } catch (const Error& e) {
      o.error = e.what();
    }
  });

  int winner = -1;
  for (int s = 0; s < S; ++s) {
    if (!outcomes[s].ok || outcomes[s].degenerate) continue;
    if (winner < 0 || outcomes[s].loglik > outcomes[winner].loglik) winner = s;
  }
  if (winner < 0) {
    std::string msg = "all " + std::to_string(S) + " starts failed:";
    for (const auto& o : outcomes)
      msg += " [start " + std::to_string(o.start) + ": " +
             (o.ok ? std::string("degenerate (empty class)") : o.error) + "]";
    throw NumericalError(msg);
  }
  MultiStartResult res;
  res.best = std::move(fits[winner]);
  res.starts = std::move(outcomes);
  return res;
}

FitResult fit_multistart(const NetworkData& data, const ModelDims& dims, const FitConfig& cfg) {
  return fit_multistart_detailed(data, dims, cfg).best;
}

}  // namespace mlta
