#include "mlta/varcore.hpp"

#include <cmath>
#include <string>

namespace mlta {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double lambda_fn(double xi) {
  const double a = std::abs(xi);
  if (a < kLambdaSwitch) return -0.125;
  // (1/2 - g(a)) / (2a) = -tanh(a/2) / (4a)
  return -std::tanh(0.5 * a) / (4.0 * a);
}

namespace {

// lambda(xi) and log g(xi) from a single exponential. Away from the origin
// tanh(a/2) = (1 - e^-a) / (1 + e^-a); near it std::tanh keeps full precision.
inline void tangent_terms(double xi, double& lam, double& log_g) {
  const double a = std::abs(xi);
  const double e = std::exp(-a);
  log_g = xi >= 0.0 ? -std::log1p(e) : -a - std::log1p(e);
  if (a < kLambdaSwitch)
    lam = -0.125;
  else if (a < 0.5)
    lam = -std::tanh(0.5 * a) / (4.0 * a);
  else
    lam = -((1.0 - e) / (1.0 + e)) / (4.0 * a);
}

// Scalar specialisation of component_moments for a one-dimensional trait.
ComponentMoments component_moments_1d(const VecCRef& y, const VecCRef& xi, const VecCRef& b,
                                      const VecCRef& w) {
  double precision = 1.0;
  double shift = 0.0;
  double base = 0.0;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double x = xi(k);
    double lam, log_g;
    tangent_terms(x, lam, log_g);
    const double yc = y(k) - 0.5;
    const double wk = w(k);
    precision -= 2.0 * lam * wk * wk;
    shift += (yc + 2.0 * lam * b(k)) * wk;
    base += log_g + yc * b(k) - 0.5 * x + lam * (b(k) * b(k) - x * x);
  }
  if (!(precision > 0.0))
    throw NumericalError("latent-trait precision matrix is not positive definite");
  ComponentMoments out;
  const double sigma = 1.0 / precision;
  out.mu = TraitVec::Constant(1, sigma * shift);
  out.Sigma = TraitMat::Constant(1, 1, sigma);
  out.log_ftilde = base + 0.5 * shift * shift * sigma - 0.5 * std::log(precision);
  return out;
}

}  // namespace

ComponentMoments component_moments(const VecCRef& y, const VecCRef& xi, const VecCRef& b,
                                   const MatCRef& w) {
  const Eigen::Index R = y.size();
  const Eigen::Index D = w.cols();
  if (D == 1) return component_moments_1d(y, xi, b, w.col(0));
  TraitMat precision = TraitMat::Identity(D, D);
  TraitVec shift = TraitVec::Zero(D);
  double base = 0.0;
  for (Eigen::Index k = 0; k < R; ++k) {
    double lam, log_g;
    tangent_terms(xi(k), lam, log_g);
    const double yc = y(k) - 0.5;
    const auto wk = w.row(k);
    precision.noalias() -= (2.0 * lam) * (wk.transpose() * wk);
    shift.noalias() += (yc + 2.0 * lam * b(k)) * wk.transpose();
    base += log_g + yc * b(k) - 0.5 * xi(k) + lam * (b(k) * b(k) - xi(k) * xi(k));
  }

  Eigen::LLT<TraitMat> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("latent-trait precision matrix is not positive definite");

  ComponentMoments out;
  out.mu = llt.solve(shift);
  out.Sigma = llt.solve(TraitMat::Identity(D, D));
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose()).eval();
  // mu' Sigma^{-1} mu = shift' mu;  log|Sigma| = -2 sum log diag(L)
  const double quad = shift.dot(out.mu);
  const double log_det_precision = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.log_ftilde = base + 0.5 * quad - 0.5 * log_det_precision;
  return out;
}

void update_xi_into(const VecCRef& b, const MatCRef& w, const ComponentMoments& m, VecRef xi) {
  if (w.cols() == 1) {
    const double mu = m.mu(0);
    const double sigma = m.Sigma(0, 0);
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const double wk = w(k, 0);
      const double mean = b(k) + wk * mu;
      const double root = std::sqrt(mean * mean + wk * wk * sigma);
      xi(k) = root > kXiFloor ? root : kXiFloor;
    }
    return;
  }
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    const auto wk = w.row(k);
    const double mean = b(k) + wk.dot(m.mu);
    const double var = (wk * m.Sigma).dot(wk);
    const double radicand = mean * mean + var;
    if (radicand < -1e-12)
      throw NumericalError("negative expected squared predictor in xi update");
    const double root = std::sqrt(std::max(radicand, 0.0));
    xi(k) = root > kXiFloor ? root : kXiFloor;
  }
}

VectorXd update_xi(const VecCRef& b, const MatCRef& w, const ComponentMoments& moments) {
  VectorXd xi(b.size());
  update_xi_into(b, w, moments, xi);
  return xi;
}

int inner_em_inplace(const VecCRef& y, const VecCRef& b, const MatCRef& w, VecRef xi,
                     int iters, double rel_tol, ComponentMoments& out) {
  out = component_moments(y, xi, b, w);
  int evaluations = 1;
  for (int t = 0; t < iters; ++t) {
    const double prev = out.log_ftilde;
    update_xi_into(b, w, out, xi);
    out = component_moments(y, xi, b, w);
    ++evaluations;
    if (std::abs(out.log_ftilde - prev) <= rel_tol * std::max(std::abs(prev), 1.0)) break;
  }
  return evaluations;
}

InnerEmResult inner_em(const VecCRef& y, const VecCRef& b, const MatCRef& w,
                       const VecCRef& xi0, int iters, double rel_tol) {
  if (iters < 1) throw Error("inner_em: iters must be >= 1");
  InnerEmResult r;
  r.xi = xi0;
  r.moments = component_moments(y, r.xi, b, w);
  r.trace.push_back(r.moments.log_ftilde);
  for (int t = 0; t < iters; ++t) {
    const double prev = r.moments.log_ftilde;
    update_xi_into(b, w, r.moments, r.xi);
    r.moments = component_moments(y, r.xi, b, w);
    r.trace.push_back(r.moments.log_ftilde);
    ++r.iterations;
    if (std::abs(r.moments.log_ftilde - prev) <= rel_tol * std::max(std::abs(prev), 1.0)) break;
  }
  return r;
}

}  // namespace mlta
