#pragma once

// Variational machinery for one mixture component: the tangent (Jaakkola-Jordan)
// lower bound on the Bernoulli-logistic likelihood, the Gaussian posterior of
// the latent trait it induces, and the fixed-point update of the tangent
// locations xi.

#include "mlta/types.hpp"

namespace mlta {

// Vector views that bind to contiguous vectors and to transposed matrix rows
// without copying.
using VecCRef = Eigen::Ref<const VectorXd, 0, Eigen::InnerStride<>>;
using VecRef = Eigen::Ref<VectorXd, 0, Eigen::InnerStride<>>;
using MatCRef = Eigen::Ref<const MatrixXd>;

/// 1 / (1 + exp(-x)), overflow-free over the whole real line.
double logistic(double x);

/// log logistic(x) = -log1p(exp(-x)), stable for large |x|.
double log_logistic(double x);

/// (1/2 - logistic(xi)) / (2 xi). Even, strictly negative, -1/8 at the origin.
double lambda_fn(double xi);

/// Below this |xi| the tangent coefficient uses its limit value -1/8.
inline constexpr double kLambdaSwitch = 1e-6;
/// Floor applied to xi when the expected squared linear predictor is zero.
inline constexpr double kXiFloor = 1e-6;

struct ComponentMoments {
  TraitVec mu;
  TraitMat Sigma;
  double log_ftilde = 0.0;
};

/// Gaussian posterior of the latent trait for one (node, group) pair together
/// with the log of the integrated lower bound.
///
/// Sigma = [I - 2 sum_k lambda(xi_k) w_k w_k']^{-1}
/// mu    = Sigma sum_k [(y_k - 1/2) + 2 lambda(xi_k) b_k] w_k
/// log f~ = sum_k [log g(xi_k) + (y_k - 1/2) b_k - xi_k / 2 + lambda(xi_k)(b_k^2 - xi_k^2)]
///          + mu' Sigma^{-1} mu / 2 + log|Sigma| / 2
///
/// `y`, `xi`, `b` have length R; `w` is R x D.
ComponentMoments component_moments(const VecCRef& y,
                                   const VecCRef& xi,
                                   const VecCRef& b,
                                   const MatCRef& w);

/// xi_k = sqrt(E[(b_k + w_k' u)^2]) under u ~ N(mu, Sigma).
VectorXd update_xi(const VecCRef& b, const MatCRef& w,
                   const ComponentMoments& moments);

/// In-place variant used by the fitting loop.
void update_xi_into(const VecCRef& b, const MatCRef& w,
                    const ComponentMoments& moments, VecRef xi);

struct InnerEmResult {
  ComponentMoments moments;
  VectorXd xi;
  int iterations = 0;
  std::vector<double> trace;  // log f~ after each moment evaluation
};

/// Alternates component_moments and update_xi at most `iters` times, stopping
/// early once the relative change of log f~ falls below `rel_tol`. The
/// returned moments are evaluated at the returned xi.
InnerEmResult inner_em(const VecCRef& y, const VecCRef& b,
                       const MatCRef& w,
                       const VecCRef& xi0, int iters,
                       double rel_tol = 1e-8);

/// Allocation-light inner EM operating on a caller-owned xi row; returns the
/// final moments and the number of moment evaluations performed.
int inner_em_inplace(const VecCRef& y, const VecCRef& b,
                     const MatCRef& w, VecRef xi, int iters,
                     double rel_tol, ComponentMoments& out);

}  // namespace mlta
