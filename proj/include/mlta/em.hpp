#pragma once

// Outer variational EM for the multilevel MLTA: class priors with a discrete
// layer random effect, E-step posteriors, M-step updates and the multi-start
// driver.

#include "mlta/types.hpp"
#include "mlta/varcore.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mlta {

struct FitConfig {
  int n_starts = 10;
  int max_outer_iters = 500;
  double outer_tol = 1e-6;
  int inner_iters = 100;
  double inner_tol = 1e-8;
  int nr_max_iters = 100;
  double nr_tol = 1e-8;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Initial value of every xi at the start of a fit.
  double xi_init = 20.0;

  void validate() const;
};

/// Per layer group q, an N x G matrix of prior class probabilities eta.
using ClassPriors = std::vector<MatrixXd>;

struct Posteriors {
  MatrixXd zhat;              // N x G
  MatrixXd vhat;              // H x Q
  std::vector<MatrixXd> ahat; // per q: N x G joint posteriors
};

/// log eta_{igq}: logits 0 for class 0 and x_i' beta_g + gamma_q otherwise,
/// normalised with a max shift.
ClassPriors log_class_priors(const MatrixXd& X, const MatrixXd& beta, const VectorXd& gamma);
ClassPriors class_priors(const MatrixXd& X, const MatrixXd& beta, const VectorXd& gamma);

struct EStepResult {
  Posteriors post;
  double loglik = 0.0;
};

/// Posteriors and the approximate log-likelihood given a precomputed table of
/// log f~ values (N x G).
EStepResult e_step_from_bounds(const NetworkData& data, const Params& params,
                               const MatrixXd& log_ftilde);

/// Recomputes log f~ from the xi stored in `var` (mu and Sigma refreshed as a
/// side effect) and runs the E-step.
EStepResult e_step(const NetworkData& data, const Params& params, VarState& var);

struct NewtonConfig {
  int max_iters = 100;
  double tol = 1e-8;
};

struct LogitResult {
  MatrixXd beta;
  VectorXd gamma;
  int iterations = 0;
  bool converged = false;
  bool ridged = false;
  double objective = 0.0;
  double grad_norm = 0.0;
};

/// Weighted multinomial-logit objective sum_{i,q,g} a_{igq} log eta_{igq}.
double logit_objective(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                       const MatrixXd& beta, const VectorXd& gamma);

/// Analytic gradient of logit_objective with respect to the free parameters,
/// ordered as vec(beta rows) followed by gamma_2..gamma_Q.
VectorXd logit_gradient(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                        const MatrixXd& beta, const VectorXd& gamma);

/// Newton-Raphson maximisation of logit_objective with step halving. gamma(0)
/// stays pinned at zero.
LogitResult m_step_logit(const MatrixXd& X, const std::vector<MatrixXd>& ahat,
                         const MatrixXd& beta0, const VectorXd& gamma0,
                         const NewtonConfig& cfg = {});

VectorXd update_rho(const MatrixXd& vhat);

struct ZetaUpdate {
  MatrixXd b;
  std::vector<MatrixXd> w;
  bool ridged = false;
};

/// Closed-form maximiser of the expected tangent bound in (b, w). With
/// `parsimonious` the loadings are shared across groups and solved jointly
/// with the group intercepts.
ZetaUpdate update_zeta(const NetworkData& data, const MatrixXd& zhat, const VarState& var,
                       bool parsimonious);

/// Expected tangent bound sum_{i,g} zhat_{ig} E_q[log f~(y_i | u, xi)] as a
/// function of (b, w) at fixed variational state; the objective update_zeta
/// maximises (constant terms included).
double expected_bound(const NetworkData& data, const MatrixXd& zhat, const VarState& var,
                      const MatrixXd& b, const std::vector<MatrixXd>& w);

/// Runs inner EM for every (row, group) at the current (b, w), updating xi,
/// mu, Sigma and log f~ in place.
void refresh_variational(const NetworkData& data, const Params& params, VarState& var,
                         int inner_iters, double inner_tol);

/// Parameters used to seed start `start` (see the initialisation policy in
/// the README).
Params initial_params(const ModelDims& dims, int R, int J, std::uint64_t seed, int start);

struct FitTrace {
  std::vector<double> loglik;  // approximate log-likelihood per outer iteration
};

/// One EM run from `init`. Throws NumericalError on a non-finite likelihood.
FitResult fit_one(const NetworkData& data, const ModelDims& dims, const Params& init,
                  const FitConfig& cfg, FitTrace* trace = nullptr);

struct StartOutcome {
  int start = 0;
  bool ok = false;
  bool degenerate = false;
  double loglik = 0.0;
  std::string error;
};

struct MultiStartResult {
  FitResult best;
  std::vector<StartOutcome> starts;
};

/// Runs `cfg.n_starts` independent starts and keeps the highest likelihood
/// among the non-degenerate ones.
MultiStartResult fit_multistart_detailed(const NetworkData& data, const ModelDims& dims,
                                         const FitConfig& cfg);
FitResult fit_multistart(const NetworkData& data, const ModelDims& dims, const FitConfig& cfg);

}  // namespace mlta
