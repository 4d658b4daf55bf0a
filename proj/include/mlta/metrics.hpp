#pragma once

// Recovery metrics against simulation truth and derived probability tables.

#include "mlta/em.hpp"
#include "mlta/simulate.hpp"
#include "mlta/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mlta {

/// Adjusted Rand Index between two partitions of the same items.
double ari(const std::vector<int>& a, const std::vector<int>& b);

/// Elementwise squared error.
VectorXd mse(const VectorXd& est, const VectorXd& truth);

/// logistic(b_gk): connection probability at the latent-trait mean u = 0.
MatrixXd predicted_probs(const Params& params);

struct EvalReport {
  double ari_nodes = 0.0;
  double ari_layers = 0.0;
  VectorXd mse_beta;       // (G-1) x J, row-major
  VectorXd mse_gamma;      // contrasts gamma_q - gamma_1, q >= 2
  VectorXd mse_gamma_raw;  // all Q support points after the best common shift
  VectorXd mse_rho;
  MatrixXd prob_table;     // G x R
  bool alignment_exact = true;
};

/// Aligns the fit to the truth labels and computes every report field.
EvalReport evaluate(const FitResult& fit, const Truth& truth);

nlohmann::json eval_to_json(const EvalReport& r);

struct ReplicateOutcome {
  int replicate = 0;
  std::uint64_t sim_seed = 0;
  bool ok = false;
  EvalReport report;
  double loglik = 0.0;
  std::string error;
};

/// Simulates `B` datasets from `spec` (seeds derived from spec.seed and the
/// replicate index), fits each with fit_multistart and evaluates it against
/// its truth. Replicates run in parallel on `cfg.threads` workers.
std::vector<ReplicateOutcome> replicate_study(const SimSpec& spec, const ModelDims& dims,
                                              const FitConfig& cfg, int B);

/// Seed of replicate `b` in replicate_study.
std::uint64_t replicate_seed(std::uint64_t base, int b);

}  // namespace mlta
