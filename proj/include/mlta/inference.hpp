#pragma once

// Layer-stratified nonparametric bootstrap and label alignment.

#include "mlta/em.hpp"
#include "mlta/rng.hpp"

#include <string>
#include <vector>

namespace mlta {

/// Draws n_h rows with replacement inside every layer; covariates travel with
/// their incidence rows.
NetworkData resample_within_layers(const NetworkData& data, Rng& rng);

/// Relabelling that maps a candidate onto a reference solution. Entry g of
/// `group_perm` is the candidate group that becomes group g; likewise for
/// layer groups. `trait_sign` flips latent-trait axes.
struct Alignment {
  std::vector<int> group_perm;
  std::vector<int> layer_perm;
  std::vector<int> trait_sign;
  /// False when the reference class moved under G >= 3 with Q >= 2: the
  /// layer effect then cannot be re-expressed exactly and gamma is carried
  /// over unchanged.
  bool exact = true;
};

/// Exhaustive search (G <= 8, Q <= 8): the group permutation minimises the
/// Frobenius distance between intercept matrices, the layer permutation the
/// squared distance between re-pinned support points.
Alignment find_alignment(const Params& ref, const Params& cand);

/// Applies an alignment. Class-prior coefficients are re-anchored on the new
/// reference class and gamma is re-pinned at gamma(0) = 0.
Params apply_alignment(const Params& p, const Alignment& a);

/// Permutes posterior columns and MAP labels consistently with `a`.
FitResult apply_alignment(const FitResult& fit, const Alignment& a);

Params align_labels(const Params& ref, const Params& cand);

/// Squared-intercept alignment cost used by find_alignment for a given group
/// permutation.
double group_alignment_cost(const Params& ref, const Params& cand, const std::vector<int>& perm);

/// Flat parameter vector (beta, b, w, gamma_2.., rho) and matching names.
VectorXd flatten_params(const Params& p);
std::vector<std::string> param_names(const Params& p);

struct BootstrapConfig {
  int replicates = 100;
  /// Refit each replicate from `n_starts` random starts instead of warm
  /// starting at the point estimate.
  bool multistart = false;
  double max_failed_fraction = 0.2;
};

struct BootstrapResult {
  int S = 0;
  std::vector<std::string> names;
  VectorXd estimate;   // point estimate, flattened
  MatrixXd estimates;  // successful replicates x p, aligned
  MatrixXd covariance; // V(theta), 1/S normalisation
  VectorXd se;
  MatrixXd ci;         // p x 2, percentile 95%
  int n_failed = 0;
};

/// 1/S sum (t_s - mean)(t_s - mean)'.
MatrixXd bootstrap_covariance(const MatrixXd& estimates);

/// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> values, double prob);

BootstrapResult bootstrap_se(const NetworkData& data, const ModelDims& dims,
                             const FitResult& fitted, const BootstrapConfig& bcfg,
                             const FitConfig& cfg);

/// `name,estimate,se,ci_lo,ci_hi`.
std::string format_bootstrap_table(const BootstrapResult& r);

}  // namespace mlta
