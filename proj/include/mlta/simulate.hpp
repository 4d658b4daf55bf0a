#pragma once

// Synthetic multi-layer bipartite networks drawn from the multilevel MLTA,
// with the simulation-study design as default truth.

#include "mlta/rng.hpp"
#include "mlta/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace mlta {

struct SimSpec {
  int N = 500;
  int R = 7;
  int H = 20;
  int G = 3;
  int D = 1;
  int Q = 2;
  std::optional<MatrixXd> beta;   // (G-1) x 2: intercept and slope of the nodal attribute
  std::optional<VectorXd> gamma;  // Q raw support points (any gauge)
  std::optional<VectorXd> rho;    // Q weights
  std::optional<MatrixXd> b;      // G x R
  std::optional<MatrixXd> w;      // R x D, shared across groups
  std::uint64_t seed = 1;

  void validate() const;
};

struct Truth {
  Params params;        // gauge-fixed: gamma(0) == 0, beta intercepts absorb gamma_1
  VectorXd gamma_raw;   // support points as specified before gauge fixing
  std::vector<int> node_labels;
  std::vector<int> layer_labels;
};

struct SimResult {
  NetworkData data;
  Truth truth;
};

/// Design values for G = 3: beta_2 = (1, -0.4), beta_3 = (1.5, -0.9);
/// b_g ~ N(m_g 1, I) with m = (-3, 0, 3); shared w_k ~ N(0, I_D);
/// gamma = (-0.5, 1.5[, 2.5]), rho = (0.3, 0.7) or uniform thirds.
/// Explicit fields of `spec` override the defaults. Returns raw (ungauged)
/// parameters; gamma is carried in the raw gauge.
Params default_truth(const SimSpec& spec, Rng& rng);

/// Moves gamma_1 into the non-reference intercepts so gamma(0) == 0. Class
/// priors are unchanged.
Params gauge_fix(const Params& raw);

SimResult simulate_network(const SimSpec& spec);

nlohmann::json truth_to_json(const Truth& t);
Truth truth_from_json(const nlohmann::json& j);
void write_truth(const Truth& t, const std::string& path);
Truth read_truth(const std::string& path);

}  // namespace mlta
