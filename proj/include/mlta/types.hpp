#pragma once

// Core value types shared by every stage of the multilevel MLTA pipeline.
//
// Row convention: sending nodes are stored layer by layer, so the rows of
// NetworkData::Y and NetworkData::X for layer h occupy the contiguous range
// [layer_offset(h), layer_offset(h) + layer_sizes[h]). Group, trait and
// layer-group indices are 0-based everywhere (class 0 is the reference class
// of the multinomial logit, layer group 0 carries gamma = 0).

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlta {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Upper bound on the latent-trait dimension. Per-component moments are kept
// in fixed-capacity Eigen storage so the inner loops never touch the heap.
inline constexpr int kMaxTraitDim = 8;

using TraitVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxTraitDim, 1>;
using TraitMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxTraitDim, kMaxTraitDim>;

// -------------------------------------------------------------------------
// Errors
// -------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (CSV content, dimension mismatches).
struct DataError : Error {
  using Error::Error;
};

/// model.json / truth.json content that does not match the expected schema.
struct SchemaError : Error {
  using Error::Error;
};

/// Numerical breakdown: non-finite likelihood, underflowed mixtures,
/// singular systems that survive ridging.
struct NumericalError : Error {
  using Error::Error;
};

// -------------------------------------------------------------------------
// Data
// -------------------------------------------------------------------------

struct NetworkData {
  std::vector<std::string> layer_ids;
  std::vector<int> layer_sizes;
  MatrixXd Y;  // N x R, entries 0/1
  MatrixXd X;  // N x J, column 0 is the intercept

  int H() const { return static_cast<int>(layer_sizes.size()); }
  int N() const { return static_cast<int>(Y.rows()); }
  int R() const { return static_cast<int>(Y.cols()); }
  int J() const { return static_cast<int>(X.cols()); }

  int layer_offset(int h) const;
  /// Layer index of every row.
  std::vector<int> row_layers() const;

  /// Throws DataError if any invariant is broken.
  void validate() const;
};

struct ModelDims {
  int G = 1;
  int D = 1;
  int Q = 1;
  bool parsimonious = false;

  void validate(int H) const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct Params {
  MatrixXd beta;            // (G-1) x J; row g-1 holds beta_g, class 0 is reference
  MatrixXd b;               // G x R
  std::vector<MatrixXd> w;  // R x D per group, or a single shared R x D if parsimonious
  VectorXd gamma;           // Q, gamma(0) == 0
  VectorXd rho;             // Q, sums to one

  int G() const { return static_cast<int>(b.rows()); }
  int R() const { return static_cast<int>(b.cols()); }
  int Q() const { return static_cast<int>(gamma.size()); }
  int D() const { return w.empty() ? 0 : static_cast<int>(w.front().cols()); }

  const MatrixXd& loadings(int g) const { return w.size() == 1 ? w.front() : w[g]; }
  MatrixXd& loadings(int g) { return w.size() == 1 ? w.front() : w[g]; }

  /// Zero-initialised parameters of the right shape.
  static Params zeros(const ModelDims& dims, int R, int J);

  void validate() const;
};

/// Variational state, one slot per (row, group).
struct VarState {
  std::vector<MatrixXd> xi;     // per group: N x R, strictly positive
  std::vector<MatrixXd> mu;     // per group: N x D
  std::vector<TraitMat> Sigma;  // index row * G + g, D x D SPD
  MatrixXd log_ftilde;          // N x G

  int G() const { return static_cast<int>(xi.size()); }

  static VarState init(int N, int R, int G, int D, double xi0);
};

struct FitResult {
  ModelDims dims;
  Params params;
  double loglik = 0.0;
  double bic = 0.0;
  MatrixXd zhat;  // N x G
  MatrixXd vhat;  // H x Q
  std::vector<int> node_map;
  std::vector<int> layer_map;
  int n_iterations = 0;
  bool converged = false;
  bool degenerate = false;
  int start_index = 0;
};

/// Row-wise argmax (first maximum wins).
std::vector<int> map_labels(const MatrixXd& posterior);

}  // namespace mlta
