#pragma once

// Parameter counting, BIC and the (G, D, Q) grid search.

#include "mlta/em.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlta {

struct IntRange {
  int lo = 1;
  int hi = 1;
  int size() const { return hi - lo + 1; }
};

/// Parses "a..b" (inclusive) or a single integer "a".
IntRange parse_range(const std::string& text);

struct GridSpec {
  IntRange G;
  IntRange D;
  IntRange Q;
  bool parsimonious = false;

  void validate() const;
};

/// (G-1) J + G R + L + (Q-1) + (Q-1), where the loading count L deducts the
/// D(D-1)/2 rotational degrees of freedom of the latent trait once per
/// loading matrix.
int n_free_params(const ModelDims& dims, int R, int J);

/// -2 loglik + n_free_params log(N_total).
double bic(double loglik, const ModelDims& dims, int R, int J, int N_total);

struct GridCell {
  ModelDims dims;
  bool ok = false;
  double loglik = 0.0;
  double bic = 0.0;
  bool converged = false;
  int n_params = 0;
  std::string error;
};

struct SelectionResult {
  FitResult best;
  std::vector<GridCell> table;  // G-major, then D, then Q
};

/// Fits every grid cell with fit_multistart and returns the minimum-BIC fit.
/// Failed cells stay in the table with ok = false.
SelectionResult select_model(const NetworkData& data, const GridSpec& grid, const FitConfig& cfg);

/// `G,D,Q,loglik,bic,converged,n_params`; failed cells carry empty numbers.
std::string format_bic_table(const std::vector<GridCell>& table);

}  // namespace mlta
