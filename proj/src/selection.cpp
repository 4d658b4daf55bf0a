#include "mlta/selection.hpp"

#include "mlta/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

namespace mlta {

IntRange parse_range(const std::string& text) {
  auto parse_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error("invalid range '" + text + "'");
    return v;
  };
  IntRange r;
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    r.lo = r.hi = parse_int(text);
  } else {
    r.lo = parse_int(text.substr(0, dots));
    r.hi = parse_int(text.substr(dots + 2));
  }
  if (r.lo < 1 || r.hi < r.lo) throw Error("invalid range '" + text + "'");
  return r;
}

void GridSpec::validate() const {
  for (const IntRange* r : {&G, &D, &Q})
    if (r->lo < 1 || r->hi < r->lo) throw Error("grid ranges must be non-empty with min >= 1");
}

int n_free_params(const ModelDims& dims, int R, int J) {
  const int per_matrix = R * dims.D - dims.D * (dims.D - 1) / 2;
  const int loadings = dims.parsimonious ? per_matrix : dims.G * per_matrix;
  return (dims.G - 1) * J + dims.G * R + loadings + (dims.Q - 1) + (dims.Q - 1);
}

double bic(double loglik, const ModelDims& dims, int R, int J, int N_total) {
  return -2.0 * loglik + n_free_params(dims, R, J) * std::log(static_cast<double>(N_total));
}

SelectionResult select_model(const NetworkData& data, const GridSpec& grid,
                             const FitConfig& cfg) {
  grid.validate();
  std::vector<ModelDims> cells;
  for (int G = grid.G.lo; G <= grid.G.hi; ++G)
    for (int D = grid.D.lo; D <= grid.D.hi; ++D)
      for (int Q = grid.Q.lo; Q <= grid.Q.hi; ++Q)
        cells.push_back(ModelDims{G, D, Q, grid.parsimonious});

  const int n = static_cast<int>(cells.size());
  std::vector<GridCell> table(n);
  std::vector<FitResult> fits(n);
  // Starts inside a cell run sequentially; parallelism is across cells.
  FitConfig inner = cfg;
  inner.threads = 1;
  parallel_for(n, resolve_threads(cfg.threads), [&](int c) {
    GridCell& cell = table[c];
    cell.dims = cells[c];
    cell.n_params = n_free_params(cells[c], data.R(), data.J());
    try {
      fits[c] = fit_multistart(data, cells[c], inner);
      cell.ok = true;
      cell.loglik = fits[c].loglik;
      cell.bic = fits[c].bic;
      cell.converged = fits[c].converged;
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });

  int best = -1;
  for (int c = 0; c < n; ++c) {
    if (!table[c].ok) continue;
    if (best < 0) {
      best = c;
      continue;
    }
    const auto key = [&](int i) {
      return std::make_tuple(table[i].bic, table[i].dims.G, table[i].dims.Q, table[i].dims.D);
    };
    if (key(c) < key(best)) best = c;
  }
  if (best < 0) {
    std::string msg = "every grid cell failed:";
    for (const auto& cell : table)
      msg += " [G=" + std::to_string(cell.dims.G) + " D=" + std::to_string(cell.dims.D) +
             " Q=" + std::to_string(cell.dims.Q) + ": " + cell.error + "]";
    throw NumericalError(msg);
  }
  SelectionResult res;
  res.best = std::move(fits[best]);
  res.table = std::move(table);
  return res;
}

std::string format_bic_table(const std::vector<GridCell>& table) {
  std::string out = "G,D,Q,loglik,bic,converged,n_params\n";
  char buf[64];
  for (const auto& c : table) {
    out += std::to_string(c.dims.G) + "," + std::to_string(c.dims.D) + "," +
           std::to_string(c.dims.Q) + ",";
    if (c.ok) {
      std::snprintf(buf, sizeof buf, "%.17g", c.loglik);
      out += buf;
      out += ",";
      std::snprintf(buf, sizeof buf, "%.17g", c.bic);
      out += buf;
      out += c.converged ? ",true," : ",false,";
    } else {
      out += ",,false,";
    }
    out += std::to_string(c.n_params) + "\n";
  }
  return out;
}

}  // namespace mlta
