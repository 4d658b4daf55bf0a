#include "mlta/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace mlta {

using nlohmann::json;

// -------------------------------------------------------------------------
// Type invariants
// -------------------------------------------------------------------------

int NetworkData::layer_offset(int h) const {
  int off = 0;
  for (int l = 0; l < h; ++l) off += layer_sizes[l];
  return off;
}

std::vector<int> NetworkData::row_layers() const {
  std::vector<int> out;
  out.reserve(N());
  for (int h = 0; h < H(); ++h) out.insert(out.end(), layer_sizes[h], h);
  return out;
}

void NetworkData::validate() const {
  if (H() < 1) throw DataError("network has no layers");
  if (static_cast<int>(layer_ids.size()) != H())
    throw DataError("layer_ids and layer_sizes differ in length");
  int total = 0;
  for (int h = 0; h < H(); ++h) {
    if (layer_sizes[h] < 1) throw DataError("layer '" + layer_ids[h] + "' is empty");
    total += layer_sizes[h];
  }
  if (total != Y.rows() || total != X.rows())
    throw DataError("layer sizes do not add up to the number of rows");
  if (R() < 1) throw DataError("network has no receiving nodes");
  if (J() < 1) throw DataError("covariate matrix lacks the intercept column");
  for (int i = 0; i < N(); ++i) {
    for (int k = 0; k < R(); ++k) {
      const double y = Y(i, k);
      if (y != 0.0 && y != 1.0)
        throw DataError("binary violation at row " + std::to_string(i + 1) + ", column y" +
                        std::to_string(k + 1));
    }
    if (X(i, 0) != 1.0) throw DataError("intercept column is not constant 1");
    for (int j = 0; j < J(); ++j)
      if (!std::isfinite(X(i, j)))
        throw DataError("non-finite covariate at row " + std::to_string(i + 1));
  }
}

void ModelDims::validate(int H) const {
  if (G < 1 || D < 1 || Q < 1) throw DataError("G, D and Q must all be >= 1");
  if (D > kMaxTraitDim)
    throw DataError("latent trait dimension exceeds " + std::to_string(kMaxTraitDim));
  if (Q > H)
    throw DataError("Q=" + std::to_string(Q) + " exceeds the number of layers H=" +
                    std::to_string(H));
}

Params Params::zeros(const ModelDims& dims, int R, int J) {
  Params p;
  p.beta = MatrixXd::Zero(dims.G - 1, J);
  p.b = MatrixXd::Zero(dims.G, R);
  p.w.assign(dims.parsimonious ? 1 : dims.G, MatrixXd::Zero(R, dims.D));
  p.gamma = VectorXd::Zero(dims.Q);
  p.rho = VectorXd::Constant(dims.Q, 1.0 / dims.Q);
  return p;
}

void Params::validate() const {
  const int g = G();
  if (g < 1) throw DataError("params: no groups");
  if (beta.rows() != g - 1) throw DataError("params: beta must have G-1 rows");
  if (w.size() != 1 && static_cast<int>(w.size()) != g)
    throw DataError("params: w must hold 1 or G loading matrices");
  for (const auto& m : w)
    if (m.rows() != R() || m.cols() != D()) throw DataError("params: loading shape mismatch");
  if (rho.size() != gamma.size() || gamma.size() < 1)
    throw DataError("params: gamma and rho must have Q >= 1 entries");
  if (gamma(0) != 0.0) throw DataError("params: gamma_1 must be pinned at 0");
  if ((rho.array() < 0.0).any() || std::abs(rho.sum() - 1.0) > 1e-8)
    throw DataError("params: rho is not a probability vector");
  bool finite = beta.allFinite() && b.allFinite() && gamma.allFinite() && rho.allFinite();
  for (const auto& m : w) finite = finite && m.allFinite();
  if (!finite) throw DataError("params: non-finite entry");
}

VarState VarState::init(int N, int R, int G, int D, double xi0) {
  VarState v;
  v.xi.assign(G, MatrixXd::Constant(N, R, xi0));
  v.mu.assign(G, MatrixXd::Zero(N, D));
  v.Sigma.assign(static_cast<std::size_t>(N) * G, TraitMat::Identity(D, D));
  v.log_ftilde = MatrixXd::Zero(N, G);
  return v;
}

std::vector<int> map_labels(const MatrixXd& posterior) {
  std::vector<int> out(posterior.rows());
  for (Eigen::Index i = 0; i < posterior.rows(); ++i) {
    Eigen::Index best = 0;
    posterior.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

// -------------------------------------------------------------------------
// CSV
// -------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, int row, const std::string& col) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw DataError("malformed number '" + s + "' at row " + std::to_string(row) +
                    ", column " + col);
  return v;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NetworkData parse_network(const std::string& text, std::optional<int> R) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty network file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "layer")
    throw DataError("network header must start with 'layer'");

  int n_y = 0;
  int n_x = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expect_y = "y" + std::to_string(n_y + 1);
    const std::string expect_x = "x" + std::to_string(n_x + 1);
    if (n_x == 0 && header[c] == expect_y) {
      ++n_y;
    } else if (header[c] == expect_x) {
      ++n_x;
    } else {
      throw DataError("unexpected header column '" + header[c] + "' (expected " +
                      (n_x == 0 ? expect_y + " or " : std::string()) + expect_x + ")");
    }
  }
  if (n_y < 1) throw DataError("network header has no y columns");
  if (R && *R != n_y)
    throw DataError("header has " + std::to_string(n_y) + " y columns, expected R=" +
                    std::to_string(*R));

  std::vector<std::string> order;
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<int>> rows_of_layer;
  std::vector<std::vector<double>> y_rows;
  std::vector<std::vector<double>> x_rows;

  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                      " fields, expected " + std::to_string(header.size()));
    if (f[0].empty()) throw DataError("empty layer label at row " + std::to_string(row));
    auto [it, inserted] = index.try_emplace(f[0], static_cast<int>(order.size()));
    if (inserted) {
      order.push_back(f[0]);
      rows_of_layer.emplace_back();
    }
    rows_of_layer[it->second].push_back(row - 1);

    std::vector<double> y(n_y);
    for (int k = 0; k < n_y; ++k) {
      const std::string col = "y" + std::to_string(k + 1);
      const double v = parse_real(f[1 + k], row, col);
      if (v != 0.0 && v != 1.0)
        throw DataError("binary violation at row " + std::to_string(row) + ", column " + col);
      y[k] = v;
    }
    std::vector<double> x(n_x);
    for (int j = 0; j < n_x; ++j) {
      const std::string col = "x" + std::to_string(j + 1);
      const double v = parse_real(f[1 + n_y + j], row, col);
      if (!std::isfinite(v))
        throw DataError("non-finite covariate at row " + std::to_string(row) + ", column " +
                        col);
      x[j] = v;
    }
    y_rows.push_back(std::move(y));
    x_rows.push_back(std::move(x));
  }
  if (row == 0) throw DataError("network file has no data rows");

  NetworkData d;
  d.layer_ids = order;
  d.Y.resize(row, n_y);
  d.X.resize(row, n_x + 1);
  int out = 0;
  for (const auto& members : rows_of_layer) {
    d.layer_sizes.push_back(static_cast<int>(members.size()));
    for (int src : members) {
      for (int k = 0; k < n_y; ++k) d.Y(out, k) = y_rows[src][k];
      d.X(out, 0) = 1.0;
      for (int j = 0; j < n_x; ++j) d.X(out, j + 1) = x_rows[src][j];
      ++out;
    }
  }
  d.validate();
  return d;
}

NetworkData load_network(const std::string& path, std::optional<int> R) {
  return parse_network(read_file(path), R);
}

std::string format_network(const NetworkData& data) {
  std::string out = "layer";
  for (int k = 0; k < data.R(); ++k) out += ",y" + std::to_string(k + 1);
  for (int j = 1; j < data.J(); ++j) out += ",x" + std::to_string(j);
  out += '\n';
  int row = 0;
  for (int h = 0; h < data.H(); ++h) {
    for (int i = 0; i < data.layer_sizes[h]; ++i, ++row) {
      out += data.layer_ids[h];
      for (int k = 0; k < data.R(); ++k) out += data.Y(row, k) != 0.0 ? ",1" : ",0";
      for (int j = 1; j < data.J(); ++j) out += "," + fmt17(data.X(row, j));
      out += '\n';
    }
  }
  return out;
}

void write_network(const NetworkData& data, const std::string& path) {
  write_file_atomic(path, format_network(data));
}

// -------------------------------------------------------------------------
// JSON
// -------------------------------------------------------------------------

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

double as_real(const json& j, const char* what) {
  if (!j.is_number()) throw SchemaError(std::string("field '") + what + "' is not a number");
  return j.get<double>();
}

MatrixXd matrix_from_json(const json& j, const char* what, Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw SchemaError(std::string("field '") + what + "' is not an array");
  if (j.empty()) return MatrixXd(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw SchemaError(std::string("field '") + what + "' is ragged");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = as_real(j[i][c], what);
  }
  return m;
}

VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string("field '") + what + "' is not an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = as_real(j[i], what);
  return v;
}

std::vector<int> labels_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string("field '") + what + "' is not an array");
  std::vector<int> out;
  for (const auto& e : j) {
    if (!e.is_number_integer())
      throw SchemaError(std::string("field '") + what + "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

json params_to_json(const Params& p) {
  json w = json::array();
  for (const auto& m : p.w) w.push_back(matrix_to_json(m));
  return json{{"J", p.beta.cols()},
              {"beta", matrix_to_json(p.beta)},
              {"b", matrix_to_json(p.b)},
              {"w", std::move(w)},
              {"gamma", vector_to_json(p.gamma)},
              {"rho", vector_to_json(p.rho)}};
}

Params params_from_json(const json& j) {
  Params p;
  const auto J = static_cast<Eigen::Index>(as_real(require(j, "J"), "J"));
  p.beta = matrix_from_json(require(j, "beta"), "beta", J);
  p.b = matrix_from_json(require(j, "b"), "b", 0);
  const json& w = require(j, "w");
  if (!w.is_array() || w.empty()) throw SchemaError("field 'w' must be a non-empty array");
  for (const auto& m : w) p.w.push_back(matrix_from_json(m, "w", 0));
  p.gamma = vector_from_json(require(j, "gamma"), "gamma");
  p.rho = vector_from_json(require(j, "rho"), "rho");
  if (p.beta.cols() != J) throw SchemaError("beta width does not match J");
  try {
    p.validate();
  } catch (const DataError& e) {
    throw SchemaError(e.what());
  }
  return p;
}

json model_to_json(const FitResult& r) {
  return json{{"schema_version", kModelSchemaVersion},
              {"dims",
               {{"G", r.dims.G},
                {"D", r.dims.D},
                {"Q", r.dims.Q},
                {"parsimonious", r.dims.parsimonious}}},
              {"params", params_to_json(r.params)},
              {"loglik", r.loglik},
              {"bic", r.bic},
              {"zhat", matrix_to_json(r.zhat)},
              {"vhat", matrix_to_json(r.vhat)},
              {"node_map", r.node_map},
              {"layer_map", r.layer_map},
              {"converged", r.converged},
              {"degenerate", r.degenerate},
              {"n_iterations", r.n_iterations},
              {"start_index", r.start_index}};
}

FitResult model_from_json(const json& j) {
  const json& version = require(j, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kModelSchemaVersion)
    throw SchemaError("unsupported schema_version " + version.dump() + " (expected " +
                      std::to_string(kModelSchemaVersion) + ")");
  FitResult r;
  const json& dims = require(j, "dims");
  r.dims.G = static_cast<int>(as_real(require(dims, "G"), "G"));
  r.dims.D = static_cast<int>(as_real(require(dims, "D"), "D"));
  r.dims.Q = static_cast<int>(as_real(require(dims, "Q"), "Q"));
  const json& pars = require(dims, "parsimonious");
  if (!pars.is_boolean()) throw SchemaError("field 'parsimonious' is not a boolean");
  r.dims.parsimonious = pars.get<bool>();

  r.params = params_from_json(require(j, "params"));
  r.loglik = as_real(require(j, "loglik"), "loglik");
  r.bic = as_real(require(j, "bic"), "bic");
  r.zhat = matrix_from_json(require(j, "zhat"), "zhat", r.dims.G);
  r.vhat = matrix_from_json(require(j, "vhat"), "vhat", r.dims.Q);
  r.node_map = labels_from_json(require(j, "node_map"), "node_map");
  r.layer_map = labels_from_json(require(j, "layer_map"), "layer_map");
  const json& conv = require(j, "converged");
  if (!conv.is_boolean()) throw SchemaError("field 'converged' is not a boolean");
  r.converged = conv.get<bool>();
  if (j.contains("degenerate")) r.degenerate = j.at("degenerate").get<bool>();
  r.n_iterations = static_cast<int>(as_real(require(j, "n_iterations"), "n_iterations"));
  r.start_index = static_cast<int>(as_real(require(j, "start_index"), "start_index"));

  if (r.params.G() != r.dims.G || r.params.Q() != r.dims.Q || r.params.D() != r.dims.D)
    throw SchemaError("params do not match dims");
  if (r.zhat.cols() != r.dims.G || r.vhat.cols() != r.dims.Q)
    throw SchemaError("posterior widths do not match dims");
  return r;
}

void write_model(const FitResult& result, const std::string& path) {
  write_file_atomic(path, model_to_json(result).dump(1) + "\n");
}

FitResult read_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return model_from_json(j);
}

// -------------------------------------------------------------------------
// Files
// -------------------------------------------------------------------------

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mlta
