#include <doctest.h>

#include "mlta/data.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace mlta;

namespace {

std::string error_of(const std::string& csv) {
  try {
    parse_network(csv);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

FitResult sample_fit(const ModelDims& dims, int R, int J, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FitResult r;
  r.dims = dims;
  r.params = oracle::random_params(dims, R, J, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  r.zhat = MatrixXd::NullaryExpr(5, dims.G, [&] { return unif(rng); });
  for (int i = 0; i < 5; ++i) r.zhat.row(i) /= r.zhat.row(i).sum();
  r.vhat = MatrixXd::NullaryExpr(2, dims.Q, [&] { return unif(rng); });
  for (int h = 0; h < 2; ++h) r.vhat.row(h) /= r.vhat.row(h).sum();
  r.node_map = map_labels(r.zhat);
  r.layer_map = map_labels(r.vhat);
  r.loglik = -1234.5678901234567;
  r.bic = 2567.000000000001;
  r.n_iterations = 57;
  r.converged = true;
  r.start_index = 3;
  return r;
}

void check_same(const FitResult& a, const FitResult& b) {
  CHECK(a.dims == b.dims);
  CHECK(a.params.beta == b.params.beta);
  CHECK(a.params.b == b.params.b);
  REQUIRE(a.params.w.size() == b.params.w.size());
  for (std::size_t m = 0; m < a.params.w.size(); ++m) CHECK(a.params.w[m] == b.params.w[m]);
  CHECK(a.params.gamma == b.params.gamma);
  CHECK(a.params.rho == b.params.rho);
  CHECK(a.loglik == b.loglik);
  CHECK(a.bic == b.bic);
  CHECK(a.zhat == b.zhat);
  CHECK(a.vhat == b.vhat);
  CHECK(a.node_map == b.node_map);
  CHECK(a.layer_map == b.layer_map);
  CHECK(a.n_iterations == b.n_iterations);
  CHECK(a.converged == b.converged);
  CHECK(a.degenerate == b.degenerate);
  CHECK(a.start_index == b.start_index);
}

}  // namespace

TEST_CASE("CSV: two layers of two rows") {
  const NetworkData d = parse_network(
      "layer,y1,y2,x1\n"
      "A,1,0,0.5\n"
      "B,0,0,-1\n"
      "A,1,1,2.25\n"
      "B,0,1,3e-2\n");
  CHECK(d.H() == 2);
  CHECK(d.layer_sizes == std::vector<int>{2, 2});
  CHECK(d.layer_ids == std::vector<std::string>{"A", "B"});
  CHECK(d.R() == 2);
  CHECK(d.J() == 2);
  CHECK(d.X.col(0).isOnes());
  // Regrouped by first appearance: A rows, then B rows, file order within.
  CHECK(d.X(0, 1) == 0.5);
  CHECK(d.X(1, 1) == 2.25);
  CHECK(d.X(2, 1) == -1.0);
  CHECK(d.X(3, 1) == 0.03);
  CHECK(d.Y(1, 1) == 1.0);
  CHECK(d.layer_offset(1) == 2);
  CHECK(d.row_layers() == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("CSV: no covariates and CRLF line endings") {
  const NetworkData d = parse_network("layer,y1\r\nL,1\r\nL,0\r\n");
  CHECK(d.J() == 1);
  CHECK(d.N() == 2);
  CHECK(parse_network("layer,y1,y2\nL,1,0\n", 2).R() == 2);
  CHECK_THROWS_AS(parse_network("layer,y1,y2\nL,1,0\n", 3), DataError);
}

TEST_CASE("CSV: descriptive errors") {
  CHECK(error_of("layer,y1,x1\nA,0,1\nA,1,1\nB,2,1\n") == "binary violation at row 3, column y1");
  CHECK(error_of("layer,y1,y2\nA,0,0.5\n") == "binary violation at row 1, column y2");
  CHECK(error_of("layer,y1,x1\nA,0,nan\n").find("non-finite covariate at row 1") == 0);
  CHECK(error_of("layer,y1,x1\nA,0,inf\n").find("non-finite covariate") == 0);
  CHECK(error_of("layer,y1,x1\nA,0,abc\n").find("malformed number 'abc' at row 1") == 0);
  CHECK(error_of("layer,y1,x1\nA,0\n").find("row 1 has 2") == 0);
  CHECK(error_of("layer,y1,x1\n,0,1\n").find("empty layer label") == 0);
  CHECK(error_of("layer,y1,x1\n") == "network file has no data rows");
  CHECK(error_of("") == "empty network file");
  CHECK(error_of("node,y1\nA,1\n") == "network header must start with 'layer'");
  CHECK(error_of("layer,x1\nA,1\n") == "network header has no y columns");
  CHECK(error_of("layer,y1,z\nA,1,1\n").find("unexpected header column 'z'") == 0);
  CHECK(error_of("layer,y1,A\n").size() > 0);
}

TEST_CASE("CSV: round trip through text and files") {
  std::mt19937_64 rng(2);
  const NetworkData d = oracle::random_network({3, 5, 2}, 4, 3, rng);
  const std::string text = format_network(d);
  const NetworkData back = parse_network(text);
  CHECK(back.Y == d.Y);
  CHECK(back.X == d.X);
  CHECK(back.layer_ids == d.layer_ids);
  CHECK(back.layer_sizes == d.layer_sizes);
  CHECK(format_network(back) == text);

  const auto dir = std::filesystem::temp_directory_path() / "mlta_test_data";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "net.csv").string();
  write_network(d, path);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK(load_network(path).Y == d.Y);
  CHECK_THROWS_AS(load_network((dir / "missing.csv").string()), Error);
}

TEST_CASE("CSV: ESS-shaped file") {
  std::mt19937_64 rng(3);
  const NetworkData d = oracle::random_network(std::vector<int>(21, 30), 7, 19, rng);
  const NetworkData back = parse_network(format_network(d), 7);
  CHECK(back.H() == 21);
  CHECK(back.R() == 7);
  CHECK(back.J() == 19);
}

TEST_CASE("model JSON: bit-exact round trips") {
  for (const ModelDims& dims : {ModelDims{3, 1, 2, true}, ModelDims{2, 2, 1, false},
                                ModelDims{1, 1, 1, false}}) {
    const FitResult r = sample_fit(dims, 4, 2, 7 + dims.G);
    check_same(r, model_from_json(model_to_json(r)));
    // Through text as well: %.17g survives parsing.
    check_same(r, model_from_json(nlohmann::json::parse(model_to_json(r).dump())));
  }
  const FitResult g1 = sample_fit({1, 1, 1, false}, 4, 2, 1);
  const nlohmann::json j = model_to_json(g1);
  CHECK(j.at("params").at("beta").is_array());
  CHECK(j.at("params").at("beta").empty());
  for (const char* key : {"schema_version", "dims", "params", "loglik", "bic", "zhat", "vhat",
                          "node_map", "layer_map", "converged", "n_iterations", "start_index"})
    CHECK(j.contains(key));

  const auto dir = std::filesystem::temp_directory_path() / "mlta_test_data";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.json").string();
  const FitResult r = sample_fit({3, 1, 2, true}, 4, 2, 4);
  write_model(r, path);
  check_same(r, read_model(path));
}

TEST_CASE("model JSON: schema errors") {
  const nlohmann::json good = model_to_json(sample_fit({3, 1, 2, true}, 4, 2, 5));
  nlohmann::json j = good;
  j["params"].erase("rho");
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
  j = good;
  j["schema_version"] = 2;
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
  j = good;
  j.erase("zhat");
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
  j = good;
  j["dims"]["G"] = 2;
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
  j = good;
  j["loglik"] = "x";
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
}

TEST_CASE("dimension and parameter validation") {
  CHECK_THROWS_AS((ModelDims{0, 1, 1, false}.validate(5)), DataError);
  CHECK_THROWS_AS((ModelDims{2, 9, 1, false}.validate(5)), DataError);
  CHECK_THROWS_AS((ModelDims{2, 1, 6, false}.validate(5)), DataError);
  CHECK_NOTHROW((ModelDims{2, 1, 5, false}.validate(5)));

  std::mt19937_64 rng(6);
  Params p = oracle::random_params({3, 1, 2, true}, 4, 2, rng);
  CHECK_NOTHROW(p.validate());
  p.gamma(0) = 0.1;
  CHECK_THROWS_AS(p.validate(), DataError);
  p.gamma(0) = 0.0;
  p.rho(0) += 0.5;
  CHECK_THROWS_AS(p.validate(), DataError);

  const Params z = Params::zeros({3, 2, 2, false}, 5, 3);
  CHECK(z.beta.rows() == 2);
  CHECK(z.w.size() == 3u);
  CHECK(z.w[0].cols() == 2);
}

TEST_CASE("MAP labels take the first maximum") {
  MatrixXd m(3, 3);
  m << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8;
  CHECK(map_labels(m) == std::vector<int>{1, 0, 2});
}
