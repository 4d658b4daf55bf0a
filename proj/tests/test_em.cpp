#include <doctest.h>

#include "mlta/em.hpp"
#include "mlta/simulate.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace mlta;

namespace {

MatrixXd random_log_ftilde(int N, int G, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-6.0, -0.5);
  MatrixXd m(N, G);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  return m;
}

std::vector<MatrixXd> random_ahat(int N, int G, int Q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  std::vector<MatrixXd> a(Q, MatrixXd(N, G));
  for (auto& m : a)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  MatrixXd sums = MatrixXd::Zero(N, 1);
  for (const auto& m : a) sums += m.rowwise().sum();
  for (auto& m : a)
    for (int i = 0; i < N; ++i) m.row(i) /= sums(i, 0);
  return a;
}

// Random (b, w) together with a variational state at which update_zeta is
// evaluated.
VarState random_state(int N, int R, int G, int D, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VarState var = VarState::init(N, R, G, D, 1.0);
  for (int g = 0; g < G; ++g) {
    var.xi[g] = MatrixXd::NullaryExpr(N, R, [&] { return 0.1 + std::abs(normal(rng)) * 2.0; });
    var.mu[g] = MatrixXd::NullaryExpr(N, D, [&] { return normal(rng); });
  }
  for (auto& S : var.Sigma) {
    MatrixXd A = MatrixXd::NullaryExpr(D, D, [&] { return 0.4 * normal(rng); });
    S = A * A.transpose() + 0.3 * MatrixXd::Identity(D, D);
  }
  return var;
}

MatrixXd random_zhat(int N, int G, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  MatrixXd z = MatrixXd::NullaryExpr(N, G, [&] { return unif(rng); });
  for (int i = 0; i < N; ++i) z.row(i) /= z.row(i).sum();
  return z;
}

void check_posterior_identities(const NetworkData& d, const Posteriors& p) {
  const int Q = static_cast<int>(p.ahat.size());
  for (int i = 0; i < d.N(); ++i) CHECK(std::abs(p.zhat.row(i).sum() - 1.0) < 1e-8);
  for (int h = 0; h < d.H(); ++h) CHECK(std::abs(p.vhat.row(h).sum() - 1.0) < 1e-8);
  MatrixXd sum = MatrixXd::Zero(d.N(), p.zhat.cols());
  for (const auto& a : p.ahat) sum += a;
  CHECK((sum - p.zhat).cwiseAbs().maxCoeff() < 1e-8);
  const std::vector<int> layer = d.row_layers();
  for (int q = 0; q < Q; ++q)
    for (int i = 0; i < d.N(); ++i)
      CHECK(std::abs(p.ahat[q].row(i).sum() - p.vhat(layer[i], q)) < 1e-8);
}

SimResult small_simulation(std::uint64_t seed) {
  SimSpec spec;
  spec.N = 500;
  spec.R = 7;
  spec.H = 20;
  spec.seed = seed;
  return simulate_network(spec);
}

}  // namespace

TEST_CASE("class priors: worked example") {
  MatrixXd X = MatrixXd::Ones(1, 1);
  MatrixXd beta = MatrixXd::Ones(1, 1);
  VectorXd gamma(2);
  gamma << 0.0, 1.0;
  const ClassPriors p = class_priors(X, beta, gamma);
  CHECK(std::abs(p[1](0, 1) - 0.8808) < 1e-4);
  CHECK(std::abs(p[0](0, 1) - logistic(1.0)) < 1e-15);
  CHECK(std::abs(p[1].row(0).sum() - 1.0) < 1e-15);
}

TEST_CASE("E-step equals brute-force enumeration") {
  std::mt19937_64 rng(8);
  for (const std::vector<int>& sizes : {std::vector<int>{1, 1}, std::vector<int>{2, 2},
                                        std::vector<int>{3, 1, 2}}) {
    for (int rep = 0; rep < 5; ++rep) {
      const NetworkData d = oracle::random_network(sizes, 2, 2, rng);
      const ModelDims dims{2, 1, 2, false};
      const Params p = oracle::random_params(dims, 2, 2, rng);
      const MatrixXd lf = random_log_ftilde(d.N(), 2, rng);
      const EStepResult es = e_step_from_bounds(d, p, lf);
      const oracle::Enumerated ref = oracle::enumerate(d, p, lf);
      CHECK(std::abs(es.loglik - ref.loglik) < 1e-10);
      CHECK((es.post.zhat - ref.zhat).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((es.post.vhat - ref.vhat).cwiseAbs().maxCoeff() < 1e-10);
      for (int q = 0; q < 2; ++q)
        CHECK((es.post.ahat[q] - ref.ahat[q]).cwiseAbs().maxCoeff() < 1e-10);
      check_posterior_identities(d, es.post);
    }
  }
  // Three classes, three layer groups.
  const NetworkData d = oracle::random_network({2, 1}, 3, 3, rng);
  const ModelDims dims{3, 1, 3, false};
  const Params p = oracle::random_params(dims, 3, 3, rng);
  const MatrixXd lf = random_log_ftilde(d.N(), 3, rng);
  const EStepResult es = e_step_from_bounds(d, p, lf);
  const oracle::Enumerated ref = oracle::enumerate(d, p, lf);
  CHECK(std::abs(es.loglik - ref.loglik) < 1e-10);
  CHECK((es.post.zhat - ref.zhat).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((es.post.vhat - ref.vhat).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("E-step survives extreme log bounds and reports vanished mixtures") {
  std::mt19937_64 rng(3);
  const NetworkData d = oracle::random_network({40, 40}, 3, 2, rng);
  const ModelDims dims{2, 1, 2, false};
  const Params p = oracle::random_params(dims, 3, 2, rng);
  MatrixXd lf = random_log_ftilde(d.N(), 2, rng).array() * 300.0;
  const EStepResult es = e_step_from_bounds(d, p, lf);
  CHECK(std::isfinite(es.loglik));
  check_posterior_identities(d, es.post);

  lf(5, 0) = lf(5, 1) = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(e_step_from_bounds(d, p, lf), NumericalError);
  CHECK_THROWS_AS(e_step_from_bounds(d, p, MatrixXd::Zero(3, 2)), Error);
}

TEST_CASE("E-step from the variational state matches the bound table") {
  std::mt19937_64 rng(12);
  const NetworkData d = oracle::random_network({3, 4}, 4, 2, rng);
  const ModelDims dims{2, 2, 2, false};
  const Params p = oracle::random_params(dims, 4, 2, rng);
  VarState var = VarState::init(d.N(), 4, 2, 2, 1.3);
  const EStepResult es = e_step(d, p, var);
  const EStepResult ref = e_step_from_bounds(d, p, var.log_ftilde);
  CHECK(es.loglik == ref.loglik);
  const ComponentMoments m = component_moments(d.Y.row(2).transpose(), var.xi[1].row(2).transpose(),
                                               p.b.row(1).transpose(), p.loadings(1));
  CHECK(var.log_ftilde(2, 1) == m.log_ftilde);
}

TEST_CASE("gamma gauge: a common shift moved into the intercepts changes nothing") {
  std::mt19937_64 rng(21);
  const NetworkData d = oracle::random_network({5, 6, 4}, 3, 3, rng);
  const ModelDims dims{3, 1, 3, false};
  const Params p = oracle::random_params(dims, 3, 3, rng);
  const MatrixXd lf = random_log_ftilde(d.N(), 3, rng);
  for (double c : {-2.5, 0.7, 4.0}) {
    Params s = p;
    s.gamma.array() += c;
    s.beta.col(0).array() -= c;
    const ClassPriors a = class_priors(d.X, p.beta, p.gamma);
    const ClassPriors b = class_priors(d.X, s.beta, s.gamma);
    for (int q = 0; q < 3; ++q) CHECK((a[q] - b[q]).cwiseAbs().maxCoeff() < 1e-8);
    const EStepResult e1 = e_step_from_bounds(d, p, lf);
    const EStepResult e2 = e_step_from_bounds(d, s, lf);
    CHECK(std::abs(e1.loglik - e2.loglik) < 1e-8);
    CHECK((e1.post.zhat - e2.post.zhat).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((e1.post.vhat - e2.post.vhat).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("multinomial logit: gradient matches finite differences") {
  std::mt19937_64 rng(4);
  for (int G : {2, 3, 4}) {
    for (int Q : {1, 2, 3}) {
      const NetworkData d = oracle::random_network({6, 5, 7}, 1, 3, rng);
      const ModelDims dims{G, 1, Q, false};
      const Params p = oracle::random_params(dims, 1, 3, rng);
      const auto ahat = random_ahat(d.N(), G, Q, rng);
      const VectorXd grad = logit_gradient(d.X, ahat, p.beta, p.gamma);

      const int J = 3;
      VectorXd theta((G - 1) * J + Q - 1);
      for (int g = 0; g < G - 1; ++g) theta.segment(g * J, J) = p.beta.row(g).transpose();
      theta.tail(Q - 1) = p.gamma.tail(Q - 1);
      auto f = [&](const VectorXd& t) {
        MatrixXd beta(G - 1, J);
        for (int g = 0; g < G - 1; ++g) beta.row(g) = t.segment(g * J, J).transpose();
        VectorXd gamma = VectorXd::Zero(Q);
        gamma.tail(Q - 1) = t.tail(Q - 1);
        return logit_objective(d.X, ahat, beta, gamma);
      };
      const VectorXd fd = oracle::fd_gradient(f, theta);
      CHECK((grad - fd).cwiseAbs().maxCoeff() < 1e-6);

      // At the Newton solution both the analytic and numerical gradients vanish.
      const LogitResult r = m_step_logit(d.X, ahat, p.beta, p.gamma);
      CHECK(r.converged);
      CHECK(r.gamma(0) == 0.0);
      VectorXd sol(theta.size());
      for (int g = 0; g < G - 1; ++g) sol.segment(g * J, J) = r.beta.row(g).transpose();
      sol.tail(Q - 1) = r.gamma.tail(Q - 1);
      CHECK(oracle::fd_gradient(f, sol).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(r.objective >= logit_objective(d.X, ahat, p.beta, p.gamma));
    }
  }
}

TEST_CASE("multinomial logit: two classes, one layer group equals IRLS") {
  std::mt19937_64 rng(30);
  const NetworkData d = oracle::random_network({30}, 1, 3, rng);
  const auto ahat = random_ahat(30, 2, 1, rng);
  const LogitResult r =
      m_step_logit(d.X, ahat, MatrixXd::Zero(1, 3), VectorXd::Zero(1), NewtonConfig{200, 1e-12});
  const VectorXd ref = oracle::irls(d.X, ahat[0].col(0), ahat[0].col(1));
  CHECK((r.beta.row(0).transpose() - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("multinomial logit: a single class has nothing to fit") {
  const MatrixXd X = MatrixXd::Ones(4, 2);
  std::vector<MatrixXd> ahat(2, MatrixXd::Constant(4, 1, 0.5));
  VectorXd gamma(2);
  gamma << 0.0, 3.0;
  const LogitResult r = m_step_logit(X, ahat, MatrixXd::Zero(0, 2), gamma);
  CHECK(r.converged);
  CHECK(r.gamma.isZero());
  CHECK_THROWS_AS(m_step_logit(X, {ahat[0]}, MatrixXd::Zero(0, 2), gamma), Error);
}

TEST_CASE("rho is the column mean of the layer posteriors") {
  MatrixXd v(2, 2);
  v << 0.2, 0.8, 0.6, 0.4;
  const VectorXd rho = update_rho(v);
  CHECK(std::abs(rho(0) - 0.4) < 1e-15);
  CHECK(std::abs(rho(1) - 0.6) < 1e-15);
}

TEST_CASE("zeta update: single item against golden-section search") {
  // One node, all mass on group 1, D = 1, y = 1.
  for (const auto& [mu, sigma, xi] : {std::tuple{0.0, 1.0, 1.3}, std::tuple{0.6, 0.4, 0.7},
                                      std::tuple{-1.2, 2.0, 3.0}}) {
    NetworkData d;
    d.layer_ids = {"a"};
    d.layer_sizes = {1};
    d.Y = MatrixXd::Ones(1, 1);
    d.X = MatrixXd::Ones(1, 1);
    VarState var = VarState::init(1, 1, 1, 1, xi);
    var.mu[0](0, 0) = mu;
    var.Sigma[0] = TraitMat::Constant(1, 1, sigma);
    const MatrixXd zhat = MatrixXd::Ones(1, 1);
    const ZetaUpdate up = update_zeta(d, zhat, var, false);

    auto f = [&](const VectorXd& t) {
      return expected_bound(d, zhat, var, MatrixXd::Constant(1, 1, t(0)),
                            {MatrixXd::Constant(1, 1, t(1))});
    };
    const VectorXd best = oracle::coordinate_golden(f, VectorXd::Zero(2));
    CHECK(std::abs(up.b(0, 0) - best(0)) < 1e-6);
    CHECK(std::abs(up.w[0](0, 0) - best(1)) < 1e-6);
  }
}

TEST_CASE("zeta update is a stationary point of the expected bound") {
  std::mt19937_64 rng(17);
  for (bool parsimonious : {false, true}) {
    for (int D : {1, 2}) {
      const int N = 25, R = 3, G = 3;
      const NetworkData d = oracle::random_network({10, 15}, R, 1, rng);
      const VarState var = random_state(N, R, G, D, rng);
      const MatrixXd zhat = random_zhat(N, G, rng);
      const ZetaUpdate up = update_zeta(d, zhat, var, parsimonious);
      CHECK(up.w.size() == (parsimonious ? 1u : 3u));

      // Flatten (b, w) in the update's own layout and differentiate numerically.
      const int nw = static_cast<int>(up.w.size()) * R * D;
      VectorXd theta(G * R + nw);
      theta.head(G * R) = Eigen::Map<const VectorXd>(up.b.data(), G * R);
      for (std::size_t m = 0; m < up.w.size(); ++m)
        theta.segment(G * R + static_cast<int>(m) * R * D, R * D) =
            Eigen::Map<const VectorXd>(up.w[m].data(), R * D);
      auto f = [&](const VectorXd& t) {
        MatrixXd b = Eigen::Map<const MatrixXd>(t.data(), G, R);
        std::vector<MatrixXd> w(up.w.size());
        for (std::size_t m = 0; m < w.size(); ++m)
          w[m] = Eigen::Map<const MatrixXd>(t.data() + G * R + m * R * D, R, D);
        return expected_bound(d, zhat, var, b, w);
      };
      CHECK(oracle::fd_gradient(f, theta).cwiseAbs().maxCoeff() < 1e-6);
      // And it is a maximum: any perturbation lowers the objective.
      std::normal_distribution<double> normal(0.0, 0.05);
      VectorXd nudged = theta;
      for (Eigen::Index j = 0; j < nudged.size(); ++j) nudged(j) += normal(rng);
      CHECK(f(nudged) < f(theta));
    }
  }
}

TEST_CASE("zeta update: shared loadings with one group equal the free update") {
  std::mt19937_64 rng(19);
  const NetworkData d = oracle::random_network({8, 9}, 4, 1, rng);
  const VarState var = random_state(17, 4, 1, 2, rng);
  const MatrixXd zhat = MatrixXd::Ones(17, 1);
  const ZetaUpdate a = update_zeta(d, zhat, var, false);
  const ZetaUpdate b = update_zeta(d, zhat, var, true);
  CHECK((a.b - b.b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.w[0] - b.w[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one class without loadings recovers the Bernoulli MLE") {
  std::mt19937_64 rng(40);
  const NetworkData d = oracle::random_network({30, 25, 45}, 6, 1, rng, 0.3);
  const ModelDims dims{1, 1, 1, false};
  Params init = Params::zeros(dims, 6, 1);
  init.rho.setOnes();
  FitConfig cfg;
  cfg.outer_tol = 1e-15;
  cfg.max_outer_iters = 5000;
  const FitResult fit = fit_one(d, dims, init, cfg);
  const VectorXd means = d.Y.colwise().mean();
  for (int k = 0; k < 6; ++k)
    CHECK(std::abs(fit.params.b(0, k) - std::log(means(k) / (1.0 - means(k)))) < 1e-6);
  CHECK(fit.params.w[0].isZero());
}

TEST_CASE("fit: monotone approximate likelihood, posterior identities, determinism") {
  const SimResult sim = small_simulation(5);
  const ModelDims dims{3, 1, 2, true};
  FitConfig cfg;
  cfg.max_outer_iters = 60;
  const Params init = initial_params(dims, sim.data.R(), sim.data.J(), 9, 0);
  FitTrace trace;
  const FitResult a = fit_one(sim.data, dims, init, cfg, &trace);
  REQUIRE(trace.loglik.size() >= 2);
  for (std::size_t t = 1; t < trace.loglik.size(); ++t)
    CHECK(trace.loglik[t] >= trace.loglik[t - 1] - 1e-6 * std::abs(trace.loglik[t - 1]));
  CHECK(a.loglik == *std::max_element(trace.loglik.begin(), trace.loglik.end()));
  for (int i = 0; i < sim.data.N(); ++i) CHECK(std::abs(a.zhat.row(i).sum() - 1.0) < 1e-8);
  for (int h = 0; h < sim.data.H(); ++h) CHECK(std::abs(a.vhat.row(h).sum() - 1.0) < 1e-8);
  CHECK(a.node_map == map_labels(a.zhat));
  CHECK(a.layer_map == map_labels(a.vhat));

  const FitResult b = fit_one(sim.data, dims, init, cfg);
  CHECK(a.loglik == b.loglik);
  CHECK(a.params.b == b.params.b);
}

TEST_CASE("fit: a constant zero covariate leaves the likelihood unchanged") {
  std::mt19937_64 rng(50);
  const NetworkData d = oracle::random_network({20, 20, 20}, 5, 1, rng);
  NetworkData d0 = d;
  d0.X = MatrixXd::Zero(d.N(), 2);
  d0.X.col(0) = d.X.col(0);
  const ModelDims dims{2, 1, 1, false};
  FitConfig cfg;
  cfg.max_outer_iters = 40;
  const Params init = initial_params(dims, 5, 1, 3, 0);
  const Params init0 = initial_params(dims, 5, 2, 3, 0);
  CHECK(init0.b == init.b);
  const FitResult a = fit_one(d, dims, init, cfg);
  const FitResult b = fit_one(d0, dims, init0, cfg);
  CHECK(std::abs(a.loglik - b.loglik) < 1e-8);
}

TEST_CASE("initial parameters follow the documented policy") {
  const ModelDims dims{4, 2, 3, false};
  const Params p = initial_params(dims, 6, 2, 123, 2);
  CHECK(p.beta.isZero());
  CHECK(p.gamma(0) == 0.0);
  CHECK(std::abs(p.gamma(1) - 1.0) < 1e-15);
  CHECK(std::abs(p.gamma(2) - 2.0) < 1e-15);
  CHECK((p.rho.array() == 1.0 / 3.0).all());
  const VectorXd means = p.b.rowwise().mean();
  for (int g = 1; g < 4; ++g) CHECK(means(g - 1) <= means(g));
  CHECK(initial_params(dims, 6, 2, 123, 2).b == p.b);
  CHECK(initial_params(dims, 6, 2, 123, 3).b != p.b);
}

TEST_CASE("multistart: max contract, single start, thread invariance, stability") {
  const SimResult sim = small_simulation(11);
  const ModelDims dims{3, 1, 2, true};
  FitConfig cfg;
  cfg.seed = 42;
  cfg.n_starts = 10;
  cfg.threads = 1;
  const MultiStartResult ms = fit_multistart_detailed(sim.data, dims, cfg);
  REQUIRE(ms.starts.size() == 10u);
  int near_best = 0;
  for (const auto& s : ms.starts) {
    REQUIRE(s.ok);
    if (!s.degenerate) CHECK(ms.best.loglik >= s.loglik);
    if (std::abs(s.loglik - ms.best.loglik) <= 1e-3 * std::abs(ms.best.loglik)) ++near_best;
  }
  CHECK(ms.best.start_index == ms.starts[ms.best.start_index].start);
  CHECK(near_best >= 8);

  cfg.threads = 4;
  const FitResult par = fit_multistart(sim.data, dims, cfg);
  CHECK(par.loglik == ms.best.loglik);
  CHECK(par.params.b == ms.best.params.b);

  FitConfig one = cfg;
  one.n_starts = 1;
  const FitResult single = fit_multistart(sim.data, dims, one);
  const FitResult direct =
      fit_one(sim.data, dims, initial_params(dims, sim.data.R(), sim.data.J(), 42, 0), one);
  CHECK(single.loglik == direct.loglik);
  CHECK(single.start_index == 0);
}

TEST_CASE("fit config validation") {
  FitConfig cfg;
  cfg.n_starts = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = FitConfig{};
  cfg.outer_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(FitConfig{}.validate());
}
