#include <gtest/gtest.h>

#include <cmath>

#include "lexshift/common/random.hpp"
#include "lexshift/regress.hpp"

using namespace lexshift;
using namespace lexshift::regress;

namespace {

// n=20, p=2 fixture; reference optimum from a bounded quasi-Newton solver on
// the split-sign problem (cross-checked against a conic solver).
Matrix fixture_x() {
  static const double v[20][2] = {{-0.36, 1.204},  {1.397, 0.317},   {0.414, -0.49},  {-0.914, -0.9},  {-0.998, 0.929},
                                  {-0.056, 0.128}, {-0.64, -1.088},  {-1.202, -0.842}, {0.599, 0.018},  {-0.457, -0.239},
                                  {-1.427, 1.231}, {-1.216, 0.042},  {2.137, -2.551},  {-1.407, -0.724}, {0.117, -1.715},
                                  {-0.235, -0.028}, {0.171, -2.388}, {0.646, 1.597},   {0.437, -0.723},  {-0.613, -2.646}};
  Matrix X(20, 2);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = v[i][j];
  return X;
}

Vector fixture_y() {
  Vector y(20);
  y << 0, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 1, 0, 1, 1;
  return y;
}

struct Reference {
  double lambda, alpha, b0, b1, b2;
};

const Reference kReference[] = {
    {0.05, 0.5, -0.006484626290548439, -0.08435871867781915, -1.5839310844566235},
    {0.02, 1.0, -0.11403944175039865, -0.1387443808289343, -2.290338707093432},
    {0.10, 0.0, 0.03995810868696384, -0.15676402189049327, -1.151371750360111},
    {0.15, 1.0, 0.12005487816976597, 0.0, -0.9262180015096116},
};

double brute_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

double sigmoid(double e) { return 1.0 / (1.0 + std::exp(-e)); }

// Logistic data with `informative` unit coefficients followed by noise columns.
std::pair<Matrix, Vector> generative(Rng& rng, std::size_t n, std::size_t informative, std::size_t noise) {
  const auto p = static_cast<Eigen::Index>(informative + noise);
  Matrix X(static_cast<Eigen::Index>(n), p);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double eta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      X(i, j) = rng.normal();
      if (j < static_cast<Eigen::Index>(informative)) eta += (j % 2 ? -1.0 : 1.0) * X(i, j);
    }
    y[i] = rng.bernoulli(sigmoid(eta)) ? 1.0 : 0.0;
  }
  return {X, y};
}

// Random-intercept data: `groups` groups of `per` rows, one covariate.
struct Grouped {
  Matrix X;
  Vector y;
  std::vector<std::string> g;
};

Grouped grouped(Rng& rng, std::size_t groups, std::size_t per, double sd, double beta = 0.5) {
  Grouped d;
  d.X.resize(static_cast<Eigen::Index>(groups * per), 1);
  d.y.resize(d.X.rows());
  Eigen::Index r = 0;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double u = sd * rng.normal();
    for (std::size_t i = 0; i < per; ++i, ++r) {
      d.X(r, 0) = rng.normal();
      d.y[r] = rng.bernoulli(sigmoid(-0.2 + beta * d.X(r, 0) + u)) ? 1.0 : 0.0;
      d.g.push_back("g" + std::to_string(gi));
    }
  }
  return d;
}

}  // namespace

TEST(Enet, MatchesFrozenReference) {
  auto X = fixture_x();
  auto y = fixture_y();
  for (const auto& ref : kReference) {
    EnetConfig c;
    c.lambda = ref.lambda;
    c.alpha = ref.alpha;
    c.max_iter = 1000;
    auto m = fit_enet_logistic(X, y, c);
    EXPECT_TRUE(m.converged);
    EXPECT_NEAR(m.intercept, ref.b0, 1e-4) << ref.lambda << "/" << ref.alpha;
    EXPECT_NEAR(m.beta[0], ref.b1, 1e-4) << ref.lambda << "/" << ref.alpha;
    EXPECT_NEAR(m.beta[1], ref.b2, 1e-4) << ref.lambda << "/" << ref.alpha;
    if (ref.b1 == 0.0) {
      EXPECT_EQ(m.beta[0], 0.0);
    }
  }
}

TEST(Enet, ObjectiveNonIncreasing) {
  Rng rng(3);
  auto [X, y] = generative(rng, 200, 3, 7);
  for (double alpha : {0.0, 0.5, 1.0}) {
    EnetConfig c;
    c.lambda = 0.01;
    c.alpha = alpha;
    auto m = fit_enet_logistic(X, y, c);
    ASSERT_FALSE(m.objective_trace.empty());
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
      EXPECT_LE(m.objective_trace[i], m.objective_trace[i - 1] + 1e-15);
    EXPECT_NEAR(m.objective_trace.back(), objective(X, y, m, c.lambda, c.alpha), 1e-12);
  }
}

TEST(Enet, TotalShrinkage) {
  auto X = fixture_x();
  auto y = fixture_y();
  EnetConfig c;
  c.lambda = 1e6;
  auto m = fit_enet_logistic(X, y, c);
  EXPECT_EQ(m.nonzero(), 0u);
  EXPECT_NEAR(m.intercept, std::log(0.6 / 0.4), 1e-12);
}

TEST(Enet, LambdaMaxIsExactBoundary) {
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    auto [X, y] = generative(rng, 100, 4, 4);
    double lmax = lambda_max(X, y, 1.0);
    Vector yc = y.array() - y.mean();
    EXPECT_NEAR(lmax, (X.transpose() * yc).cwiseAbs().maxCoeff() / 100.0, 1e-15);
    EnetConfig c;
    c.alpha = 1.0;
    c.lambda = lmax * (1 + 1e-9);
    EXPECT_EQ(fit_enet_logistic(X, y, c).nonzero(), 0u);
    c.lambda = lmax * 0.9;
    EXPECT_GT(fit_enet_logistic(X, y, c).nonzero(), 0u);
  }
}

TEST(Enet, PathL1Monotone) {
  Rng rng(5);
  auto [X, y] = generative(rng, 300, 4, 10);
  auto grid = lambda_grid(X, y, 1.0, 30, 3.0);
  EXPECT_EQ(grid.size(), 30u);
  auto path = fit_path(X, y, 1.0, grid);
  for (std::size_t i = 1; i < path.size(); ++i) {
    EXPECT_LT(grid[i], grid[i - 1]);
    EXPECT_GE(path[i].beta.lpNorm<1>() + 1e-9, path[i - 1].beta.lpNorm<1>());
  }
  EXPECT_EQ(path.front().nonzero(), 0u);
}

TEST(Enet, SeparableSignAndErrors) {
  Matrix X(6, 1);
  X << -3, -2, -1, 1, 2, 3;
  Vector y(6);
  y << 1, 1, 1, 0, 0, 0;
  EnetConfig c;
  c.lambda = 1e-3;
  c.alpha = 0.0;
  EXPECT_LT(fit_enet_logistic(X, y, c).beta[0], 0.0);
  auto code = [&](const Matrix& A, const Vector& b) {
    try {
      fit_enet_logistic(A, b, c);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code(X, Vector::Ones(6)), Errc::SingleClass);
  Matrix bad = X;
  bad(2, 0) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(code(bad, y), Errc::NonFinite);
}

TEST(Auc, HandExamplesAndBruteForce) {
  std::vector<double> y{0, 1, 1, 0}, s{0.5, 0.9, 0.3, 0.2};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 1, 1}), 1.0);
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::size_t n = 2 + rng.below(60);
    std::vector<double> ys(n), ss(n);
    for (std::size_t i = 0; i < n; ++i) {
      ys[i] = static_cast<double>(rng.below(2));
      ss[i] = static_cast<double>(rng.below(8));  // many ties
    }
    ys[0] = 0;
    ys[1] = 1;
    double a = auc(ss, ys);
    EXPECT_EQ(a, brute_auc(ss, ys));
    std::vector<double> tr(n);
    for (std::size_t i = 0; i < n; ++i) tr[i] = std::exp(ss[i]) * 3 - 1;
    EXPECT_EQ(auc(tr, ys), a);
  }
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<double>{1, 1}), Error);
}

TEST(Evaluate, InterceptOnlyHasZeroR2) {
  auto X = fixture_x();
  auto y = fixture_y();
  LogisticModel m;
  m.beta = Vector::Zero(2);
  m.intercept = std::log(0.6 / 0.4);
  auto e = evaluate(m, X, y);
  EXPECT_NEAR(e.mcfadden_r2, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(e.auc, 0.5);
  EnetConfig c;
  c.lambda = 0.0;
  auto fit = evaluate(fit_enet_logistic(X, y, c), X, y);
  EXPECT_GT(fit.mcfadden_r2, 0.0);
  EXPECT_LE(fit.mcfadden_r2, 1.0);
}

TEST(Folds, StratifiedBalance) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    std::size_t n = 30 + rng.below(200), k = 2 + rng.below(9);
    Vector y(static_cast<Eigen::Index>(n));
    for (auto& v : y) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
    auto fold = stratified_folds(y, k, rng);
    std::vector<double> pos(k, 0), all(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      all[fold[i]] += 1;
      pos[fold[i]] += y[static_cast<Eigen::Index>(i)];
    }
    auto [plo, phi] = std::minmax_element(pos.begin(), pos.end());
    EXPECT_LE(*phi - *plo, 1.0);
    std::vector<double> neg(k);
    for (std::size_t f = 0; f < k; ++f) neg[f] = all[f] - pos[f];
    auto [nlo, nhi] = std::minmax_element(neg.begin(), neg.end());
    EXPECT_LE(*nhi - *nlo, 1.0);
  }
}

TEST(Stability, InformativeFeaturesSurvive) {
  Rng rng(8);
  auto [X, y] = generative(rng, 1000, 5, 20);
  std::vector<std::string> names;
  for (int j = 0; j < 25; ++j) names.push_back("f" + std::to_string(j));
  StabilityConfig cfg;
  cfg.outer_k = 5;
  cfg.inner_k = 3;
  cfg.n_lambda = 20;
  cfg.n_boot = 100;
  cfg.seed = 1;
  auto rep = stability_select(X, y, names, cfg);
  ASSERT_EQ(rep.features.size(), 25u);
  for (int j = 0; j < 5; ++j) EXPECT_TRUE(rep.features[static_cast<std::size_t>(j)].final_selected) << j;
  std::size_t noise_kept = 0;
  for (std::size_t j = 5; j < 25; ++j) noise_kept += rep.features[j].final_selected;
  EXPECT_LE(noise_kept, 2u);
  for (const auto& f : rep.features) {
    if (f.final_selected) {
      EXPECT_TRUE(f.selected_in_all_folds && f.sign_consistent && f.effect_large_enough && f.ci_excludes_zero);
    }
    EXPECT_EQ(f.fold_coefs.size(), 5u);
  }
  EXPECT_EQ(rep.folds.size(), 5u);
  EXPECT_GT(rep.mean_auc, 0.7);
  cfg.threads = 1;
  auto again = stability_select(X, y, names, cfg);
  for (std::size_t j = 0; j < 25; ++j) EXPECT_EQ(again.features[j].fold_coefs, rep.features[j].fold_coefs);
}

TEST(Stability, Errors) {
  Matrix X = Matrix::Random(5, 2);
  Vector y(5);
  y << 0, 1, 0, 1, 0;
  try {
    stability_select(X, y, {"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewRows);
  }
  Matrix X12 = Matrix::Random(12, 2);
  Vector y12 = Vector::Zero(12);
  y12[0] = 1;
  try {
    stability_select(X12, y12, {"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateFolds);
  }
}

TEST(Refit, InformativeCisExcludeOne) {
  Rng rng(9);
  auto [X, y] = generative(rng, 1500, 5, 0);
  std::vector<std::string> names{"a", "b", "c", "d", "e"};
  RefitConfig cfg;
  cfg.n_boot = 200;
  cfg.seed = 3;
  auto rep = refit_full(X, y, names, {0, 1, 2, 3, 4}, cfg);
  ASSERT_EQ(rep.coefficients.size(), 5u);
  for (const auto& c : rep.coefficients) {
    EXPECT_TRUE(c.ci_lo > 1.0 || c.ci_hi < 1.0) << c.name;
    EXPECT_TRUE(c.wald_lo > 1.0 || c.wald_hi < 1.0) << c.name;
    EXPECT_NEAR(c.odds_ratio, std::exp(c.coef), 1e-12);
    EXPECT_LE(c.ci_lo, c.ci_hi);
  }
  cfg.threads = 1;
  auto again = refit_full(X, y, names, {0, 1, 2, 3, 4}, cfg);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(again.coefficients[j].ci_lo, rep.coefficients[j].ci_lo);
    EXPECT_EQ(again.coefficients[j].coef, rep.coefficients[j].coef);
  }
}

TEST(Refit, NullFeatureStraddlesOne) {
  Rng rng(10);
  Matrix X(400, 1);
  Vector y(400);
  for (Eigen::Index i = 0; i < 400; ++i) {
    X(i, 0) = rng.normal();
    y[i] = static_cast<double>(i % 2);
  }
  RefitConfig cfg;
  cfg.n_boot = 300;
  cfg.seed = 2;
  auto rep = refit_full(X, y, {"x"}, {0}, cfg);
  EXPECT_LT(rep.coefficients[0].ci_lo, 1.0);
  EXPECT_GT(rep.coefficients[0].ci_hi, 1.0);
}

TEST(Refit, CollinearGuard) {
  Rng rng(11);
  Matrix X(50, 2);
  Vector y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = 2 * X(i, 0);
    y[i] = static_cast<double>(i % 2);
  }
  try {
    refit_full(X, y, {"a", "b"}, {0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Collinear);
  }
}

TEST(Mixed, ZeroVarianceReducesToLogistic) {
  Rng rng(12);
  auto [X, y] = generative(rng, 300, 2, 1);
  std::vector<std::string> g;
  for (int i = 0; i < 300; ++i) g.push_back("r" + std::to_string(i));
  MixedConfig cfg;
  cfg.fixed_sd = 0.0;
  auto mm = fit_random_intercept_logistic(X, y, g, cfg);
  EnetConfig c;
  c.lambda = 0.0;
  c.max_iter = 500;
  auto lm = fit_enet_logistic(X, y, c);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(mm.beta[j], lm.beta[j], 1e-4);
  EXPECT_NEAR(mm.intercept, lm.intercept, 1e-4);
  EXPECT_EQ(mm.sd, 0.0);
  // Wald errors agree with the plain logistic observed information.
  auto rep = refit_full(X, y, {"a", "b", "c"}, {0, 1, 2}, [] {
    RefitConfig r;
    r.n_boot = 2;
    return r;
  }());
  for (Eigen::Index j = 0; j < 3; ++j)
    EXPECT_NEAR(mm.std_errors[j], rep.coefficients[static_cast<std::size_t>(j)].std_error, 1e-3);
}

TEST(Mixed, RecoversInterceptSd) {
  std::vector<double> sds;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(derive_seed(77, s));
    auto d = grouped(rng, 200, 10, 1.0);
    auto r = fit_random_intercept_logistic(d.X, d.y, d.g);
    EXPECT_TRUE(r.converged);
    sds.push_back(r.sd);
    EXPECT_NEAR(r.beta[0], 0.5, 0.25);
    EXPECT_GT(r.marginal_r2, 0.0);
    EXPECT_GT(r.conditional_r2, r.marginal_r2);
  }
  std::sort(sds.begin(), sds.end());
  EXPECT_GE(sds[2], 0.8);
  EXPECT_LE(sds[2], 1.2);
}

TEST(Mixed, SingletonGroupsShrinkVariance) {
  Rng rng(13);
  auto d = grouped(rng, 500, 1, 0.0);
  auto r = fit_random_intercept_logistic(d.X, d.y, d.g);
  EXPECT_LE(r.variance, 0.05);
}

TEST(Mixed, Errors) {
  Matrix X = Matrix::Random(10, 1);
  Vector y(10);
  y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  std::vector<std::string> one(10, "g");
  try {
    fit_random_intercept_logistic(X, y, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingleGroup);
  }
  EXPECT_THROW(fit_random_intercept_logistic(X, y, {"a", "b"}), Error);
}
