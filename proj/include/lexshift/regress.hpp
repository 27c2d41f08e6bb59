#pragma once

// Elastic-net logistic regression, nested-CV stability selection, full-data
// refit with odds-ratio CIs, and a random-intercept logistic model.

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/random.hpp"
#include "lexshift/stats.hpp"

namespace lexshift::regress {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EnetConfig {
  double lambda = 0.0;
  double alpha = 0.5;  // 1 = lasso, 0 = ridge
  std::size_t max_iter = 200;
  double tol = 1e-12;
  std::uint64_t seed = 0;  // unused by the solver, which is deterministic
};

struct LogisticModel {
  Vector beta;
  double intercept = 0.0;
  std::vector<double> objective_trace;  // penalized objective after each outer step
  std::size_t iterations = 0;
  bool converged = false;

  Vector linear_predictor(const Matrix& X) const { return (X * beta).array() + intercept; }
  Vector predict_proba(const Matrix& X) const {
    return linear_predictor(X).unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
  }
  std::size_t nonzero() const { return static_cast<std::size_t>((beta.array() != 0.0).count()); }
};

namespace detail {

inline double softplus(double e) { return std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e))); }
inline double sigmoid(double e) { return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e)); }

inline double mean_logloss(const Vector& eta, const Vector& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - y[i] * eta[i];
  return s / static_cast<double>(eta.size());
}

inline double penalty(const Vector& beta, double lambda, double alpha) {
  if (lambda == 0.0) return 0.0;
  return lambda * (alpha * beta.lpNorm<1>() + 0.5 * (1.0 - alpha) * beta.squaredNorm());
}

inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

inline void check_inputs(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw Error(Errc::LengthMismatch, "X rows and y length differ");
  if (X.rows() == 0) throw Error(Errc::TooFewRows, "no rows");
  if (!X.allFinite() || !y.allFinite()) throw Error(Errc::NonFinite, "non-finite design or response");
  double pos = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw Error(Errc::InvalidArgument, "response must be 0/1");
    pos += y[i];
  }
  if (pos == 0.0 || pos == static_cast<double>(y.size()))
    throw Error(Errc::SingleClass, "response has a single class");
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

/// Penalized objective: mean logistic loss + lambda * (alpha*|b|_1 + (1-alpha)/2*|b|_2^2).
inline double objective(const Matrix& X, const Vector& y, const LogisticModel& m, double lambda, double alpha) {
  Vector eta = m.linear_predictor(X);
  return detail::mean_logloss(eta, y) + detail::penalty(m.beta, lambda, alpha);
}

/// Proximal Newton: each outer step minimizes the quadratic approximation by
/// cyclic coordinate descent, then backtracks until the penalized objective
/// does not increase. Intercept unpenalized.
inline LogisticModel fit_enet_logistic(const Matrix& X, const Vector& y, const EnetConfig& cfg,
                                       const LogisticModel* warm = nullptr) {
  detail::check_inputs(X, y);
  if (cfg.lambda < 0 || cfg.alpha < 0 || cfg.alpha > 1)
    throw Error(Errc::InvalidArgument, "lambda must be >= 0 and alpha in [0,1]");
  const auto n = X.rows();
  const auto p = X.cols();
  const double nd = static_cast<double>(n);
  const double l1 = cfg.lambda * cfg.alpha;
  const double l2 = cfg.lambda * (1.0 - cfg.alpha);

  LogisticModel m;
  if (warm && warm->beta.size() == p) {
    m.beta = warm->beta;
    m.intercept = warm->intercept;
  } else {
    m.beta = Vector::Zero(p);
    m.intercept = detail::logit(y.mean());
  }
  Vector eta = m.linear_predictor(X);
  double F = detail::mean_logloss(eta, y) + detail::penalty(m.beta, cfg.lambda, cfg.alpha);
  m.objective_trace.push_back(F);

  Vector w(n), r(n), xwx(p);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    m.iterations = it + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      double pi = detail::sigmoid(eta[i]);
      w[i] = std::max(pi * (1.0 - pi), 1e-5);
      r[i] = (y[i] - pi) / w[i];  // working residual z - eta
    }
    for (Eigen::Index j = 0; j < p; ++j) xwx[j] = (w.array() * X.col(j).array().square()).sum() / nd;

    Vector b = m.beta;
    double b0 = m.intercept;
    const double wsum = w.sum();
    for (std::size_t sweep = 0; sweep < 1000; ++sweep) {
      double max_change = 0;
      double d0 = (w.array() * r.array()).sum() / wsum;
      b0 += d0;
      r.array() -= d0;
      max_change = std::abs(d0);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (xwx[j] == 0.0) continue;
        double g = (w.array() * X.col(j).array() * r.array()).sum() / nd + xwx[j] * b[j];
        double nb = detail::soft_threshold(g, l1) / (xwx[j] + l2);
        double d = nb - b[j];
        if (d != 0.0) {
          r -= d * X.col(j);
          b[j] = nb;
          max_change = std::max(max_change, std::abs(d) * std::sqrt(xwx[j]));
        }
      }
      if (max_change < 1e-13) break;
    }

    // Backtracking along the Newton direction.
    Vector db = b - m.beta;
    double d0 = b0 - m.intercept;
    double t = 1.0;
    bool accepted = false;
    LogisticModel trial = m;
    double Fnew = F;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      trial.beta = m.beta + t * db;
      trial.intercept = m.intercept + t * d0;
      Vector e2 = trial.linear_predictor(X);
      Fnew = detail::mean_logloss(e2, y) + detail::penalty(trial.beta, cfg.lambda, cfg.alpha);
      if (Fnew <= F) {
        accepted = true;
        eta = std::move(e2);
        break;
      }
    }
    if (!accepted) {
      m.converged = true;
      break;
    }
    double step = std::max(t * db.lpNorm<Eigen::Infinity>(), std::abs(t * d0));
    double decrease = F - Fnew;
    m.beta = trial.beta;
    m.intercept = trial.intercept;
    F = Fnew;
    m.objective_trace.push_back(F);
    if (decrease <= cfg.tol * std::max(1.0, std::abs(F)) || step < 1e-10) {
      m.converged = true;
      break;
    }
  }
  if (!m.beta.allFinite() || !std::isfinite(m.intercept))
    throw Error(Errc::NonFinite, "coefficients diverged");
  return m;
}

/// Smallest lambda at which every coefficient is zero (alpha floored at 1e-3).
inline double lambda_max(const Matrix& X, const Vector& y, double alpha) {
  Vector yc = y.array() - y.mean();
  double g = (X.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
  return g / std::max(alpha, 1e-3);
}

/// Log-spaced grid from lambda_max down `decades` decades.
inline std::vector<double> lambda_grid(const Matrix& X, const Vector& y, double alpha, std::size_t n = 50,
                                       double decades = 4.0) {
  double top = lambda_max(X, y, alpha);
  if (!(top > 0)) top = 1e-4;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = top * std::pow(10.0, -decades * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n - 1, 1)));
  return g;
}

/// Warm-started fits along a decreasing lambda grid.
inline std::vector<LogisticModel> fit_path(const Matrix& X, const Vector& y, double alpha,
                                           const std::vector<double>& grid, const EnetConfig& base = {}) {
  std::vector<LogisticModel> path;
  path.reserve(grid.size());
  for (double lam : grid) {
    EnetConfig c = base;
    c.lambda = lam;
    c.alpha = alpha;
    path.push_back(fit_enet_logistic(X, y, c, path.empty() ? nullptr : &path.back()));
  }
  return path;
}

// Evaluation.

/// P(score+ > score-) + P(tie)/2 over positive-negative pairs.
inline double auc(std::span<const double> scores, std::span<const double> y) {
  if (scores.size() != y.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  double npos = 0, nneg = 0;
  for (double v : y) (v == 1.0 ? npos : nneg) += 1;
  if (npos == 0 || nneg == 0) throw Error(Errc::SingleClass, "AUC needs both classes");
  auto rk = stats::midranks(scores);
  double rpos = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 1.0) rpos += rk.ranks[i];
  return (rpos - npos * (npos + 1) / 2) / (npos * nneg);
}

inline double auc(const Vector& scores, const Vector& y) {
  return auc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
             std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

inline double log_likelihood(const Vector& eta, const Vector& y) {
  return -detail::mean_logloss(eta, y) * static_cast<double>(y.size());
}

struct Evaluation {
  double auc = 0.5;
  double mcfadden_r2 = 0.0;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
};

/// McFadden R^2 against the intercept-only model of the evaluated labels.
inline Evaluation evaluate(const LogisticModel& m, const Matrix& X, const Vector& y) {
  detail::check_inputs(X, y);
  Evaluation e;
  Vector eta = m.linear_predictor(X);
  e.auc = auc(eta, y);
  e.log_likelihood = log_likelihood(eta, y);
  Vector eta0 = Vector::Constant(y.size(), detail::logit(y.mean()));
  e.null_log_likelihood = log_likelihood(eta0, y);
  e.mcfadden_r2 = 1.0 - e.log_likelihood / e.null_log_likelihood;
  return e;
}

// Folds.

/// Fold id per row; each class is shuffled and dealt round-robin, so every
/// fold's class count differs by at most one from any other.
inline std::vector<std::size_t> stratified_folds(const Vector& y, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y[i] == 1.0 ? pos : neg).push_back(static_cast<std::size_t>(i));
  if (pos.size() < k || neg.size() < k)
    throw Error(Errc::DegenerateFolds, "each class needs at least " + std::to_string(k) + " rows for " +
                                           std::to_string(k) + "-fold CV");
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::size_t> fold(static_cast<std::size_t>(y.size()));
  std::size_t next = 0;
  for (auto i : pos) fold[i] = next++ % k;
  for (auto i : neg) fold[i] = next++ % k;
  return fold;
}

inline Matrix take_rows(const Matrix& X, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Vector take(const Vector& y, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
  return out;
}

inline Matrix take_cols(const Matrix& X, const std::vector<std::size_t>& cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

struct Tuned {
  double lambda = 0.0;
  double alpha = 0.5;
  double cv_auc = 0.5;
};

/// Inner CV over (alpha, lambda); maximizes mean validation AUC, preferring
/// the larger lambda on ties.
inline Tuned tune_lambda(const Matrix& X, const Vector& y, const std::vector<double>& alphas, std::size_t k,
                         std::size_t n_lambda, double decades, Rng& rng) {
  auto fold = stratified_folds(y, k, rng);
  Tuned best;
  best.cv_auc = -1;
  for (double alpha : alphas) {
    auto grid = lambda_grid(X, y, alpha, n_lambda, decades);
    std::vector<double> mean_auc(grid.size(), 0.0);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
      Matrix Xt = take_rows(X, tr), Xv = take_rows(X, va);
      Vector yt = take(y, tr), yv = take(y, va);
      auto path = fit_path(Xt, yt, alpha, grid);
      for (std::size_t l = 0; l < grid.size(); ++l) mean_auc[l] += auc(path[l].linear_predictor(Xv), yv) / static_cast<double>(k);
    }
    for (std::size_t l = 0; l < grid.size(); ++l)
      if (mean_auc[l] > best.cv_auc + 1e-12) best = {grid[l], alpha, mean_auc[l]};
  }
  return best;
}

// Stability selection.

struct StabilityConfig {
  std::size_t inner_k = 5;
  std::size_t outer_k = 10;
  std::vector<double> alphas{0.5};
  std::size_t n_lambda = 50;
  double lambda_decades = 4.0;
  double min_odds_change = 0.05;  // criterion (c), as a fraction
  std::size_t n_boot = 200;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> groups;  // optional; bootstrap resamples whole groups when set
};

struct FeatureStability {
  std::string name;
  std::vector<double> fold_coefs;
  bool selected_in_all_folds = false;  // (a)
  bool sign_consistent = false;        // (b)
  double mean_odds_change_pct = 0.0;   // (c) uses |mean| >= threshold
  bool effect_large_enough = false;
  stats::Interval ci;                  // (d) bootstrap CI of the coefficient
  bool ci_excludes_zero = false;
  bool final_selected = false;
};

struct FoldMetrics {
  std::size_t fold = 0;
  double lambda = 0.0;
  double alpha = 0.0;
  double inner_auc = 0.0;
  double auc = 0.0;
  double mcfadden_r2 = 0.0;
  std::size_t nonzero = 0;
};

struct StabilityReport {
  std::vector<FeatureStability> features;
  std::vector<FoldMetrics> folds;
  double mean_auc = 0.0;
  double sd_auc = 0.0;
  double bootstrap_lambda = 0.0;
  double bootstrap_alpha = 0.0;
  std::size_t bootstrap_failures = 0;

  std::vector<std::size_t> selected() const {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < features.size(); ++j)
      if (features[j].final_selected) s.push_back(j);
    return s;
  }
};

namespace detail {

// Bootstrap replicate indices: rows, or whole groups when groups are given.
inline std::vector<std::size_t> resample(std::size_t n, const std::vector<std::vector<std::size_t>>& clusters, Rng& rng) {
  std::vector<std::size_t> idx;
  if (clusters.empty()) {
    idx.resize(n);
    for (auto& i : idx) i = rng.below(n);
  } else {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto& g = clusters[rng.below(clusters.size())];
      idx.insert(idx.end(), g.begin(), g.end());
    }
  }
  return idx;
}

inline std::vector<std::vector<std::size_t>> group_rows(const std::vector<std::string>& groups, std::size_t n) {
  if (groups.empty()) return {};
  if (groups.size() != n) throw Error(Errc::LengthMismatch, "groups and rows differ in length");
  std::map<std::string, std::vector<std::size_t>> m;
  for (std::size_t i = 0; i < n; ++i) m[groups[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, v] : m) out.push_back(std::move(v));
  return out;
}

// Per-replicate coefficient vectors (intercept first); failed replicates
// (single-class resamples) are skipped and counted.
inline std::vector<Vector> bootstrap_coefs(const Matrix& X, const Vector& y, const EnetConfig& cfg,
                                           const std::vector<std::string>& groups, std::size_t n_boot,
                                           std::uint64_t seed, unsigned threads, std::size_t& failures) {
  auto clusters = group_rows(groups, static_cast<std::size_t>(X.rows()));
  std::vector<std::optional<Vector>> reps(n_boot);
  parallel_for(
      n_boot,
      [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        auto idx = resample(static_cast<std::size_t>(X.rows()), clusters, rng);
        Vector yb = take(y, idx);
        double pos = yb.sum();
        if (pos == 0 || pos == static_cast<double>(yb.size())) return;
        try {
          auto m = fit_enet_logistic(take_rows(X, idx), yb, cfg);
          Vector v(m.beta.size() + 1);
          v[0] = m.intercept;
          v.tail(m.beta.size()) = m.beta;
          reps[b] = std::move(v);
        } catch (const Error&) {
        }
      },
      threads);
  std::vector<Vector> out;
  failures = 0;
  for (auto& r : reps) {
    if (r)
      out.push_back(std::move(*r));
    else
      ++failures;
  }
  return out;
}

inline stats::Interval percentile_interval(std::vector<double> v, double level) {
  double a = (1.0 - level) / 2.0;
  return {stats::quantile(v, a), stats::quantile(v, 1.0 - a)};
}

}  // namespace detail

/// Nested CV: lambda tuned by inner CV in every outer fold; a feature survives
/// only if (a) selected in all outer folds, (b) with one sign, (c) with mean
/// odds change of at least `min_odds_change`, and (d) its bootstrap CI at the
/// median tuned lambda excludes 0.
inline StabilityReport stability_select(const Matrix& X, const Vector& y, const std::vector<std::string>& names,
                                        const StabilityConfig& cfg = {}) {
  detail::check_inputs(X, y);
  if (static_cast<std::size_t>(X.rows()) < cfg.outer_k)
    throw Error(Errc::TooFewRows, std::to_string(X.rows()) + " rows for " + std::to_string(cfg.outer_k) + " folds");
  if (names.size() != static_cast<std::size_t>(X.cols()))
    throw Error(Errc::LengthMismatch, "feature names and columns differ");
  if (cfg.alphas.empty()) throw Error(Errc::InvalidArgument, "alpha grid is empty");
  const std::size_t K = cfg.outer_k;
  const std::size_t p = names.size();
  const unsigned threads = cfg.threads ? cfg.threads : default_threads();

  Rng fold_rng(derive_seed(cfg.seed, 0));
  auto fold = stratified_folds(y, K, fold_rng);
  for (std::size_t f = 0; f < K; ++f) {
    double pos = 0, cnt = 0;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) {
        pos += y[static_cast<Eigen::Index>(i)];
        ++cnt;
      }
    if (pos < static_cast<double>(cfg.inner_k) || cnt - pos < static_cast<double>(cfg.inner_k))
      throw Error(Errc::DegenerateFolds, "outer training fold too small for inner CV");
  }

  std::vector<LogisticModel> fits(K);
  StabilityReport rep;
  rep.folds.resize(K);
  parallel_for(
      K,
      [&](std::size_t f) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
        Matrix Xt = take_rows(X, tr), Xe = take_rows(X, te);
        Vector yt = take(y, tr), ye = take(y, te);
        Rng inner(derive_seed(cfg.seed, 1 + f));
        auto tuned = tune_lambda(Xt, yt, cfg.alphas, cfg.inner_k, cfg.n_lambda, cfg.lambda_decades, inner);
        // Refit along the path so the tuned model shares the warm start used in tuning.
        auto grid = lambda_grid(Xt, yt, tuned.alpha, cfg.n_lambda, cfg.lambda_decades);
        auto path = fit_path(Xt, yt, tuned.alpha, grid);
        std::size_t li = 0;
        for (std::size_t l = 0; l < grid.size(); ++l)
          if (std::abs(grid[l] - tuned.lambda) <= 1e-12 * tuned.lambda) li = l;
        fits[f] = path[li];
        auto ev = evaluate(fits[f], Xe, ye);
        rep.folds[f] = {f, tuned.lambda, tuned.alpha, tuned.cv_auc, ev.auc, ev.mcfadden_r2, fits[f].nonzero()};
      },
      threads);

  std::vector<double> aucs;
  for (auto& fm : rep.folds) aucs.push_back(fm.auc);
  rep.mean_auc = stats::mean(aucs);
  rep.sd_auc = K > 1 ? stats::sample_sd(aucs) : 0.0;

  // Bootstrap at the median tuned lambda of the modal alpha.
  std::map<double, std::size_t> alpha_votes;
  for (auto& fm : rep.folds) ++alpha_votes[fm.alpha];
  double alpha = alpha_votes.begin()->first;
  std::size_t votes = 0;
  for (auto& [a, v] : alpha_votes)
    if (v > votes) {
      votes = v;
      alpha = a;
    }
  std::vector<double> lams;
  for (auto& fm : rep.folds)
    if (fm.alpha == alpha) lams.push_back(fm.lambda);
  rep.bootstrap_alpha = alpha;
  rep.bootstrap_lambda = stats::median(lams);
  EnetConfig bcfg;
  bcfg.lambda = rep.bootstrap_lambda;
  bcfg.alpha = alpha;
  auto reps = detail::bootstrap_coefs(X, y, bcfg, cfg.groups, cfg.n_boot, derive_seed(cfg.seed, 1000003), threads,
                                      rep.bootstrap_failures);
  if (reps.size() < 2) throw Error(Errc::NonConvergence, "too few successful bootstrap replicates");

  rep.features.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& fs = rep.features[j];
    fs.name = names[j];
    std::size_t npos = 0, nneg = 0;
    double odds = 0;
    for (std::size_t f = 0; f < K; ++f) {
      double c = fits[f].beta[static_cast<Eigen::Index>(j)];
      fs.fold_coefs.push_back(c);
      if (c > 0) ++npos;
      if (c < 0) ++nneg;
      odds += std::expm1(c);
    }
    fs.selected_in_all_folds = npos + nneg == K;
    fs.sign_consistent = (npos == 0) != (nneg == 0);
    fs.mean_odds_change_pct = 100.0 * odds / static_cast<double>(K);
    fs.effect_large_enough = std::abs(fs.mean_odds_change_pct) >= 100.0 * cfg.min_odds_change;
    std::vector<double> draws;
    for (auto& r : reps) draws.push_back(r[static_cast<Eigen::Index>(j + 1)]);
    fs.ci = detail::percentile_interval(draws, cfg.ci_level);
    fs.ci_excludes_zero = fs.ci.lo > 0.0 || fs.ci.hi < 0.0;
    fs.final_selected = fs.selected_in_all_folds && fs.sign_consistent && fs.effect_large_enough && fs.ci_excludes_zero;
  }
  return rep;
}

// Full-data refit.

struct RefitConfig {
  std::size_t n_boot = 1000;
  double ci_level = 0.95;
  double ridge = 1e-8;
  double max_condition = 1e12;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> groups;
};

struct CoefficientRecord {
  std::string name;
  double coef = 0.0;
  double std_error = 0.0;
  double odds_ratio = 1.0;
  double ci_lo = 1.0;  // bootstrap percentile, odds-ratio scale
  double ci_hi = 1.0;
  double wald_lo = 1.0;
  double wald_hi = 1.0;
};

struct RegressionReport {
  std::vector<CoefficientRecord> coefficients;
  double intercept = 0.0;
  double auc = 0.5;
  double mcfadden_r2 = 0.0;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  std::size_t n = 0;
  std::size_t bootstrap_failures = 0;
  std::vector<FoldMetrics> folds;  // copied from stability selection when available
};

/// Design condition number of [1 X] (ratio of extreme eigenvalues of the Gram matrix).
inline double design_condition(const Matrix& X) {
  Matrix D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  Matrix G = D.transpose() * D / static_cast<double>(X.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (lo <= 0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Near-unpenalized logistic fit on the selected columns, with bootstrap
/// percentile CIs and Wald CIs for the odds ratios.
inline RegressionReport refit_full(const Matrix& X, const Vector& y, const std::vector<std::string>& names,
                                   const std::vector<std::size_t>& selected, const RefitConfig& cfg = {}) {
  if (selected.empty()) throw Error(Errc::InvalidArgument, "no features selected for refit");
  Matrix Xs = take_cols(X, selected);
  detail::check_inputs(Xs, y);
  double cond = design_condition(Xs);
  if (!(cond <= cfg.max_condition))
    throw Error(Errc::Collinear, "design condition number " + std::to_string(cond) + " exceeds guard");
  EnetConfig ec;
  ec.lambda = cfg.ridge;
  ec.alpha = 0.0;
  ec.max_iter = 500;
  auto m = fit_enet_logistic(Xs, y, ec);

  RegressionReport rep;
  rep.n = static_cast<std::size_t>(X.rows());
  rep.intercept = m.intercept;
  auto ev = evaluate(m, Xs, y);
  rep.auc = ev.auc;
  rep.mcfadden_r2 = ev.mcfadden_r2;
  rep.log_likelihood = ev.log_likelihood;
  rep.null_log_likelihood = ev.null_log_likelihood;

  // Wald standard errors from the observed information.
  const auto k = Xs.cols();
  Matrix D(Xs.rows(), k + 1);
  D.col(0).setOnes();
  D.rightCols(k) = Xs;
  Vector pr = m.predict_proba(Xs);
  Vector w = (pr.array() * (1.0 - pr.array())).matrix();
  Matrix I = D.transpose() * w.asDiagonal() * D;
  Matrix cov = I.ldlt().solve(Matrix::Identity(k + 1, k + 1));
  const double z = std::sqrt(2.0) * boost::math::erf_inv(cfg.ci_level);

  const unsigned threads = cfg.threads ? cfg.threads : default_threads();
  auto reps = detail::bootstrap_coefs(Xs, y, ec, cfg.groups, cfg.n_boot, cfg.seed, threads, rep.bootstrap_failures);
  for (Eigen::Index j = 0; j < k; ++j) {
    CoefficientRecord c;
    c.name = names.at(selected[static_cast<std::size_t>(j)]);
    c.coef = m.beta[j];
    c.std_error = std::sqrt(std::max(cov(j + 1, j + 1), 0.0));
    c.odds_ratio = std::exp(c.coef);
    c.wald_lo = std::exp(c.coef - z * c.std_error);
    c.wald_hi = std::exp(c.coef + z * c.std_error);
    if (reps.size() >= 2) {
      std::vector<double> draws;
      for (auto& r : reps) draws.push_back(r[j + 1]);
      auto iv = detail::percentile_interval(draws, cfg.ci_level);
      c.ci_lo = std::exp(iv.lo);
      c.ci_hi = std::exp(iv.hi);
    } else {
      c.ci_lo = c.wald_lo;
      c.ci_hi = c.wald_hi;
    }
    rep.coefficients.push_back(c);
  }
  return rep;
}

// Random-intercept logistic model (Laplace approximation).

struct MixedConfig {
  std::optional<double> fixed_sd;  // hold the intercept SD fixed (0 = plain logistic)
  std::size_t max_iter = 500;
  double grad_tol = 1e-7;
  double initial_sd = 0.5;
  double min_log_sd = -9.0;  // below this the SD is treated as 0
  double max_log_sd = 4.0;
};

struct MixedResult {
  Vector beta;
  Vector std_errors;  // Wald, from a finite-difference Hessian of the Laplace objective
  double intercept = 0.0;
  double sd = 0.0;
  double variance = 0.0;
  double log_likelihood = 0.0;  // Laplace-approximate marginal
  double marginal_r2 = 0.0;
  double conditional_r2 = 0.0;
  std::vector<std::string> group_names;
  Vector random_effects;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

struct GroupedData {
  std::vector<std::vector<Eigen::Index>> rows;
  std::vector<std::string> names;
};

inline GroupedData group_index(const std::vector<std::string>& groups) {
  std::map<std::string, std::vector<Eigen::Index>> m;
  for (std::size_t i = 0; i < groups.size(); ++i) m[groups[i]].push_back(static_cast<Eigen::Index>(i));
  GroupedData g;
  for (auto& [k, v] : m) {
    g.names.push_back(k);
    g.rows.push_back(std::move(v));
  }
  return g;
}

// Negative Laplace log-likelihood and its gradient w.r.t. (beta, b0, s = log sd).
struct LaplaceEval {
  double value = 0.0;
  Vector grad;
  Vector u;
};

inline LaplaceEval laplace(const Matrix& X, const Vector& y, const GroupedData& g, const Vector& theta, bool free_sd,
                           double fixed_s, double min_s, double max_s, const Vector* u_start) {
  const auto p = X.cols();
  Vector beta = theta.head(p);
  double b0 = theta[p];
  double s = free_sd ? theta[p + 1] : fixed_s;
  const bool at_bound = s <= min_s || s >= max_s;
  s = std::clamp(s, min_s, max_s);
  const bool zero_var = !free_sd && !std::isfinite(fixed_s);
  const double sig2 = zero_var ? 0.0 : std::exp(2.0 * s);
  Vector eta0 = (X * beta).array() + b0;

  LaplaceEval out;
  out.grad = Vector::Zero(theta.size());
  out.u = Vector::Zero(static_cast<Eigen::Index>(g.rows.size()));
  double ll = 0;
  for (std::size_t gi = 0; gi < g.rows.size(); ++gi) {
    const auto& rows = g.rows[gi];
    double u = (u_start && !zero_var) ? (*u_start)[static_cast<Eigen::Index>(gi)] : 0.0;
    double H = 0;
    if (!zero_var) {
      // Newton on the group intercept; concave, so plain Newton with a step cap.
      for (int it = 0; it < 100; ++it) {
        double gr = -u / sig2, h = 1.0 / sig2;
        for (auto i : rows) {
          double pi = sigmoid(eta0[i] + u);
          gr += y[i] - pi;
          h += pi * (1.0 - pi);
        }
        double step = std::clamp(gr / h, -5.0, 5.0);
        u += step;
        if (std::abs(step) < 1e-12) break;
      }
    }
    double sum_wp = 0;  // sum of dw/deta
    Vector sum_wpx = Vector::Zero(p);
    Vector sum_wx = Vector::Zero(p);
    double sum_w = 0;
    for (auto i : rows) {
      double e = eta0[i] + u;
      double pi = sigmoid(e);
      double w = pi * (1.0 - pi);
      ll += y[i] * e - softplus(e);
      // Score of the conditional likelihood (envelope theorem covers u).
      out.grad.head(p) -= (y[i] - pi) * X.row(i).transpose();
      out.grad[p] -= (y[i] - pi);
      H += w;
      sum_w += w;
      double wp = w * (1.0 - 2.0 * pi);
      sum_wp += wp;
      sum_wpx += wp * X.row(i).transpose();
      sum_wx += w * X.row(i).transpose();
    }
    out.u[static_cast<Eigen::Index>(gi)] = u;
    if (zero_var) continue;
    ll -= u * u / (2.0 * sig2) + 0.5 * std::log1p(sig2 * H);
    const double denom = H + 1.0 / sig2;
    const double c = 0.5 * sig2 / (1.0 + sig2 * H);  // d(0.5 log(1+sig2 H))/dH
    // dH/dbeta = sum wp (x + du/dbeta), du/dbeta = -sum w x / denom.
    Vector du_db = -sum_wx / denom;
    double du_db0 = -sum_w / denom;
    out.grad.head(p) += c * (sum_wpx + sum_wp * du_db);
    out.grad[p] += c * (sum_wp * (1.0 + du_db0));
    if (free_sd && !at_bound) {
      double du_ds = (2.0 * u / sig2) / denom;
      double dH_ds = sum_wp * du_ds;
      // d/ds of [u^2/(2 sig2) + 0.5 log(1 + sig2 H)] with u held at its optimum.
      out.grad[p + 1] += -u * u / sig2 + (sig2 * H + 0.5 * sig2 * dH_ds) / (1.0 + sig2 * H);
    }
  }
  out.value = -ll;
  return out;
}

}  // namespace detail

/// Random-intercept logistic regression by Laplace approximation: per-group
/// Newton for the intercepts, BFGS over (beta, intercept, log SD).
inline MixedResult fit_random_intercept_logistic(const Matrix& X, const Vector& y, const std::vector<std::string>& groups,
                                                 const MixedConfig& cfg = {}) {
  detail::check_inputs(X, y);
  if (groups.size() != static_cast<std::size_t>(y.size())) throw Error(Errc::LengthMismatch, "groups and rows differ");
  auto g = detail::group_index(groups);
  if (g.rows.size() < 2) throw Error(Errc::SingleGroup, "random intercept needs at least 2 groups");
  const auto p = X.cols();
  const bool free_sd = !cfg.fixed_sd.has_value();
  const double fixed_s = free_sd ? 0.0
                         : *cfg.fixed_sd > 0 ? std::log(*cfg.fixed_sd)
                                             : -std::numeric_limits<double>::infinity();
  if (!free_sd && *cfg.fixed_sd < 0) throw Error(Errc::InvalidArgument, "fixed SD must be >= 0");

  EnetConfig ec;
  ec.lambda = 0.0;
  ec.max_iter = 500;
  auto start = fit_enet_logistic(X, y, ec);
  const Eigen::Index dimn = p + 1 + (free_sd ? 1 : 0);
  Vector theta(dimn);
  theta.head(p) = start.beta;
  theta[p] = start.intercept;
  if (free_sd) theta[p + 1] = std::log(cfg.initial_sd);
  const double scale = 1.0 / static_cast<double>(y.size());

  auto eval = [&](const Vector& th, const Vector* u0) {
    auto e = detail::laplace(X, y, g, th, free_sd, fixed_s, cfg.min_log_sd, cfg.max_log_sd, u0);
    e.value *= scale;
    e.grad *= scale;
    return e;
  };

  MixedResult res;
  auto cur = eval(theta, nullptr);
  Matrix Hinv = Matrix::Identity(dimn, dimn);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    res.iterations = it + 1;
    if (cur.grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      res.converged = true;
      break;
    }
    Vector d = -Hinv * cur.grad;
    if (d.dot(cur.grad) >= 0) {
      Hinv.setIdentity();
      d = -cur.grad;
    }
    double t = 1.0;
    detail::LaplaceEval next;
    Vector th2;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      th2 = theta + t * d;
      if (free_sd) th2[p + 1] = std::clamp(th2[p + 1], cfg.min_log_sd - 1.0, cfg.max_log_sd);
      next = eval(th2, &cur.u);
      if (std::isfinite(next.value) && next.value <= cur.value + 1e-4 * t * d.dot(cur.grad)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      // No further decrease available along any scaled direction: converged to
      // within floating-point resolution.
      res.converged = cur.grad.lpNorm<Eigen::Infinity>() < 1e-4;
      break;
    }
    Vector sv = th2 - theta;
    Vector yv = next.grad - cur.grad;
    double sy = sv.dot(yv);
    if (sy > 1e-12) {
      double rho = 1.0 / sy;
      Matrix I = Matrix::Identity(dimn, dimn);
      Hinv = (I - rho * sv * yv.transpose()) * Hinv * (I - rho * yv * sv.transpose()) + rho * sv * sv.transpose();
    }
    double dec = cur.value - next.value;
    theta = th2;
    cur = std::move(next);
    if (dec < 1e-15 && sv.lpNorm<Eigen::Infinity>() < 1e-10) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged)
    throw Error(Errc::NonConvergence, "mixed model did not converge in " + std::to_string(cfg.max_iter) + " iterations");

  res.beta = theta.head(p);
  res.intercept = theta[p];
  double s = free_sd ? theta[p + 1] : fixed_s;
  res.sd = (!std::isfinite(s) || s <= cfg.min_log_sd) ? 0.0 : std::exp(std::min(s, cfg.max_log_sd));
  res.variance = res.sd * res.sd;
  res.log_likelihood = -cur.value / scale;
  res.group_names = g.names;
  res.random_effects = res.sd > 0 ? cur.u : Vector::Zero(static_cast<Eigen::Index>(g.rows.size()));
  // Variance explained on the latent scale: fixed-effect variance, intercept
  // variance, logistic residual pi^2/3.
  Vector fx = X * res.beta;
  double vf = (fx.array() - fx.mean()).square().sum() / static_cast<double>(fx.size());
  const double resid = std::numbers::pi * std::numbers::pi / 3.0;
  res.marginal_r2 = vf / (vf + res.variance + resid);
  res.conditional_r2 = (vf + res.variance) / (vf + res.variance + resid);

  // Central differences of the analytic gradient; log SD enters only when it
  // is an interior estimate.
  const bool with_s = free_sd && theta[p + 1] > cfg.min_log_sd && theta[p + 1] < cfg.max_log_sd;
  const Eigen::Index m = p + 1 + (with_s ? 1 : 0);
  Matrix Hs(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    auto gp = eval(tp, &cur.u), gm = eval(tm, &cur.u);
    Hs.col(j) = (gp.grad.head(m) - gm.grad.head(m)) / (2.0 * h * scale);
  }
  Hs = 0.5 * (Hs + Hs.transpose()).eval();
  Matrix cov = Hs.ldlt().solve(Matrix::Identity(m, m));
  res.std_errors.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) res.std_errors[j] = std::sqrt(std::max(cov(j, j), 0.0));
  return res;
}

}  // namespace lexshift::regress
