#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

namespace detail {

inline double softplus(double z) noexcept {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double log_sum_exp(std::span<const double> v) noexcept {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

// Rasch item response function: P(Y = 1 | ability, difficulty).
inline double irf(double theta, double delta) {
  if (!std::isfinite(theta) || !std::isfinite(delta))
    throw DomainError("irf: ability and difficulty must be finite");
  return detail::logistic(theta - delta);
}

// Quadrature for expectations under the standard normal. Callers scale the
// nodes by the mixing standard deviation.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

// Gauss-Hermite rule for the weight exp(-x^2/2) / sqrt(2 pi), 1 <= n <= 200.
// Starting values are the eigenvalues of the Jacobi matrix; Newton on the
// orthonormal recurrence then polishes each root and gives its weight.
inline QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1 || n > 200) throw ConfigError("quadrature size must be in [1, 200]");
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 1.0);
  if (n == 1) return rule;

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), sub(n - 1);
  for (int k = 0; k < n - 1; ++k) sub[k] = std::sqrt(static_cast<double>(k + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);

  // Orthonormal polynomials for exp(-x^2) (physicists' scale, x = z / sqrt 2).
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int k = 0; k < n; ++k) {
    double x = eig.eigenvalues()[k] / std::numbers::sqrt2, pp = 0;
    for (int it = 0; it < 20; ++it) {
      double p1 = pim4, p2 = 0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = x * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double step = p1 / pp;
      x -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    rule.nodes[k] = std::numbers::sqrt2 * x;
    rule.weights[k] = 2.0 / (pp * pp) / std::sqrt(std::numbers::pi);
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int k = 0; k < n / 2; ++k) {  // exact symmetry
    const double z = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[k] + rule.weights[n - 1 - k]);
    rule.nodes[k] = -z;
    rule.nodes[n - 1 - k] = z;
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (auto& v : rule.weights) v /= total;
  return rule;
}

struct FitConfig {
  int quad_points = 30;
  int max_iter = 500;
  double tol = 1e-5;
  double sigma_min = 1e-3;
  double sigma_max = 10.0;

  void validate() const {
    if (quad_points < 1 || quad_points > 200) throw ConfigError("quad_points must be in [1, 200]");
    if (max_iter < 1) throw ConfigError("max_iter must be positive");
    if (!(tol > 0)) throw ConfigError("tol must be positive");
    if (!(sigma_min > 0) || !(sigma_min < sigma_max))
      throw ConfigError("sigma bounds must satisfy 0 < sigma_min < sigma_max");
  }

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

struct RaschFit {
  std::vector<double> difficulties;
  double sigma_theta = 1.0;
  double log_marginal_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  // Log marginal likelihood at the start value and after every EM iteration.
  std::vector<double> log_likelihood_trace;
};

// log L_m for a row-major binary table (persons x items). Each person's
// integral is evaluated on the rule with log-sum-exp over nodes.
inline double log_marginal_likelihood(std::span<const std::uint8_t> cells, std::size_t items,
                                      std::span<const double> difficulties, double sigma,
                                      const QuadratureRule& rule) {
  if (items == 0 || cells.size() % items != 0)
    throw DomainError("log_marginal_likelihood: malformed response table");
  if (difficulties.size() != items)
    throw DomainError("log_marginal_likelihood: difficulties do not match item count");
  if (!(sigma > 0) || !std::isfinite(sigma))
    throw DomainError("log_marginal_likelihood: sigma must be positive");
  const std::size_t persons = cells.size() / items;
  const std::size_t q = rule.size();
  std::vector<double> logw(q), terms(q);
  for (std::size_t k = 0; k < q; ++k) logw[k] = std::log(rule.weights[k]);
  double total = 0;
  for (std::size_t p = 0; p < persons; ++p) {
    const auto* y = cells.data() + p * items;
    for (std::size_t k = 0; k < q; ++k) {
      const double theta = sigma * rule.nodes[k];
      double lp = logw[k];
      for (std::size_t i = 0; i < items; ++i) {
        const double eta = theta - difficulties[i];
        // log P(y | eta) = y * eta - log(1 + exp(eta))
        lp += (y[i] ? eta : 0.0) - detail::softplus(eta);
      }
      terms[k] = lp;
    }
    total += detail::log_sum_exp(terms);
  }
  return total;
}

inline double log_marginal_likelihood(const ResponseMatrix& data,
                                      std::span<const double> difficulties, double sigma,
                                      const QuadratureRule& rule) {
  return log_marginal_likelihood(data.cells(), data.items(), difficulties, sigma, rule);
}

namespace detail {

// Sufficient statistics of the Rasch model: under a mean-zero normal mixing
// distribution the posterior of a person's ability depends on the responses
// only through the raw score, so EM needs score counts and item totals only.
struct ScoreStatistics {
  std::vector<double> score_counts;  // persons with raw score r, r = 0..I
  std::vector<double> item_totals;   // successes per item
  std::size_t persons = 0;
};

inline ScoreStatistics score_statistics(const ResponseMatrix& data) {
  ScoreStatistics st;
  const auto items = data.items();
  st.persons = data.persons();
  st.score_counts.assign(items + 1, 0.0);
  st.item_totals.assign(items, 0.0);
  for (std::size_t p = 0; p < data.persons(); ++p) {
    std::size_t r = 0;
    auto row = data.row(p);
    for (std::size_t i = 0; i < items; ++i) {
      r += row[i];
      st.item_totals[i] += row[i];
    }
    st.score_counts[r] += 1.0;
  }
  return st;
}

// EM engine over a fixed standardized quadrature grid. Abilities are written
// as sigma * z with z on the grid, so the E-step posterior is over grid
// points and the M-step maximizes the expected complete-data log likelihood,
// which is jointly concave in (difficulties, sigma). Coordinate Newton
// updates with step halving never decrease it, so the marginal likelihood on
// the grid is non-decreasing.
class EmFitter {
 public:
  EmFitter(const ScoreStatistics& st, const QuadratureRule& rule, const FitConfig& cfg)
      : st_(st), rule_(rule), cfg_(cfg), items_(st.item_totals.size()), q_(rule.size()) {
    logw_.resize(q_);
    for (std::size_t k = 0; k < q_; ++k) logw_[k] = std::log(rule_.weights[k]);
    // Items are summed in order of their totals. Items with equal totals
    // follow identical trajectories, so sums are independent of column order.
    order_.resize(items_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return st_.item_totals[a] < st_.item_totals[b];
    });
    node_mass_.resize(q_);
    shift_.resize(q_);
    terms_.resize(q_);
  }

  RaschFit run() {
    const double n = static_cast<double>(st_.persons);
    std::vector<double> delta(items_);
    for (std::size_t i = 0; i < items_; ++i) {
      const double s = st_.item_totals[i];
      delta[i] = std::log((n - s) / s);
    }
    double mean = 0;
    for (auto i : order_) mean += delta[i];
    mean /= static_cast<double>(items_);
    for (auto& d : delta) d -= mean;
    double sigma = std::clamp(1.0, cfg_.sigma_min, cfg_.sigma_max);

    RaschFit fit;
    double ll = log_likelihood(delta, sigma);
    fit.log_likelihood_trace.push_back(ll);
    int it = 0;
    bool converged = false;
    while (it < cfg_.max_iter) {
      ++it;
      e_step(delta, sigma);
      double change = 0;
      for (std::size_t i = 0; i < items_; ++i) {
        const double nd = update_difficulty(i, delta[i], sigma);
        change = std::max(change, std::abs(nd - delta[i]));
        delta[i] = nd;
      }
      const double ns = update_sigma(delta, sigma);
      change = std::max(change, std::abs(ns - sigma));
      sigma = ns;
      ll = log_likelihood(delta, sigma);
      fit.log_likelihood_trace.push_back(ll);
      if (change < cfg_.tol) {
        converged = true;
        break;
      }
    }
    fit.difficulties = std::move(delta);
    fit.sigma_theta = sigma;
    fit.log_marginal_likelihood = ll;
    fit.iterations = it;
    fit.converged = converged;
    return fit;
  }

  // Grid log marginal likelihood from the sufficient statistics.
  double log_likelihood(const std::vector<double>& delta, double sigma) {
    compute_shift(delta, sigma);
    double total = 0;
    for (auto i : order_) total -= st_.item_totals[i] * delta[i];
    for (std::size_t r = 0; r <= items_; ++r) {
      if (st_.score_counts[r] == 0) continue;
      for (std::size_t k = 0; k < q_; ++k)
        terms_[k] = logw_[k] + sigma * rule_.nodes[k] * static_cast<double>(r) - shift_[k];
      total += st_.score_counts[r] * log_sum_exp(terms_);
    }
    return total;
  }

 private:
  // shift_[k] = sum_i log(1 + exp(sigma z_k - delta_i))
  void compute_shift(const std::vector<double>& delta, double sigma) {
    for (std::size_t k = 0; k < q_; ++k) {
      const double theta = sigma * rule_.nodes[k];
      double s = 0;
      for (auto i : order_) s += softplus(theta - delta[i]);
      shift_[k] = s;
    }
  }

  void e_step(const std::vector<double>& delta, double sigma) {
    compute_shift(delta, sigma);
    std::fill(node_mass_.begin(), node_mass_.end(), 0.0);
    score_moment_ = 0;
    for (std::size_t r = 0; r <= items_; ++r) {
      const double cnt = st_.score_counts[r];
      if (cnt == 0) continue;
      for (std::size_t k = 0; k < q_; ++k)
        terms_[k] = logw_[k] + sigma * rule_.nodes[k] * static_cast<double>(r) - shift_[k];
      const double lz = log_sum_exp(terms_);
      double zbar = 0;
      for (std::size_t k = 0; k < q_; ++k) {
        const double post = std::exp(terms_[k] - lz);
        node_mass_[k] += cnt * post;
        zbar += post * rule_.nodes[k];
      }
      score_moment_ += cnt * static_cast<double>(r) * zbar;
    }
  }

  // Maximizes a smooth concave function on [lo, hi] by projected Newton.
  // `slope(x)` returns (f'(x), -f''(x)); `value(x)` returns f(x). A step is
  // accepted without evaluating f when the slope keeps its sign across it
  // (f is then monotone on the step); otherwise the step is halved until f
  // does not decrease.
  template <class Slope, class Value>
  static double concave_newton(double x, double lo, double hi, Slope slope, Value value) {
    auto [g, h] = slope(x);
    double fx = std::numeric_limits<double>::quiet_NaN();
    for (int step = 0; step < 50; ++step) {
      if (!(h > 0) || g == 0) break;
      double dx = std::clamp(x + g / h, lo, hi) - x;
      if (std::abs(dx) < 1e-10 * std::max(1.0, std::abs(x))) break;
      bool moved = false;
      for (int half = 0; half < 40 && dx != 0; ++half, dx *= 0.5) {
        const double cand = x + dx;
        auto [gc, hc] = slope(cand);
        bool accept = (gc >= 0) == (g >= 0);
        double fc = std::numeric_limits<double>::quiet_NaN();
        if (!accept) {
          if (std::isnan(fx)) fx = value(x);
          fc = value(cand);
          accept = fc >= fx;
        }
        if (accept) {
          x = cand;
          g = gc;
          h = hc;
          fx = fc;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return x;
  }

  double update_difficulty(std::size_t i, double d, double sigma) const {
    const double total = st_.item_totals[i];
    auto slope = [&](double x) {
      double g = -total, h = 0;
      for (std::size_t k = 0; k < q_; ++k) {
        const double p = logistic(sigma * rule_.nodes[k] - x);
        g += node_mass_[k] * p;
        h += node_mass_[k] * p * (1 - p);
      }
      return std::pair{g, h};
    };
    auto value = [&](double x) {
      double v = -total * x;
      for (std::size_t k = 0; k < q_; ++k) v -= node_mass_[k] * softplus(sigma * rule_.nodes[k] - x);
      return v;
    };
    const double inf = std::numeric_limits<double>::infinity();
    return concave_newton(d, -inf, inf, slope, value);
  }

  double update_sigma(const std::vector<double>& delta, double s) const {
    auto slope = [&](double x) {
      double g = score_moment_, h = 0;
      for (std::size_t k = 0; k < q_; ++k) {
        const double z = rule_.nodes[k];
        double ps = 0, vs = 0;
        for (auto i : order_) {
          const double p = logistic(x * z - delta[i]);
          ps += p;
          vs += p * (1 - p);
        }
        g -= node_mass_[k] * z * ps;
        h += node_mass_[k] * z * z * vs;
      }
      return std::pair{g, h};
    };
    auto value = [&](double x) {
      double v = x * score_moment_;
      for (std::size_t k = 0; k < q_; ++k) {
        const double theta = x * rule_.nodes[k];
        double a = 0;
        for (auto i : order_) a += softplus(theta - delta[i]);
        v -= node_mass_[k] * a;
      }
      return v;
    };
    return concave_newton(s, cfg_.sigma_min, cfg_.sigma_max, slope, value);
  }

  const ScoreStatistics& st_;
  const QuadratureRule& rule_;
  const FitConfig& cfg_;
  std::size_t items_;
  std::size_t q_;
  std::vector<std::size_t> order_;
  std::vector<double> logw_, node_mass_, shift_;
  mutable std::vector<double> terms_;
  double score_moment_ = 0;
};

}  // namespace detail

// Marginal maximum likelihood fit of the Rasch model with a N(0, sigma^2)
// ability distribution, by EM on a Gauss-Hermite grid.
inline RaschFit fit_mml(const ResponseMatrix& data, const FitConfig& config,
                        const QuadratureRule& rule) {
  config.validate();
  if (data.persons() < 2) throw DomainError("fit_mml: at least 2 persons required");
  data.require_no_constant_columns();
  const auto st = detail::score_statistics(data);
  detail::EmFitter fitter(st, rule, config);
  return fitter.run();
}

inline RaschFit fit_mml(const ResponseMatrix& data, const FitConfig& config = {}) {
  config.validate();
  return fit_mml(data, config, gauss_hermite_rule(config.quad_points));
}

}  // namespace raschsel
