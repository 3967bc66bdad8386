#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/hierarchy.hpp"
#include "raschsel/parallel.hpp"
#include "raschsel/response_matrix.hpp"
#include "raschsel/rng.hpp"
#include "raschsel/selection.hpp"

namespace raschsel {

enum class OrderAlgorithm { sequential, hierarchical_first_cluster };

inline std::string to_string(OrderAlgorithm a) {
  return a == OrderAlgorithm::sequential ? "sequential" : "hierarchical-first-cluster";
}

// Inclusion orders over person subsets: columns[m][i] is the 1-based
// position at which item i entered on subset m.
struct OrderMatrix {
  std::size_t items = 0;
  std::vector<std::vector<int>> columns;
  std::vector<std::vector<std::size_t>> subsets;  // person indices per subset
  std::vector<int> redraws;                       // degenerate draws replaced, per subset
  double proportion = 0.5;
  std::uint64_t base_seed = 0;

  std::size_t subset_count() const noexcept { return columns.size(); }
  int order(ItemIndex i, std::size_t m) const { return columns.at(m).at(i); }

  void validate() const {
    if (columns.empty()) throw DomainError("order matrix needs at least one subset");
    for (const auto& col : columns) {
      if (col.size() != items) throw DomainError("order matrix column has the wrong length");
      std::vector<bool> seen(items + 1, false);
      for (int o : col) {
        if (o < 1 || static_cast<std::size_t>(o) > items || seen[o])
          throw DomainError("order matrix column is not a permutation of 1..I");
        seen[o] = true;
      }
    }
  }
};

// Positions (1-based) from an inclusion sequence.
inline std::vector<int> orders_from_sequence(const ItemSet& sequence) {
  std::vector<int> col(sequence.size());
  for (std::size_t pos = 0; pos < sequence.size(); ++pos)
    col.at(sequence[pos]) = static_cast<int>(pos + 1);
  return col;
}

// Inclusion sequence of the hierarchical method: the items of the first
// merged pair, then items in the order in which they join the cluster grown
// from that pair (items joining together enter in ascending index order).
inline ItemSet first_cluster_sequence(const Dendrogram& d) {
  const std::size_t n = d.items();
  ItemSet seq = d.merges.front().members;
  std::vector<bool> in(n, false);
  for (auto i : seq) in[i] = true;
  std::size_t current = n;  // id of the growing cluster
  for (std::size_t s = 1; s < d.merges.size(); ++s) {
    const auto& m = d.merges[s];
    if (m.left != current && m.right != current) continue;
    for (auto i : m.members)
      if (!in[i]) {
        in[i] = true;
        seq.push_back(i);
      }
    current = n + s;
  }
  return seq;
}

namespace detail {

inline std::size_t subset_size(std::size_t persons, double proportion) {
  if (!(proportion > 0) || proportion > 1)
    throw ConfigError("subsample proportion must be in (0, 1]");
  const auto size = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(persons)));
  if (size < 10) throw ConfigError("subsamples must contain at least 10 persons");
  return size;
}

// Persons of subset m, drawn without replacement from stream (seed, m,
// attempt). Degenerate draws (a constant column) are redrawn up to 10 times.
inline std::pair<ResponseMatrix, std::vector<std::size_t>> draw_subset(
    const ResponseMatrix& data, std::size_t size, std::uint64_t seed, std::size_t m, int& redraws) {
  redraws = 0;
  for (int attempt = 0; attempt <= 10; ++attempt) {
    std::vector<std::size_t> idx(data.persons());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (size < data.persons()) {
      auto rng = make_engine({seed, static_cast<std::uint64_t>(Stream::subsample), m,
                              static_cast<std::uint64_t>(attempt)});
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(size);
      std::sort(idx.begin(), idx.end());
    }
    auto sub = data.select_persons(idx);
    if (!sub.first_constant_column()) return {std::move(sub), std::move(idx)};
    ++redraws;
  }
  throw DomainError("subset " + std::to_string(m + 1) +
                    " produced a constant item column in 11 consecutive draws");
}

}  // namespace detail

// Runs the selection (or the hierarchical method) on M random person subsets
// and records each item's inclusion order.
inline OrderMatrix subsample_orders(const ResponseMatrix& data, std::size_t subsets,
                                    double proportion, OrderAlgorithm algorithm,
                                    std::uint64_t seed, const FitConfig& config = {}) {
  if (subsets < 1) throw ConfigError("at least one subset is required");
  config.validate();
  const std::size_t size = detail::subset_size(data.persons(), proportion);
  OrderMatrix out;
  out.items = data.items();
  out.proportion = proportion;
  out.base_seed = seed;
  out.columns.resize(subsets);
  out.subsets.resize(subsets);
  out.redraws.resize(subsets);
  parallel_for(subsets, [&](std::size_t m) {
    auto [sub, idx] = detail::draw_subset(data, size, seed, m, out.redraws[m]);
    ItemSet seq = algorithm == OrderAlgorithm::sequential
                      ? select_sequence(sub, config).order
                      : first_cluster_sequence(hcluster_marginal(sub, config));
    out.columns[m] = orders_from_sequence(seq);
    out.subsets[m] = std::move(idx);
  });
  out.validate();
  return out;
}

struct MisfitReport {
  std::vector<double> misfit;    // share of subsets with order > a * I
  std::vector<double> mean_std;  // mean (order - 1) / (I - 1)
  double threshold = 0.75;
};

inline MisfitReport misfit_scores(const OrderMatrix& orders, double a = 0.75) {
  orders.validate();
  const std::size_t n = orders.items;
  const double m = static_cast<double>(orders.subset_count());
  const double cut = a * static_cast<double>(n);
  MisfitReport r;
  r.threshold = a;
  r.misfit.assign(n, 0.0);
  r.mean_std.assign(n, 0.0);
  for (const auto& col : orders.columns)
    for (std::size_t i = 0; i < n; ++i) {
      if (col[i] > cut) r.misfit[i] += 1.0;
      r.mean_std[i] += static_cast<double>(col[i] - 1);
    }
  for (std::size_t i = 0; i < n; ++i) {
    r.misfit[i] /= m;
    r.mean_std[i] = n > 1 ? r.mean_std[i] / (m * static_cast<double>(n - 1)) : 0.0;
  }
  return r;
}

struct DensityPoint {
  double order;
  double density;
};

// Kernel density of an item's inclusion orders on [1, I], 200 grid points.
// Gaussian kernel with Silverman's bandwidth (at least 0.5), reflected at
// both ends so the curve integrates to one over the order range.
inline std::vector<DensityPoint> order_density(const OrderMatrix& orders, ItemIndex item) {
  orders.validate();
  if (item >= orders.items) throw DomainError("order_density: item out of range");
  std::vector<double> x;
  for (const auto& col : orders.columns) x.push_back(col[item]);
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(spread, iqr / 1.34);
  const double bw = std::max(0.5, 0.9 * spread * std::pow(n, -0.2));

  const double lo = 1.0, hi = static_cast<double>(orders.items);
  const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
  std::vector<DensityPoint> curve(200);
  for (std::size_t g = 0; g < curve.size(); ++g) {
    const double t = lo + (hi - lo) * static_cast<double>(g) / 199.0;
    double s = 0;
    for (double v : x)
      for (double c : {v, 2 * lo - v, 2 * hi - v}) {
        const double u = (t - c) / bw;
        s += std::exp(-0.5 * u * u);
      }
    curve[g] = {t, s * norm};
  }
  return curve;
}

// Co-clustering frequencies of item pairs over the hierarchical method's
// partitions, averaged over subsets. The final all-items partition is not
// counted; the divisor is I - 1.
struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

// Pair similarity for one dendrogram.
inline SimilarityMatrix dendrogram_similarity(const Dendrogram& d) {
  const std::size_t n = d.items();
  SimilarityMatrix s{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t level = 1; level + 1 < n; ++level) {
    const auto part = cut_k(d, n - level);
    for (const auto& c : part.clusters())
      for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = a + 1; b < c.size(); ++b) {
          s(c[a], c[b]) += 1.0;
          s(c[b], c[a]) += 1.0;
        }
  }
  for (auto& v : s.values) v /= static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) s(i, i) = 1.0;
  return s;
}

inline SimilarityMatrix pairwise_similarity(const ResponseMatrix& data, std::size_t subsets,
                                            double proportion, std::uint64_t seed,
                                            const FitConfig& config = {}) {
  if (subsets < 1) throw ConfigError("at least one subset is required");
  config.validate();
  const std::size_t size = detail::subset_size(data.persons(), proportion);
  const std::size_t n = data.items();
  std::vector<SimilarityMatrix> per(subsets);
  parallel_for(subsets, [&](std::size_t m) {
    int redraws = 0;
    auto [sub, idx] = detail::draw_subset(data, size, seed, m, redraws);
    per[m] = dendrogram_similarity(hcluster_marginal(sub, config));
  });
  SimilarityMatrix out{n, std::vector<double>(n * n, 0.0)};
  for (const auto& s : per)
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += s.values[k];
  for (auto& v : out.values) v /= static_cast<double>(subsets);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

inline DistanceMatrix similarity_to_distance(const SimilarityMatrix& s) {
  DistanceMatrix d(s.n);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.n; ++j) d(i, j) = i == j ? 0.0 : 1.0 - s(i, j);
  return d;
}

}  // namespace raschsel
