#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/hierarchy.hpp"
#include "raschsel/partition.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

struct HitFalse {
  double hit = 0;    // share of truly co-clustered pairs that are co-clustered
  double false_ = 0; // share of truly separated pairs that are co-clustered
};

// Pair-counting agreement of `estimate` with `truth`. A truth without
// co-clustered pairs gives hit 1; one without separated pairs gives false 0.
inline HitFalse hit_false_rates(const Partition& truth, const Partition& estimate) {
  const std::size_t n = truth.item_count();
  if (estimate.item_count() != n) throw DomainError("partitions cover different item sets");
  std::size_t together = 0, apart = 0, hits = 0, falses = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool est = estimate.together(i, j);
      if (truth.together(i, j)) {
        ++together;
        hits += est;
      } else {
        ++apart;
        falses += est;
      }
    }
  HitFalse r;
  r.hit = together ? static_cast<double>(hits) / static_cast<double>(together) : 1.0;
  r.false_ = apart ? static_cast<double>(falses) / static_cast<double>(apart) : 0.0;
  return r;
}

struct EvalPoint {
  std::size_t clusters = 0;
  double hit = 0;
  double false_ = 0;
};

// Hit and false rates of the k-cluster cuts, k = 1..I.
struct EvalCurve {
  std::vector<EvalPoint> points;
};

inline EvalCurve roc_curve(const Partition& truth, const Dendrogram& dendrogram) {
  if (dendrogram.items() != truth.item_count())
    throw DomainError("dendrogram leaves do not match the true partition");
  EvalCurve c;
  for (std::size_t k = 1; k <= dendrogram.items(); ++k) {
    const auto hf = hit_false_rates(truth, cut_k(dendrogram, k));
    c.points.push_back({k, hf.hit, hf.false_});
  }
  return c;
}

// I x I row-major matrix.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

inline SquareMatrix item_correlations(const ResponseMatrix& data) {
  data.require_no_constant_columns();
  const std::size_t n = data.items();
  const double p = static_cast<double>(data.persons());
  std::vector<double> mean(n);
  for (std::size_t i = 0; i < n; ++i) mean[i] = static_cast<double>(data.column_sum(i)) / p;
  SquareMatrix cov{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t r = 0; r < data.persons(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const double di = data(r, i) - mean[i];
      for (std::size_t j = i; j < n; ++j) cov(i, j) += di * (data(r, j) - mean[j]);
    }
  SquareMatrix cor{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    cor(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j)
      cor(i, j) = cor(j, i) = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
  }
  return cor;
}

// Sample covariances of item pairs among persons with the same total score,
// averaged without weights over the scores 1..I-1 whose group has at least
// two persons and some within-group variation. The diagonal holds the mean
// conditional variances.
struct ConditionalCovariance {
  SquareMatrix matrix;
  std::vector<std::size_t> scores_used;
};

inline ConditionalCovariance mean_conditional_covariance_detail(const ResponseMatrix& data) {
  const std::size_t n = data.items();
  std::vector<std::vector<std::size_t>> groups(n + 1);
  for (std::size_t p = 0; p < data.persons(); ++p) {
    std::size_t r = 0;
    for (auto v : data.row(p)) r += v;
    groups[r].push_back(p);
  }
  ConditionalCovariance out;
  out.matrix = {n, std::vector<double>(n * n, 0.0)};
  for (std::size_t r = 1; r < n; ++r) {
    const auto& g = groups[r];
    if (g.size() < 2) continue;
    const double m = static_cast<double>(g.size());
    std::vector<double> mean(n, 0.0);
    for (auto p : g)
      for (std::size_t i = 0; i < n; ++i) mean[i] += data(p, i);
    for (auto& v : mean) v /= m;
    SquareMatrix c{n, std::vector<double>(n * n, 0.0)};
    bool varies = false;
    for (auto p : g)
      for (std::size_t i = 0; i < n; ++i) {
        const double di = data(p, i) - mean[i];
        varies = varies || di != 0;
        for (std::size_t j = 0; j < n; ++j) c(i, j) += di * (data(p, j) - mean[j]);
      }
    if (!varies) continue;
    for (std::size_t k = 0; k < c.values.size(); ++k) out.matrix.values[k] += c.values[k] / (m - 1);
    out.scores_used.push_back(r);
  }
  if (out.scores_used.empty())
    throw DomainError("no score group with at least two persons and varying responses");
  for (auto& v : out.matrix.values) v /= static_cast<double>(out.scores_used.size());
  return out;
}

inline SquareMatrix mean_conditional_covariance(const ResponseMatrix& data) {
  return mean_conditional_covariance_detail(data).matrix;
}

}  // namespace raschsel
