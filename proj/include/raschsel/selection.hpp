#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/parallel.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

enum class Criterion { max_sigma, sigma_change, delta_change, hybrid };

inline std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::max_sigma: return "max-sigma";
    case Criterion::sigma_change: return "sigma-change";
    case Criterion::delta_change: return "delta-change";
    case Criterion::hybrid: return "hybrid";
  }
  return "unknown";
}

inline Criterion criterion_from_string(const std::string& s) {
  if (s == "max-sigma") return Criterion::max_sigma;
  if (s == "sigma-change") return Criterion::sigma_change;
  if (s == "delta-change") return Criterion::delta_change;
  if (s == "hybrid") return Criterion::hybrid;
  throw ConfigError("unknown selection criterion '" + s + "'");
}

// Result of growing one cluster item by item.
struct SelectionTrace {
  ItemSet order;                     // inclusion sequence, 0-based items
  std::vector<double> step_sigma;    // sigma of the fused cluster at each of the I-1 steps
  Criterion criterion = Criterion::max_sigma;
  std::optional<ItemIndex> anchor;
  int nonconverged_fits = 0;         // candidate fits that hit max_iter
};

// Fit of the column restriction of `data` to `cluster` (members ascending).
inline RaschFit fit_cluster(const ResponseMatrix& data, ItemSet cluster, const FitConfig& config,
                            const QuadratureRule& rule) {
  std::sort(cluster.begin(), cluster.end());
  return fit_mml(data.select_items(cluster), config, rule);
}

// Estimated mixing standard deviation of the items in `cluster`; large
// values mean the items share one trait.
inline double fusion_homogeneity(const ResponseMatrix& data, const ItemSet& cluster,
                                 const FitConfig& config = {}) {
  if (cluster.size() < 2) throw DomainError("fusion_homogeneity: cluster needs at least 2 items");
  config.validate();
  return fit_cluster(data, cluster, config, gauss_hermite_rule(config.quad_points)).sigma_theta;
}

namespace detail {

struct Candidate {
  ItemSet members;  // ascending
  RaschFit fit;
};

inline std::vector<Candidate> fit_candidates(const ResponseMatrix& data,
                                             std::vector<ItemSet> sets, const FitConfig& config,
                                             const QuadratureRule& rule) {
  std::vector<Candidate> out(sets.size());
  parallel_for(sets.size(), [&](std::size_t c) {
    std::sort(sets[c].begin(), sets[c].end());
    out[c].fit = fit_mml(data.select_items(sets[c]), config, rule);
    out[c].members = std::move(sets[c]);
  });
  return out;
}

// Difficulties of `base` items (ascending) within a fit of `fused` (ascending).
inline double difficulty_change(const ItemSet& base, const std::vector<double>& base_delta,
                                const ItemSet& fused, const std::vector<double>& fused_delta) {
  double change = 0;
  std::size_t f = 0;
  for (std::size_t b = 0; b < base.size(); ++b) {
    while (fused[f] != base[b]) ++f;
    change += std::abs(base_delta[b] - fused_delta[f]);
  }
  return change;
}

// A single item's difficulty with a degenerate mixing distribution: the
// logit of its failure proportion.
inline double single_item_difficulty(const ResponseMatrix& data, ItemIndex i) {
  const double n = static_cast<double>(data.persons());
  const double s = static_cast<double>(data.column_sum(i));
  return std::log((n - s) / s);
}

inline SelectionTrace grow_cluster(const ResponseMatrix& data, Criterion criterion,
                                   std::optional<ItemIndex> anchor, const FitConfig& config) {
  config.validate();
  const std::size_t n = data.items();
  if (n < 3) throw DomainError("selection needs at least 3 items");
  if (anchor && *anchor >= n) throw DomainError("anchor item out of range");
  data.require_no_constant_columns();
  const auto rule = gauss_hermite_rule(config.quad_points);

  SelectionTrace trace;
  trace.criterion = criterion;
  trace.anchor = anchor;
  auto count_nonconverged = [&](const std::vector<Candidate>& cs) {
    for (const auto& c : cs) trace.nonconverged_fits += c.fit.converged ? 0 : 1;
  };

  // Step 1: pairs in lexicographic order (only pairs with the anchor if set).
  std::vector<ItemSet> pairs;
  for (ItemIndex i = 0; i < n; ++i)
    for (ItemIndex j = i + 1; j < n; ++j)
      if (!anchor || i == *anchor || j == *anchor) pairs.push_back({i, j});
  auto first = fit_candidates(data, pairs, config, rule);
  count_nonconverged(first);

  std::size_t best = 0;
  if (criterion == Criterion::delta_change) {
    double best_change = 0;
    for (std::size_t c = 0; c < first.size(); ++c) {
      const auto& m = first[c].members;
      const double change =
          std::abs(single_item_difficulty(data, m[0]) - first[c].fit.difficulties[0]) +
          std::abs(single_item_difficulty(data, m[1]) - first[c].fit.difficulties[1]);
      if (c == 0 || change < best_change) {
        best = c;
        best_change = change;
      }
    }
  } else {
    for (std::size_t c = 1; c < first.size(); ++c)
      if (first[c].fit.sigma_theta > first[best].fit.sigma_theta) best = c;
  }
  ItemSet cluster = first[best].members;
  RaschFit cluster_fit = first[best].fit;
  trace.order = cluster;
  if (anchor && trace.order[1] == *anchor) std::swap(trace.order[0], trace.order[1]);
  trace.step_sigma.push_back(cluster_fit.sigma_theta);

  std::vector<bool> included(n, false);
  for (auto i : cluster) included[i] = true;

  while (cluster.size() < n) {
    ItemSet pending;
    std::vector<ItemSet> sets;
    for (ItemIndex j = 0; j < n; ++j) {
      if (included[j]) continue;
      pending.push_back(j);
      auto s = cluster;
      s.push_back(j);
      sets.push_back(std::move(s));
    }
    auto cands = fit_candidates(data, std::move(sets), config, rule);
    count_nonconverged(cands);

    std::size_t pick = 0;
    switch (criterion) {
      case Criterion::max_sigma:
        for (std::size_t c = 1; c < cands.size(); ++c)
          if (cands[c].fit.sigma_theta > cands[pick].fit.sigma_theta) pick = c;
        break;
      case Criterion::sigma_change: {
        // Change from the current cluster's sigma; the fused sigma breaks
        // ties that the subtraction could introduce by rounding.
        const double base = cluster_fit.sigma_theta;
        for (std::size_t c = 1; c < cands.size(); ++c) {
          const double cc = base - cands[c].fit.sigma_theta;
          const double cp = base - cands[pick].fit.sigma_theta;
          if (cc < cp || (cc == cp && cands[c].fit.sigma_theta > cands[pick].fit.sigma_theta))
            pick = c;
        }
        break;
      }
      case Criterion::delta_change:
      case Criterion::hybrid: {
        double best_change = 0;
        for (std::size_t c = 0; c < cands.size(); ++c) {
          const double change = difficulty_change(cluster, cluster_fit.difficulties,
                                                  cands[c].members, cands[c].fit.difficulties);
          if (c == 0 || change < best_change) {
            pick = c;
            best_change = change;
          }
        }
        break;
      }
    }
    const ItemIndex added = pending[pick];
    included[added] = true;
    trace.order.push_back(added);
    cluster = std::move(cands[pick].members);
    cluster_fit = std::move(cands[pick].fit);
    trace.step_sigma.push_back(cluster_fit.sigma_theta);
  }
  return trace;
}

}  // namespace detail

// Greedy growth of one cluster: start from the pair with the largest
// estimated mixing standard deviation, then repeatedly add the item whose
// inclusion keeps it largest. Ties go to the smallest item index.
inline SelectionTrace select_sequence(const ResponseMatrix& data, const FitConfig& config = {}) {
  return detail::grow_cluster(data, Criterion::max_sigma, std::nullopt, config);
}

// As select_sequence, but the first pair must contain `anchor`.
inline SelectionTrace select_with_anchor(const ResponseMatrix& data, ItemIndex anchor,
                                         const FitConfig& config = {}) {
  return detail::grow_cluster(data, Criterion::max_sigma, anchor, config);
}

// Change-based variants. sigma-change selects the same items as
// select_sequence; delta-change minimizes the summed absolute shift of the
// current members' difficulties; hybrid uses the largest sigma for the first
// pair and delta-change afterwards.
inline SelectionTrace change_sequence(const ResponseMatrix& data, Criterion mode,
                                      const FitConfig& config = {}) {
  if (mode == Criterion::max_sigma) throw ConfigError("change_sequence: mode must be a change criterion");
  return detail::grow_cluster(data, mode, std::nullopt, config);
}

}  // namespace raschsel
