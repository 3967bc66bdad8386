#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/parallel.hpp"
#include "raschsel/partition.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

// Square symmetric matrix stored row-major.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t size, double fill = 0.0)
      : n(size), values(size * size, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

enum class HeightMode { step_index, linkage_distance };
enum class Linkage { average, centroid };

// Cluster ids follow the usual convention: 0..I-1 are the leaves, I+s is the
// cluster created by merge s (0-based).
struct MergeStep {
  std::size_t left = 0;
  std::size_t right = 0;
  ItemSet members;    // ascending
  double score = 0;   // sigma of the fused set, or the linkage distance
  double height = 0;
  std::size_t step = 0;  // 1..I-1
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<MergeStep> merges;
  HeightMode height_mode = HeightMode::step_index;
  std::string method;

  std::size_t items() const noexcept { return leaves.size(); }

  // Members of a cluster id.
  ItemSet members(std::size_t id) const {
    if (id < leaves.size()) return {id};
    return merges.at(id - leaves.size()).members;
  }

  // Checks that the merges form a binary tree over the leaves.
  void validate() const {
    const std::size_t n = leaves.size();
    if (n < 1 || merges.size() + 1 != n) throw DomainError("dendrogram needs I-1 merges");
    std::vector<bool> used(2 * n - 1, false);
    for (std::size_t s = 0; s < merges.size(); ++s) {
      const auto& m = merges[s];
      if (m.left >= n + s || m.right >= n + s || m.left == m.right || used[m.left] || used[m.right])
        throw DomainError("dendrogram merges do not form a binary tree");
      used[m.left] = used[m.right] = true;
      ItemSet u = members(m.left);
      auto r = members(m.right);
      u.insert(u.end(), r.begin(), r.end());
      std::sort(u.begin(), u.end());
      if (u != m.members) throw DomainError("merge members are not the union of its children");
    }
  }
};

// Partition with exactly k clusters: the first I-k merges applied to singletons.
inline Partition cut_k(const Dendrogram& d, std::size_t k) {
  const std::size_t n = d.items();
  if (k < 1 || k > n) throw DomainError("cut_k: k must be in [1, I]");
  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = i;
  for (std::size_t s = 0; s < n - k; ++s)
    for (auto i : d.merges[s].members) root[i] = n + s;
  std::map<std::size_t, ItemSet> groups;
  for (std::size_t i = 0; i < n; ++i) groups[root[i]].push_back(i);
  std::vector<ItemSet> clusters;
  for (auto& [id, members] : groups) clusters.push_back(std::move(members));
  return Partition(std::move(clusters));
}

namespace detail {

struct ActiveCluster {
  std::size_t id;
  ItemSet members;  // ascending
};

// Candidate pairs of active clusters in lexicographic order of their
// smallest members.
inline std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs(
    const std::vector<ActiveCluster>& active) {
  std::vector<std::size_t> idx(active.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return active[a].members.front() < active[b].members.front();
  });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) out.emplace_back(idx[a], idx[b]);
  return out;
}

inline ItemSet union_of(const ItemSet& a, const ItemSet& b) {
  ItemSet u;
  u.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

inline MergeStep fuse(std::vector<ActiveCluster>& active, std::size_t a, std::size_t b,
                      std::size_t new_id, double score, std::size_t step) {
  MergeStep m;
  m.left = active[a].id;
  m.right = active[b].id;
  if (m.left > m.right) std::swap(m.left, m.right);
  m.members = union_of(active[a].members, active[b].members);
  m.score = score;
  m.step = step;
  ActiveCluster fused{new_id, m.members};
  if (a > b) std::swap(a, b);
  active.erase(active.begin() + static_cast<std::ptrdiff_t>(b));
  active.erase(active.begin() + static_cast<std::ptrdiff_t>(a));
  active.push_back(std::move(fused));
  return m;
}

}  // namespace detail

// Agglomerative clustering of items in which each step fuses the two
// clusters whose union has the largest estimated mixing standard deviation.
// Heights are step indices; the fused sigma is kept as the merge score.
inline Dendrogram hcluster_marginal(const ResponseMatrix& data, const FitConfig& config = {}) {
  config.validate();
  const std::size_t n = data.items();
  if (n < 3) throw DomainError("hcluster_marginal needs at least 3 items");
  data.require_no_constant_columns();
  const auto rule = gauss_hermite_rule(config.quad_points);

  Dendrogram d;
  d.leaves = data.labels();
  d.height_mode = HeightMode::step_index;
  d.method = "marginal";

  std::vector<detail::ActiveCluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, {i}});
  // Unions recur across steps; each is fitted once per run.
  std::map<ItemSet, double> cache;

  for (std::size_t step = 1; step < n; ++step) {
    const auto pairs = detail::ordered_pairs(active);
    std::vector<ItemSet> unions;
    unions.reserve(pairs.size());
    for (auto [a, b] : pairs) unions.push_back(detail::union_of(active[a].members, active[b].members));

    std::vector<ItemSet> missing;
    for (const auto& u : unions)
      if (!cache.contains(u)) missing.push_back(u);
    std::vector<double> sigma(missing.size());
    parallel_for(missing.size(), [&](std::size_t c) {
      sigma[c] = fit_mml(data.select_items(missing[c]), config, rule).sigma_theta;
    });
    for (std::size_t c = 0; c < missing.size(); ++c) cache.emplace(missing[c], sigma[c]);

    std::size_t best = 0;
    for (std::size_t c = 1; c < unions.size(); ++c)
      if (cache.at(unions[c]) > cache.at(unions[best])) best = c;
    auto m = detail::fuse(active, pairs[best].first, pairs[best].second, n + step - 1,
                          cache.at(unions[best]), step);
    m.height = static_cast<double>(step);
    d.merges.push_back(std::move(m));
  }
  return d;
}

// Euclidean distances between item response vectors.
inline DistanceMatrix euclidean_item_distances(const ResponseMatrix& data) {
  const std::size_t n = data.items();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t diff = 0;
      for (std::size_t p = 0; p < data.persons(); ++p) diff += data(p, i) != data(p, j);
      d(i, j) = d(j, i) = std::sqrt(static_cast<double>(diff));
    }
  return d;
}

inline void require_distance_matrix(const DistanceMatrix& dist) {
  if (dist.n < 1 || dist.values.size() != dist.n * dist.n)
    throw DomainError("distance matrix has the wrong shape");
  for (std::size_t i = 0; i < dist.n; ++i) {
    if (dist(i, i) != 0) throw DomainError("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < dist.n; ++j) {
      if (!std::isfinite(dist(i, j))) throw DomainError("distance matrix has non-finite entries");
      if (dist(i, j) != dist(j, i)) throw DomainError("distance matrix is not symmetric");
    }
  }
}

// Classical agglomerative clustering with Lance-Williams updates. Centroid
// linkage works on squared distances and reports heights on the distance
// scale; inversions are kept.
inline Dendrogram agglomerate(const DistanceMatrix& dist, Linkage linkage,
                              std::vector<std::string> labels = {}) {
  require_distance_matrix(dist);
  const std::size_t n = dist.n;
  if (labels.empty()) labels = ResponseMatrix::default_labels(n);
  if (labels.size() != n) throw DomainError("agglomerate: label count does not match matrix");

  Dendrogram d;
  d.leaves = std::move(labels);
  d.height_mode = HeightMode::linkage_distance;
  d.method = linkage == Linkage::average ? "average" : "centroid";

  // Working matrix indexed by slot in `active`.
  std::vector<detail::ActiveCluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, {i}});
  std::vector<std::vector<double>> w(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w[i][j] = linkage == Linkage::centroid ? dist(i, j) * dist(i, j) : dist(i, j);

  for (std::size_t step = 1; step < n; ++step) {
    const auto pairs = detail::ordered_pairs(active);
    std::size_t best = 0;
    for (std::size_t c = 1; c < pairs.size(); ++c)
      if (w[pairs[c].first][pairs[c].second] < w[pairs[best].first][pairs[best].second]) best = c;
    const auto [a, b] = pairs[best];
    const double na = static_cast<double>(active[a].members.size());
    const double nb = static_cast<double>(active[b].members.size());
    const double dab = w[a][b];

    std::vector<double> row(active.size());
    for (std::size_t c = 0; c < active.size(); ++c) {
      if (c == a || c == b) continue;
      if (linkage == Linkage::average)
        row[c] = (na * w[a][c] + nb * w[b][c]) / (na + nb);
      else
        row[c] = (na * w[a][c] + nb * w[b][c]) / (na + nb) - na * nb * dab / ((na + nb) * (na + nb));
    }
    auto m = detail::fuse(active, a, b, n + step - 1, 0.0, step);
    m.score = linkage == Linkage::centroid ? std::sqrt(std::max(dab, 0.0)) : dab;
    m.height = m.score;
    d.merges.push_back(std::move(m));

    // Rebuild the working matrix in the new slot order: survivors keep
    // their relative order, the fused cluster is last.
    std::vector<std::size_t> survivors;
    for (std::size_t c = 0; c < row.size(); ++c)
      if (c != a && c != b) survivors.push_back(c);
    const std::size_t k = survivors.size();
    std::vector<std::vector<double>> nw(k + 1, std::vector<double>(k + 1, 0.0));
    for (std::size_t x = 0; x < k; ++x) {
      for (std::size_t y = 0; y < k; ++y) nw[x][y] = w[survivors[x]][survivors[y]];
      nw[x][k] = nw[k][x] = row[survivors[x]];
    }
    w = std::move(nw);
  }
  return d;
}

inline std::string linkage_name(Linkage l) { return l == Linkage::average ? "average" : "centroid"; }

// Newick text; branch lengths are height differences (leaves at height 0).
inline std::string to_newick(const Dendrogram& d) {
  const std::size_t n = d.items();
  auto quote = [](const std::string& s) {
    if (s.find_first_of(" ():;,[]'") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("''") : std::string(1, c);
    return out + "'";
  };
  std::function<std::string(std::size_t, double)> node = [&](std::size_t id, double parent) {
    std::ostringstream os;
    os.precision(10);
    if (id < n) {
      os << quote(d.leaves[id]) << ':' << parent;
    } else {
      const auto& m = d.merges[id - n];
      os << '(' << node(m.left, m.height) << ',' << node(m.right, m.height) << "):"
         << parent - m.height;
    }
    return os.str();
  };
  if (n == 1) return quote(d.leaves[0]) + ";";
  std::ostringstream os;
  const auto& root = d.merges.back();
  os.precision(10);
  os << '(' << node(root.left, root.height) << ',' << node(root.right, root.height) << ");";
  return os.str();
}

}  // namespace raschsel
