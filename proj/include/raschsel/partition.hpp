#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/response_matrix.hpp"

namespace raschsel {

// Disjoint, covering, non-empty clusters of items 0..n-1. Stored canonically:
// members ascending, clusters ordered by their smallest member.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<ItemSet> clusters) : clusters_(std::move(clusters)) {
    std::size_t n = 0;
    for (auto& c : clusters_) {
      if (c.empty()) throw DomainError("partition contains an empty cluster");
      std::sort(c.begin(), c.end());
      n += c.size();
    }
    std::sort(clusters_.begin(), clusters_.end(),
              [](const ItemSet& a, const ItemSet& b) { return a.front() < b.front(); });
    assignment_.assign(n, n);
    for (std::size_t c = 0; c < clusters_.size(); ++c)
      for (auto i : clusters_[c]) {
        if (i >= n) throw DomainError("partition does not cover items 0..n-1");
        if (assignment_[i] != n) throw DomainError("partition clusters overlap");
        assignment_[i] = c;
      }
  }

  static Partition singletons(std::size_t n) {
    std::vector<ItemSet> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = {i};
    return Partition(std::move(c));
  }

  static Partition whole(std::size_t n) {
    ItemSet all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return Partition({all});
  }

  std::size_t item_count() const noexcept { return assignment_.size(); }
  std::size_t size() const noexcept { return clusters_.size(); }
  const std::vector<ItemSet>& clusters() const noexcept { return clusters_; }
  std::size_t cluster_of(ItemIndex i) const { return assignment_.at(i); }
  bool together(ItemIndex i, ItemIndex j) const { return assignment_.at(i) == assignment_.at(j); }

  // True when every cluster of this partition lies inside a cluster of `coarser`.
  bool refines(const Partition& coarser) const {
    if (coarser.item_count() != item_count()) return false;
    for (const auto& c : clusters_)
      for (auto i : c)
        if (coarser.cluster_of(i) != coarser.cluster_of(c.front())) return false;
    return true;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.clusters_ == b.clusters_;
  }

 private:
  std::vector<ItemSet> clusters_;
  std::vector<std::size_t> assignment_;
};

}  // namespace raschsel
