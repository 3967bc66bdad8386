#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "raschsel/errors.hpp"

namespace raschsel {

using ItemIndex = std::size_t;
using ItemSet = std::vector<ItemIndex>;

// Persons x items table of binary responses, stored row-major.
class ResponseMatrix {
 public:
  ResponseMatrix() = default;

  ResponseMatrix(std::size_t persons, std::vector<std::string> labels,
                 std::vector<std::uint8_t> cells)
      : persons_(persons), labels_(std::move(labels)), cells_(std::move(cells)) {
    validate();
  }

  // Labels default to "item1", "item2", ...
  ResponseMatrix(std::size_t persons, std::size_t items,
                 std::vector<std::uint8_t> cells)
      : ResponseMatrix(persons, default_labels(items), std::move(cells)) {}

  static std::vector<std::string> default_labels(std::size_t items) {
    std::vector<std::string> out;
    out.reserve(items);
    for (std::size_t i = 0; i < items; ++i) out.push_back("item" + std::to_string(i + 1));
    return out;
  }

  std::size_t persons() const noexcept { return persons_; }
  std::size_t items() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(ItemIndex i) const { return labels_.at(i); }

  std::uint8_t operator()(std::size_t p, ItemIndex i) const noexcept {
    return cells_[p * labels_.size() + i];
  }

  std::span<const std::uint8_t> row(std::size_t p) const noexcept {
    return {cells_.data() + p * labels_.size(), labels_.size()};
  }
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }

  std::size_t column_sum(ItemIndex i) const noexcept {
    std::size_t s = 0;
    for (std::size_t p = 0; p < persons_; ++p) s += (*this)(p, i);
    return s;
  }

  std::vector<std::uint8_t> column(ItemIndex i) const {
    std::vector<std::uint8_t> out(persons_);
    for (std::size_t p = 0; p < persons_; ++p) out[p] = (*this)(p, i);
    return out;
  }

  // First constant (all-0 or all-1) column, if any.
  std::optional<ItemIndex> first_constant_column() const noexcept {
    for (ItemIndex i = 0; i < items(); ++i) {
      const auto s = column_sum(i);
      if (s == 0 || s == persons_) return i;
    }
    return std::nullopt;
  }

  void require_no_constant_columns() const {
    if (auto i = first_constant_column()) throw DegenerateItem(labels_[*i], *i);
  }

  // Column restriction, in the given order. Labels follow the columns.
  ResponseMatrix select_items(std::span<const ItemIndex> items) const {
    std::vector<std::string> labels;
    labels.reserve(items.size());
    for (auto i : items) {
      if (i >= this->items()) throw DomainError("item index out of range");
      labels.push_back(labels_[i]);
    }
    std::vector<std::uint8_t> cells(persons_ * items.size());
    for (std::size_t p = 0; p < persons_; ++p)
      for (std::size_t c = 0; c < items.size(); ++c)
        cells[p * items.size() + c] = (*this)(p, items[c]);
    return ResponseMatrix(persons_, std::move(labels), std::move(cells));
  }

  ResponseMatrix select_persons(std::span<const std::size_t> persons) const {
    std::vector<std::uint8_t> cells;
    cells.reserve(persons.size() * items());
    for (auto p : persons) {
      if (p >= persons_) throw DomainError("person index out of range");
      auto r = row(p);
      cells.insert(cells.end(), r.begin(), r.end());
    }
    return ResponseMatrix(persons.size(), labels_, std::move(cells));
  }

  void set(std::size_t p, ItemIndex i, std::uint8_t v) {
    if (v > 1) throw DomainError("response must be 0 or 1");
    cells_.at(p * labels_.size() + i) = v;
  }

  friend bool operator==(const ResponseMatrix&, const ResponseMatrix&) = default;

 private:
  void validate() const {
    if (persons_ < 2) throw DomainError("a response matrix needs at least 2 persons");
    if (labels_.size() < 2) throw DomainError("a response matrix needs at least 2 items");
    if (cells_.size() != persons_ * labels_.size())
      throw DomainError("cell count does not match persons x items");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_)
      if (!seen.insert(l).second) throw DomainError("duplicate item label '" + l + "'");
    for (auto v : cells_)
      if (v > 1) throw DomainError("responses must be 0 or 1");
  }

  std::size_t persons_ = 0;
  std::vector<std::string> labels_;
  std::vector<std::uint8_t> cells_;
};

}  // namespace raschsel
