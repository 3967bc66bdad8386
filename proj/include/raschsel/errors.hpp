#pragma once

#include <stdexcept>
#include <string>

namespace raschsel {

// Invalid argument values or shapes (non-finite input, dimension mismatch).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration (bad quadrature size, unknown preset, bad subsample size).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An item column is constant (all 0 or all 1); the Rasch model cannot be fitted.
class DegenerateItem : public std::runtime_error {
 public:
  DegenerateItem(std::string label, std::size_t index)
      : std::runtime_error("item '" + label + "' (column " +
                           std::to_string(index + 1) +
                           ") is constant; its difficulty is not estimable"),
        label_(std::move(label)),
        index_(index) {}

  const std::string& label() const noexcept { return label_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string label_;
  std::size_t index_;
};

}  // namespace raschsel
