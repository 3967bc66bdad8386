#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/partition.hpp"
#include "raschsel/response_matrix.hpp"
#include "raschsel/rng.hpp"

namespace raschsel {

// A simulation design. Items in the same trait block share one ability
// draw per person; blocks are independent. Polluted items are generated as
// Rasch items and then have their responses shuffled across persons.
struct Scenario {
  std::string name;
  std::string description;
  std::vector<double> deltas;
  double sigma_theta = 1.0;
  std::size_t persons = 200;
  ItemSet polluted_items;                    // 0-based
  std::optional<Partition> true_partition;   // ground truth for evaluation
  std::vector<ItemSet> trait_blocks;         // empty: one block of all items
  std::uint64_t seed = 1;

  std::size_t items() const noexcept { return deltas.size(); }

  void validate() const {
    if (deltas.size() < 2) throw DomainError("scenario needs at least 2 items");
    if (!(sigma_theta > 0)) throw DomainError("scenario sigma must be positive");
    if (persons < 2) throw DomainError("scenario needs at least 2 persons");
    for (auto i : polluted_items)
      if (i >= deltas.size()) throw DomainError("polluted item out of range");
    if (true_partition && true_partition->item_count() != deltas.size())
      throw DomainError("true partition does not cover the scenario's items");
    if (!trait_blocks.empty()) Partition check(trait_blocks);
  }
};

namespace detail {

inline void require_generation_args(std::size_t persons, std::span<const double> deltas,
                                    double sigma) {
  if (persons < 2) throw DomainError("gen_rasch: at least 2 persons required");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("gen_rasch: sigma must be positive");
  if (deltas.size() < 2) throw DomainError("gen_rasch: at least 2 items required");
  for (double d : deltas)
    if (!std::isfinite(d)) throw DomainError("gen_rasch: difficulties must be finite");
}

// Fills the columns of `blocks` in `cells`; block b uses its own ability stream.
inline void fill_blocks(std::vector<std::uint8_t>& cells, std::size_t persons,
                        std::span<const double> deltas, const std::vector<ItemSet>& blocks,
                        double sigma, std::uint64_t seed) {
  const std::size_t items = deltas.size();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto theta_rng = make_engine({seed, static_cast<std::uint64_t>(Stream::abilities), b});
    auto resp_rng = make_engine({seed, static_cast<std::uint64_t>(Stream::responses), b});
    std::normal_distribution<double> normal(0.0, sigma);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> theta(persons);
    for (auto& t : theta) t = normal(theta_rng);
    for (std::size_t p = 0; p < persons; ++p)
      for (auto i : blocks[b])
        cells[p * items + i] = unif(resp_rng) < irf(theta[p], deltas[i]) ? 1 : 0;
  }
}

}  // namespace detail

// Responses from a single-trait Rasch model with N(0, sigma^2) abilities.
inline ResponseMatrix gen_rasch(std::size_t persons, std::span<const double> deltas, double sigma,
                                std::uint64_t seed) {
  detail::require_generation_args(persons, deltas, sigma);
  ItemSet all(deltas.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::uint8_t> cells(persons * deltas.size());
  detail::fill_blocks(cells, persons, deltas, {all}, sigma, seed);
  return ResponseMatrix(persons, deltas.size(), std::move(cells));
}

// Independently shuffles each named column across persons.
inline ResponseMatrix permute_items(const ResponseMatrix& data, std::span<const ItemIndex> items,
                                    std::uint64_t seed) {
  std::vector<bool> seen(data.items(), false);
  for (auto i : items) {
    if (i >= data.items()) throw DomainError("permute_items: item index out of range");
    if (seen[i]) throw DomainError("permute_items: duplicate item index");
    seen[i] = true;
  }
  std::vector<std::uint8_t> cells(data.cells().begin(), data.cells().end());
  const std::size_t n = data.items();
  for (auto i : items) {
    auto rng = make_engine({seed, static_cast<std::uint64_t>(Stream::permutation), i});
    auto col = data.column(i);
    std::shuffle(col.begin(), col.end(), rng);
    for (std::size_t p = 0; p < data.persons(); ++p) cells[p * n + i] = col[p];
  }
  return ResponseMatrix(data.persons(), data.labels(), std::move(cells));
}

// One dataset of a scenario; replication r draws from streams derived from
// (scenario seed, r).
inline ResponseMatrix simulate(const Scenario& sc, std::uint64_t replication) {
  sc.validate();
  detail::require_generation_args(sc.persons, sc.deltas, sc.sigma_theta);
  auto rep_seed = make_engine({sc.seed, replication})();
  std::vector<ItemSet> blocks = sc.trait_blocks;
  if (blocks.empty()) blocks = Partition::whole(sc.items()).clusters();
  std::vector<std::uint8_t> cells(sc.persons * sc.items());
  detail::fill_blocks(cells, sc.persons, sc.deltas, blocks, sc.sigma_theta, rep_seed);
  ResponseMatrix data(sc.persons, sc.items(), std::move(cells));
  if (sc.polluted_items.empty()) return data;
  return permute_items(data, sc.polluted_items, rep_seed);
}

inline const std::vector<double>& base_six_difficulties() {
  static const std::vector<double> v{0.0, -1.5, -1.0, 0.5, 1.2, 1.5};
  return v;
}

inline const std::vector<double>& base_twelve_difficulties() {
  static const std::vector<double> v{0.0, -1.5, -1.0, 0.5, 1.2, 1.5,
                                     0.2, -1.3, -0.8, 0.7, 1.4, 1.7};
  return v;
}

inline std::vector<std::string> preset_names() {
  return {"pollute12-s1", "pollute12-s2", "pollute12-s3", "pollute12-small",
          "clusters6x6",  "clusters8x4",  "clusters4-6-2", "pollute24"};
}

namespace detail {

inline ItemSet range_items(std::size_t first, std::size_t last) {
  ItemSet s;
  for (std::size_t i = first; i <= last; ++i) s.push_back(i);
  return s;
}

inline Scenario polluted_twelve(std::string name, double sigma, std::size_t persons) {
  Scenario sc;
  sc.name = std::move(name);
  sc.deltas = base_twelve_difficulties();
  sc.sigma_theta = sigma;
  sc.persons = persons;
  sc.polluted_items = {10, 11};
  sc.true_partition = Partition({range_items(0, 9), {10}, {11}});
  sc.description = "12 items, items 11 and 12 permuted (non-Rasch), sigma=" +
                   std::to_string(sigma) + ", P=" + std::to_string(persons);
  return sc;
}

inline Scenario blocks_twelve(std::string name, std::vector<ItemSet> blocks,
                              std::vector<double> deltas) {
  Scenario sc;
  sc.name = std::move(name);
  sc.deltas = std::move(deltas);
  sc.sigma_theta = 1.0;
  sc.persons = 200;
  sc.trait_blocks = blocks;
  sc.true_partition = Partition(std::move(blocks));
  sc.description = "12 items in independent Rasch trait blocks, sigma=1 per block, P=200";
  return sc;
}

}  // namespace detail

inline Scenario preset(const std::string& name) {
  using detail::range_items;
  if (name == "pollute12-s1") return detail::polluted_twelve(name, 1.0, 200);
  if (name == "pollute12-s2") return detail::polluted_twelve(name, 2.0, 200);
  if (name == "pollute12-s3") return detail::polluted_twelve(name, 3.0, 200);
  if (name == "pollute12-small") return detail::polluted_twelve(name, 0.6, 100);
  if (name == "clusters6x6") {
    auto d = base_six_difficulties();
    d.insert(d.end(), base_six_difficulties().begin(), base_six_difficulties().end());
    auto sc = detail::blocks_twelve(name, {range_items(0, 5), range_items(6, 11)}, d);
    sc.description += "; blocks {1..6},{7..12}, each with difficulties 0,-1.5,-1,0.5,1.2,1.5";
    return sc;
  }
  if (name == "clusters8x4") {
    auto sc = detail::blocks_twelve(name, {range_items(0, 7), range_items(8, 11)},
                                    base_twelve_difficulties());
    sc.description += "; blocks {1..8},{9..12}";
    return sc;
  }
  if (name == "clusters4-6-2") {
    auto sc = detail::blocks_twelve(
        name, {range_items(0, 3), range_items(4, 9), range_items(10, 11)},
        base_twelve_difficulties());
    sc.description += "; blocks {1..4},{5..10},{11,12}";
    return sc;
  }
  if (name == "pollute24") {
    Scenario sc;
    sc.name = name;
    for (double shift : {0.0, 0.3, -0.3, 0.4})
      for (double d : base_six_difficulties()) sc.deltas.push_back(d + shift);
    sc.sigma_theta = 1.0;
    sc.persons = 200;
    sc.polluted_items = range_items(18, 23);
    sc.true_partition = Partition([] {
      std::vector<ItemSet> c{range_items(0, 17)};
      for (std::size_t i = 18; i < 24; ++i) c.push_back({i});
      return c;
    }());
    sc.description =
        "24 items: base difficulties 0,-1.5,-1,0.5,1.2,1.5 followed by the base vector "
        "shifted by +0.3, -0.3 and +0.4 (one shift per block of six); the last six items "
        "(19..24, the +0.4 block) are permuted; sigma=1, P=200";
    return sc;
  }
  throw ConfigError("unknown scenario preset '" + name + "'");
}

}  // namespace raschsel
