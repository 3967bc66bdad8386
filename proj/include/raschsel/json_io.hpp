#pragma once

// JSON forms of the result types. Item references are 1-based item numbers
// (column positions) with labels alongside; dendrogram cluster ids are 1..I
// for leaves and I+s for the cluster created by merge s.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "raschsel/estimation.hpp"
#include "raschsel/evaluation.hpp"
#include "raschsel/hierarchy.hpp"
#include "raschsel/partition.hpp"
#include "raschsel/selection.hpp"
#include "raschsel/simulate.hpp"
#include "raschsel/stability.hpp"

namespace raschsel {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json one_based(const ItemSet& s) {
  Json a = Json::array();
  for (auto i : s) a.push_back(i + 1);
  return a;
}

inline ItemSet zero_based(const Json& a) {
  ItemSet s;
  for (const auto& v : a) {
    const auto i = v.get<long long>();
    if (i < 1) throw DomainError("item numbers in JSON are 1-based");
    s.push_back(static_cast<ItemIndex>(i - 1));
  }
  return s;
}

inline Json matrix_rows(std::size_t n, const std::vector<double>& values) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back(std::vector<double>(values.begin() + i * n, values.begin() + (i + 1) * n));
  return rows;
}

}  // namespace detail

inline Json to_json(const RaschFit& f, const std::vector<std::string>& labels) {
  return Json{{"items", labels},
              {"difficulties", f.difficulties},
              {"sigma_theta", f.sigma_theta},
              {"log_marginal_likelihood", f.log_marginal_likelihood},
              {"iterations", f.iterations},
              {"converged", f.converged},
              {"log_likelihood_trace", f.log_likelihood_trace}};
}

inline Json to_json(const SelectionTrace& t, const std::vector<std::string>& labels) {
  Json order_labels = Json::array();
  for (auto i : t.order) order_labels.push_back(labels.at(i));
  return Json{{"criterion", to_string(t.criterion)},
              {"anchor", t.anchor ? Json(*t.anchor + 1) : Json(nullptr)},
              {"order", detail::one_based(t.order)},
              {"order_labels", order_labels},
              {"step_sigma", t.step_sigma},
              {"nonconverged_fits", t.nonconverged_fits}};
}

inline Json to_json(const OrderMatrix& o, const std::vector<std::string>& labels) {
  Json subsets = Json::array();
  for (const auto& s : o.subsets) {
    Json a = Json::array();
    for (auto p : s) a.push_back(p + 1);
    subsets.push_back(a);
  }
  return Json{{"items", labels},
              {"proportion", o.proportion},
              {"base_seed", o.base_seed},
              {"orders", o.columns},
              {"redraws", o.redraws},
              {"subsets", subsets}};
}

inline Json to_json(const MisfitReport& r, const std::vector<std::string>& labels) {
  return Json{{"items", labels},
              {"threshold", r.threshold},
              {"misfit", r.misfit},
              {"mean_std", r.mean_std}};
}

inline Json to_json(const SimilarityMatrix& s, const std::vector<std::string>& labels) {
  return Json{{"items", labels}, {"similarity", detail::matrix_rows(s.n, s.values)}};
}

inline SimilarityMatrix similarity_from_json(const Json& j) {
  SimilarityMatrix s;
  const auto& rows = j.at("similarity");
  s.n = rows.size();
  for (const auto& r : rows) {
    if (r.size() != s.n) throw DomainError("similarity matrix must be square");
    for (const auto& v : r) s.values.push_back(v.get<double>());
  }
  return s;
}

inline Json to_json(const Dendrogram& d) {
  Json merges = Json::array();
  for (const auto& m : d.merges)
    merges.push_back(Json{{"step", m.step},
                          {"left", m.left + 1},
                          {"right", m.right + 1},
                          {"members", detail::one_based(m.members)},
                          {"score", m.score},
                          {"height", m.height}});
  return Json{{"method", d.method},
              {"height_mode",
               d.height_mode == HeightMode::step_index ? "step-index" : "linkage-distance"},
              {"leaves", d.leaves},
              {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const Json& j) {
  Dendrogram d;
  d.method = j.value("method", "");
  d.height_mode = j.value("height_mode", "step-index") == "step-index"
                      ? HeightMode::step_index
                      : HeightMode::linkage_distance;
  d.leaves = j.at("leaves").get<std::vector<std::string>>();
  for (const auto& m : j.at("merges")) {
    MergeStep s;
    s.step = m.at("step").get<std::size_t>();
    s.left = m.at("left").get<std::size_t>() - 1;
    s.right = m.at("right").get<std::size_t>() - 1;
    s.members = detail::zero_based(m.at("members"));
    s.score = m.at("score").get<double>();
    s.height = m.at("height").get<double>();
    d.merges.push_back(std::move(s));
  }
  d.validate();
  return d;
}

inline Json to_json(const Partition& p) {
  Json clusters = Json::array();
  for (const auto& c : p.clusters()) clusters.push_back(detail::one_based(c));
  return Json{{"clusters", clusters}};
}

inline Partition partition_from_json(const Json& j) {
  std::vector<ItemSet> clusters;
  for (const auto& c : j.at("clusters")) clusters.push_back(detail::zero_based(c));
  return Partition(std::move(clusters));
}

inline Json to_json(const EvalCurve& c) {
  Json pts = Json::array();
  for (const auto& p : c.points)
    pts.push_back(Json{{"clusters", p.clusters}, {"hit", p.hit}, {"false", p.false_}});
  return Json{{"points", pts}};
}

inline Json to_json(const Scenario& s) {
  Json j{{"name", s.name},
         {"description", s.description},
         {"deltas", s.deltas},
         {"sigma_theta", s.sigma_theta},
         {"persons", s.persons},
         {"polluted_items", detail::one_based(s.polluted_items)},
         {"seed", s.seed}};
  Json blocks = Json::array();
  for (const auto& b : s.trait_blocks) blocks.push_back(detail::one_based(b));
  j["trait_blocks"] = blocks;
  j["true_partition"] = s.true_partition ? to_json(*s.true_partition)["clusters"] : Json(nullptr);
  return j;
}

}  // namespace raschsel
