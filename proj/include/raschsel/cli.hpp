#pragma once

// Command-line driver. Every subcommand writes its artifacts plus run.conf
// (all effective parameters) and manifest.json into --output-dir.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "raschsel/config.hpp"
#include "raschsel/csv.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/evaluation.hpp"
#include "raschsel/hierarchy.hpp"
#include "raschsel/json_io.hpp"
#include "raschsel/parallel.hpp"
#include "raschsel/selection.hpp"
#include "raschsel/simulate.hpp"
#include "raschsel/stability.hpp"
#include "raschsel/svg.hpp"

namespace raschsel::cli {

namespace fs = std::filesystem;

struct RunConfig {
  std::string command;
  std::string input;
  std::string output_dir = "raschsel-out";
  std::string scenario = "pollute12-s1";
  std::string method;
  std::string anchor;
  std::string criterion = "max-sigma";
  std::string truth;
  std::string config;
  std::uint64_t seed = 1;
  std::size_t reps = 1;
  std::size_t subsets = 20;
  double proportion = 0.5;
  double threshold = 0.75;
  int quad_points = 30;
  double tol = 1e-5;
  int max_iter = 500;
  bool emit_svg = false;
  KeyValues scenario_keys;  // scenario fields given in the config file

  FitConfig fit() const {
    FitConfig c;
    c.quad_points = quad_points;
    c.tol = tol;
    c.max_iter = max_iter;
    c.validate();
    return c;
  }
};

namespace detail {

inline const std::vector<std::string>& scenario_fields() {
  static const std::vector<std::string> keys{"name",           "deltas",       "sigma-theta",
                                             "persons",        "polluted-items", "trait-blocks",
                                             "true-partition"};
  return keys;
}

inline std::string real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Artifact writer for one run directory.
class Output {
 public:
  Output(const std::string& dir, std::ostream& log) : dir_(dir), log_(log) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void text(const std::string& name, const std::string& content) {
    std::ofstream out(path(name), std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + path(name) + "'");
    artifacts_.push_back(name);
  }

  void json(const std::string& name, const Json& j) { text(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& artifacts() const { return artifacts_; }
  std::ostream& log() { return log_; }

 private:
  fs::path dir_;
  std::ostream& log_;
  std::vector<std::string> artifacts_;
};

inline ResponseMatrix load_input(const RunConfig& rc) {
  if (rc.input.empty()) throw ConfigError("--input is required");
  return ingest_csv(rc.input);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline ItemIndex resolve_anchor(const std::string& anchor, const ResponseMatrix& data) {
  for (std::size_t i = 0; i < data.items(); ++i)
    if (data.label(i) == anchor) return i;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(anchor, &used);
    if (used == anchor.size() && v >= 1 && static_cast<std::size_t>(v) <= data.items())
      return static_cast<ItemIndex>(v - 1);
  } catch (const std::exception&) {
  }
  throw ConfigError("--anchor '" + anchor + "' is neither an item label nor an item number 1.." +
                    std::to_string(data.items()));
}

inline Scenario effective_scenario(const RunConfig& rc) {
  KeyValues kv = rc.scenario_keys;
  kv["scenario"] = rc.scenario;
  kv["seed"] = std::to_string(rc.seed);
  return scenario_from_config(kv);
}

inline std::string matrix_csv(const std::vector<std::string>& labels, const Json& rows) {
  std::ostringstream os;
  os << "item";
  for (const auto& l : labels) os << ',' << raschsel::detail::csv_field(l);
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << raschsel::detail::csv_field(labels.at(i));
    for (const auto& v : rows[i]) os << ',' << (v.is_null() ? std::string("NA") : real(v.get<double>()));
    os << '\n';
  }
  return os.str();
}

// ---- subcommands ----

inline Json run_simulate(const RunConfig& rc, Output& out) {
  const auto sc = effective_scenario(rc);
  if (rc.reps < 1) throw ConfigError("--reps must be at least 1");
  Json files = Json::array();
  for (std::size_t r = 0; r < rc.reps; ++r) {
    const auto data = simulate(sc, r);
    std::ostringstream os;
    write_response_csv(os, data);
    char name[32];
    std::snprintf(name, sizeof name, "data_%03zu.csv", r + 1);
    const std::string file = rc.reps == 1 ? "data.csv" : name;
    out.text(file, os.str());
    files.push_back(file);
  }
  out.json("truth.json", to_json(sc));
  out.log() << "simulate: scenario " << sc.name << ", " << sc.persons << " persons x "
            << sc.items() << " items, " << rc.reps << " dataset(s)\n";
  return Json{{"datasets", files}};
}

inline Json run_fit(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const auto f = fit_mml(data, rc.fit());
  const Json j = to_json(f, data.labels());
  out.json("fit.json", j);
  if (rc.emit_svg) {
    Series s{"log-likelihood", {}, {}};
    const auto& trace = j.at("log_likelihood_trace");
    for (std::size_t k = 0; k < trace.size(); ++k) {
      s.x.push_back(static_cast<double>(k + 1));
      s.y.push_back(trace[k].get<double>());
    }
    out.text("fit_trace.svg", line_chart_svg("EM log marginal likelihood", "iteration",
                                             "log-likelihood", {s}));
  }
  out.log() << "fit: " << data.persons() << " persons x " << data.items()
            << " items, sigma = " << f.sigma_theta << ", logL = " << f.log_marginal_likelihood
            << (f.converged ? "" : " (not converged)") << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}};
}

inline Json run_select(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const auto criterion = criterion_from_string(rc.criterion);
  const auto config = rc.fit();
  SelectionTrace t;
  if (!rc.anchor.empty()) {
    if (criterion != Criterion::max_sigma)
      throw ConfigError("--anchor is only supported with --criterion max-sigma");
    t = select_with_anchor(data, resolve_anchor(rc.anchor, data), config);
  } else if (criterion == Criterion::max_sigma) {
    t = select_sequence(data, config);
  } else {
    t = change_sequence(data, criterion, config);
  }
  const Json j = to_json(t, data.labels());
  out.json("trace.json", j);

  // step s fuses s + 1 items; the first item of the pair has no step of its own
  std::ostringstream csv;
  csv << "position,item,label,step_sigma\n";
  const auto& order = j.at("order");
  const auto& sig = j.at("step_sigma");
  for (std::size_t k = 0; k < order.size(); ++k) {
    csv << k + 1 << ',' << order[k].get<std::size_t>() << ','
        << raschsel::detail::csv_field(j.at("order_labels")[k].get<std::string>()) << ',';
    if (k >= 1) csv << (sig[k - 1].is_null() ? std::string("NA") : real(sig[k - 1].get<double>()));
    csv << '\n';
  }
  out.text("trace.csv", csv.str());
  if (rc.emit_svg) {
    Series s{"fused sigma", {}, {}};
    for (std::size_t k = 0; k < sig.size(); ++k) {
      s.x.push_back(static_cast<double>(k + 1));
      s.y.push_back(sig[k].is_null() ? NAN : sig[k].get<double>());
    }
    out.text("sigma_trajectory.svg",
             line_chart_svg("Selection (" + rc.criterion + ")", "step", "estimated sigma", {s}));
  }
  out.log() << "select:";
  for (const auto& l : j.at("order_labels")) out.log() << ' ' << l.get<std::string>();
  out.log() << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}};
}

inline OrderAlgorithm order_algorithm(const std::string& method) {
  if (method.empty() || method == "sequential") return OrderAlgorithm::sequential;
  if (method == "hierarchical" || method == "hierarchical-first-cluster")
    return OrderAlgorithm::hierarchical_first_cluster;
  throw ConfigError("--method for misfit must be 'sequential' or 'hierarchical'");
}

inline Json run_misfit(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const auto algorithm = order_algorithm(rc.method);
  const auto orders =
      subsample_orders(data, rc.subsets, rc.proportion, algorithm, rc.seed, rc.fit());
  Json oj = to_json(orders, data.labels());
  oj["algorithm"] = to_string(algorithm);
  out.json("orders.json", oj);

  Json mj = to_json(misfit_scores(orders, rc.threshold), data.labels());
  Json dens = Json::array();
  for (std::size_t i = 0; i < data.items(); ++i) {
    Json xs = Json::array(), ys = Json::array();
    for (const auto& p : order_density(orders, i)) {
      xs.push_back(p.order);
      ys.push_back(p.density);
    }
    dens.push_back(Json{{"item", i + 1}, {"label", data.label(i)}, {"order", xs}, {"density", ys}});
  }
  mj["densities"] = dens;
  out.json("misfit.json", mj);

  std::ostringstream csv;
  csv << "item,label,misfit,mean_std\n";
  for (std::size_t i = 0; i < data.items(); ++i)
    csv << i + 1 << ',' << raschsel::detail::csv_field(mj["items"][i].get<std::string>()) << ','
        << real(mj["misfit"][i].get<double>()) << ',' << real(mj["mean_std"][i].get<double>())
        << '\n';
  out.text("misfit.csv", csv.str());

  std::ostringstream dcsv;
  dcsv << "item,label,order,density\n";
  std::vector<Series> series;
  for (const auto& d : mj["densities"]) {
    Series s{d["label"].get<std::string>(), {}, {}};
    for (std::size_t k = 0; k < d["order"].size(); ++k) {
      const double x = d["order"][k].get<double>(), y = d["density"][k].get<double>();
      dcsv << d["item"].get<std::size_t>() << ',' << raschsel::detail::csv_field(s.name) << ',' << real(x) << ','
           << real(y) << '\n';
      s.x.push_back(x);
      s.y.push_back(y);
    }
    series.push_back(std::move(s));
  }
  out.text("densities.csv", dcsv.str());
  if (rc.emit_svg)
    out.text("densities.svg",
             line_chart_svg("Inclusion order densities", "inclusion order", "density", series));

  out.log() << "misfit (" << rc.subsets << " subsets, a = " << rc.threshold << "):";
  for (std::size_t i = 0; i < data.items(); ++i)
    out.log() << ' ' << data.label(i) << '=' << mj["misfit"][i].get<double>();
  out.log() << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}, {"algorithm", to_string(algorithm)}};
}

inline void write_dendrogram(const Json& dj, Output& out, bool svg) {
  out.json("dendrogram.json", dj);
  const auto d = dendrogram_from_json(dj);
  out.text("dendrogram.nwk", to_newick(d) + "\n");
  if (svg) out.text("dendrogram.svg", dendrogram_svg(d, "Dendrogram (" + d.method + ")"));
}

inline Json run_hcluster(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const std::string method = rc.method.empty() ? "marginal" : rc.method;
  Dendrogram d;
  if (method == "marginal") {
    d = hcluster_marginal(data, rc.fit());
  } else if (method == "average" || method == "centroid") {
    d = agglomerate(euclidean_item_distances(data),
                    method == "average" ? Linkage::average : Linkage::centroid, data.labels());
  } else if (method == "stability-average") {
    const auto s = pairwise_similarity(data, rc.subsets, rc.proportion, rc.seed, rc.fit());
    const Json sj = to_json(s, data.labels());
    out.json("similarity.json", sj);
    d = agglomerate(similarity_to_distance(similarity_from_json(sj)), Linkage::average,
                    data.labels());
    d.method = "stability-average";
  } else {
    throw ConfigError("--method must be one of marginal, average, centroid, stability-average");
  }
  write_dendrogram(to_json(d), out, rc.emit_svg);
  out.log() << "hcluster (" << method << "): " << to_newick(d) << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}};
}

inline Json run_stability(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const auto s = pairwise_similarity(data, rc.subsets, rc.proportion, rc.seed, rc.fit());
  const Json sj = to_json(s, data.labels());
  out.json("similarity.json", sj);
  out.text("similarity.csv", matrix_csv(data.labels(), sj.at("similarity")));
  if (rc.emit_svg) {
    auto d = agglomerate(similarity_to_distance(similarity_from_json(sj)), Linkage::average,
                         data.labels());
    d.method = "stability-average";
    out.text("similarity_dendrogram.svg", dendrogram_svg(d, "Average linkage on 1 - similarity"));
  }
  out.log() << "stability: " << rc.subsets << " subsets, similarity matrix " << s.n << " x " << s.n
            << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}};
}

inline Partition load_truth(const std::string& path) {
  const Json j = read_json_file(path);
  if (j.contains("clusters")) return partition_from_json(j);
  if (j.contains("true_partition") && !j["true_partition"].is_null())
    return partition_from_json(Json{{"clusters", j["true_partition"]}});
  throw ConfigError("'" + path + "' holds neither \"clusters\" nor a \"true_partition\"");
}

inline Json run_evaluate(const RunConfig& rc, Output& out) {
  if (rc.input.empty()) throw ConfigError("--input (a dendrogram JSON) is required");
  if (rc.truth.empty()) throw ConfigError("--truth is required");
  const auto d = dendrogram_from_json(read_json_file(rc.input));
  const auto truth = load_truth(rc.truth);
  const Json j = to_json(roc_curve(truth, d));
  out.json("eval.json", j);
  std::ostringstream csv;
  csv << "clusters,hit,false\n";
  Series hit{"hit", {}, {}}, fal{"false", {}, {}};
  for (const auto& p : j.at("points")) {
    const double k = p["clusters"].get<double>();
    csv << p["clusters"].get<std::size_t>() << ',' << real(p["hit"].get<double>()) << ','
        << real(p["false"].get<double>()) << '\n';
    hit.x.push_back(k);
    hit.y.push_back(p["hit"].get<double>());
    fal.x.push_back(k);
    fal.y.push_back(p["false"].get<double>());
  }
  out.text("eval.csv", csv.str());
  if (rc.emit_svg)
    out.text("eval.svg", line_chart_svg("Hit and false rates by cut", "clusters", "rate", {hit, fal}));
  const auto k = truth.size();
  const auto& pk = j["points"][k - 1];
  out.log() << "evaluate (" << d.method << "): at k = " << k << " hit = " << pk["hit"].get<double>()
            << ", false = " << pk["false"].get<double>() << '\n';
  return Json{{"method", d.method}};
}

inline Json run_diagnose(const RunConfig& rc, Output& out) {
  const auto data = load_input(rc);
  const auto cor = item_correlations(data);
  const auto cc = mean_conditional_covariance_detail(data);
  auto off_mean = [](const SquareMatrix& m) {
    double s = 0;
    for (std::size_t i = 0; i < m.n; ++i)
      for (std::size_t j = 0; j < m.n; ++j)
        if (i != j) s += m(i, j);
    return s / static_cast<double>(m.n * (m.n - 1));
  };
  const Json j{{"items", data.labels()},
               {"correlation", raschsel::detail::matrix_rows(cor.n, cor.values)},
               {"conditional_covariance", raschsel::detail::matrix_rows(cc.matrix.n, cc.matrix.values)},
               {"scores_used", cc.scores_used},
               {"score_averaging", "unweighted mean over qualifying scores"},
               {"mean_offdiagonal_correlation", off_mean(cor)},
               {"mean_offdiagonal_conditional_covariance", off_mean(cc.matrix)}};
  out.json("diagnose.json", j);
  out.text("correlations.csv", matrix_csv(data.labels(), j["correlation"]));
  out.text("conditional_covariance.csv", matrix_csv(data.labels(), j["conditional_covariance"]));
  out.log() << "diagnose: mean correlation " << j["mean_offdiagonal_correlation"].get<double>()
            << ", mean conditional covariance "
            << j["mean_offdiagonal_conditional_covariance"].get<double>() << '\n';
  return Json{{"persons", data.persons()}, {"items", data.items()}};
}

// Polluted scenarios: misfit and selection summaries. Block scenarios:
// mean hit/false rates of the clustering methods at every cut.
inline Json run_bench(const RunConfig& rc, Output& out) {
  const auto sc = effective_scenario(rc);
  if (rc.reps < 1) throw ConfigError("--reps must be at least 1");
  const auto config = rc.fit();
  const std::size_t n = sc.items();
  const std::size_t reps = rc.reps;
  Json result{{"scenario", to_json(sc)}, {"replications", reps}};
  auto labels = ResponseMatrix::default_labels(n);

  if (!sc.polluted_items.empty()) {
    const auto algorithm = order_algorithm(rc.method);
    std::vector<MisfitReport> reports(reps);
    std::vector<SelectionTrace> traces(reps);
    parallel_for(reps, [&](std::size_t r) {
      const auto data = simulate(sc, r);
      const auto seed = make_engine({rc.seed, static_cast<std::uint64_t>(Stream::subsample), r})();
      reports[r] = misfit_scores(
          subsample_orders(data, rc.subsets, rc.proportion, algorithm, seed, config), rc.threshold);
      traces[r] = select_sequence(data, config);
    });
    std::vector<double> mf(n, 0.0), ms(n, 0.0), step(n - 1, 0.0);
    std::size_t tail_hits = 0;
    const std::size_t q = sc.polluted_items.size();
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        mf[i] += reports[r].misfit[i] / static_cast<double>(reps);
        ms[i] += reports[r].mean_std[i] / static_cast<double>(reps);
      }
      for (std::size_t s = 0; s < n - 1; ++s)
        step[s] += traces[r].step_sigma[s] / static_cast<double>(reps);
      ItemSet tail(traces[r].order.end() - static_cast<std::ptrdiff_t>(q), traces[r].order.end());
      std::sort(tail.begin(), tail.end());
      auto polluted = sc.polluted_items;
      std::sort(polluted.begin(), polluted.end());
      tail_hits += tail == polluted;
    }
    result["misfit"] = Json{{"algorithm", to_string(algorithm)},
                            {"subsets", rc.subsets},
                            {"proportion", rc.proportion},
                            {"threshold", rc.threshold},
                            {"items", labels},
                            {"mean_misfit", mf},
                            {"mean_std", ms}};
    result["selection"] = Json{{"polluted_last_rate", static_cast<double>(tail_hits) / static_cast<double>(reps)},
                               {"mean_step_sigma", step}};
    std::ostringstream csv;
    csv << "item,label,polluted,mean_misfit,mean_std\n";
    for (std::size_t i = 0; i < n; ++i) {
      const bool p = std::find(sc.polluted_items.begin(), sc.polluted_items.end(), i) !=
                     sc.polluted_items.end();
      csv << i + 1 << ',' << labels[i] << ',' << p << ',' << real(result["misfit"]["mean_misfit"][i].get<double>())
          << ',' << real(result["misfit"]["mean_std"][i].get<double>()) << '\n';
    }
    out.json("bench.json", result);
    out.text("bench_misfit.csv", csv.str());
    out.log() << "bench " << sc.name << " (" << reps << " reps): mean misfit";
    for (std::size_t i = 0; i < n; ++i) out.log() << ' ' << labels[i] << '=' << mf[i];
    out.log() << "; polluted items last in " << result["selection"]["polluted_last_rate"].get<double>() * 100
              << "% of runs\n";
    return Json{{"kind", "misfit"}};
  }

  if (!sc.true_partition) throw ConfigError("bench needs a scenario with polluted items or a true partition");
  std::vector<std::string> methods{"marginal", "average", "centroid"};
  if (rc.method == "stability-average") methods.push_back("stability-average");
  else if (!rc.method.empty() && rc.method != "marginal" && rc.method != "average" && rc.method != "centroid")
    throw ConfigError("--method for a clustering bench must be empty or stability-average");
  // curves[m][r]
  std::vector<std::vector<EvalCurve>> curves(methods.size(), std::vector<EvalCurve>(reps));
  parallel_for(reps, [&](std::size_t r) {
    const auto data = simulate(sc, r);
    const auto seed = make_engine({rc.seed, static_cast<std::uint64_t>(Stream::subsample), r})();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      Dendrogram d;
      if (methods[m] == "marginal") d = hcluster_marginal(data, config);
      else if (methods[m] == "average") d = agglomerate(euclidean_item_distances(data), Linkage::average);
      else if (methods[m] == "centroid") d = agglomerate(euclidean_item_distances(data), Linkage::centroid);
      else
        d = agglomerate(similarity_to_distance(
                            pairwise_similarity(data, rc.subsets, rc.proportion, seed, config)),
                        Linkage::average);
      curves[m][r] = roc_curve(*sc.true_partition, d);
    }
  });
  const std::size_t k_true = sc.true_partition->size();
  Json table = Json::array();
  std::ostringstream csv;
  csv << "method,clusters,mean_hit,mean_false,exact_rate\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    Json pts = Json::array();
    for (std::size_t k = 1; k <= n; ++k) {
      double h = 0, f = 0, exact = 0;
      for (const auto& c : curves[m]) {
        h += c.points[k - 1].hit;
        f += c.points[k - 1].false_;
        exact += c.points[k - 1].hit == 1.0 && c.points[k - 1].false_ == 0.0;
      }
      const double R = static_cast<double>(reps);
      pts.push_back(Json{{"clusters", k}, {"mean_hit", h / R}, {"mean_false", f / R}, {"exact_rate", exact / R}});
      csv << methods[m] << ',' << k << ',' << real(h / R) << ',' << real(f / R) << ',' << real(exact / R) << '\n';
    }
    table.push_back(Json{{"method", methods[m]}, {"points", pts}});
  }
  result["clustering"] = table;
  out.json("bench.json", result);
  out.text("bench_clustering.csv", csv.str());
  out.log() << "bench " << sc.name << " (" << reps << " reps) at k = " << k_true << ':';
  for (const auto& t : table) {
    const auto& p = t["points"][k_true - 1];
    out.log() << ' ' << t["method"].get<std::string>() << " h=" << p["mean_hit"].get<double>()
              << " f=" << p["mean_false"].get<double>();
  }
  out.log() << '\n';
  return Json{{"kind", "clustering"}};
}

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> options;  // long names without dashes
  Json (*run)(const RunConfig&, Output&);
};

inline const std::vector<Command>& commands() {
  static const std::vector<std::string> fitting{"quad-points", "tol", "max-iter"};
  auto with_fit = [](std::vector<std::string> v) {
    v.insert(v.end(), fitting.begin(), fitting.end());
    return v;
  };
  static const std::vector<Command> all{
      {"simulate", "Simulate datasets from a scenario", {"scenario", "reps", "seed"}, run_simulate},
      {"fit", "Fit a Rasch model by marginal maximum likelihood", with_fit({"input"}), run_fit},
      {"select", "Sequential item selection", with_fit({"input", "criterion", "anchor", "seed"}), run_select},
      {"misfit", "Misfit scores from subsample inclusion orders",
       with_fit({"input", "subsets", "proportion", "threshold", "method", "seed"}), run_misfit},
      {"hcluster", "Hierarchical item clustering",
       with_fit({"input", "method", "subsets", "proportion", "seed"}), run_hcluster},
      {"stability", "Pairwise co-clustering similarity over subsamples",
       with_fit({"input", "subsets", "proportion", "seed"}), run_stability},
      {"evaluate", "Hit and false rates of a dendrogram against a true partition",
       {"input", "truth"}, run_evaluate},
      {"diagnose", "Item correlations and conditional covariances", {"input"}, run_diagnose},
      {"bench", "Monte-Carlo benchmark of a scenario",
       with_fit({"scenario", "reps", "seed", "subsets", "proportion", "threshold", "method"}),
       run_bench},
  };
  return all;
}

inline std::string value_of(const RunConfig& rc, const std::string& key) {
  if (key == "input") return rc.input;
  if (key == "scenario") return rc.scenario;
  if (key == "method") return rc.method;
  if (key == "anchor") return rc.anchor;
  if (key == "criterion") return rc.criterion;
  if (key == "truth") return rc.truth;
  if (key == "seed") return std::to_string(rc.seed);
  if (key == "reps") return std::to_string(rc.reps);
  if (key == "subsets") return std::to_string(rc.subsets);
  if (key == "proportion") return real(rc.proportion);
  if (key == "threshold") return real(rc.threshold);
  if (key == "quad-points") return std::to_string(rc.quad_points);
  if (key == "tol") return real(rc.tol);
  if (key == "max-iter") return std::to_string(rc.max_iter);
  throw std::logic_error("no option " + key);
}

inline void add_option(CLI::App& sub, const std::string& key, RunConfig& rc) {
  const std::string flag = "--" + key;
  if (key == "input") sub.add_option(flag, rc.input, "Input file");
  else if (key == "scenario") sub.add_option(flag, rc.scenario, "Scenario preset name");
  else if (key == "method") sub.add_option(flag, rc.method, "Method");
  else if (key == "anchor") sub.add_option(flag, rc.anchor, "Anchor item (label or 1-based number)");
  else if (key == "criterion") sub.add_option(flag, rc.criterion, "max-sigma | sigma-change | delta-change | hybrid");
  else if (key == "truth") sub.add_option(flag, rc.truth, "True partition JSON");
  else if (key == "seed") sub.add_option(flag, rc.seed, "Random seed");
  else if (key == "reps") sub.add_option(flag, rc.reps, "Replications");
  else if (key == "subsets") sub.add_option(flag, rc.subsets, "Number of person subsets");
  else if (key == "proportion") sub.add_option(flag, rc.proportion, "Subsample proportion");
  else if (key == "threshold") sub.add_option(flag, rc.threshold, "Misfit threshold a");
  else if (key == "quad-points") sub.add_option(flag, rc.quad_points, "Gauss-Hermite nodes");
  else if (key == "tol") sub.add_option(flag, rc.tol, "EM convergence tolerance");
  else if (key == "max-iter") sub.add_option(flag, rc.max_iter, "EM iteration limit");
}

inline std::string run_conf_text(const RunConfig& rc, const Command& cmd) {
  std::ostringstream os;
  os << "# raschsel " << cmd.name << '\n';
  for (const auto& key : cmd.options)
    if (const auto v = value_of(rc, key); !v.empty()) os << key << " = " << v << '\n';
  os << "output-dir = " << rc.output_dir << '\n';
  os << "emit-svg = " << (rc.emit_svg ? "true" : "false") << '\n';
  if (std::string(cmd.name) == "simulate" || std::string(cmd.name) == "bench") {
    std::istringstream sc(scenario_to_config(effective_scenario(rc)));
    std::string line;
    while (std::getline(sc, line))
      if (line.rfind("seed", 0) != 0) os << line << '\n';  // seed is listed above
  }
  return os.str();
}

}  // namespace detail

// Parses argv and runs one subcommand. Returns the process exit status.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Rasch-model item selection, misfit scoring and clustering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "raschsel 1.0");
  RunConfig rc;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    for (const auto& key : cmd.options) add_option(*sub, key, rc);
    sub->add_option("--output-dir", rc.output_dir, "Directory for artifacts");
    sub->add_flag("--emit-svg", rc.emit_svg, "Also write SVG plots");
    sub->add_option("--config", rc.config, "key=value file; flags override its values");
    subs[cmd.name] = sub;
  }

  // Config values are placed before the user's flags so the flags win.
  std::vector<std::string> args(argv, argv + argc);
  KeyValues scenario_keys;
  try {
    if (argc >= 2 && subs.count(args[1])) {
      std::string config_path;
      for (std::size_t k = 2; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) config_path = args[k + 1];
        else if (args[k].rfind("--config=", 0) == 0) config_path = args[k].substr(9);
      }
      if (!config_path.empty()) {
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_key_values(config_path)) {
          auto* sub = subs[args[1]];
          const bool scenario_key =
              std::find(scenario_fields().begin(), scenario_fields().end(), key) !=
              scenario_fields().end();
          if (key == "config") continue;
          if (sub->get_option_no_throw("--" + key)) {
            if (value.empty()) continue;
            injected.push_back("--" + key + "=" + value);
          } else if (scenario_key && (args[1] == "simulate" || args[1] == "bench")) {
            scenario_keys[key] = value;
          } else {
            throw ConfigError("config key '" + key + "' does not apply to '" + args[1] + "'");
          }
        }
        args.insert(args.begin() + 2, injected.begin(), injected.end());
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::vector<const char*> ptrs;
  for (const auto& a : args) ptrs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const Command* cmd = nullptr;
  for (const auto& c : commands())
    if (subs[c.name]->parsed()) cmd = &c;
  rc.command = cmd->name;
  rc.scenario_keys = scenario_keys;
  if (rc.command == "bench" && subs["bench"]->get_option("--reps")->count() == 0) rc.reps = 50;
  if (rc.method.empty() && rc.command == "hcluster") rc.method = "marginal";
  if (rc.method.empty() && rc.command == "misfit") rc.method = "sequential";
  // paths in run.conf are absolute so the replay works from any directory
  for (auto* path : {&rc.input, &rc.truth, &rc.output_dir})
    if (!path->empty()) *path = fs::absolute(*path).lexically_normal().string();

  try {
    Output output(rc.output_dir, out);
    Json summary = cmd->run(rc, output);
    const std::string conf = run_conf_text(rc, *cmd);
    output.text("run.conf", conf);
    Json params = Json::object();
    for (const auto& key : cmd->options) params[key] = value_of(rc, key);
    params["emit-svg"] = rc.emit_svg;
    if (!rc.scenario_keys.empty()) params["scenario-fields"] = rc.scenario_keys;
    Json artifacts = output.artifacts();
    artifacts.push_back("manifest.json");
    const Json manifest{{"tool", "raschsel"},
                        {"command", rc.command},
                        {"seed", rc.seed},
                        {"parameters", params},
                        {"threads", thread_count()},
                        {"output_dir", rc.output_dir},
                        {"artifacts", artifacts},
                        {"summary", summary},
                        {"replay", "raschsel " + rc.command + " --config " + output.path("run.conf")}};
    output.json("manifest.json", manifest);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace raschsel::cli
