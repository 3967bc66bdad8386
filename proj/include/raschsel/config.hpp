#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "raschsel/errors.hpp"
#include "raschsel/simulate.hpp"

namespace raschsel {

using KeyValues = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment. Keys are normalized so that
// "quad_points" and "quad-points" are the same key.
inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(no) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    for (auto& c : key)
      if (c == '_') c = '-';
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    kv[key] = value;
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_key_values(in);
}

namespace detail {

inline std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
    } catch (const std::exception&) {
      throw ConfigError("'" + tok + "' is not a number");
    }
  }
  return out;
}

inline ItemSet parse_items(const std::string& s) {
  ItemSet out;
  for (double v : parse_reals(s)) {
    if (v < 1 || v != static_cast<double>(static_cast<long long>(v)))
      throw ConfigError("item numbers are positive integers (1-based)");
    out.push_back(static_cast<ItemIndex>(v) - 1);
  }
  return out;
}

inline std::vector<ItemSet> parse_blocks(const std::string& s) {
  std::vector<ItemSet> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';'))
    if (!tok.empty()) out.push_back(parse_items(tok));
  return out;
}

template <class Seq, class Fmt>
std::string join(const Seq& seq, const char* sep, Fmt fmt) {
  std::ostringstream os;
  bool first = true;
  for (const auto& v : seq) {
    if (!first) os << sep;
    first = false;
    os << fmt(v);
  }
  return os.str();
}

}  // namespace detail

inline std::string scenario_to_config(const Scenario& s) {
  auto real = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  auto item = [](ItemIndex i) { return i + 1; };
  auto block = [&](const ItemSet& b) { return detail::join(b, ",", item); };
  std::ostringstream os;
  os << "# " << s.description << '\n';
  os << "name = " << s.name << '\n';
  os << "deltas = " << detail::join(s.deltas, ",", real) << '\n';
  os << "sigma-theta = " << real(s.sigma_theta) << '\n';
  os << "persons = " << s.persons << '\n';
  os << "polluted-items = " << detail::join(s.polluted_items, ",", item) << '\n';
  os << "trait-blocks = " << detail::join(s.trait_blocks, ";", block) << '\n';
  if (s.true_partition)
    os << "true-partition = " << detail::join(s.true_partition->clusters(), ";", block) << '\n';
  os << "seed = " << s.seed << '\n';
  return os.str();
}

// Scenario from config keys. A `scenario` (or `name`) key naming a preset
// supplies defaults; the remaining keys override them.
inline Scenario scenario_from_config(const KeyValues& kv) {
  Scenario s;
  std::string base;
  if (auto it = kv.find("scenario"); it != kv.end()) base = it->second;
  else if (auto jt = kv.find("name"); jt != kv.end()) base = jt->second;
  bool is_preset = false;
  for (const auto& p : preset_names()) is_preset = is_preset || p == base;
  if (is_preset) s = preset(base);
  else s.name = base.empty() ? "custom" : base;

  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("deltas")) s.deltas = detail::parse_reals(*v);
    if (auto v = get("sigma-theta")) s.sigma_theta = std::stod(*v);
    if (auto v = get("persons")) s.persons = std::stoul(*v);
    if (auto v = get("polluted-items")) s.polluted_items = detail::parse_items(*v);
    if (auto v = get("trait-blocks")) s.trait_blocks = detail::parse_blocks(*v);
    if (auto v = get("true-partition")) {
      auto blocks = detail::parse_blocks(*v);
      if (blocks.empty()) s.true_partition.reset();
      else s.true_partition = Partition(std::move(blocks));
    }
    if (auto v = get("seed")) s.seed = std::stoull(*v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario value: ") + e.what());
  } catch (const std::out_of_range&) {
    throw ConfigError("scenario value out of range");
  }
  if (!is_preset && s.description.empty()) s.description = "custom scenario";
  if (is_preset) {
    const auto p = preset(base);
    if (s.deltas != p.deltas || s.sigma_theta != p.sigma_theta || s.persons != p.persons ||
        s.polluted_items != p.polluted_items || s.trait_blocks != p.trait_blocks ||
        s.true_partition != p.true_partition)
      s.description = "preset " + base + " with changed fields";
  }
  s.validate();
  return s;
}

}  // namespace raschsel
