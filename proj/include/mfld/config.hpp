#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/flow_state.hpp"
#include "mfld/problem.hpp"

namespace mfld {

// Everything a run needs, parsed from a flat key=value file.
struct ExperimentConfig {
  std::string problem = "lq";  // lq | nn
  double T = 1.0;
  std::size_t K = 20;
  std::size_t M = 64;
  std::size_t N = 256;
  std::size_t p = 1;
  std::size_t d = 1;
  double sigma = 1.0;
  double q_metric = 2.0;
  double ds = 1e-3;
  double total_s = 8.0;
  std::size_t refresh_stride = 1;
  std::size_t checkpoint_stride = 200;
  AdjointMode adjoint_mode = AdjointMode::regression;
  std::uint64_t seed = 1;
  std::vector<double> xi{0.0};
  LqParams lq;
  double init_shift = 0.0;       // added to every prior-sampled particle
  double tolerance_scale = 1.0;  // multiplies every acceptance tolerance
  std::set<std::string> checks;  // empty: all

  FlowConfig flow() const {
    FlowConfig f;
    f.sigma = sigma;
    f.ds = ds;
    f.total_s = total_s;
    f.refresh_stride = refresh_stride;
    f.checkpoint_stride = checkpoint_stride;
    f.adjoint_mode = adjoint_mode;
    f.inner_seed = seed;
    return f;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("bad value for key " + key + ": '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("bad value for key " + key + ": '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"problem", "T", "K", "M", "N", "sigma", "ds", "total_s", "seed"};
  return keys;
}

// Lines are key = value; '#' starts a comment. Unknown and repeated keys are
// errors, as are missing required keys ("missing key: sigma").
inline std::map<std::string, std::string> parse_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("duplicate key: " + key);
  }
  return kv;
}

inline ExperimentConfig parse_config(std::istream& is) {
  auto kv = parse_key_values(is);
  for (const auto& key : required_config_keys())
    if (!kv.count(key)) throw ConfigError("missing key: " + key);

  ExperimentConfig c;
  for (const auto& [key, v] : kv) {
    using namespace detail;
    if (key == "problem") {
      if (v != "lq" && v != "nn") throw ConfigError("bad value for key problem: '" + v + "' (lq | nn)");
      c.problem = v;
    } else if (key == "T") c.T = parse_double(key, v);
    else if (key == "K") c.K = parse_uint(key, v);
    else if (key == "M") c.M = parse_uint(key, v);
    else if (key == "N") c.N = parse_uint(key, v);
    else if (key == "p") c.p = parse_uint(key, v);
    else if (key == "d") c.d = parse_uint(key, v);
    else if (key == "sigma") c.sigma = parse_double(key, v);
    else if (key == "q_metric") c.q_metric = parse_double(key, v);
    else if (key == "ds") c.ds = parse_double(key, v);
    else if (key == "total_s") c.total_s = parse_double(key, v);
    else if (key == "refresh_stride") c.refresh_stride = parse_uint(key, v);
    else if (key == "checkpoint_stride") c.checkpoint_stride = parse_uint(key, v);
    else if (key == "adjoint_mode") {
      if (v == "riccati") c.adjoint_mode = AdjointMode::riccati;
      else if (v == "regression") c.adjoint_mode = AdjointMode::regression;
      else throw ConfigError("bad value for key adjoint_mode: '" + v + "' (riccati | regression)");
    } else if (key == "seed") c.seed = parse_uint(key, v);
    else if (key == "xi") {
      c.xi.clear();
      for (const auto& item : split_list(v)) c.xi.push_back(parse_double(key, item));
    } else if (key == "b") c.lq.b = parse_double(key, v);
    else if (key == "c") c.lq.c = parse_double(key, v);
    else if (key == "q_run") c.lq.q_run = parse_double(key, v);
    else if (key == "r_run") c.lq.r_run = parse_double(key, v);
    else if (key == "g_term_quad") c.lq.g_term_quad = parse_double(key, v);
    else if (key == "g_term_lin") c.lq.g_term_lin = parse_double(key, v);
    else if (key == "gamma") c.lq.gamma_const = parse_double(key, v);
    else if (key == "init_shift") c.init_shift = parse_double(key, v);
    else if (key == "tolerance_scale") c.tolerance_scale = parse_double(key, v);
    else if (key == "checks") {
      for (const auto& item : split_list(v)) c.checks.insert(item);
    } else throw ConfigError("unknown key: " + key);
  }

  require(c.T > 0.0, "bad value for key T: must be > 0");
  require(c.K >= 1, "bad value for key K: must be >= 1");
  require(c.M >= 1, "bad value for key M: must be >= 1");
  require(c.N >= 2, "bad value for key N: must be >= 2");
  require(c.sigma > 0.0, "bad value for key sigma: must be > 0 (the entropy term is undefined at 0)");
  require(c.q_metric >= 1.0, "bad value for key q_metric: must be >= 1");
  require(c.ds > 0.0, "bad value for key ds: must be > 0");
  require(c.total_s >= 0.0, "bad value for key total_s: must be >= 0");
  require(c.total_s == 0.0 || c.total_s >= c.ds, "bad value for key total_s: must be 0 or >= ds");
  require(c.refresh_stride >= 1, "bad value for key refresh_stride: must be >= 1");
  require(c.tolerance_scale > 0.0, "bad value for key tolerance_scale: must be > 0");
  require(c.xi.size() == c.d, "bad value for key xi: needs d entries");
  if (c.problem == "lq") require(c.d == 1 && c.p == 1, "bad value for key p: problem=lq needs d = p = 1");
  if (c.problem == "nn") require(c.d == 1 && c.p == 2, "bad value for key p: problem=nn needs d = 1, p = 2");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  return parse_config(is);
}

}  // namespace mfld
