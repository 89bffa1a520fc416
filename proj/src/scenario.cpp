// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "scenario.hpp"

#include <fstream>
#include <sstream>

namespace bbc {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',' || isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

uint64_t parse_u64(const std::string& key, const std::string& s) {
  size_t pos = 0;
  uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != s.size()) throw std::runtime_error("scenario: bad integer for '" + key + "': " + s);
  return v;
}

double parse_double(const std::string& key, const std::string& s) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != s.size()) throw std::runtime_error("scenario: bad number for '" + key + "': " + s);
  return v;
}

}  // namespace

ExperimentSpec parse_scenario_text(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::string rest;
    std::getline(ls, rest);
    size_t b = rest.find_first_not_of(" \t=");
    rest = b == std::string::npos ? "" : rest.substr(b);
    while (!rest.empty() && isspace(static_cast<unsigned char>(rest.back()))) rest.pop_back();
    if (rest.empty())
      throw std::runtime_error("scenario line " + std::to_string(lineno) + ": missing value");

    if (key == "mode") {
      if (rest == "sim")
        spec.mode = ExperimentSpec::Mode::Sim;
      else if (rest == "net")
        spec.mode = ExperimentSpec::Mode::Net;
      else
        throw std::runtime_error("scenario: unknown mode " + rest);
    } else if (key == "n") {
      spec.n_list.clear();
      for (const auto& p : split_list(rest))
        spec.n_list.push_back(static_cast<uint32_t>(parse_u64(key, p)));
      if (spec.n_list.empty()) throw std::runtime_error("scenario: empty n list");
    } else if (key == "t") {
      if (rest == "auto")
        spec.t_override.reset();
      else
        spec.t_override = static_cast<uint32_t>(parse_u64(key, rest));
    } else if (key == "fraction") {
      spec.fractions.clear();
      for (const auto& p : split_list(rest)) {
        double f = parse_double(key, p);
        if (f < 0.0 || f > 1.0) throw std::runtime_error("scenario: fraction out of [0,1]");
        spec.fractions.push_back(f);
      }
      if (spec.fractions.empty()) throw std::runtime_error("scenario: empty fraction list");
    } else if (key == "proposals") {
      std::vector<Value> props;
      for (const auto& p : split_list(rest)) {
        uint64_t v = parse_u64(key, p);
        if (!value_ok(static_cast<uint32_t>(v)))
          throw std::runtime_error("scenario: proposals must be 0 or 1");
        props.push_back(static_cast<Value>(v));
      }
      spec.proposals = std::move(props);
    } else if (key == "repeats") {
      spec.repeats = static_cast<uint32_t>(parse_u64(key, rest));
      if (spec.repeats < 1) throw std::runtime_error("scenario: repeats must be >= 1");
    } else if (key == "seed") {
      spec.seed = parse_u64(key, rest);
    } else if (key == "gst") {
      spec.synchrony.gst = parse_u64(key, rest);
    } else if (key == "delta") {
      spec.synchrony.delta = parse_u64(key, rest);
    } else if (key == "pre_gst_max") {
      spec.synchrony.pre_gst_max = parse_u64(key, rest);
    } else if (key == "timer_base") {
      spec.timers.base = parse_u64(key, rest);
    } else if (key == "timer_growth") {
      spec.timers.growth = parse_u64(key, rest);
    } else if (key == "timer_free_rounds") {
      spec.timers.free_rounds = static_cast<Round>(parse_u64(key, rest));
    } else if (key == "coord_free_rounds") {
      spec.coord_free_rounds = static_cast<Round>(parse_u64(key, rest));
    } else if (key == "stop") {
      auto p = stop_policy_from_name(rest);
      if (!p) throw std::runtime_error("scenario: unknown stop policy " + rest);
      spec.stop_policy = *p;
    } else if (key == "round_cap") {
      spec.round_cap = static_cast<Round>(parse_u64(key, rest));
    } else if (key == "adversary") {
      auto k = adversary_from_name(rest);
      if (!k) throw std::runtime_error("scenario: unknown adversary " + rest);
      spec.adversary.kind = *k;
    } else if (key == "corrupted") {
      spec.adversary.corrupted.clear();
      spec.corrupted_auto = rest == "auto";
      if (!spec.corrupted_auto)
        for (const auto& p : split_list(rest))
          spec.adversary.corrupted.insert(static_cast<ProcessId>(parse_u64(key, p)));
    } else if (key == "crash_at_round") {
      spec.adversary.crash_at_round = static_cast<Round>(parse_u64(key, rest));
    } else if (key == "hold") {
      spec.adversary.hold = parse_u64(key, rest);
    } else if (key == "targets") {
      spec.adversary.targets.clear();
      for (const auto& p : split_list(rest))
        spec.adversary.targets.insert(static_cast<ProcessId>(parse_u64(key, p)));
    } else if (key == "trace") {
      spec.capture_trace = parse_u64(key, rest) != 0;
    } else if (key == "out") {
      spec.out_dir = rest;
    } else {
      throw std::runtime_error("scenario line " + std::to_string(lineno) + ": unknown key '" +
                               key + "'");
    }
  }
  return spec;
}

ExperimentSpec parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

std::vector<Value> draw_proposals(uint32_t n, double fraction, uint64_t seed) {
  SplitMix64 rng(mix_seed({seed, 0x70726f70ULL}));
  std::vector<Value> props(n);
  for (uint32_t i = 0; i < n; ++i) props[i] = rng.unit() < fraction ? 1 : 0;
  return props;
}

}  // namespace bbc
