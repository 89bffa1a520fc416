// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include "sim.hpp"

namespace bbc {

// Experiment description: a sweep over n values, proposal fractions and
// seeds, with one synchrony model and one adversary.  Parsed from a plain
// "key value" text file ('#' starts a comment).

struct ExperimentSpec {
  enum class Mode : uint8_t { Sim, Net } mode = Mode::Sim;
  std::vector<uint32_t> n_list = {4};
  std::optional<uint32_t> t_override;
  std::vector<double> fractions = {0.5};
  std::optional<std::vector<Value>> proposals;  // overrides fractions
  uint32_t repeats = 10;
  uint64_t seed = 1;
  SynchronyModel synchrony{0, 3, 3};
  AdversaryStrategy adversary;
  bool corrupted_auto = false;  // corrupted = first t ids, resolved per n
  TimerPolicy timers;
  Round coord_free_rounds = 10;
  StopPolicy stop_policy = StopPolicy::Delayed;
  Round round_cap = 64;
  bool capture_trace = false;
  std::string out_dir;

  uint32_t t_for(uint32_t n) const {
    return t_override ? *t_override : (n - 1) / 3;
  }
};

ExperimentSpec parse_scenario_text(const std::string& text);
ExperimentSpec parse_scenario_file(const std::string& path);

// Bernoulli(fraction) proposal vector, one draw per process.
std::vector<Value> draw_proposals(uint32_t n, double fraction, uint64_t seed);

}  // namespace bbc
