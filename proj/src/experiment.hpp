// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#pragma once

#include "scenario.hpp"

namespace bbc {

struct RunRow {
  uint32_t n = 0;
  double fraction = 0;
  uint32_t rep = 0;
  uint64_t seed = 0;
  std::string proposals;
  std::optional<Value> decided;
  Round term_round = 0;  // max decision round over non-faulty processes
  Tick latency = 0;      // tick at which the last non-faulty process decided
  uint64_t vote_msgs = 0;
  uint64_t cert_msgs = 0;
  bool live = false;
};

struct MetricsRow {
  uint32_t n = 0;
  double fraction = 0;
  uint32_t runs = 0;
  double latency_mean = 0;
  Tick latency_min = 0;
  Tick latency_max = 0;
  double round_mean = 0;
  Round round_max = 0;
  double msgs_mean = 0;
};

struct ExperimentResult {
  std::vector<RunRow> rows;
  std::vector<MetricsRow> metrics;
  std::string raw_csv;
  std::string metrics_csv;
  // Set on the first safety violation; the experiment stops there.
  std::string failure;
  std::string failing_trace_path;
};

// Sweeps repeats x |n list| x |fractions| simulated runs, checks every run's
// safety invariants, and aggregates.  A violation aborts the sweep, writing
// the offending trace next to the other outputs when out_dir is set.
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::string metrics_csv_header();
std::string raw_csv_header();

SimParams sim_params_for(const ExperimentSpec& spec, uint32_t n, double fraction, uint32_t rep,
                         const std::vector<Value>& proposals, uint64_t run_seed);

struct FuzzReport {
  uint64_t iterations = 0;
  uint64_t violations = 0;
  uint64_t liveness_timeouts = 0;
  std::vector<std::string> failures;  // "seed=... invariant: detail"
  std::map<std::string, uint64_t> by_adversary;
  std::string text;
};

// Randomized adversarial scenarios (silent, crash, equivocate, delay
// release), t = (n-1)/3 corrupted, random synchrony; asserts the safety
// invariants on every run.
FuzzReport fuzz_safety(uint64_t iterations, uint64_t seed, std::vector<uint32_t> n_set);

struct ModelCheckRow {
  uint32_t n = 0;
  std::string scenario;
  Round term_round = 0;
  uint64_t expected = 0;
  uint64_t actual = 0;
  bool simultaneous = false;
  bool ok = false;
};

struct ModelCheckReport {
  std::vector<ModelCheckRow> rows;
  bool all_ok = true;
  std::string text;
};

// Fault-free runs with attached proofs and held-back certificates send
// exactly n^2 * (termination_round + 1) point-to-point vote messages.
ModelCheckReport check_message_model(const std::vector<uint32_t>& n_list, uint64_t seed);

}  // namespace bbc
