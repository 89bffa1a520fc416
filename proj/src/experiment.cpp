// Copyright (c) the bbc project contributors.
// Licensed under the Apache 2.0 License.

#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bbc {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string proposals_string(const std::vector<Value>& props) {
  std::string s;
  for (Value v : props) s.push_back(v ? '1' : '0');
  return s;
}

uint64_t fraction_key(double fraction) {
  return static_cast<uint64_t>(std::llround(fraction * 1000000.0));
}

std::string write_failing_trace(const ExperimentSpec& spec, const SimParams& params,
                                uint64_t run_seed) {
  SimParams traced = params;
  traced.capture_trace = true;
  SimResult res = run_instance(traced);
  namespace fs = std::filesystem;
  fs::path dir = spec.out_dir.empty() ? fs::temp_directory_path() : fs::path(spec.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  fs::path path = dir / ("failing_trace_" + std::to_string(run_seed) + ".txt");
  std::ofstream out(path, std::ios::trunc);
  for (const auto& line : res.trace) out << line << "\n";
  return path.string();
}

}  // namespace

std::string raw_csv_header() {
  return "n,fraction,rep,seed,proposals,decided,term_round,latency,vote_msgs,cert_msgs,live";
}

std::string metrics_csv_header() {
  return "n,fraction,runs,latency_mean,latency_min,latency_max,round_mean,round_max,msgs_mean";
}

SimParams sim_params_for(const ExperimentSpec& spec, uint32_t n, double fraction, uint32_t rep,
                         const std::vector<Value>& proposals, uint64_t run_seed) {
  SimParams p;
  p.config.n = n;
  p.config.t = spec.t_for(n);
  p.config.instance_id = run_seed;
  p.config.timers = spec.timers;
  p.config.coord_free_rounds = spec.coord_free_rounds;
  p.config.stop_policy = spec.stop_policy;
  p.proposals = proposals;
  p.synchrony = spec.synchrony;
  p.adversary = spec.adversary;
  if (spec.corrupted_auto) {
    p.adversary.corrupted.clear();
    for (ProcessId i = 0; i < spec.t_for(n); ++i) p.adversary.corrupted.insert(i);
  }
  p.seed = run_seed;
  p.round_cap = spec.round_cap;
  p.capture_trace = spec.capture_trace;
  (void)fraction;
  (void)rep;
  return p;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  ExperimentResult result;
  std::ostringstream raw, metrics;
  raw << raw_csv_header() << "\n";
  metrics << metrics_csv_header() << "\n";

  for (uint32_t n : spec.n_list) {
    const uint32_t t = spec.t_for(n);
    if (n <= 3 * t)
      throw std::runtime_error("experiment: n=" + std::to_string(n) + " violates n > 3t");
    if (spec.proposals && spec.proposals->size() != n)
      throw std::runtime_error("experiment: explicit proposals sized for wrong n");

    std::vector<double> fractions = spec.fractions;
    if (spec.proposals) {
      double ones = 0;
      for (Value v : *spec.proposals) ones += v;
      fractions = {ones / n};
    }

    for (double fraction : fractions) {
      std::vector<RunRow> bucket;
      for (uint32_t rep = 0; rep < spec.repeats; ++rep) {
        const uint64_t fkey = spec.proposals ? 0xffffffffULL : fraction_key(fraction);
        const uint64_t run_seed = mix_seed({spec.seed, n, fkey, rep});
        const std::vector<Value> proposals =
            spec.proposals ? *spec.proposals : draw_proposals(n, fraction, run_seed);
        SimParams params = sim_params_for(spec, n, fraction, rep, proposals, run_seed);
        SimResult res = run_instance(params);
        InvariantReport inv = check_invariants(params, res);

        RunRow row;
        row.n = n;
        row.fraction = fraction;
        row.rep = rep;
        row.seed = run_seed;
        row.proposals = proposals_string(proposals);
        row.live = res.liveness_ok;
        for (ProcessId i = 0; i < n; ++i) {
          const auto& o = res.outcomes[i];
          if (o.faulty || !o.decided) continue;
          row.decided = *o.decided;
          row.term_round = std::max(row.term_round, *o.decision_round);
          row.latency = std::max(row.latency, o.decide_time);
        }
        row.vote_msgs = res.vote_msgs;
        row.cert_msgs = res.cert_msgs;
        result.rows.push_back(row);
        bucket.push_back(row);

        raw << row.n << "," << fmt(row.fraction) << "," << row.rep << "," << row.seed << ","
            << row.proposals << "," << (row.decided ? std::to_string(int(*row.decided)) : "-")
            << "," << row.term_round << "," << row.latency << "," << row.vote_msgs << ","
            << row.cert_msgs << "," << row.live << "\n";

        if (!inv.all_pass) {
          result.failure = "seed=" + std::to_string(run_seed) + " " + inv.first_failure;
          result.failing_trace_path = write_failing_trace(spec, params, run_seed);
          result.raw_csv = raw.str();
          result.metrics_csv = metrics.str();
          return result;
        }
      }

      MetricsRow m;
      m.n = n;
      m.fraction = fraction;
      m.runs = static_cast<uint32_t>(bucket.size());
      m.latency_min = bucket.empty() ? 0 : bucket[0].latency;
      double lat_sum = 0, round_sum = 0, msg_sum = 0;
      for (const auto& row : bucket) {
        lat_sum += static_cast<double>(row.latency);
        round_sum += row.term_round;
        msg_sum += static_cast<double>(row.vote_msgs + row.cert_msgs);
        m.latency_min = std::min(m.latency_min, row.latency);
        m.latency_max = std::max(m.latency_max, row.latency);
        m.round_max = std::max(m.round_max, row.term_round);
      }
      if (!bucket.empty()) {
        m.latency_mean = lat_sum / bucket.size();
        m.round_mean = round_sum / bucket.size();
        m.msgs_mean = msg_sum / bucket.size();
      }
      result.metrics.push_back(m);
      metrics << m.n << "," << fmt(m.fraction) << "," << m.runs << "," << fmt(m.latency_mean)
              << "," << m.latency_min << "," << m.latency_max << "," << fmt(m.round_mean) << ","
              << m.round_max << "," << fmt(m.msgs_mean) << "\n";
    }
  }

  result.raw_csv = raw.str();
  result.metrics_csv = metrics.str();
  return result;
}

FuzzReport fuzz_safety(uint64_t iterations, uint64_t seed, std::vector<uint32_t> n_set) {
  if (n_set.empty()) n_set = {4, 7, 10};
  FuzzReport report;
  report.iterations = iterations;

  for (uint64_t it = 0; it < iterations; ++it) {
    const uint64_t it_seed = mix_seed({seed, 0x66757a7aULL, it});
    SplitMix64 rng(it_seed);

    SimParams p;
    p.config.n = n_set[rng.next() % n_set.size()];
    p.config.t = (p.config.n - 1) / 3;
    p.config.instance_id = it_seed;
    p.seed = it_seed;
    p.round_cap = 64;
    p.capture_trace = false;

    static const AdversaryKind kinds[] = {AdversaryKind::Silent, AdversaryKind::Crash,
                                          AdversaryKind::Equivocate,
                                          AdversaryKind::DelayRelease};
    p.adversary.kind = kinds[rng.next() % 4];
    std::vector<ProcessId> ids(p.config.n);
    for (ProcessId i = 0; i < p.config.n; ++i) ids[i] = i;
    for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.next() % i]);
    for (uint32_t i = 0; i < p.config.t; ++i) p.adversary.corrupted.insert(ids[i]);
    p.adversary.crash_at_round = static_cast<Round>(rng.range(0, 6));
    p.adversary.hold = rng.range(1, 100);
    if (rng.next() % 2 == 0)
      for (ProcessId i = 0; i < p.config.n; ++i)
        if (!p.adversary.corrupted.count(i) && rng.next() % 2 == 0)
          p.adversary.targets.insert(i);

    p.synchrony.gst = rng.range(0, 40);
    p.synchrony.delta = rng.range(1, 6);
    p.synchrony.pre_gst_max = rng.range(p.synchrony.delta, 12);

    static const double fracs[] = {0.25, 0.5, 0.75};
    const double fraction = fracs[rng.next() % 3];
    p.proposals = draw_proposals(p.config.n, fraction, it_seed);

    SimResult res = run_instance(p);
    InvariantReport inv = check_invariants(p, res);
    ++report.by_adversary[adversary_name(p.adversary.kind)];
    if (!inv.all_pass) {
      ++report.violations;
      if (report.failures.size() < 20)
        report.failures.push_back("seed=" + std::to_string(it_seed) + " " + inv.first_failure);
    }
    if (!res.liveness_ok) ++report.liveness_timeouts;
  }

  std::ostringstream os;
  os << "fuzz iterations=" << report.iterations << " violations=" << report.violations
     << " liveness_timeouts=" << report.liveness_timeouts << "\n";
  for (const auto& [name, count] : report.by_adversary)
    os << "  adversary " << name << ": " << count << " runs\n";
  for (const auto& f : report.failures) os << "  FAILURE " << f << "\n";
  report.text = os.str();
  return report;
}

ModelCheckReport check_message_model(const std::vector<uint32_t>& n_list, uint64_t seed) {
  ModelCheckReport report;
  std::ostringstream os;
  os << "n,scenario,term_round,expected,actual,simultaneous,ok\n";

  for (uint32_t n : n_list) {
    struct Scen {
      const char* name;
      std::optional<Value> unanimous;
    };
    static const Scen scens[] = {{"unanimous1", Value{1}}, {"unanimous0", Value{0}},
                                 {"split", std::nullopt}};
    for (const auto& scen : scens) {
      const uint64_t run_seed = mix_seed({seed, 0x6d6f64656cULL, n, fnv1a64({
                                              reinterpret_cast<const uint8_t*>(scen.name),
                                              strlen(scen.name)})});
      SimParams p;
      p.config.n = n;
      p.config.t = (n - 1) / 3;
      p.config.instance_id = run_seed;
      p.config.stop_policy = StopPolicy::Delayed;
      p.seed = run_seed;
      p.capture_trace = false;
      p.synchrony = {0, 3, 3};
      p.proposals = scen.unanimous ? std::vector<Value>(n, *scen.unanimous)
                                   : draw_proposals(n, 0.5, run_seed);

      SimResult res = run_instance(p);
      ModelCheckRow row;
      row.n = n;
      row.scenario = scen.name;
      bool all_decided = true;
      std::set<Round> rounds;
      for (ProcessId i = 0; i < n; ++i) {
        if (!res.outcomes[i].decided)
          all_decided = false;
        else {
          rounds.insert(*res.outcomes[i].decision_round);
          row.term_round = std::max(row.term_round, *res.outcomes[i].decision_round);
        }
      }
      row.simultaneous = all_decided && rounds.size() == 1 && res.cert_broadcasts == 0;
      row.expected = static_cast<uint64_t>(n) * n * (row.term_round + 1);
      row.actual = res.vote_msgs;
      row.ok = all_decided && (!row.simultaneous || row.actual == row.expected);
      report.rows.push_back(row);
      report.all_ok = report.all_ok && row.ok;
      os << row.n << "," << row.scenario << "," << row.term_round << "," << row.expected << ","
         << row.actual << "," << row.simultaneous << "," << row.ok << "\n";
    }
  }
  report.text = os.str();
  return report;
}

}  // namespace bbc
