#include "psa/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "psa/errors.hpp"
#include "psa/exact_attention.hpp"
#include "psa/hyper_attention.hpp"
#include "psa/metrics.hpp"
#include "psa/planted.hpp"
#include "psa/prescore.hpp"

namespace psa {

using nlohmann::json;

namespace {

constexpr double kRequired = std::numeric_limits<double>::quiet_NaN();

struct GridKey {
  const char* name;
  double fallback;  // used when the config omits the key; NaN means required
  bool integral;
  bool inner;  // swept inside one task rather than expanded into tasks
};

struct ExperimentSpec {
  Experiment experiment;
  const char* name;
  std::vector<GridKey> grid;
  json settings;
};

const std::vector<ExperimentSpec>& specs() {
  static const std::vector<ExperimentSpec> all = {
      {Experiment::kTheorem1,
       "THEOREM1",
       {{"n", 2000, true, false},
        {"d", 16, true, false},
        {"epsilon", 0.1, false, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false}},
       {{"ratio_threshold", 10.0},
        {"pass_rate", 0.95},
        {"agreement_rate", 0.9},
        {"restarts", 10},
        {"seeding_trials", 0},
        {"sketch_rows", 0}}},
      {Experiment::kTheorem2,
       "THEOREM2",
       {{"n", 2000, true, false},
        {"d", 16, true, false},
        {"epsilon", 0.1, false, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false},
        {"k", 0, true, false}},
       {{"pass_rate", 0.95},
        {"concentration_factor", 5.0},
        {"restarts", 10},
        {"seeding_trials", 0},
        {"max_iters", 100}}},
      {Experiment::kClaim1,
       "CLAIM1",
       {{"n", 2000, true, false},
        {"d", 16, true, false},
        {"epsilon", 0.1, false, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false},
        {"p", kRequired, false, false}},
       {{"pass_rate", 0.9}, {"restarts", 10}, {"seeding_trials", 8}, {"max_iters", 100}}},
      {Experiment::kCorollary1,
       "COROLLARY1",
       {{"n", 2000, true, false},
        {"d", 16, true, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false}},
       {{"pass_rate", 0.95}, {"restarts", 20}, {"seeding_trials", 0}, {"max_iters", 100}}},
      {Experiment::kCounterexample,
       "COUNTEREXAMPLE",
       {{"n", 1000, true, false}, {"d", 8, true, false}, {"big_norm", 100, false, false}},
       {{"restarts", 5}}},
      {Experiment::kCoverage,
       "COVERAGE",
       {{"n", 64, true, false},
        {"d", 4, true, false},
        {"epsilon", 0.25, false, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false},
        {"s", kRequired, true, true},
        {"eps_heavy", kRequired, false, true}},
       {{"method", "KMEANS"},
        {"query_scale", 4.0},
        {"random_subsets", 100},
        {"restarts", 5},
        {"pass_rate", 0.9}}},
      {Experiment::kSpeed,
       "SPEED",
       {{"n", kRequired, true, false},
        {"d", 16, true, false},
        {"block_size", 64, true, false},
        {"s", 256, true, false},
        {"lsh_bits", 8, true, false}},
       {{"method", "KMEANS"},
        {"repetitions", 5},
        {"warmup", 1},
        {"restarts", 1},
        {"max_iters", 25},
        {"slope_max", 1.5},
        {"exact_slope_min", 1.8},
        {"speedup_n", 8192},
        {"speedup_min", 2.0}}},
      {Experiment::kApproxError,
       "APPROX_ERROR",
       {{"n", 512, true, false},
        {"d", 8, true, false},
        {"epsilon", 0.1, false, false},
        {"c_S", 0.1, false, false},
        {"c_N", 0.1, false, false},
        {"block_size", 64, true, false},
        {"lsh_bits", 8, true, false}},
       {{"residual_samples", 64},
        {"uniform_samples", 128},
        {"query_scale", 4.0},
        {"normalize", true},
        {"pass_rate", 0.9}}},
  };
  return all;
}

const ExperimentSpec& spec_for(Experiment e) {
  for (const auto& s : specs()) {
    if (s.experiment == e) return s;
  }
  throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------- grid ---

struct Point {
  std::map<std::string, double> values;

  double real(const std::string& key) const { return values.at(key); }
  std::size_t count(const std::string& key) const {
    return static_cast<std::size_t>(values.at(key));
  }
};

std::vector<double> grid_values(const ExperimentConfig& cfg, const GridKey& key) {
  const auto it = cfg.grid.find(key.name);
  if (it != cfg.grid.end()) return it->second;
  return {key.fallback};
}

// Cartesian product over the non-inner keys, first key slowest.
std::vector<Point> expand(const ExperimentConfig& cfg) {
  const auto& spec = spec_for(cfg.experiment);
  std::vector<Point> points(1);
  for (const auto& key : spec.grid) {
    if (key.inner) continue;
    std::vector<Point> next;
    for (const Point& p : points) {
      for (double v : grid_values(cfg, key)) {
        Point q = p;
        q.values[key.name] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

std::vector<double> inner_values(const ExperimentConfig& cfg, const char* name) {
  for (const auto& key : spec_for(cfg.experiment).grid) {
    if (key.inner && std::string_view(key.name) == name) {
      auto v = grid_values(cfg, key);
      std::sort(v.begin(), v.end());
      return v;
    }
  }
  throw ConfigError(std::string("no inner grid key ") + name);
}

std::string fmt(double x) { return format_double(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }
std::string fmt(std::uint64_t x, int) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "1" : "0"; }

std::vector<std::string> param_cells(const ExperimentConfig& cfg, const Point& p) {
  std::vector<std::string> cells;
  for (const auto& key : spec_for(cfg.experiment).grid) {
    if (!key.inner) cells.push_back(fmt(p.real(key.name)));
  }
  return cells;
}

std::vector<std::string> param_columns(const ExperimentConfig& cfg) {
  std::vector<std::string> cols;
  for (const auto& key : spec_for(cfg.experiment).grid) {
    if (!key.inner) cols.emplace_back(key.name);
  }
  return cols;
}

json point_json(const Point& p) {
  json j = json::object();
  for (const auto& [k, v] : p.values) j[k] = v;
  return j;
}

double setting(const ExperimentConfig& cfg, const char* key) {
  return cfg.settings.at(key).get<double>();
}
std::size_t setting_count(const ExperimentConfig& cfg, const char* key) {
  return cfg.settings.at(key).get<std::size_t>();
}

// ---------------------------------------------------------------- tasks ---

struct Task {
  std::size_t point;
  std::uint64_t seed;
};

std::vector<Task> make_tasks(std::size_t points, const std::vector<std::uint64_t>& seeds) {
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < points; ++p) {
    for (std::uint64_t s : seeds) tasks.push_back({p, s});
  }
  return tasks;
}

// Runs fn(task) for every task on the worker pool and returns the results in
// task order, so the output never depends on scheduling.
template <class R>
std::vector<R> run_tasks(const std::vector<Task>& tasks, Exec exec,
                         const std::function<R(const Task&)>& fn) {
  std::vector<R> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  for_each_index(tasks.size(), exec, [&](std::size_t i) {
    try {
      results[i] = fn(tasks[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

PlantedConfig planted_config(const Point& p, std::uint64_t seed, double epsilon) {
  PlantedConfig pc;
  pc.n = p.count("n");
  pc.d = p.count("d");
  pc.epsilon = epsilon;
  pc.c_S = p.real("c_S");
  pc.c_N = p.real("c_N");
  pc.seed = seed;
  return pc;
}

PreScoreConfig clustering_config(const ExperimentConfig& cfg, Method method, std::uint64_t seed) {
  PreScoreConfig c;
  c.method = method;
  c.seed = seed;
  c.restarts = setting_count(cfg, "restarts");
  if (cfg.settings.contains("seeding_trials")) c.seeding_trials = setting_count(cfg, "seeding_trials");
  if (cfg.settings.contains("max_iters")) c.max_iters = setting_count(cfg, "max_iters");
  return c;
}

double rate(std::size_t hits, std::size_t total) {
  return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

// Cluster id of each label, if every label maps to exactly one cluster.
bool label_clusters(const std::vector<std::size_t>& labels,
                    const std::vector<std::size_t>& assignment,
                    std::map<std::size_t, std::size_t>& cluster_of) {
  cluster_of.clear();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = cluster_of.emplace(labels[i], assignment[i]);
    if (!inserted && it->second != assignment[i]) return false;
  }
  return true;
}

// ------------------------------------------------------------- THEOREM1 ---

ExperimentReport run_theorem1(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                              Exec exec) {
  struct Out {
    std::vector<std::string> row;
    bool separated = false;
    bool contained = false;
    bool agrees = false;
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);
  const double threshold = setting(cfg, "ratio_threshold");

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const PlantedConfig pc = planted_config(p, t.seed, p.real("epsilon"));
    const PlantedInstance inst = generate_planted(pc);
    const std::size_t signal = pc.d * copies_per_direction(pc.epsilon);

    const auto h = exact_leverage_scores(inst.matrix);
    double min_signal = std::numeric_limits<double>::infinity();
    double max_noise = 0.0;
    std::set<std::size_t> signal_rows;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (inst.labels[i] != 0) {
        min_signal = std::min(min_signal, h[i]);
        signal_rows.insert(i);
      } else {
        max_noise = std::max(max_noise, h[i]);
      }
    }
    const double ratio = max_noise > 0.0 ? min_signal / max_noise
                                         : std::numeric_limits<double>::infinity();

    PreScoreConfig lev;
    lev.method = Method::kLeverage;
    lev.s = signal;
    lev.sketch_rows = setting_count(cfg, "sketch_rows");
    Rng sketch_rng = Rng(t.seed).split(1);
    const auto approx = prescore(inst.matrix, lev, sketch_rng, Exec::kSerial);
    const bool contained =
        std::set<std::size_t>(approx.indices.begin(), approx.indices.end()) == signal_rows;

    PreScoreConfig km = clustering_config(cfg, Method::kKMeans, t.seed);
    km.s = signal;
    Rng unused(t.seed);
    const auto selected = prescore(inst.matrix, km, unused, Exec::kSerial);
    lev.method = Method::kLeverageExact;
    const auto top = prescore(inst.matrix, lev, unused, Exec::kSerial);
    const bool agrees = std::set<std::size_t>(selected.indices.begin(), selected.indices.end()) ==
                        std::set<std::size_t>(top.indices.begin(), top.indices.end());

    Out o;
    o.separated = ratio > threshold;
    o.contained = contained;
    o.agrees = agrees;
    o.row = param_cells(cfg, p);
    o.row.insert(o.row.end(), {fmt(t.seed, 0), fmt(min_signal), fmt(max_noise), fmt(ratio),
                               fmt(o.separated), fmt(contained), fmt(agrees)});
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "min_signal_leverage", "max_noise_leverage", "ratio", "separated",
                        "approx_top_is_signal", "kmeans_matches_leverage"}) {
    report.results.columns.emplace_back(c);
  }
  json per_point = json::array();
  double min_sep = 1.0;
  double min_agree = 1.0;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::size_t sep = 0, cont = 0, agree = 0;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].point != pi) continue;
      sep += outs[ti].separated;
      cont += outs[ti].contained;
      agree += outs[ti].agrees;
    }
    const double sr = rate(sep, seeds.size());
    const double ar = rate(agree, seeds.size());
    min_sep = std::min(min_sep, sr);
    min_agree = std::min(min_agree, ar);
    per_point.push_back({{"params", point_json(points[pi])},
                         {"separation_pass_rate", sr},
                         {"approx_containment_rate", rate(cont, seeds.size())},
                         {"agreement_rate", ar}});
  }
  for (const auto& o : outs) report.results.rows.push_back(o.row);
  const bool sep_ok = min_sep >= setting(cfg, "pass_rate");
  const bool agree_ok = min_agree >= setting(cfg, "agreement_rate");
  report.summary = {{"separation_pass_rate", min_sep},
                    {"agreement_rate", min_agree},
                    {"separation_pass", sep_ok},
                    {"agreement_pass", agree_ok},
                    {"points", per_point}};
  report.pass = sep_ok && agree_ok;
  return report;
}

// ------------------------------------------------------------- THEOREM2 ---

ExperimentReport run_theorem2(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                              Exec exec) {
  struct Out {
    std::vector<std::string> row;
    bool recovered = false;
    bool concentrated = false;
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);
  const double factor = setting(cfg, "concentration_factor");

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const PlantedConfig pc = planted_config(p, t.seed, p.real("epsilon"));
    const PlantedInstance inst = generate_planted(pc);
    const std::size_t m = copies_per_direction(pc.epsilon);
    PreScoreConfig c = clustering_config(cfg, Method::kKMeans, t.seed);
    c.k = p.count("k");
    const Clustering cl = cluster(inst.matrix, c, Exec::kSerial);
    const double ari = recovery_score(inst.labels, cl.assignment);

    Out o;
    o.recovered = ari == 1.0;
    // Centroid deviation, as a fraction of the concentration bound.
    double signal_dev = std::numeric_limits<double>::quiet_NaN();
    double noise_dev = std::numeric_limits<double>::quiet_NaN();
    std::map<std::size_t, std::size_t> cluster_of;
    if (o.recovered && label_clusters(inst.labels, cl.assignment, cluster_of)) {
      const double sig_bound =
          factor * signal_sigma(pc) * std::sqrt(static_cast<double>(pc.d) / static_cast<double>(m));
      const double noise_bound =
          factor * noise_sigma(pc) *
          std::sqrt(static_cast<double>(pc.d) / static_cast<double>(pc.n - pc.d * m));
      signal_dev = 0.0;
      for (std::size_t j = 1; j <= pc.d; ++j) {
        const double dev =
            std::sqrt(squared_distance(cl.centroids.row(cluster_of.at(j)), inst.basis.row(j - 1)));
        signal_dev = std::max(signal_dev, dev / sig_bound);
      }
      noise_dev = std::sqrt(squared_norm(cl.centroids.row(cluster_of.at(0)))) / noise_bound;
      o.concentrated = signal_dev <= 1.0 && noise_dev <= 1.0;
    }
    o.row = param_cells(cfg, p);
    o.row.insert(o.row.end(),
                 {fmt(t.seed, 0), fmt(ari), fmt(planted_cost_gap(inst, cl)), fmt(cl.objective),
                  fmt(cl.iterations), fmt(signal_dev), fmt(noise_dev), fmt(o.recovered),
                  fmt(o.concentrated)});
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "ari", "cost_gap", "objective", "iterations",
                        "signal_centroid_dev", "noise_centroid_dev", "recovered", "concentrated"}) {
    report.results.columns.emplace_back(c);
  }
  json per_point = json::array();
  double min_rec = 1.0;
  double min_conc = 1.0;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::size_t rec = 0, conc = 0;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].point != pi) continue;
      rec += outs[ti].recovered;
      conc += outs[ti].concentrated;
    }
    const double rr = rate(rec, seeds.size());
    // Concentration is judged on the recovered clusterings only.
    const double cr = rate(conc, rec);
    min_rec = std::min(min_rec, rr);
    min_conc = std::min(min_conc, cr);
    per_point.push_back({{"params", point_json(points[pi])},
                         {"recovery_rate", rr},
                         {"concentration_rate", cr}});
  }
  for (const auto& o : outs) report.results.rows.push_back(o.row);
  const double need = setting(cfg, "pass_rate");
  report.summary = {{"recovery_rate", min_rec},
                    {"concentration_rate", min_conc},
                    {"points", per_point}};
  report.pass = min_rec >= need && min_conc >= need;
  return report;
}

// --------------------------------------------------------------- CLAIM1 ---

ExperimentReport run_claim1(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                            Exec exec) {
  struct Out {
    std::vector<std::string> row;
    bool recovered = false;
    int matches_reference = -1;  // -1 when p has no reference method
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const PlantedConfig pc = planted_config(p, t.seed, p.real("epsilon"));
    const PlantedInstance inst = generate_planted(pc);
    PreScoreConfig c = clustering_config(cfg, Method::kLpKMeans, t.seed);
    c.p = p.real("p");
    const Clustering cl = cluster(inst.matrix, c, Exec::kSerial);

    Out o;
    const double ari = recovery_score(inst.labels, cl.assignment);
    o.recovered = ari == 1.0;
    if (c.p == 2.0 || c.p == 1.0) {
      PreScoreConfig ref = c;
      ref.method = c.p == 2.0 ? Method::kKMeans : Method::kKMedian;
      o.matches_reference = cluster(inst.matrix, ref, Exec::kSerial).assignment == cl.assignment;
    }
    o.row = param_cells(cfg, p);
    o.row.insert(o.row.end(), {fmt(t.seed, 0), fmt(ari), fmt(cl.objective), fmt(cl.iterations),
                               fmt(o.recovered),
                               o.matches_reference < 0 ? "" : fmt(o.matches_reference == 1)});
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "ari", "objective", "iterations", "recovered", "matches_reference"}) {
    report.results.columns.emplace_back(c);
  }
  json per_point = json::array();
  double min_rec = 1.0;
  bool references_match = true;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::size_t rec = 0;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].point != pi) continue;
      rec += outs[ti].recovered;
      if (outs[ti].matches_reference == 0) references_match = false;
    }
    min_rec = std::min(min_rec, rate(rec, seeds.size()));
    per_point.push_back(
        {{"params", point_json(points[pi])}, {"recovery_rate", rate(rec, seeds.size())}});
  }
  for (const auto& o : outs) report.results.rows.push_back(o.row);
  report.summary = {{"recovery_rate", min_rec},
                    {"references_match", references_match},
                    {"points", per_point}};
  report.pass = min_rec >= setting(cfg, "pass_rate") && references_match;
  return report;
}

// ----------------------------------------------------------- COROLLARY1 ---

ExperimentReport run_corollary1(const ExperimentConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, Exec exec) {
  struct Out {
    std::vector<std::string> row;
    bool ok = false;
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const PlantedInstance inst = generate_planted(planted_config(p, t.seed, 1.0));
    const Clustering cl =
        cluster(inst.matrix, clustering_config(cfg, Method::kKMeans, t.seed), Exec::kSerial);
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t a : cl.assignment) ++sizes[a];
    std::size_t singletons = 0;
    std::set<std::size_t> noise_clusters;
    std::set<std::size_t> signal_clusters;
    for (std::size_t i = 0; i < inst.labels.size(); ++i) {
      if (inst.labels[i] == 0) {
        noise_clusters.insert(cl.assignment[i]);
      } else {
        signal_clusters.insert(cl.assignment[i]);
        singletons += sizes[cl.assignment[i]] == 1;
      }
    }
    const std::size_t d = p.count("d");
    Out o;
    const bool noise_shared = noise_clusters.size() == 1;
    o.ok = singletons == d && noise_shared;
    o.row = param_cells(cfg, p);
    o.row.insert(o.row.end(), {fmt(t.seed, 0), fmt(singletons), fmt(noise_clusters.size()),
                               fmt(recovery_score(inst.labels, cl.assignment)), fmt(o.ok)});
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "signal_singletons", "noise_clusters", "ari", "pass"}) {
    report.results.columns.emplace_back(c);
  }
  double min_rate = 1.0;
  json per_point = json::array();
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::size_t ok = 0;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].point == pi) ok += outs[ti].ok;
    }
    min_rate = std::min(min_rate, rate(ok, seeds.size()));
    per_point.push_back(
        {{"params", point_json(points[pi])}, {"singleton_rate", rate(ok, seeds.size())}});
  }
  for (const auto& o : outs) report.results.rows.push_back(o.row);
  report.summary = {{"singleton_rate", min_rate}, {"points", per_point}};
  report.pass = min_rate >= setting(cfg, "pass_rate");
  return report;
}

// ------------------------------------------------------- COUNTEREXAMPLE ---

ExperimentReport run_counterexample(const ExperimentConfig& cfg,
                                    const std::vector<std::uint64_t>& seeds, Exec exec) {
  struct Out {
    std::vector<std::string> row;
    bool ok = false;
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const std::size_t n = p.count("n");
    const std::size_t d = p.count("d");
    const std::size_t half = d / 2;
    Rng rng(t.seed);
    PlantedInstance inst = generate_counterexample(n, d, p.real("big_norm"), rng);

    PreScoreConfig c = clustering_config(cfg, Method::kKMeans, t.seed);
    c.k = half;
    const Clustering found = cluster(inst.matrix, c, Exec::kSerial);
    std::set<std::size_t> s_clusters(found.assignment.begin(), found.assignment.begin() + half);
    const bool isolates = s_clusters.size() == half;

    // Best partition into d/2 clusters that keeps the S points apart: every
    // S point gets its own cluster and S^c joins one of them (all choices
    // cost the same by symmetry).
    std::vector<std::size_t> isolating(n, 0);
    for (std::size_t i = 0; i < half; ++i) isolating[i] = i;
    const double gap_isolating = planted_cost_gap(inst, isolating);
    const double gap_found = planted_cost_gap(inst, found);
    const bool certified = gap_isolating > gap_found;

    inst.matrix = normalize_rows(inst.matrix);
    c.k = d + 1;
    const Clustering normalized = cluster(inst.matrix, c, Exec::kSerial);
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t a : normalized.assignment) ++sizes[a];
    bool recovers = true;
    for (std::size_t i = 0; i < half; ++i) recovers = recovers && sizes[normalized.assignment[i]] == 1;

    Out o;
    o.ok = !isolates && certified && recovers;
    o.row = param_cells(cfg, p);
    o.row.insert(o.row.end(), {fmt(t.seed, 0), fmt(isolates), fmt(gap_found), fmt(gap_isolating),
                               fmt(certified), fmt(recovers), fmt(o.ok)});
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "unnormalized_isolates_S", "cost_gap_found", "cost_gap_isolating",
                        "isolating_costlier", "normalized_recovers_S", "pass"}) {
    report.results.columns.emplace_back(c);
  }
  bool all = true;
  for (const auto& o : outs) {
    report.results.rows.push_back(o.row);
    all = all && o.ok;
  }
  report.summary = {{"all_runs_pass", all}};
  report.pass = all;
  return report;
}

// ------------------------------------------------------------- COVERAGE ---

ExperimentReport run_coverage(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                              Exec exec) {
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);
  const auto s_values = inner_values(cfg, "s");
  const auto eps_values = inner_values(cfg, "eps_heavy");
  const Method method = parse_method(cfg.settings.at("method").get<std::string>());
  const std::string method_name(to_string(method));
  const std::size_t subsets = setting_count(cfg, "random_subsets");
  const double scale = setting(cfg, "query_scale");

  struct Cell {
    double selected = 0.0;
    double baseline = 0.0;
    bool counted = false;  // heavy_total > 0
  };
  struct Out {
    std::vector<std::vector<std::string>> rows;
    std::vector<Cell> cells;  // s-major, eps-minor
    bool monotone = true;
    bool nested = true;
    bool beats = false;
    std::size_t cells_counted = 0;
    std::size_t cells_won = 0;
  };

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    const PlantedInstance inst = generate_planted(planted_config(p, t.seed, p.real("epsilon")));
    const Matrix q = scaled(inst.matrix, scale);
    const Matrix attention = attention_matrix(q, inst.matrix, true, Exec::kSerial);
    const std::size_t n = inst.matrix.rows();

    PreScoreConfig c = clustering_config(cfg, method, t.seed);
    c.s = static_cast<std::size_t>(s_values.back());
    if (c.s > n) throw ConfigError("grid.s: " + std::to_string(c.s) + " exceeds n");
    Rng noise(t.seed);
    const ScoredKeySet ranked = prescore(inst.matrix, c, noise, Exec::kSerial);

    Out o;
    const auto base = param_cells(cfg, p);
    // A seed beats the baseline when its coverage, averaged over the cells
    // that have heavy entries, exceeds the averaged uniform median.
    double selected_sum = 0.0;
    double baseline_sum = 0.0;
    std::vector<double> previous(eps_values.size(), -1.0);
    std::vector<std::set<std::size_t>> previous_sets(eps_values.size());
    for (std::size_t si = 0; si < s_values.size(); ++si) {
      const auto s = static_cast<std::size_t>(s_values[si]);
      const std::span<const std::size_t> chosen(ranked.indices.data(), s);
      const std::set<std::size_t> chosen_set(chosen.begin(), chosen.end());

      // Uniform subsets of the same size, one child stream per s.
      Rng subset_rng = Rng(t.seed).split(1000 + s);
      std::vector<std::vector<std::size_t>> random_sets(subsets);
      for (auto& set : random_sets) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = 0; i < s; ++i) {
          std::swap(perm[i], perm[i + static_cast<std::size_t>(subset_rng.uniform_index(n - i))]);
        }
        set.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s));
      }

      for (std::size_t ei = 0; ei < eps_values.size(); ++ei) {
        const double eps = eps_values[ei];
        const CoverageReport r = heavy_coverage(attention, chosen, eps);
        std::vector<CoverageReport> baseline;
        for (const auto& set : random_sets) baseline.push_back(heavy_coverage(attention, set, eps));
        // Upper median of the baseline percentages (a conservative bar).
        std::sort(baseline.begin(), baseline.end(), [](const auto& a, const auto& b) {
          return a.percentage < b.percentage;
        });
        const CoverageReport& med = baseline[baseline.size() / 2];

        Cell cell{r.percentage, med.percentage, r.heavy_total > 0};
        if (cell.counted) {
          selected_sum += r.percentage;
          baseline_sum += med.percentage;
          ++o.cells_counted;
          o.cells_won += r.percentage > med.percentage || r.percentage == 100.0;
        }
        if (r.percentage < previous[ei]) o.monotone = false;
        previous[ei] = r.percentage;
        if (!std::includes(chosen_set.begin(), chosen_set.end(), previous_sets[ei].begin(),
                           previous_sets[ei].end())) {
          o.nested = false;
        }
        previous_sets[ei] = chosen_set;
        o.cells.push_back(cell);

        auto row = base;
        const auto csv = to_csv_row(r, method_name, t.seed);
        std::stringstream ss(csv);
        for (std::string field; std::getline(ss, field, ',');) row.push_back(field);
        o.rows.push_back(row);
        row = base;
        std::stringstream sb(to_csv_row(med, "UNIFORM_MEDIAN", t.seed));
        for (std::string field; std::getline(sb, field, ',');) row.push_back(field);
        o.rows.push_back(row);
      }
    }
    o.beats = o.cells_counted > 0 && selected_sum > baseline_sum;
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"epsilon_heavy", "keys_sampled", "method", "heavy_total", "heavy_captured",
                        "percentage", "topk_percentage", "seed"}) {
    report.results.columns.emplace_back(c);
  }
  json per_point = json::array();
  double min_beats = 1.0;
  bool all_monotone = true;
  bool medians_monotone = true;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::size_t beats = 0;
    std::size_t cells_counted = 0;
    std::size_t cells_won = 0;
    std::vector<std::vector<double>> selected(s_values.size() * eps_values.size());
    std::vector<std::vector<double>> baseline(selected.size());
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].point != pi) continue;
      const Out& o = outs[ti];
      beats += o.beats;
      cells_counted += o.cells_counted;
      cells_won += o.cells_won;
      all_monotone = all_monotone && o.monotone && o.nested;
      for (std::size_t ci = 0; ci < o.cells.size(); ++ci) {
        selected[ci].push_back(o.cells[ci].selected);
        baseline[ci].push_back(o.cells[ci].baseline);
      }
    }
    json medians = json::array();
    for (std::size_t ei = 0; ei < eps_values.size(); ++ei) {
      double last = -1.0;
      for (std::size_t si = 0; si < s_values.size(); ++si) {
        const std::size_t ci = si * eps_values.size() + ei;
        const double m = median(selected[ci]);
        if (m < last) medians_monotone = false;
        last = m;
        medians.push_back({{"s", s_values[si]},
                           {"eps_heavy", eps_values[ei]},
                           {"median_percentage", m},
                           {"median_uniform_percentage", median(baseline[ci])}});
      }
    }
    min_beats = std::min(min_beats, rate(beats, seeds.size()));
    per_point.push_back({{"params", point_json(points[pi])},
                         {"beats_uniform_rate", rate(beats, seeds.size())},
                         {"cell_win_rate", rate(cells_won, cells_counted)},
                         {"medians", medians}});
  }
  for (const auto& o : outs) {
    for (const auto& row : o.rows) report.results.rows.push_back(row);
  }
  report.summary = {{"method", method_name},
                    {"beats_uniform_rate", min_beats},
                    {"monotone_in_s", all_monotone},
                    {"medians_monotone_in_s", medians_monotone},
                    {"points", per_point}};
  report.pass = all_monotone && medians_monotone && min_beats >= setting(cfg, "pass_rate");
  return report;
}

// ---------------------------------------------------------------- SPEED ---

template <class Fn>
double median_seconds(std::size_t warmup, std::size_t reps, Fn&& fn) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> times;
  for (std::size_t i = 0; i < reps; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return median(times);
}

ExperimentReport run_speed(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  const int saved_threads = max_threads();
  set_threads(1);
  const auto points = expand(cfg);
  const std::size_t warmup = setting_count(cfg, "warmup");
  const std::size_t reps = setting_count(cfg, "repetitions");
  const Method method = parse_method(cfg.settings.at("method").get<std::string>());
  if (reps == 0) throw ConfigError("settings.repetitions: must be >= 1");

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "method", "keys_retained", "blocks_evaluated"}) {
    report.results.columns.emplace_back(c);
  }
  Table timings;
  timings.columns = param_columns(cfg);
  for (const char* c : {"seed", "method", "median_seconds"}) timings.columns.emplace_back(c);

  // (other params) -> n -> per-method median over seeds.
  std::map<std::vector<std::string>, std::map<double, std::map<std::string, std::vector<double>>>>
      series;
  const std::string prescored_name = "PRESCORED_" + std::string(to_string(method));
  for (const Point& p : points) {
    for (std::uint64_t seed : seeds) {
      const std::size_t n = p.count("n");
      const std::size_t d = p.count("d");
      Rng rng(seed);
      const double std_dev = std::pow(static_cast<double>(d), -0.25);
      const Matrix q = gaussian_matrix(rng, n, d, 0.0, std_dev);
      const Matrix k = gaussian_matrix(rng, n, d, 0.0, std_dev);
      const Matrix v = gaussian_matrix(rng, n, d, 0.0, 1.0);

      PreScoredConfig pcfg;
      pcfg.prescore = clustering_config(cfg, method, seed);
      pcfg.prescore.s = std::min(p.count("s"), n);
      pcfg.hyper.block_size = p.count("block_size");
      pcfg.hyper.lsh_bits = p.count("lsh_bits");
      pcfg.hyper.seed = seed;
      HyperConfig hyper = pcfg.hyper;

      AttentionResult last;
      const double t_exact = median_seconds(
          warmup, reps, [&] { (void)exact_attention(q, k, v, Exec::kSerial); });
      const double t_hyper = median_seconds(
          warmup, reps, [&] { last = hyper_attention(q, k, v, hyper, Exec::kSerial); });
      const std::size_t hyper_blocks = last.blocks_evaluated;
      const double t_pre = median_seconds(warmup, reps, [&] {
        Rng r(seed);
        last = prescored_hyper_attention(q, k, v, pcfg, r, Exec::kSerial);
      });

      auto params = param_cells(cfg, p);
      const std::vector<std::pair<std::string, std::pair<double, std::vector<std::string>>>> runs = {
          {"EXACT", {t_exact, {fmt(n), "1"}}},
          {"HYPER", {t_hyper, {fmt(n), fmt(hyper_blocks)}}},
          {prescored_name, {t_pre, {fmt(last.keys_retained), fmt(last.blocks_evaluated)}}},
      };
      auto other = params;
      other.erase(other.begin());  // n is the first grid key
      for (const auto& [name, info] : runs) {
        auto row = params;
        row.insert(row.end(), {fmt(seed, 0), name});
        row.insert(row.end(), info.second.begin(), info.second.end());
        report.results.rows.push_back(row);
        auto trow = params;
        trow.insert(trow.end(), {fmt(seed, 0), name, fmt(info.first)});
        timings.rows.push_back(trow);
        series[other][static_cast<double>(n)][name].push_back(info.first);
      }
    }
  }
  set_threads(saved_threads);

  const double slope_max = setting(cfg, "slope_max");
  const double exact_min = setting(cfg, "exact_slope_min");
  const double speedup_n = setting(cfg, "speedup_n");
  const double speedup_min = setting(cfg, "speedup_min");
  bool pass = true;
  json groups = json::array();
  for (const auto& [other, by_n] : series) {
    std::map<std::string, std::vector<double>> xs, ys;
    json speedup = nullptr;
    for (const auto& [n, by_method] : by_n) {
      for (const auto& [name, times] : by_method) {
        xs[name].push_back(n);
        ys[name].push_back(median(times));
      }
      if (n == speedup_n) {
        speedup = median(by_method.at("EXACT")) / median(by_method.at(prescored_name));
      }
    }
    json slopes = json::object();
    for (const auto& [name, x] : xs) {
      slopes[name] = x.size() >= 2 ? json(log_log_slope(x, ys.at(name))) : json(nullptr);
    }
    const bool slopes_ok = xs.at("EXACT").size() >= 2 &&
                           slopes[prescored_name].get<double>() < slope_max &&
                           slopes["EXACT"].get<double>() > exact_min;
    const bool speedup_ok = !speedup.is_null() && speedup.get<double>() >= speedup_min;
    pass = pass && slopes_ok && speedup_ok;
    json fixed = json::array();
    for (const auto& v : other) fixed.push_back(v);
    groups.push_back({{"fixed_params", fixed},
                      {"slopes", slopes},
                      {"speedup_at_n", speedup},
                      {"slopes_pass", slopes_ok},
                      {"speedup_pass", speedup_ok}});
  }
  report.timings = std::move(timings);
  report.summary = {{"groups", groups}, {"speedup_n", speedup_n}};
  report.pass = pass;
  return report;
}

// --------------------------------------------------------- APPROX_ERROR ---

ExperimentReport run_approx_error(const ExperimentConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds, Exec exec) {
  struct Out {
    std::vector<std::vector<std::string>> rows;
    bool hyper_beats_uniform = false;
    double degenerate_error = 0.0;
  };
  const auto points = expand(cfg);
  const auto tasks = make_tasks(points.size(), seeds);
  const double scale = setting(cfg, "query_scale");
  const std::size_t residual = setting_count(cfg, "residual_samples");
  const std::size_t uniform = setting_count(cfg, "uniform_samples");
  const bool normalize = cfg.settings.at("normalize").get<bool>();

  const auto outs = run_tasks<Out>(tasks, exec, [&](const Task& t) {
    const Point& p = points[t.point];
    PlantedConfig pc = planted_config(p, t.seed, p.real("epsilon"));
    pc.normalize = normalize;
    const PlantedInstance inst = generate_planted(pc);
    const Matrix& k = inst.matrix;
    const Matrix q = scaled(k, scale);
    Rng value_rng = Rng(t.seed).split(2);
    const Matrix v = gaussian_matrix(value_rng, k.rows(), k.cols(), 0.0, 1.0);
    const AttentionOutput exact = exact_attention(q, k, v, Exec::kSerial);

    HyperConfig hc;
    hc.block_size = p.count("block_size");
    hc.lsh_bits = p.count("lsh_bits");
    hc.residual_samples = std::min(residual, k.rows());
    hc.seed = t.seed;
    const double e_hyper = attention_error(hyper_attention(q, k, v, hc, Exec::kSerial), exact);
    Rng uniform_rng = Rng(t.seed).split(3);
    const double e_uniform = attention_error(
        uniform_sampled_attention(q, k, v, uniform, uniform_rng, Exec::kSerial), exact);

    PreScoredConfig pre;
    pre.prescore.s = pc.d * copies_per_direction(pc.epsilon);
    pre.prescore.seed = t.seed;
    pre.hyper = hc;
    Rng pre_rng(t.seed);
    const double e_pre =
        attention_error(prescored_hyper_attention(q, k, v, pre, pre_rng, Exec::kSerial), exact);

    PreScoredConfig full;
    full.prescore.s = k.rows();
    full.prescore.seed = t.seed;
    full.hyper.block_size = k.rows();
    full.hyper.seed = t.seed;
    Rng full_rng(t.seed);
    Out o;
    o.degenerate_error =
        attention_error(prescored_hyper_attention(q, k, v, full, full_rng, Exec::kSerial), exact);
    o.hyper_beats_uniform = e_hyper <= e_uniform;

    const auto base = param_cells(cfg, p);
    for (const auto& [name, err] :
         std::array<std::pair<const char*, double>, 4>{{{"HYPER", e_hyper},
                                                        {"UNIFORM", e_uniform},
                                                        {"PRESCORED_KMEANS", e_pre},
                                                        {"DEGENERATE", o.degenerate_error}}}) {
      auto row = base;
      row.insert(row.end(), {fmt(t.seed, 0), name, fmt(err)});
      o.rows.push_back(row);
    }
    return o;
  });

  ExperimentReport report;
  report.results.columns = param_columns(cfg);
  for (const char* c : {"seed", "method", "relative_error"}) report.results.columns.emplace_back(c);
  std::size_t beats = 0;
  double worst_degenerate = 0.0;
  for (const auto& o : outs) {
    for (const auto& row : o.rows) report.results.rows.push_back(row);
    beats += o.hyper_beats_uniform;
    worst_degenerate = std::max(worst_degenerate, o.degenerate_error);
  }
  const double beat_rate = rate(beats, tasks.size());
  report.summary = {{"hyper_beats_uniform_rate", beat_rate},
                    {"max_degenerate_error", worst_degenerate}};
  report.pass = beat_rate >= setting(cfg, "pass_rate") && worst_degenerate <= 1e-10;
  return report;
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::string_view to_string(Experiment e) noexcept {
  for (const auto& s : specs()) {
    if (s.experiment == e) return s.name;
  }
  return "UNKNOWN";
}

Experiment parse_experiment(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) {
    c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  for (const auto& s : specs()) {
    if (upper == s.name) return s.experiment;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

void validate(const ExperimentConfig& cfg) {
  const auto& spec = spec_for(cfg.experiment);
  if (cfg.seeds.empty()) throw ConfigError("field 'seeds': must not be empty");
  std::set<std::uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
  if (distinct.size() != cfg.seeds.size()) throw ConfigError("field 'seeds': seeds must be distinct");

  for (const auto& [name, values] : cfg.grid) {
    const auto it = std::find_if(spec.grid.begin(), spec.grid.end(),
                                 [&](const GridKey& k) { return name == k.name; });
    if (it == spec.grid.end()) {
      throw ConfigError("field 'grid." + name + "': not a parameter of " + spec.name);
    }
    if (values.empty()) throw ConfigError("field 'grid." + name + "': must not be empty");
    for (double v : values) {
      if (!std::isfinite(v)) throw ConfigError("field 'grid." + name + "': non-finite value");
      if (it->integral && (v < 0.0 || v != std::floor(v))) {
        throw ConfigError("field 'grid." + name + "': expected non-negative integers");
      }
    }
  }
  for (const auto& key : spec.grid) {
    if (std::isnan(key.fallback) && !cfg.grid.contains(key.name)) {
      throw ConfigError(std::string("field 'grid.") + key.name + "': required for " + spec.name);
    }
  }
  for (const auto& [key, value] : cfg.settings.items()) {
    if (!spec.settings.contains(key)) {
      throw ConfigError("field 'settings." + key + "': not a setting of " + spec.name);
    }
    const json& fallback = spec.settings.at(key);
    const bool ok = fallback.is_number() ? value.is_number()
                    : fallback.is_boolean() ? value.is_boolean()
                                            : value.is_string();
    if (!ok) throw ConfigError("field 'settings." + key + "': wrong type");
    if (fallback.is_number_integer() && !(value.is_number_unsigned() ||
                                          (value.is_number_integer() && value.get<long long>() >= 0))) {
      throw ConfigError("field 'settings." + key + "': expected a non-negative integer");
    }
  }
  if (cfg.settings.contains("method")) {
    (void)parse_method(cfg.settings.at("method").get<std::string>());
  }

  // Planted-model constraints per grid point, so bad configs fail before any work.
  if (cfg.experiment != Experiment::kSpeed && cfg.experiment != Experiment::kCounterexample) {
    for (const Point& p : expand(cfg)) {
      PlantedConfig pc;
      pc.n = p.count("n");
      pc.d = p.count("d");
      pc.epsilon = p.values.contains("epsilon") ? p.real("epsilon") : 1.0;
      pc.c_S = p.real("c_S");
      pc.c_N = p.real("c_N");
      try {
        psa::validate(pc);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("field 'grid': ") + e.what());
      }
    }
  }
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ":" + std::to_string(line_of(text, e.byte)) + ": " +
                      e.what());
  }
  const auto fail = [&](const std::string& what) {
    throw ConfigError(std::string(source) + ": " + what);
  };
  if (!doc.is_object()) fail("top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    static const std::set<std::string> known = {"schema",   "experiment", "grid",
                                                "seeds",    "settings",   "output_path"};
    if (!known.contains(key)) fail("field '" + key + "': unknown field");
  }
  if (!doc.contains("schema") || doc["schema"] != kConfigSchema) {
    fail("field 'schema': expected \"" + std::string(kConfigSchema) + "\"");
  }
  if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
    fail("field 'experiment': missing or not a string");
  }

  ExperimentConfig cfg;
  try {
    cfg.experiment = parse_experiment(doc["experiment"].get<std::string>());
  } catch (const ConfigError& e) {
    fail(std::string("field 'experiment': ") + e.what());
  }
  if (!doc.contains("seeds") || !doc["seeds"].is_array()) fail("field 'seeds': missing or not a list");
  for (const auto& s : doc["seeds"]) {
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      fail("field 'seeds': seeds must be non-negative integers");
    }
    cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  if (doc.contains("grid")) {
    if (!doc["grid"].is_object()) fail("field 'grid': must be an object");
    for (const auto& [key, values] : doc["grid"].items()) {
      std::vector<double> list;
      if (values.is_number()) {
        list.push_back(values.get<double>());
      } else if (values.is_array()) {
        for (const auto& v : values) {
          if (!v.is_number()) fail("field 'grid." + key + "': entries must be numbers");
          list.push_back(v.get<double>());
        }
      } else {
        fail("field 'grid." + key + "': expected a number or a list of numbers");
      }
      cfg.grid[key] = std::move(list);
    }
  }
  const auto& spec = spec_for(cfg.experiment);
  cfg.settings = spec.settings;
  if (doc.contains("settings")) {
    if (!doc["settings"].is_object()) fail("field 'settings': must be an object");
    for (const auto& [key, value] : doc["settings"].items()) {
      if (!spec.settings.contains(key)) {
        fail("field 'settings." + key + "': not a setting of " + spec.name);
      }
      cfg.settings[key] = value;
    }
  }
  if (doc.contains("output_path")) {
    if (!doc["output_path"].is_string()) fail("field 'output_path': must be a string");
    cfg.output_path = doc["output_path"].get<std::string>();
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    fail(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

ExperimentReport run_experiment(const ExperimentConfig& input, const RunOptions& opts) {
  ExperimentConfig cfg = input;
  if (opts.seed_override) cfg.seeds = *opts.seed_override;
  validate(cfg);
  const int saved_threads = max_threads();
  if (opts.threads > 0) set_threads(opts.threads);
  const auto& seeds = cfg.seeds;

  ExperimentReport report;
  switch (cfg.experiment) {
    case Experiment::kTheorem1:
      report = run_theorem1(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kTheorem2:
      report = run_theorem2(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kClaim1:
      report = run_claim1(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kCorollary1:
      report = run_corollary1(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kCounterexample:
      report = run_counterexample(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kCoverage:
      report = run_coverage(cfg, seeds, Exec::kParallel);
      break;
    case Experiment::kSpeed:
      report = run_speed(cfg, seeds);
      break;
    case Experiment::kApproxError:
      report = run_approx_error(cfg, seeds, Exec::kParallel);
      break;
  }
  set_threads(saved_threads);

  json seeds_json = json::array();
  for (auto s : seeds) seeds_json.push_back(s);
  json grid_json = json::object();
  for (const auto& [k, v] : cfg.grid) grid_json[k] = v;
  json header = {{"schema", kConfigSchema},
                 {"experiment", to_string(cfg.experiment)},
                 {"seeds", seeds_json},
                 {"grid", grid_json},
                 {"settings", cfg.settings},
                 {"rows", report.results.rows.size()},
                 {"pass", report.pass}};
  header.update(report.summary);
  report.summary = std::move(header);
  return report;
}

std::string to_csv(const Table& table, std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  const auto join = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  join(table.columns);
  for (const auto& row : table.rows) join(row);
  return out;
}

std::string csv_body(std::string_view csv) {
  while (!csv.empty() && csv.front() == '#') {
    const auto nl = csv.find('\n');
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
  }
  return std::string(csv);
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_report(const ExperimentReport& report, const ExperimentConfig& cfg,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string comment = std::string(to_string(cfg.experiment)) + " generated " + utc_timestamp();
  write_file(dir / "results.csv", to_csv(report.results, comment));
  if (report.timings) write_file(dir / "timings.csv", to_csv(*report.timings, comment));
  write_file(dir / "summary.json", report.summary.dump(2) + "\n");
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("log_log_slope: need at least two paired points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("log_log_slope: values must be > 0");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("log_log_slope: x values are all equal");
  return sxy / sxx;
}

}  // namespace psa
