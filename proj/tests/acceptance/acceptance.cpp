// Acceptance suite: one PASS/FAIL line per criterion.
//
//   psa_acceptance [--only 1,4,9] [--configs DIR]
//
// Exit status is 0 when every selected criterion passes. Criteria 8, 10 and
// 11 drive the experiment runner with the configs in configs/; the rest call
// the library directly and check it against the brute-force oracles in
// tests/unit/oracles.hpp.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "psa/clustering.hpp"
#include "psa/exact_attention.hpp"
#include "psa/experiment.hpp"
#include "psa/hyper_attention.hpp"
#include "psa/metrics.hpp"
#include "psa/planted.hpp"
#include "psa/prescore.hpp"
#include "psa/rng.hpp"
#include "psa/sketch.hpp"

#ifndef PSA_CONFIG_DIR
#define PSA_CONFIG_DIR "configs"
#endif

using psa::Matrix;
using psa::Method;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no runtime limit
  std::function<Outcome()> run;
};

std::filesystem::path g_config_dir = PSA_CONFIG_DIR;

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string count(std::size_t hits, std::size_t total) {
  return std::to_string(hits) + "/" + std::to_string(total);
}

constexpr std::size_t kSeeds = 20;

// Theorem grid shared by criteria 2, 3, 5 and 7.
psa::PlantedConfig theorem_grid(std::uint64_t seed, double epsilon = 0.1) {
  psa::PlantedConfig pc;
  pc.n = 2000;
  pc.d = 16;
  pc.epsilon = epsilon;
  pc.c_S = 0.1;
  pc.c_N = 0.1;
  pc.seed = seed;
  return pc;
}

psa::PreScoreConfig kmeans(std::size_t k, std::uint64_t seed, std::size_t restarts) {
  psa::PreScoreConfig c;
  c.method = Method::kKMeans;
  c.k = k;
  c.seed = seed;
  c.restarts = restarts;
  return c;
}

psa::ExperimentReport run_config(const std::string& file) {
  return psa::run_experiment(psa::load_config(g_config_dir / file));
}

// 1. Degenerate settings reproduce exact attention.
Outcome exactness() {
  double worst = 0.0;
  psa::Rng dims(2024);
  for (std::uint64_t inst = 0; inst < 50; ++inst) {
    const std::size_t n = 8 + dims.uniform_index(505);  // 8..512
    const std::size_t d = 1 + dims.uniform_index(32);   // 1..32
    psa::Rng rng(inst);
    const Matrix q = psa::gaussian_matrix(rng, n, d, 0.0, 1.0 / std::sqrt(std::sqrt(d)));
    const Matrix k = psa::gaussian_matrix(rng, n, d, 0.0, 1.0 / std::sqrt(std::sqrt(d)));
    const Matrix v = psa::gaussian_matrix(rng, n, d, 0.0, 1.0);
    psa::PreScoredConfig cfg;
    cfg.prescore.s = n;
    cfg.prescore.k = std::min<std::size_t>(d + 1, n);
    cfg.prescore.seed = inst;
    cfg.hyper.block_size = n;
    cfg.hyper.residual_samples = 0;
    psa::Rng noise(inst);
    const auto approx = psa::prescored_hyper_attention(q, k, v, cfg, noise);
    worst = std::max(worst, psa::attention_error(approx, psa::exact_attention(q, k, v)));
  }
  return {worst <= 1e-10, "max relative Frobenius error " + num(worst) + " (limit 1e-10)"};
}

// 2. Leverage separation on the theorem grid.
Outcome theorem1() {
  std::size_t ok = 0;
  double worst = 1e300;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto inst = psa::generate_planted(theorem_grid(seed));
    const auto h = psa::exact_leverage_scores(inst.matrix);
    double min_signal = 1e300, max_noise = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (inst.labels[i] == 0) {
        max_noise = std::max(max_noise, h[i]);
      } else {
        min_signal = std::min(min_signal, h[i]);
      }
    }
    const double ratio = min_signal / max_noise;
    worst = std::min(worst, ratio);
    ok += ratio > 10.0;
  }
  return {ok >= 19, "ratio > 10 in " + count(ok, kSeeds) + " seeds (need 19), worst ratio " + num(worst)};
}

// 3. KMEANS recovers the planted partition; centroids concentrate.
Outcome theorem2() {
  std::size_t recovered = 0, concentrated = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pc = theorem_grid(seed);
    const auto inst = psa::generate_planted(pc);
    const auto c = psa::lloyd_cluster(inst.matrix, kmeans(pc.d + 1, seed, 5));
    if (!oracle::same_partition(c.assignment, inst.labels)) continue;
    ++recovered;

    const std::size_t m = psa::copies_per_direction(pc.epsilon);
    const double d = static_cast<double>(pc.d);
    const double signal_bound = 5.0 * psa::signal_sigma(pc) * std::sqrt(d / m);
    const double noise_bound =
        5.0 * psa::noise_sigma(pc) * std::sqrt(d / static_cast<double>(pc.n - pc.d * m));
    bool ok = true;
    for (std::size_t i = 0; i < inst.labels.size(); ++i) {
      const auto mu = c.centroids.row(c.assignment[i]);
      double dev = 0.0;
      for (std::size_t col = 0; col < pc.d; ++col) {
        const double target = inst.labels[i] == 0 ? 0.0 : inst.basis(inst.labels[i] - 1, col);
        dev += (mu[col] - target) * (mu[col] - target);
      }
      ok = ok && std::sqrt(dev) <= (inst.labels[i] == 0 ? noise_bound : signal_bound);
    }
    concentrated += ok;
  }
  return {recovered >= 19 && concentrated >= 19,
          "ARI = 1 in " + count(recovered, kSeeds) + ", concentration bounds in " +
              count(concentrated, kSeeds) + " (need 19 each)"};
}

// 4. With one copy per direction every signal row is a singleton.
Outcome corollary1() {
  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pc = theorem_grid(seed, 1.0);
    const auto inst = psa::generate_planted(pc);
    const auto c = psa::lloyd_cluster(inst.matrix, kmeans(pc.d + 1, seed, 20));
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t a : c.assignment) ++sizes[a];
    std::set<std::size_t> noise_clusters;
    bool singletons = true;
    for (std::size_t i = 0; i < inst.labels.size(); ++i) {
      if (inst.labels[i] == 0) {
        noise_clusters.insert(c.assignment[i]);
      } else {
        singletons = singletons && sizes[c.assignment[i]] == 1;
      }
    }
    ok += singletons && noise_clusters.size() == 1;
  }
  return {ok >= 19, "singleton signal and one noise cluster in " + count(ok, kSeeds) + " (need 19)"};
}

// 5. Minkowski k-means recovers the partition; p = 2 and p = 1 coincide with
// KMEANS and KMEDIAN.
Outcome claim1() {
  std::ostringstream detail;
  bool pass = true;
  for (double p : {1.0, 1.5, 3.0}) {
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto pc = theorem_grid(seed);
      const auto inst = psa::generate_planted(pc);
      auto cfg = kmeans(pc.d + 1, seed, 10);
      cfg.method = Method::kLpKMeans;
      cfg.p = p;
      cfg.seeding_trials = 8;
      ok += oracle::same_partition(psa::lloyd_cluster(inst.matrix, cfg).assignment, inst.labels);
    }
    pass = pass && ok >= 18;
    detail << "p=" << p << ": " << count(ok, kSeeds) << "; ";
  }
  std::size_t same2 = 0, same1 = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pc = theorem_grid(seed);
    const auto inst = psa::generate_planted(pc);
    auto cfg = kmeans(pc.d + 1, seed, 5);
    const auto km = psa::lloyd_cluster(inst.matrix, cfg).assignment;
    cfg.method = Method::kKMedian;
    const auto kmed = psa::lloyd_cluster(inst.matrix, cfg).assignment;
    cfg.method = Method::kLpKMeans;
    cfg.p = 2.0;
    same2 += psa::lloyd_cluster(inst.matrix, cfg).assignment == km;
    cfg.p = 1.0;
    same1 += psa::lloyd_cluster(inst.matrix, cfg).assignment == kmed;
  }
  pass = pass && same2 == kSeeds && same1 == kSeeds;
  detail << "p=2 == KMEANS " << count(same2, kSeeds) << ", p=1 == KMEDIAN " << count(same1, kSeeds)
         << " (need 18 per p, exact equality on all)";
  return {pass, detail.str()};
}

// 6. Unnormalized counterexample defeats S-isolation; normalization fixes it.
Outcome counterexample() {
  const std::size_t n = 1000, d = 8, half = d / 2;
  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    psa::Rng rng(seed);
    auto inst = psa::generate_counterexample(n, d, 100.0, rng);
    const auto found = psa::lloyd_cluster(inst.matrix, kmeans(half, seed, 5));
    const std::set<std::size_t> s_clusters(found.assignment.begin(),
                                           found.assignment.begin() + half);
    const bool isolates = s_clusters.size() == half;
    std::vector<std::size_t> isolating(n, 0);
    for (std::size_t i = 0; i < half; ++i) isolating[i] = i;
    const bool costlier = psa::planted_cost_gap(inst, isolating) > psa::planted_cost_gap(inst, found);

    inst.matrix = psa::normalize_rows(inst.matrix);
    const auto norm = psa::lloyd_cluster(inst.matrix, kmeans(d + 1, seed, 5));
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t a : norm.assignment) ++sizes[a];
    bool recovered = true;
    for (std::size_t i = 0; i < half; ++i) recovered = recovered && sizes[norm.assignment[i]] == 1;
    ok += !isolates && costlier && recovered;
  }
  return {ok == kSeeds, "regression holds in " + count(ok, kSeeds) + " runs (need all)"};
}

// 7. KMEANS selection equals the exact-leverage top-s set.
Outcome agreement() {
  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pc = theorem_grid(seed);
    const auto inst = psa::generate_planted(pc);
    const std::size_t s = pc.d * psa::copies_per_direction(pc.epsilon);
    auto cfg = kmeans(pc.d + 1, seed, 10);
    cfg.s = s;
    psa::Rng a(seed), b(seed);
    const auto km = psa::prescore(inst.matrix, cfg, a);
    cfg.method = Method::kLeverageExact;
    const auto lev = psa::prescore(inst.matrix, cfg, b);
    ok += std::set<std::size_t>(km.indices.begin(), km.indices.end()) ==
          std::set<std::size_t>(lev.indices.begin(), lev.indices.end());
  }
  return {ok >= 18, "sets equal in " + count(ok, kSeeds) + " (need 18)"};
}

// 8. Coverage is monotone in s and beats uniform subsets.
Outcome coverage() {
  const auto r = run_config("coverage.json");
  const bool monotone = r.summary.at("monotone_in_s").get<bool>();
  const double beats = r.summary.at("beats_uniform_rate").get<double>();
  return {monotone && beats >= 0.9 && r.pass,
          std::string("monotone in s: ") + (monotone ? "yes" : "no") +
              ", beats uniform median in " + num(beats * 20) + "/20 seeds (need 18)"};
}

// 9. Sketched leverage scores rank like the exact ones.
Outcome approx_leverage() {
  std::size_t ok = 0;
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    psa::Rng data(seed);
    const Matrix k = psa::gaussian_matrix(data, 512, 16, 0.0, 1.0);
    psa::Rng sketch = psa::Rng(seed).split(1);
    const auto approx = psa::approx_leverage_scores(k, 8 * 16, sketch);
    const double rho = oracle::spearman(approx, oracle::leverage(k));
    mean += rho / kSeeds;
    ok += rho >= 0.95;
  }
  return {ok >= 18, "Spearman >= 0.95 in " + count(ok, kSeeds) + " (need 18), mean " + num(mean)};
}

// 10. Runtime scaling.
Outcome scaling() {
  const auto r = run_config("speed.json");
  const auto& g = r.summary.at("groups").at(0);
  const auto& slopes = g.at("slopes");
  const double pre = slopes.at("PRESCORED_KMEANS").get<double>();
  const double exact = slopes.at("EXACT").get<double>();
  const double speedup = g.at("speedup_at_n").get<double>();
  const bool pass = pre < 1.5 && exact > 1.8 && speedup >= 2.0;
  return {pass, "slope prescored " + num(pre) + " (< 1.5), exact " + num(exact) +
                    " (> 1.8), speedup at n=8192 " + num(speedup) + "x (>= 2)"};
}

// 11. Every experiment reproduces its CSV body.
Outcome determinism() {
  std::vector<std::string> failed;
  std::size_t checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(g_config_dir)) {
    if (entry.path().extension() != ".json") continue;
    const auto cfg = psa::load_config(entry.path());
    psa::RunOptions serial;
    serial.threads = 1;
    const auto a = psa::run_experiment(cfg, serial);
    const auto b = psa::run_experiment(cfg);
    // Each run stamps its own time; compare everything after the comment.
    const std::string ca = psa::to_csv(a.results, "run A");
    const std::string cb = psa::to_csv(b.results, "run B");
    if (psa::csv_body(ca) != psa::csv_body(cb)) failed.push_back(entry.path().filename().string());
    ++checked;
  }
  std::string detail = std::to_string(checked) + " configs re-run";
  if (!failed.empty()) {
    detail += "; differing:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty() && checked == 8, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string config_dir = g_config_dir.string();
  app.add_option("--only", only, "Criterion numbers to run (default: all)")->delimiter(',');
  app.add_option("--configs", config_dir, "Directory holding the experiment configs");
  CLI11_PARSE(app, argc, argv);
  g_config_dir = config_dir;

  const std::vector<Criterion> criteria = {
      {1, "exactness degeneracy", 30, exactness},
      {2, "leverage separation", 60, theorem1},
      {3, "k-means recovery", 120, theorem2},
      {4, "singleton regime", 0, corollary1},
      {5, "minkowski k-means", 0, claim1},
      {6, "normalization counterexample", 0, counterexample},
      {7, "prescore-leverage agreement", 0, agreement},
      {8, "heavy coverage", 0, coverage},
      {9, "approximate leverage ranking", 0, approx_leverage},
      {10, "runtime scaling", 600, scaling},
      {11, "determinism", 0, determinism},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = num(secs) + "s";
    if (c.limit_seconds > 0) {
      timing += " (limit " + num(c.limit_seconds) + "s)";
      if (secs >= c.limit_seconds) o.pass = false;
    }
    std::printf("criterion %2d %s  %s: %s [%s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
