// Acceptance criteria A1-A11. One line per criterion; exit status 1 if any fails.
// Usage: acceptance [A1 A2 ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "fatou/approx.hpp"
#include "fatou/corona.hpp"
#include "fatou/counting.hpp"
#include "fatou/dyadic.hpp"
#include "fatou/experiment.hpp"
#include "fatou/harmonic.hpp"
#include "fatou/rng.hpp"
#include "fatou/whitney.hpp"

using namespace fatou;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct NamedScene {
  std::string name;
  ScenePtr scene;
};

std::vector<NamedScene> fixture_scenes() {
  return {{"hyperplane", make_hyperplane(2)},
          {"graph:0.05", make_lipschitz_graph(0.05)},
          {"graph:0.5", make_lipschitz_graph(0.5)},
          {"cantor:6", make_cantor(6)},
          {"koch", make_koch_curve()}};
}

Outcome a1() {
  Outcome o{true, ""};
  for (const NamedScene& s : fixture_scenes()) {
    const auto t0 = std::chrono::steady_clock::now();
    const DyadicGrid g = build_grid(s.scene, 0, 10);
    const AxiomReport r = verify_grid_axioms(g);
    const double t = seconds_since(t0);
    const bool ok = r.all_pass() && r.a0 >= 0.125 && t < 60.0;
    o.pass = o.pass && ok;
    o.detail += s.name + " a0=" + fmt("%.3f", r.a0) + " t=" + fmt("%.1fs", t) + (ok ? "" : " FAILED") + "; ";
  }
  return o;
}

Outcome a2() {
  Outcome o{true, ""};
  for (const NamedScene& s : fixture_scenes()) {
    const DyadicGrid g = build_grid(s.scene, 0, 10);
    const WhitneyDecomposition w = whitney_for_grid(g, RegionParams{});
    const std::size_t v = check_whitney_property(w).size();
    o.pass = o.pass && v == 0;
    o.detail += s.name + " cells=" + std::to_string(w.size()) + " violations=" + std::to_string(v) + "; ";
  }
  return o;
}

Outcome a3() {
  const auto t0 = std::chrono::steady_clock::now();
  const BatteryReport b = validation_battery(100, 100000, 2024);
  const double t = seconds_since(t0);
  return {b.passed >= 95 && b.max_capped_fraction < 1e-3 && t < 300.0,
          std::to_string(b.passed) + "/100 within 3 stderr, capped fraction " + fmt("%.2g", b.max_capped_fraction) +
              ", " + fmt("%.1fs", t)};
}

/// Exhaustive search over every subset of (level, slot) nodes.
int brute_force(const std::vector<ChainLevel>& chain, double eps) {
  std::vector<std::pair<int, double>> nodes;
  for (int j = 0; j < static_cast<int>(chain.size()); ++j)
    for (double v : *chain[j].values) nodes.emplace_back(j, v);
  const int n = static_cast<int>(nodes.size());
  int best = 0;
  for (long mask = 1; mask < (1L << n); ++mask) {
    int last = -1, len = 0;
    double prev = 0.0;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      if (last >= 0) ok = chain[nodes[i].first].q.k > chain[last].q.k && std::abs(nodes[i].second - prev) > eps;
      last = nodes[i].first;
      prev = nodes[i].second;
      ++len;
    }
    if (ok) best = std::max(best, len - 1);
  }
  return best;
}

Outcome a4() {
  long violations = 0, fixtures = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    CounterRng rng(hash_key(4040, s));
    std::vector<std::vector<double>> values;
    const int levels = 2 + static_cast<int>(rng.next_u64() % 6);
    int total = 0;
    for (int j = 0; j < levels; ++j) {
      const int slots = 1 + static_cast<int>(rng.next_u64() % 3);
      if (total + slots > 12) break;
      total += slots;
      std::vector<double> v;
      for (int i = 0; i < slots; ++i) v.push_back(std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0);
      values.push_back(v);
    }
    std::vector<ChainLevel> chain;
    int k = 0;
    for (const auto& v : values) {
      chain.push_back({{k, 0}, &v});
      k += 1 + static_cast<int>(rng.next_u64() % 2);
    }
    ++fixtures;
    int prev = 1 << 30;
    for (double eps : {0.05, 0.1, 0.3, 0.5, 1.0}) {
      const int n = longest_oscillation(chain, eps).count;
      if (n != brute_force(chain, eps) || n > prev) ++violations;
      prev = n;
    }
    // Truncation: dropping the finest levels never raises the count.
    int prev_trunc = -1;
    for (std::size_t len = 1; len <= chain.size(); ++len) {
      const int n = longest_oscillation({chain.begin(), chain.begin() + static_cast<long>(len)}, 0.1).count;
      if (n < prev_trunc) ++violations;
      prev_trunc = n;
    }
  }
  // The same monotonicity on a sampled grid solution.
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 7);
  const RegionParams p{1.0 / 256.0, 256.0, 0.0625, 8};
  const WhitneyDecomposition w = whitney_for_grid(g, p);
  const Catalog cat = build_catalog(g, w, p);
  const Subcatalog sub = select_subcatalog(cat, SubcatalogStrategy::kInteriorFirst, 1);
  const DyadicIndicator d = random_dyadic_indicator(g, 3, 9);
  const SampledSolution u = sample_solution(cat, sub, [&](const Point& x) { return halfplane_extension(g, d, x); }, "closed form");
  for (int n = 0; n < static_cast<int>(g.nodes.size()); n += 7) {
    int prev_k = -1;
    for (int k_last = 0; k_last <= g.k_max; ++k_last) {
      const int c = counting_function(u, g, n, 0.1, {0, 0}, k_last);
      if (c < prev_k) ++violations;
      prev_k = c;
    }
    if (counting_function(u, g, n, 0.2, {0, 0}) > counting_function(u, g, n, 0.1, {0, 0})) ++violations;
  }
  return {violations == 0, std::to_string(fixtures) + " fixtures, " + std::to_string(violations) + " violations"};
}

Outcome a5() {
  Outcome o{true, ""};
  for (const char* scene : {"hyperplane", "graph:0.05"}) {
    ExperimentConfig c;
    c.kind = ExperimentKind::kFatouCarleson;
    c.scene = scene;
    c.depth_min = 4;
    c.depth_max = 10;
    c.eps = {0.1};
    c.eta = 1e-4;
    c.K = 1e4;
    c.subcatalog = "interior-first";
    c.data_sets = 10;
    c.walks = 500;
    const Report r = run(c);
    const bool ok = r.verdicts.at("A5");
    o.pass = o.pass && ok;
    const auto& rows = r.tables.front().rows;
    o.detail += std::string(scene) + " mean avg d7=" + fmt("%.3f", rows[3][2].get<double>()) +
                " d10=" + fmt("%.3f", rows[6][2].get<double>()) +
                " worst growth=" + fmt("%.0f%%", 100.0 * r.metrics["plateau_max_growth"].get<double>()) + "; ";
  }
  return o;
}

Outcome a6() {
  Outcome o{true, ""};
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* scene : {"graph:0.05", "graph:0.5", "cantor:6"}) {
    ExperimentConfig c;
    c.kind = ExperimentKind::kCoronaDichotomy;
    c.scene = scene;
    c.depth_min = 5;
    c.depth_max = 10;
    const Report r = run(c);
    o.pass = o.pass && r.verdicts.at("A6");
    o.detail += std::string(scene) + " max=" + fmt("%.3f", r.metrics["packing_max"].get<double>()) +
                " growth=" + fmt("%.2f", r.metrics["packing_growth"].get<double>()) + "; ";
  }
  const double t = seconds_since(t0);
  o.pass = o.pass && t < 300.0;
  o.detail += fmt("%.1fs", t);
  return o;
}

ExperimentConfig khintchine_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::kKhintchine;
  c.scene = "cantor:5";
  c.depth_min = c.depth_max = 6;
  c.eta = 1.0 / 64.0;
  c.K = 64.0;
  c.s_max = 4;
  c.ld_iterations = 3;
  c.sign_samples = 256;
  c.delta = 0.1;
  c.walks = 16000;
  return c;
}

Outcome a7() {
  const Report r = run(khintchine_config());
  const auto& m = r.metrics;
  return {r.verdicts.at("A7"),
          std::to_string(m["passes"].get<long>()) + "/" + std::to_string(m["pairs"].get<long>()) +
              " (x,b) pairs, family " + std::to_string(m["family"].get<long>()) +
              (m["family"].get<long>() == 0 ? " (vacuous)" : "") + ", indeterminate " +
              std::to_string(m["indeterminate"].get<long>()) + ", max |u_b| " +
              fmt("%.3f", m["max_abs_ub"].get<double>()) + ", max excess over 1+3se " +
              fmt("%.3g", m["max_ub_excess"].get<double>())};
}

Outcome a8() {
  const CalibrationParams c = calibrate(1.0);
  const double rho = c.gamma * c.eps;
  const HarmonicDomain space{make_hyperplane(3), {1e-3 * rho, 1e-3, 100000}};
  auto square = [](const Point& y) { return std::abs(y.x) < 0.5 && std::abs(y.y) < 0.5; };
  UQSetup s;
  s.x_Q = {0.0, 0.0, 0.0};
  s.p = {0.0, 0.0, 0.05};
  s.s = {0.0, 0.0, 0.5 * rho};
  s.in_Q = square;
  s.in_E = square;
  s.force_case2 = true;
  const OscillatingSolution u2 = construct_uQ(space, s, c, 20000, 5);
  const bool ok = u2.case_tag == 2 && u2.separation + 3.0 * u2.separation_se >= c.c2;

  // Case 1 diagnostics on the plane.
  const HarmonicDomain plane{make_hyperplane(2), {1e-5, 1e-3, 100000}};
  auto unit = [](const Point& y) { return y.x >= 0.0 && y.x < 1.0; };
  UQSetup s1;
  s1.x_Q = {0.5, 0.0, 0.0};
  s1.p = {0.5, 0.5, 0.0};
  s1.s = {1.5, 0.001, 0.0};
  s1.in_Q = unit;
  s1.in_E = unit;
  const OscillatingSolution u1 = construct_uQ(plane, s1, calibrate(2.0), 20000, 3);
  return {ok, "case 2 separation " + fmt("%.4f", u2.separation) + " +- " + fmt("%.4f", u2.separation_se) +
                  " vs c2 " + fmt("%.4f", c.c2) + "; case 1 separation " + fmt("%.4f", u1.separation) + " +- " +
                  fmt("%.4f", u1.separation_se) + " omega_p(Q)=" + fmt("%.4f", u1.omega_p_Q.value) +
                  " omega_p(E)=" + fmt("%.4f", u1.omega_p_E.value) + " omega_s(E)=" + fmt("%.4f", u1.omega_s_E.value)};
}

Outcome a9() {
  Outcome o{true, ""};
  const RegionParams p{1.0 / 256.0, 256.0, 0.0625, 8};
  for (const char* name : {"hyperplane", "graph:0.05", "graph:0.5", "cantor:6", "koch"}) {
    const ScenePtr scene = scene_from_spec(name);
    const DyadicGrid g = build_grid(scene, 0, 8);
    const WhitneyDecomposition w = whitney_for_grid(g, p);
    const Catalog cat = build_catalog(g, w, p);
    const Subcatalog sub = select_subcatalog(cat, SubcatalogStrategy::kInteriorFirst, 1);
    const CoronaDecomposition cd = bilateral_corona(g);
    // Solutions: dyadic indicator extensions on the plane, random bounded samples elsewhere.
    std::vector<SampledSolution> us;
    for (std::uint64_t i = 0; i < 8; ++i) {
      if (std::string(name) == "hyperplane") {
        const DyadicIndicator d = random_dyadic_indicator(g, 3, hash_key(99, i));
        us.push_back(sample_solution(cat, sub, [&](const Point& x) { return halfplane_extension(g, d, x); }, "closed form"));
      } else {
        SampledSolution u;
        u.k_min = g.k_min;
        u.k_max = g.k_max;
        for (int k = g.k_min; k <= g.k_max; ++k) {
          std::vector<std::vector<double>> gen;
          for (int id = 0; id < static_cast<int>(g.generation(k).size()); ++id) {
            CounterRng rng(hash_key(i, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(id)));
            gen.push_back({rng.uniform(), rng.uniform()});
          }
          u.values.push_back(std::move(gen));
        }
        us.push_back(std::move(u));
      }
    }
    long holds = 0;
    const long trials = 1000;
    CounterRng rng(hash_key(909, std::hash<std::string>{}(name)));
    for (long t = 0; t < trials; ++t) {
      const int node = static_cast<int>(rng.next_u64() % g.nodes.size());
      const SampledSolution& u = us[rng.next_u64() % us.size()];
      const double eps = rng.uniform(0.02, 0.5);
      holds += regime_split_check(u, g, cd.partition, node, eps, {g.k_min, g.cube_of(g.k_min, node)}).holds ? 1 : 0;
    }
    o.pass = o.pass && holds == trials;
    o.detail += std::string(name) + " " + std::to_string(holds) + "/" + std::to_string(trials) + "; ";
  }
  return o;
}

Outcome a10() {
  ExperimentConfig c;
  c.kind = ExperimentKind::kApproxQuality;
  c.depth_min = c.depth_max = 6;
  c.eps = {0.1};
  const Report r = run(c);
  const auto& row = r.tables.back().rows.front();
  return {r.verdicts.at("A10"), "gradient spread " + fmt("%.2f%%", 100.0 * r.metrics["gradient_spread"].get<double>()) +
                                    ", fubini ratio " + fmt("%.3f", row[6].get<double>()) + " (overlap " +
                                    std::to_string(r.metrics["overlap"].get<int>()) + "), TV error " +
                                    fmt("%.2g", row[9].get<double>())};
}

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[e.path().filename().string()] = s.str();
  }
  return files;
}

Outcome a11() {
  namespace fs = std::filesystem;
  std::vector<ExperimentConfig> configs;
  ExperimentConfig fc;
  fc.kind = ExperimentKind::kFatouCarleson;
  fc.scene = "graph:0.05";
  fc.depth_min = 4;
  fc.depth_max = 6;
  fc.data_sets = 3;
  fc.walks = 300;
  configs.push_back(fc);
  ExperimentConfig kh = khintchine_config();
  kh.walks = 300;
  kh.sign_samples = 64;
  configs.push_back(kh);
  ExperimentConfig vb;
  vb.depth_min = vb.depth_max = 6;
  configs.push_back(vb);
  Outcome o{true, ""};
  for (const ExperimentConfig& c : configs) {
    const fs::path a = fs::temp_directory_path() / "fatou_acc_a", b = fs::temp_directory_path() / "fatou_acc_b";
    fs::remove_all(a);
    fs::remove_all(b);
    emit(run(c), a.string());
    emit(run(c), b.string());
    const auto fa = read_dir(a), fb = read_dir(b);
    const bool same = fa == fb;
    o.pass = o.pass && same;
    o.detail += to_string(c.kind) + " " + std::to_string(fa.size()) + " files " + (same ? "identical" : "DIFFER") + "; ";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},  {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11}};
  std::set<std::string> only(argv + 1, argv + argc);
  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%s %s: %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
