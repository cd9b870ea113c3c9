#include "fatou/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fatou/approx.hpp"
#include "fatou/corona.hpp"
#include "fatou/counting.hpp"
#include "fatou/dyadic.hpp"
#include "fatou/harmonic.hpp"
#include "fatou/rng.hpp"
#include "fatou/whitney.hpp"

namespace fatou {

namespace {

using nlohmann::json;

constexpr int kDepthCap = 14;

struct Setup {
  ScenePtr scene;
  DyadicGrid grid;
  RegionParams params;
  WhitneyDecomposition whitney;
  Catalog catalog;
  Subcatalog sub;
};

RegionParams region_params(const ExperimentConfig& c) {
  RegionParams p;
  p.eta = c.eta;
  p.K = c.K;
  p.tau = c.tau;
  p.s_max = c.s_max;
  return p;
}

CoronaParams corona_params(const ExperimentConfig& c) {
  CoronaParams p;
  p.eta = c.corona_eta;
  return p;
}

std::unique_ptr<Setup> make_setup(const ExperimentConfig& c, int k_max) {
  ScenePtr scene = scene_from_spec(c.scene);
  DyadicGrid g = build_grid(scene, 0, k_max, c.seed);
  const RegionParams p = region_params(c);
  WhitneyDecomposition w = whitney_for_grid(g, p);
  auto s = std::unique_ptr<Setup>(new Setup{scene, std::move(g), p, std::move(w), {}, {}});
  s->catalog = build_catalog(s->grid, s->whitney, p, true);
  s->sub = select_subcatalog(s->catalog, subcatalog_strategy_from_string(c.subcatalog), c.seed);
  return s;
}

std::string cube_name(CubeRef q) { return std::to_string(q.k) + ":" + std::to_string(q.id); }

bool is_planar_hyperplane(const Scene& s) { return s.kind() == SceneKind::kHyperplane && s.ambient_dim() == 2; }

std::string format_cell(const json& v) {
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

int column_index(const Table& t, const std::string& name) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), name);
  require(it != t.columns.end(), ErrorCode::kInvalidArgument, "table " + t.name + " has no column " + name);
  return static_cast<int>(it - t.columns.begin());
}

// ---- Experiment kinds ----

void run_validation_battery(const ExperimentConfig& c, Report& rep) {
  const BatteryReport b = validation_battery(100, c.walks, c.seed);
  Table t{"battery", {"case", "domain", "x", "y", "a", "b", "exact", "estimate", "std_error", "within_3se"}, {}, "", "", {}};
  for (std::size_t i = 0; i < b.cases.size(); ++i) {
    const BatteryCase& bc = b.cases[i];
    t.rows.push_back({static_cast<long>(i), bc.domain, bc.x.x, bc.x.y, bc.a, bc.b, bc.exact, bc.estimate.value,
                      bc.estimate.std_error, bc.within_3se});
  }
  rep.tables.push_back(std::move(t));
  rep.metrics["battery_passed"] = b.passed;
  rep.metrics["battery_cases"] = static_cast<long>(b.cases.size());
  rep.metrics["max_capped_fraction"] = b.max_capped_fraction;
  rep.verdicts["A3"] = b.passed >= 95 && b.max_capped_fraction < 1e-3;

  const ScenePtr scene = scene_from_spec(c.scene);
  const DyadicGrid g = build_grid(scene, 0, c.depth_max, c.seed);
  const AxiomReport ax = verify_grid_axioms(g);
  rep.metrics["grid_a0"] = ax.a0;
  rep.metrics["grid_c1"] = ax.c1;
  rep.metrics["grid_axioms"] = ax.all_pass();
  rep.verdicts["A1"] = ax.all_pass() && ax.a0 >= 0.125;

  const WhitneyDecomposition w = whitney_for_grid(g, region_params(c));
  const std::vector<WhitneyViolation> v = check_whitney_property(w);
  rep.metrics["whitney_cells"] = static_cast<long>(w.size());
  rep.metrics["whitney_violations"] = static_cast<long>(v.size());
  rep.verdicts["A2"] = v.empty();
}

void run_fatou_carleson(const ExperimentConfig& c, Report& rep) {
  const auto s = make_setup(c, c.depth_max);
  const DyadicGrid& g = s->grid;
  const int level = std::clamp(c.data_level, g.k_min, g.k_max);
  std::vector<DyadicIndicator> data;
  for (int i = 0; i < c.data_sets; ++i)
    data.push_back(random_dyadic_indicator(g, level, hash_key(c.seed, 0xDA7A, static_cast<std::uint64_t>(i))));
  std::vector<SampledSolution> u;
  if (is_planar_hyperplane(*s->scene)) {
    for (const DyadicIndicator& d : data)
      u.push_back(sample_solution(s->catalog, s->sub, [&](const Point& x) { return halfplane_extension(g, d, x); },
                                  "closed form"));
  } else {
    std::vector<std::vector<double>> node_data;
    for (const DyadicIndicator& d : data) node_data.push_back(d.node_values);
    u = sample_solutions_wos(s->catalog, s->sub, HarmonicDomain{s->scene, {}}, node_data, c.walks, c.seed);
  }
  double sigma = 0.0;
  for (const DyadicCube& q : g.generation(g.k_min)) sigma += q.sigma;

  Table t{"carleson", {"depth", "eps", "mean_average", "min_average", "max_average", "data_sets"}, {},
          "depth", "eps", {"mean_average"}};
  Table per{"carleson_by_data", {"depth", "eps", "data", "average"}, {}, "", "", {}};
  // averages[eps][data][depth]
  std::vector<std::vector<std::vector<double>>> avg(c.eps.size(),
      std::vector<std::vector<double>>(data.size(), std::vector<double>(c.depth_max + 1, 0.0)));
  for (int d = c.depth_min; d <= c.depth_max; ++d) {
    for (std::size_t e = 0; e < c.eps.size(); ++e) {
      double mean = 0.0, lo = kInf, hi = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        double total = 0.0;
        for (const DyadicCube& q : g.generation(g.k_min)) {
          const CountingResult r = count_over_cube(u[i], g, c.eps[e], {g.k_min, q.id}, std::max(d, g.k_min));
          total += r.carleson_average * q.sigma;
        }
        const double a = total / sigma;
        avg[e][i][d] = a;
        per.rows.push_back({d, c.eps[e], static_cast<long>(i), a});
        mean += a / static_cast<double>(u.size());
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
      t.rows.push_back({d, c.eps[e], mean, lo, hi, static_cast<long>(u.size())});
    }
  }
  // Plateau: growth from depth 7 (or three generations back) to the deepest level.
  const int d_hi = c.depth_max;
  const int d_lo = (c.depth_min <= 7 && d_hi >= 10) ? 7 : std::max(c.depth_min, d_hi - 3);
  double worst = 0.0;
  for (std::size_t e = 0; e < c.eps.size(); ++e) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double a = avg[e][i][d_lo], b = avg[e][i][d_hi];
      const double growth = a > 0.0 ? b / a - 1.0 : (b > 0.0 ? kInf : 0.0);
      worst = std::max(worst, growth);
    }
  }
  rep.metrics["plateau_from"] = d_lo;
  rep.metrics["plateau_to"] = d_hi;
  rep.metrics["plateau_max_growth"] = worst;
  rep.metrics["max_sample_std_error"] = [&] {
    double m = 0.0;
    for (const SampledSolution& x : u) m = std::max(m, x.max_std_error());
    return m;
  }();
  rep.verdicts[d_lo == 7 && d_hi == 10 ? "A5" : "plateau"] = d_hi > d_lo && worst < 0.25;
  rep.tables.push_back(std::move(t));
  rep.tables.push_back(std::move(per));
}

struct ForestRun {
  CalibrationParams calib;
  LDForest forest;
  double delta = 0.0;
};

ForestRun run_forest(const ExperimentConfig& c, const Setup& s, Report& rep) {
  const DyadicGrid& g = s.grid;
  ForestRun fr;
  fr.calib = calibrate(region_constant(s.catalog), c.eps.front());
  const bool override_depth = g.k_min + fr.calib.M1 + fr.calib.M2 > g.k_max;
  rep.metrics["C_eta_K"] = fr.calib.C_eta_K;
  rep.metrics["M1_calibrated"] = fr.calib.M1;
  rep.metrics["M2_calibrated"] = fr.calib.M2;
  if (override_depth) fr.calib = with_depth_override(fr.calib, 1, 1);
  rep.metrics["depth_override"] = override_depth;
  rep.metrics["M1"] = fr.calib.M1;
  rep.metrics["M2"] = fr.calib.M2;
  fr.delta = std::min(c.delta, fr.calib.eps);
  rep.metrics["delta"] = fr.delta;
  DensityOptions o;
  o.walks = c.walks;
  o.seed = c.seed;
  fr.forest = iterate_LD(s.catalog, s.sub, {g.k_min, 0}, fr.calib, fr.delta, c.ld_iterations,
                         HarmonicDomain{s.scene, {}}, o);
  const LDForest& f = fr.forest;

  Table levels{"ld_levels", {"level", "cubes", "mass", "prefix_packing"}, {}, "level", "", {"cubes", "prefix_packing"}};
  std::vector<CubeRef> prefix;
  for (std::size_t j = 0; j < f.levels.size(); ++j) {
    double mass = 0.0;
    for (const CubeRef& q : f.levels[j]) mass += g.cube(q).sigma;
    if (j > 0) prefix.insert(prefix.end(), f.levels[j].begin(), f.levels[j].end());
    const double pack = prefix.empty() ? 0.0 : verify_packing(g, prefix, {f.root}).max;
    levels.rows.push_back({static_cast<long>(j), static_cast<long>(f.levels[j].size()), mass, pack});
  }
  Table undecided{"undecided", {"root", "cube", "ratio", "std_error", "walks"}, {}, "", "", {}};
  for (const auto& [root, dc] : f.undecided)
    undecided.rows.push_back({cube_name(root), cube_name(dc.q), dc.ratio, dc.std_error, dc.walks});
  rep.tables.push_back(std::move(levels));
  rep.tables.push_back(std::move(undecided));

  long e_ok = 0;
  for (const EQCheck& e : f.e_checks) e_ok += e.ok ? 1 : 0;
  rep.metrics["F1"] = static_cast<long>(f.F1.size());
  rep.metrics["F2"] = static_cast<long>(f.F2.size());
  rep.metrics["mass_F1"] = f.mass_F1;
  rep.metrics["mass_F2"] = f.mass_F2;
  rep.metrics["no_pole"] = static_cast<long>(f.no_pole.size());
  rep.metrics["indeterminate"] = f.indeterminate;
  rep.metrics["e_checks"] = static_cast<long>(f.e_checks.size());
  rep.metrics["e_checks_ok"] = e_ok;
  rep.metrics["e_disjoint"] = f.e_disjoint;
  rep.metrics["separated"] = f.separated;
  return fr;
}

void run_ld_packing(const ExperimentConfig& c, Report& rep) {
  const auto s = make_setup(c, c.depth_max);
  const ForestRun fr = run_forest(c, *s, rep);
  const LDForest& f = fr.forest;
  rep.verdicts["ld_packing"] = f.mass_F1 <= (fr.calib.M2 + 1) * f.mass_F2 + 1e-12 && f.separated && f.e_disjoint &&
                               rep.metrics["e_checks_ok"] == rep.metrics["e_checks"];
}

void run_khintchine(const ExperimentConfig& c, Report& rep) {
  const auto s = make_setup(c, c.depth_max);
  const ForestRun fr = run_forest(c, *s, rep);
  KhintchineOptions o;
  o.B = c.sign_samples;
  o.walks = c.walks;
  o.seed = c.seed;
  const KhintchineReport k = khintchine_experiment(s->catalog, s->sub, fr.forest, fr.calib, HarmonicDomain{s->scene, {}}, o);
  Table per_b{"khintchine_b", {"b", "pass_rate"}, {}, "b", "", {"pass_rate"}};
  for (std::size_t b = 0; b < k.pass_rate_per_b.size(); ++b) per_b.rows.push_back({static_cast<long>(b), k.pass_rate_per_b[b]});
  Table fam{"khintchine_family", {"cube", "separation", "frequency"}, {}, "", "", {}};
  std::vector<CubeRef> members;
  for (const CubeRef& q : fr.forest.F2)
    if (fr.forest.poles.count(q)) members.push_back(q);
  for (std::size_t i = 0; i < k.frequency.size() && i < members.size(); ++i)
    fam.rows.push_back({cube_name(members[i]), k.separation[i], k.frequency[i]});
  rep.tables.push_back(std::move(per_b));
  rep.tables.push_back(std::move(fam));
  rep.metrics["B"] = k.B;
  rep.metrics["family"] = static_cast<long>(k.family);
  rep.metrics["pairs"] = k.pairs;
  rep.metrics["passes"] = k.passes;
  rep.metrics["c4"] = k.c4;
  rep.metrics["eps0"] = k.eps0;
  rep.metrics["threshold"] = k.threshold;
  rep.metrics["predicted_frequency"] = k.predicted_frequency;
  rep.metrics["min_frequency"] = k.min_frequency;
  rep.metrics["max_abs_ub"] = k.max_abs_ub;
  rep.metrics["max_ub_excess"] = k.max_ub_excess;
  rep.metrics["witnesses"] = k.witnesses;
  rep.metrics["witnesses_valid"] = k.witnesses_valid;
  rep.verdicts["A7"] = k.all_pass();
}

void run_corona_dichotomy(const ExperimentConfig& c, Report& rep) {
  const ScenePtr scene = scene_from_spec(c.scene);
  Table t{"corona", {"depth", "packing", "regimes", "bad", "cubes", "coherent"}, {}, "depth", "", {"packing"}};
  std::vector<double> packing;
  bool coherent = true;
  for (int d = c.depth_min; d <= c.depth_max; ++d) {
    const DyadicGrid g = build_grid(scene, 0, d, c.seed);
    const CoronaDecomposition cd = bilateral_corona(g, corona_params(c));
    bool ok = true;
    for (const Regime& r : cd.regimes) ok = ok && check_coherency(g, r.cubes).coherent();
    coherent = coherent && ok;
    packing.push_back(cd.packing.max);
    t.rows.push_back({d, cd.packing.max, static_cast<long>(cd.regimes.size()), static_cast<long>(cd.bad.size()),
                      static_cast<long>(g.cube_count()), ok});
  }
  rep.tables.push_back(std::move(t));
  const double growth = packing.back() / packing.front();
  rep.metrics["packing_growth"] = growth;
  rep.metrics["packing_max"] = *std::max_element(packing.begin(), packing.end());
  rep.metrics["ur_label"] = scene->ur_label();
  rep.metrics["coherent"] = coherent;
  if (scene->ur_label()) {
    double drift = 0.0;
    for (double p : packing) drift = std::max(drift, std::abs(p / packing.front() - 1.0));
    rep.metrics["packing_drift"] = drift;
    rep.verdicts["A6"] = coherent && *std::max_element(packing.begin(), packing.end()) <= 1.5 && drift <= 0.25;
  } else {
    rep.verdicts["A6"] = coherent && growth >= 2.0;
  }
}

void run_approx_quality(const ExperimentConfig& c, Report& rep) {
  // Scale invariance of the Carleson gradient norm on the closed-form step.
  const WhitneyDecomposition wide =
      whitney_decompose(make_hyperplane(2), {-4.0, 0.0, 4.0, 4.0}, {std::ldexp(1.0, -12)});
  auto step = [](const Point& y) { return 0.5 + std::atan(y.x / y.y) / kPi; };
  const CarlesonGradientReport cg =
      carleson_gradient_norm(step, wide, {{{0, 0, 0}, 1.0}, {{0, 0, 0}, 2.0}, {{0, 0, 0}, 4.0}});
  Table grad{"carleson_gradient", {"r", "normalized", "points"}, {}, "", "", {}};
  double lo = kInf, hi = 0.0;
  for (const CarlesonBallSum& b : cg.balls) {
    grad.rows.push_back({b.ball.r, b.normalized, b.points});
    lo = std::min(lo, b.normalized);
    hi = std::max(hi, b.normalized);
  }
  rep.tables.push_back(std::move(grad));
  rep.metrics["gradient_spread"] = hi / lo - 1.0;
  rep.metrics["gradient_richardson"] = cg.richardson;
  const bool scale_ok = hi / lo - 1.0 <= 0.05;

  const auto s = make_setup(c, c.depth_max);
  const DyadicGrid& g = s->grid;
  const CoronaDecomposition cd = bilateral_corona(g, corona_params(c));
  const DyadicIndicator data = random_dyadic_indicator(g, std::clamp(c.data_level, g.k_min, g.k_max), c.seed);
  auto u = [&](const Point& x) { return halfplane_extension(g, data, x); };
  const SampledSolution sampled = sample_solution(s->catalog, s->sub, u, "closed form");
  const double overlap = region_overlap(s->catalog).max_multiplicity;
  rep.metrics["overlap"] = overlap;

  Table t{"approx",
          {"eps", "deviation_initial", "deviation_final", "rounds", "groups", "carleson_candidate", "fubini_ratio",
           "cone_bound_constant", "cone_bound_unbounded", "tv_max_error"},
          {}, "eps", "", {"deviation_final", "carleson_candidate", "fubini_ratio"}};
  bool fubini_ok = true, tv_ok = true;
  for (double eps : c.eps) {
    const Approximant a = build_approximant(u, s->catalog, cd, eps, g.k_max - g.k_min);
    const FubiniReport fb = fubini_collapse_check(a, s->catalog, {g.k_min, 0}, c.tau);
    const bool trivial = fb.lhs == 0.0 && fb.rhs == 0.0;
    fubini_ok = fubini_ok && (trivial || (fb.ratio <= overlap && fb.ratio >= 1.0 / overlap));
    const ConeBoundReport cb = cone_bound_check(sampled, s->catalog, a, eps, 100, c.seed);
    double tv_err = 0.0;
    CounterRng rng(hash_key(c.seed, 0x7F));
    const DyadicCube& root = g.cube(g.k_min, 0);
    for (int x = root.node_begin; x < root.node_end; x += std::max(1, (root.node_end - root.node_begin) / 8)) {
      const DyadicCone cone = cone_at(s->catalog, x, {g.k_min, 0}, c.tau);
      const double whole = cone_gradient_functional(a, cone);
      double left = 0.0, right = 0.0;
      for (double p : cone_gradient_contributions(a, cone)) (rng.uniform() < 0.5 ? left : right) += p;
      tv_err = std::max(tv_err, std::abs(left + right - whole) / std::max(1.0, whole));
    }
    tv_ok = tv_ok && tv_err <= 1e-12;
    t.rows.push_back({eps, a.deviation_history.front(), a.deviation, a.rounds, static_cast<long>(a.groups.size()),
                      a.carleson_candidate, fb.ratio, cb.constant, cb.unbounded, tv_err});
  }
  rep.tables.push_back(std::move(t));
  rep.metrics["scale_invariant"] = scale_ok;
  rep.metrics["fubini_within_overlap"] = fubini_ok;
  rep.metrics["tv_consistent"] = tv_ok;
  rep.verdicts["A10"] = scale_ok && fubini_ok && tv_ok;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kFatouCarleson: return "fatou-carleson";
    case ExperimentKind::kLdPacking: return "ld-packing";
    case ExperimentKind::kKhintchine: return "khintchine";
    case ExperimentKind::kCoronaDichotomy: return "corona-dichotomy";
    case ExperimentKind::kApproxQuality: return "approx-quality";
    case ExperimentKind::kValidationBattery: return "validation-battery";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::kFatouCarleson, ExperimentKind::kLdPacking, ExperimentKind::kKhintchine,
                 ExperimentKind::kCoronaDichotomy, ExperimentKind::kApproxQuality, ExperimentKind::kValidationBattery})
    if (to_string(k) == name) return k;
  throw ConfigError("kind", "unknown experiment kind '" + name + "'");
}

json ExperimentConfig::to_json() const {
  return json{{"scene", scene},
              {"depth", {depth_min, depth_max}},
              {"eta", eta},
              {"kk", K},
              {"tau", tau},
              {"eps", eps},
              {"subcatalog", subcatalog},
              {"seed", seed},
              {"walks", walks},
              {"kind", to_string(kind)},
              {"s_max", s_max},
              {"data_sets", data_sets},
              {"data_level", data_level},
              {"sign_samples", sign_samples},
              {"ld_iterations", ld_iterations},
              {"delta", delta},
              {"corona_eta", corona_eta}};
}

void parse_depth_range(const std::string& text, int& lo, int& hi) {
  try {
    const std::size_t dots = text.find("..");
    std::size_t used = 0;
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      lo = std::stoi(text.substr(0, dots), &used);
      if (used != dots) throw std::invalid_argument(text);
      const std::string tail = text.substr(dots + 2);
      hi = std::stoi(tail, &used);
      if (used != tail.size()) throw std::invalid_argument(text);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("depth", "expected 'k' or 'lo..hi', got '" + text + "'");
  }
}

ExperimentConfig apply_config_json(ExperimentConfig c, const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "schema") {
        if (v.get<int>() != 1) throw ConfigError("schema", "unsupported config schema version");
      } else if (key == "scene") {
        c.scene = v.is_string() ? v.get<std::string>() : v.dump();
      } else if (key == "depth") {
        if (v.is_array()) {
          if (v.size() != 2) throw ConfigError("depth", "expected [lo, hi]");
          c.depth_min = v.at(0).get<int>();
          c.depth_max = v.at(1).get<int>();
        } else if (v.is_number_integer()) {
          c.depth_min = c.depth_max = v.get<int>();
        } else {
          parse_depth_range(v.get<std::string>(), c.depth_min, c.depth_max);
        }
      } else if (key == "eta") {
        c.eta = v.get<double>();
      } else if (key == "kk") {
        c.K = v.get<double>();
      } else if (key == "tau") {
        c.tau = v.get<double>();
      } else if (key == "eps") {
        c.eps = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      } else if (key == "subcatalog") {
        c.subcatalog = v.get<std::string>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "walks") {
        c.walks = v.get<long>();
      } else if (key == "kind") {
        c.kind = experiment_kind_from_string(v.get<std::string>());
      } else if (key == "out") {
        c.out = v.get<std::string>();
      } else if (key == "s_max") {
        c.s_max = v.get<int>();
      } else if (key == "data_sets") {
        c.data_sets = v.get<int>();
      } else if (key == "data_level") {
        c.data_level = v.get<int>();
      } else if (key == "sign_samples") {
        c.sign_samples = v.get<int>();
      } else if (key == "ld_iterations") {
        c.ld_iterations = v.get<int>();
      } else if (key == "delta") {
        c.delta = v.get<double>();
      } else if (key == "corona_eta") {
        c.corona_eta = v.get<double>();
      } else {
        throw ConfigError(key, "unknown config key");
      }
    } catch (const json::exception& e) {
      throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
  }
  return c;
}

ScenePtr scene_from_spec(const std::string& spec) {
  try {
    if (!spec.empty() && spec.front() == '{') return scene_from_json(json::parse(spec));
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") return load_scene(spec);
    const std::size_t colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (name == "hyperplane" && arg.empty()) return make_hyperplane(2);
    if (name == "hyperplane3" && arg.empty()) return make_hyperplane(3);
    if (name == "graph") return make_lipschitz_graph(arg.empty() ? 0.05 : std::stod(arg));
    if (name == "cantor") return make_cantor(arg.empty() ? 6 : std::stoi(arg));
    if (name == "koch" && arg.empty()) return make_koch_curve();
    if (name == "disk" && arg.empty()) return make_sphere(2);
  } catch (const Error& e) {
    throw ConfigError("scene", e.what());
  } catch (const std::exception& e) {
    throw ConfigError("scene", std::string("cannot parse '") + spec + "': " + e.what());
  }
  throw ConfigError("scene", "unknown scene '" + spec + "'");
}

void validate(const ExperimentConfig& c) {
  const ScenePtr scene = scene_from_spec(c.scene);
  if (!(c.K > 1.0)) throw ConfigError("kk", "K must exceed 1");
  if (!(c.eta > 0.0 && c.eta * c.K <= 1.0)) throw ConfigError("eta", "eta must lie in (0, 1/K]");
  if (!(c.tau > 0.0 && c.tau <= kTau0 / 2.0))
    throw ConfigError("tau", "tau must lie in (0, " + std::to_string(kTau0 / 2.0) + "]");
  if (c.depth_min < 0 || c.depth_min > c.depth_max) throw ConfigError("depth", "need 0 <= lo <= hi");
  if (c.depth_max > kDepthCap) throw ConfigError("depth", "depth is capped at " + std::to_string(kDepthCap));
  if (c.eps.empty()) throw ConfigError("eps", "at least one eps is required");
  for (double e : c.eps)
    if (!(e > 0.0 && e < 0.5)) throw ConfigError("eps", "each eps must lie in (0, 0.5)");
  if (c.walks < 1) throw ConfigError("walks", "must be positive");
  if (c.s_max < 1) throw ConfigError("s_max", "must be positive");
  try {
    subcatalog_strategy_from_string(c.subcatalog);
  } catch (const Error& e) {
    throw ConfigError("subcatalog", e.what());
  }
  if (c.data_sets < 1) throw ConfigError("data_sets", "must be positive");
  if (c.sign_samples < 64) throw ConfigError("sign_samples", "at least 64 sign samples are required");
  if (c.ld_iterations < 1) throw ConfigError("ld_iterations", "must be positive");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (!(c.corona_eta > 0.0)) throw ConfigError("corona_eta", "must be positive");
  if (c.kind != ExperimentKind::kValidationBattery && scene->ambient_dim() != 2)
    throw ConfigError("scene", to_string(c.kind) + " runs on planar scenes");
  if (c.kind == ExperimentKind::kApproxQuality && !is_planar_hyperplane(*scene))
    throw ConfigError("scene", "approx-quality uses closed-form solutions and needs the planar hyperplane");
}

bool Report::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.second; });
}

json Report::summary() const {
  json tables_json = json::object();
  for (const Table& t : tables) tables_json[t.name] = {{"columns", t.columns}, {"rows", t.rows}};
  json v = json::object();
  for (const auto& [id, ok] : verdicts) v[id] = ok;
  return json{{"config", config.is_null() ? json::object() : config},
              {"metrics", metrics},
              {"verdicts", v},
              {"passed", passed()},
              {"tables", tables_json},
              {"provenance", provenance}};
}

Report run(const ExperimentConfig& c) {
  validate(c);
  Report rep;
  rep.config = c.to_json();
  rep.provenance = {{"code_version", kCodeVersion}, {"seed", c.seed}, {"walks", c.walks}};
  try {
    switch (c.kind) {
      case ExperimentKind::kValidationBattery: run_validation_battery(c, rep); break;
      case ExperimentKind::kFatouCarleson: run_fatou_carleson(c, rep); break;
      case ExperimentKind::kLdPacking: run_ld_packing(c, rep); break;
      case ExperimentKind::kKhintchine: run_khintchine(c, rep); break;
      case ExperimentKind::kCoronaDichotomy: run_corona_dichotomy(c, rep); break;
      case ExperimentKind::kApproxQuality: run_approx_quality(c, rep); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), to_string(c.kind) + " on " + c.scene + ": " + e.what());
  }
  return rep;
}

void emit(const Report& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  write_text(fs::path(dir) / "summary.json", report.summary().dump(2) + "\n");
  for (const Table& t : report.tables) {
    std::string csv;
    for (std::size_t i = 0; i < t.columns.size(); ++i) csv += (i ? "," : "") + t.columns[i];
    csv += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) csv += (i ? "," : "") + format_cell(row[i]);
      csv += "\n";
    }
    write_text(fs::path(dir) / (t.name + ".csv"), csv);
    if (t.long_x.empty()) continue;
    const int xi = column_index(t, t.long_x);
    const int gi = t.long_group.empty() ? -1 : column_index(t, t.long_group);
    std::string long_csv = "metric,x,y,group\n";
    for (const std::string& m : t.long_metrics) {
      const int mi = column_index(t, m);
      for (const auto& row : t.rows)
        long_csv += m + "," + format_cell(row[xi]) + "," + format_cell(row[mi]) + "," +
                    (gi >= 0 ? format_cell(row[gi]) : std::string()) + "\n";
    }
    write_text(fs::path(dir) / (t.name + "_long.csv"), long_csv);
  }
}

}  // namespace fatou
