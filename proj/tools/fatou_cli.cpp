#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fatou/experiment.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  fatou::ExperimentConfig config;
  CLI::App app{"Dyadic oscillation and corona experiments on boundary scenes"};
  std::string depth, kind, config_path;
  std::vector<double> eps;
  app.add_option("--scene", config.scene, "hyperplane, hyperplane3, graph:<slope>, cantor:<level>, koch, disk or a scene JSON file");
  app.add_option("--depth", depth, "grid depth k or range lo..hi");
  app.add_option("--eta", config.eta, "Whitney region parameter eta");
  app.add_option("--kk", config.K, "Whitney region parameter K");
  app.add_option("--tau", config.tau, "cone aperture tau");
  app.add_option("--eps", eps, "oscillation thresholds")->delimiter(',');
  app.add_option("--seed", config.seed, "master seed");
  app.add_option("--walks", config.walks, "walk-on-spheres budget per point");
  app.add_option("--kind", kind, "fatou-carleson, ld-packing, khintchine, corona-dichotomy, approx-quality or validation-battery");
  app.add_option("--out", config.out, "output directory");
  app.add_option("--config", config_path, "JSON config file; its keys override flags");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (!depth.empty()) fatou::parse_depth_range(depth, config.depth_min, config.depth_max);
    if (!eps.empty()) config.eps = eps;
    if (!kind.empty()) config.kind = fatou::experiment_kind_from_string(kind);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw fatou::ConfigError("config", "cannot open " + config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw fatou::ConfigError("config", e.what());
      }
      config = fatou::apply_config_json(config, j);
    }
    fatou::validate(config);
  } catch (const fatou::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const fatou::Report report = fatou::run(config);
    fatou::emit(report, config.out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& [id, ok] : report.verdicts) std::cout << id << ": " << (ok ? "PASS" : "FAIL") << "\n";
    std::fprintf(stderr, "wall time %.3f s, report in %s\n", seconds, config.out.c_str());
    return report.passed() ? kExitPass : kExitFail;
  } catch (const fatou::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
