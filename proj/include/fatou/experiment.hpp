#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fatou/error.hpp"
#include "fatou/scene.hpp"

namespace fatou {

inline constexpr const char* kCodeVersion = "0.1.0";

/// A configuration problem, reported before any compute.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(ErrorCode::kInvalidArgument, field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind { kFatouCarleson, kLdPacking, kKhintchine, kCoronaDichotomy, kApproxQuality, kValidationBattery };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ExperimentConfig {
  std::string scene = "hyperplane";  // name[:param] or path to a scene JSON file
  int depth_min = 4, depth_max = 8;
  double eta = 1.0 / 256.0;
  double K = 256.0;
  double tau = 0.0625;
  std::vector<double> eps{0.1};
  std::string subcatalog = "interior-first";
  std::uint64_t seed = 1;
  long walks = 2000;
  ExperimentKind kind = ExperimentKind::kValidationBattery;
  std::string out = "out";
  int s_max = 8;
  int data_sets = 10;     // random dyadic indicator data for fatou-carleson
  int data_level = 3;     // generation of those indicators
  int sign_samples = 256;  // B for khintchine
  int ld_iterations = 3;   // m
  double delta = 0.1;
  double corona_eta = 1.0;  // bilateral fit threshold for corona experiments

  nlohmann::json to_json() const;
};

/// Applies the keys of a config object over `base`. Unknown keys are errors.
ExperimentConfig apply_config_json(ExperimentConfig base, const nlohmann::json& j);

/// "4..10" or "8".
void parse_depth_range(const std::string& text, int& lo, int& hi);

/// hyperplane, hyperplane3, graph:<slope>, cantor:<level>, koch, disk, or a .json path.
ScenePtr scene_from_spec(const std::string& spec);

/// Field-level checks of every upstream constraint; throws ConfigError.
void validate(const ExperimentConfig& config);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  /// Long format (metric, x, y, group): x and group columns plus metric columns.
  std::string long_x, long_group;
  std::vector<std::string> long_metrics;
};

struct Report {
  nlohmann::json config;
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, bool> verdicts;  // acceptance id -> pass
  std::vector<Table> tables;
  nlohmann::json provenance = nlohmann::json::object();

  bool passed() const;
  nlohmann::json summary() const;
};

/// Runs one experiment. Validates first; upstream errors carry cube context.
Report run(const ExperimentConfig& config);

/// summary.json, one CSV per table and <table>_long.csv where declared.
/// Doubles are written with %.17g; keys are sorted.
void emit(const Report& report, const std::string& dir);

}  // namespace fatou
