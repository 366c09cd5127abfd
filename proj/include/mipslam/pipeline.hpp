#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mipslam/benchmark.hpp"
#include "mipslam/config.hpp"

namespace mipslam {

/// A pipeline stage failed; `what()` is prefixed with "[stage] ".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message, bool numerical)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)), numerical_(numerical) {}
  const std::string& stage() const { return stage_; }
  /// True when the cause was a NumericalError rather than bad input.
  bool numerical() const { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

struct PipelineResult {
  BenchmarkReport report;       // benchmark rows, PGO metrics, config echo
  nlohmann::json details;       // tracking, mapping and graph statistics
  std::map<std::string, double> timings;  // seconds per stage
};

/// Deterministic report: everything except wall-clock timings.
nlohmann::json report_json(const PipelineResult& r);

/// generate -> per-frame tracking with covisibility, sampling-frequency and
/// keyframe-window map updates -> signatures and descriptors -> candidate
/// edges -> adaptive regularisation -> optimise -> remap -> metrics.
/// Artifacts are written to `out_dir` as each stage completes, so a failure
/// leaves the earlier ones behind. Throws StageError.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace mipslam
