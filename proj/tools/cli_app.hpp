#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqad/experiment.hpp"

namespace cqad::cli {

enum ExitCode { kOk = 0, kValidation = 2, kNumeric = 3, kComparison = 4 };

struct RunManifest {
  std::string params_path;
  std::string experiment_path;
  std::string out_dir = "out";
  int jobs = 1;
  std::uint64_t seed = 1;
  bool paper_defaults = false;
  bool quiet = false;
};

struct Table {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct Artifacts {
  std::vector<Table> tables;  // results.csv first, then plot data
  nlohmann::json fits = nlohmann::json::object();
  nlohmann::json summary = nlohmann::json::object();
};

using Logger = std::function<void(const std::string&)>;

// 12 significant digits, the precision of every serialized number.
double round12(double x);
std::string format_number(double x);
std::string sha256_hex(const std::string& data);

Artifacts run_experiment(const ExperimentSpec& spec, const SystemParams& params, const RunManifest& manifest,
                         const Logger& log);

// Loads inputs, runs, and writes results.csv, fit.json, summary.json and the plot CSVs.
// Nothing is left in out_dir when any step fails.
int run(const RunManifest& manifest);

struct MetricCheck {
  std::string metric;
  bool pass = false;
  std::string reason;
};

struct CompareReport {
  bool pass = true;
  std::vector<MetricCheck> checks;
};

// Tolerance document: "<metric> = 5%" (relative) or "<metric> = 1e-3" (absolute); "*" sets the default.
CompareReport compare_summaries(const nlohmann::json& reference, const nlohmann::json& candidate,
                                const KeyValueDocument& tolerances);
int compare(const std::string& reference_path, const std::string& candidate_path,
            const std::string& tolerance_path, bool quiet);

int main_entry(int argc, char** argv);

}  // namespace cqad::cli
