#pragma once

#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/evaluate.hpp"
#include "crules/rulecore.hpp"
#include "crules/synth.hpp"

namespace crules {

inline constexpr const char* kToolVersion = "0.1.0";

/// Serialized model: literal universe + rules + config snapshot, enough to
/// re-apply the rule set to fresh data with the same column names.
struct ModelFile {
  std::vector<Literal> literals;
  double y_offset = 0.0;
  RuleSet rules;
  double population_ate = 0.0;
  std::string input_digest;
  std::string config_json;  // resolved run config, verbatim
};

std::string model_to_json(const ModelFile& model, const BinarizedDataset& ds);
ModelFile model_from_json(const std::string& text);

std::string truth_to_json(const SynthTruth& truth);
SynthTruth truth_from_json(const std::string& text);

std::string report_to_json(const MetricsReport& report);
/// Aligned-column text table of the same numbers.
std::string report_to_text(const MetricsReport& report);

/// FNV-1a over the raw bytes, hex-encoded; embedded in artifacts so runs
/// can be traced back to their exact inputs.
std::string fnv1a_digest(const std::string& bytes);
std::string file_digest(const std::string& path);

/// Write via temp file + rename in the target directory.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace crules
