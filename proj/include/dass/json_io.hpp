#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dass/clustering.hpp"
#include "dass/cohort.hpp"
#include "dass/features.hpp"
#include "dass/rules.hpp"
#include "dass/search.hpp"
#include "dass/stats.hpp"

namespace dass {

using Json = nlohmann::ordered_json;

/// Canonical text of every JSON document the CLI writes and the service
/// serves: two-space indent, trailing newline.
std::string render(const Json& j);

/// Throws ValidationError (field `what`) on malformed text.
Json parse_json(std::string_view text, const std::string& what);
/// Throws IoError when the file cannot be read.
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames, so a failure leaves no partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

// Configs. Parsers reject unknown keys and wrong types with one FieldError
// per problem, prefixed with `prefix`. Missing keys keep their defaults.
Json to_json(const FeatureSpec& spec);
FeatureSpec feature_spec_from_json(const Json& j, const std::string& prefix = "spec");
Json to_json(const ClusterParams& params);
ClusterParams cluster_params_from_json(const Json& j, const std::string& prefix = "params");
Json to_json(const OutcomeSpec& outcome);
OutcomeSpec outcome_spec_from_json(const Json& j, const std::string& prefix = "outcome");
Json to_json(const MinerConfig& config);
MinerConfig miner_config_from_json(const Json& j, const std::string& prefix = "miner");
Json to_json(const SyntheticConfig& config);
SyntheticConfig synthetic_config_from_json(const Json& j, const std::string& prefix = "config");

// Reports.
Json cluster_model_json(const Cohort& cohort, const FeatureSpec& spec, const ClusterModel& model);

struct ClusterViewOptions {
    /// Feature summarized per organ; empty picks the spec window's upper VX.
    std::optional<FeatureKey> feature;
    std::vector<double> quantiles{0.2, 0.5, 0.8};
};

/// Dose-distribution payload: model summary plus per-cluster, per-organ
/// quantiles of one feature and of the whole VX curve, over every organ.
Json cluster_view_json(const Cohort& cohort, const FeatureSpec& spec, const ClusterModel& model,
                       const ClusterViewOptions& options = {});

/// Linear interpolation between order statistics; `sorted` ascending.
double quantile_sorted(const std::vector<double>& sorted, double q);

Json to_json(const LrtReport& report);
Json lrt_sweep_json(const std::vector<ThresholdResult>& sweep);
std::string lrt_sweep_csv(const std::vector<ThresholdResult>& sweep);

Json to_json(const AdditiveEffectsReport& report);
std::string effects_csv(const AdditiveEffectsReport& report);

Json to_json(const OutcomeGrid& grid);

Json to_json(const Rule& rule);
Rule rule_from_json(const Json& j, const std::string& prefix);
Json to_json(const RuleMetrics& metrics);
Json rule_evaluation_json(const RuleEvaluation& eval, const Cohort& cohort, const RuleTarget& target);
Json mining_json(const MiningResult& result, const Cohort& cohort, const RuleTarget& target,
                 const MinerConfig& config, bool all_features);

Json patient_json(const Cohort& cohort, std::size_t patient);

}  // namespace dass
