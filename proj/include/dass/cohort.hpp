#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dass {

enum class Laterality { ipsilateral, contralateral, midline };

std::string_view to_string(Laterality l);
Laterality parse_laterality(std::string_view s);

struct OrganId {
    std::string name;
    Laterality laterality = Laterality::midline;

    bool operator==(const OrganId&) const = default;
};

/// One DVH feature of an organ: a VX point on the 5..95 grid, the mean dose
/// or the max dose. Orders VX ascending, then mean, then max, which is the
/// column order used everywhere.
class FeatureKey {
public:
    static constexpr int kVxCount = 19;
    static constexpr int kCount = kVxCount + 2;

    static FeatureKey vx(int percent);
    static FeatureKey mean() { return FeatureKey(kVxCount); }
    static FeatureKey max() { return FeatureKey(kVxCount + 1); }
    static FeatureKey from_slot(int slot);
    /// Accepts "V50", "mean", "max".
    static FeatureKey parse(std::string_view text);
    static std::array<FeatureKey, kCount> all();

    bool is_vx() const { return slot_ < kVxCount; }
    int percent() const { return is_vx() ? 5 * (slot_ + 1) : 0; }
    int slot() const { return slot_; }
    std::string str() const;

    auto operator<=>(const FeatureKey&) const = default;

private:
    explicit FeatureKey(int slot) : slot_(slot) {}
    int slot_;
};

/// The 21 DVH features of one organ for one patient, in Gy.
struct OrganDvh {
    std::array<double, FeatureKey::kCount> values{};
    bool missing = false;

    double operator[](FeatureKey k) const { return values[static_cast<std::size_t>(k.slot())]; }
    double& operator[](FeatureKey k) { return values[static_cast<std::size_t>(k.slot())]; }

    bool operator==(const OrganDvh&) const = default;
};

/// Ratings of one symptom, aligned with Cohort::time_points. Absent
/// ratings are nullopt.
using SymptomSeries = std::vector<std::optional<int>>;

struct Patient {
    std::string id;
    std::vector<OrganDvh> dvh;               // aligned with Cohort::organs
    std::vector<SymptomSeries> symptoms;     // aligned with Cohort::symptoms
    std::vector<int> confounders;            // aligned with Cohort::confounders, values in {0,1}

    bool operator==(const Patient&) const = default;
};

/// Immutable once built; share as `std::shared_ptr<const Cohort>` across threads.
struct Cohort {
    std::vector<Patient> patients;
    std::vector<OrganId> organs;
    std::vector<std::string> time_points;
    std::vector<std::string> symptoms;
    std::vector<std::string> confounders;

    std::optional<std::size_t> organ_index(std::string_view name) const;
    std::optional<std::size_t> symptom_index(std::string_view name) const;
    std::optional<std::size_t> time_point_index(std::string_view name) const;
    std::optional<std::size_t> confounder_index(std::string_view name) const;
    std::optional<std::size_t> patient_index(std::string_view id) const;

    bool operator==(const Cohort&) const = default;
};

struct LoadOptions {
    /// Accept organs with every feature cell empty and mark them missing
    /// instead of rejecting the file.
    bool allow_missing = false;
};

enum class CohortFormat { csv, json };

/// Picks the format from the file extension; throws ValidationError otherwise.
CohortFormat format_from_path(const std::filesystem::path& path);

/// Checks every invariant of the data model. Throws ValidationError naming
/// the first offending patient and field.
void validate_cohort(const Cohort& cohort, const LoadOptions& options = {});

Cohort load_cohort(const std::filesystem::path& path, CohortFormat format, const LoadOptions& options = {});
Cohort load_cohort(const std::filesystem::path& path, const LoadOptions& options = {});
void save_cohort(const Cohort& cohort, const std::filesystem::path& path, CohortFormat format);

Cohort cohort_from_csv(std::string_view text, const LoadOptions& options = {});
std::string cohort_to_csv(const Cohort& cohort);
Cohort cohort_from_json_text(std::string_view text, const LoadOptions& options = {});
std::string cohort_to_json_text(const Cohort& cohort);

/// The 45-organ head-and-neck layout. Paired organs are stored
/// laterality-normalized: `_L` is the ipsilateral side, `_R` contralateral.
const std::vector<OrganId>& default_organ_list();
/// Laterality from the default layout; organs not in it are midline.
Laterality default_laterality(std::string_view organ);

/// baseline, wk1..wk7, 6wk_post, 6mo_post
const std::vector<std::string>& default_time_points();
/// The 28 MDASI items.
const std::vector<std::string>& default_symptoms();

/// Largest dose d such that at least `percent`% of the samples receive >= d.
/// `percent` must be on the 5..95 grid.
double vx_from_dose_samples(std::span<const double> samples, int percent);

/// Per-organ dose link producing the planted severe outcome.
struct OutcomeLink {
    std::string symptom = "drymouth";
    std::string time_point = "6mo_post";
    int threshold = 4;
    /// Weights on the cohort-standardized organ mean dose.
    std::map<std::string, double> organ_weights{{"Parotid_L", 1.0}, {"Parotid_R", 1.0}};
    double intercept = -0.5;
};

struct ConfounderSpec {
    std::string name;
    double prevalence = 0.5;
    /// Additive log-odds contribution to the planted outcome.
    double log_odds = 0.0;
};

struct SyntheticConfig {
    std::size_t n_patients = 349;
    /// Empty selects the default 45-organ layout.
    std::vector<std::string> organs;
    int n_groups = 3;
    /// Empty means equal group sizes.
    std::vector<double> group_proportions;
    double baseline_dose_gy = 35.0;
    /// Patient-level std of the organ dose level within a group.
    double dose_spread_gy = 3.0;
    /// Gap between adjacent group dose levels, in units of dose_spread_gy.
    double group_separation = 8.0;
    /// Patient-level std for organs that carry no group structure.
    double background_spread_gy = 8.0;
    /// Organs whose dose level depends on the planted group.
    std::vector<std::string> planted_organs{"Parotid_L", "Parotid_R", "Submandibular_L", "Submandibular_R",
                                            "Soft_Palate"};
    /// Optional explicit group x organ dose levels (Gy); overrides the
    /// separation-based levels for planted organs when non-empty.
    std::vector<std::vector<double>> group_organ_means;
    int voxels_per_organ = 200;
    double voxel_heterogeneity_gy = 6.0;
    double max_dose_gy = 80.0;
    std::vector<std::string> time_points;
    std::vector<std::string> symptoms;
    OutcomeLink outcome;
    std::vector<ConfounderSpec> confounders{
        {"concurrent_chemo", 0.7, 0.0}, {"hpv_positive", 0.6, 0.0}, {"t_stage_high", 0.35, 0.0}};
    /// Probability that any single rating is absent.
    double missing_rating_rate = 0.0;
};

/// Ground truth recorded alongside a synthetic cohort for oracle tests.
struct PlantedTruth {
    std::vector<int> group;               // per patient, 0 = lowest dose group
    std::vector<int> severe;              // per patient, planted binary outcome
    std::vector<double> severe_probability;
    std::vector<std::vector<double>> group_levels;  // group x organ dose level (Gy)
};

struct SyntheticCohort {
    Cohort cohort;
    PlantedTruth truth;
};

/// Throws ValidationError for k < 2, n < k or an empty organ list.
SyntheticCohort generate_synthetic_cohort(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace dass
