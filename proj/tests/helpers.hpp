#pragma once

#include <string>
#include <vector>

#include "dass/cohort.hpp"
#include "dass/features.hpp"

namespace dass::testing {

/// Small synthetic cohort: 60 patients, 4 organs, Tongue planted.
inline SyntheticCohort small_synthetic(std::uint64_t seed = 1, std::size_t n = 60) {
    SyntheticConfig c;
    c.n_patients = n;
    c.organs = {"Parotid_L", "Parotid_R", "Tongue", "Larynx"};
    c.planted_organs = {"Tongue"};
    c.outcome.organ_weights = {{"Tongue", 1.0}};
    c.voxels_per_organ = 60;
    return generate_synthetic_cohort(c, seed);
}

/// Flat DVH: every VX, the mean and the max equal `dose`.
inline OrganDvh flat_dvh(double dose) {
    OrganDvh d;
    d.values.fill(dose);
    return d;
}

/// One organ, one symptom, given time points; ratings per patient.
inline Cohort rating_cohort(const std::vector<std::string>& time_points,
                            const std::vector<std::vector<std::optional<int>>>& ratings,
                            const std::vector<double>& doses) {
    Cohort c;
    c.organs = {{"Tongue", Laterality::midline}};
    c.time_points = time_points;
    c.symptoms = {"drymouth"};
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        Patient p;
        p.id = "p" + std::to_string(i);
        p.dvh = {flat_dvh(doses[i])};
        p.symptoms = {ratings[i]};
        c.patients.push_back(p);
    }
    return c;
}

}  // namespace dass::testing
