#include <algorithm>

#include "doctest.h"
#include "dass/error.hpp"
#include "dass/pipeline.hpp"
#include "dass/search.hpp"
#include "helpers.hpp"

using namespace dass;

namespace {

long count_kind(const std::vector<CandidateEdit>& edits, EditKind k) {
    return std::count_if(edits.begin(), edits.end(), [&](const CandidateEdit& e) { return e.kind == k; });
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("the 49-candidate fixture") {
    const FeatureSpec spec{{"Parotid_L", "Parotid_R"}, 40, 55, false, false};
    const auto edits = enumerate_candidates(spec, default_organ_list());
    CHECK(edits.size() == 49);
    CHECK(count_kind(edits, EditKind::add_organ) == 43);
    CHECK(count_kind(edits, EditKind::remove_organ) == 2);
    for (const CandidateEdit& e : edits) CHECK(apply_edit(spec, e) != spec);
}

TEST_CASE("grid boundaries and the nonempty rule") {
    const FeatureSpec wide{{"Tongue"}, 5, 95, false, false};
    const auto edits = enumerate_candidates(wide, default_organ_list());
    CHECK(count_kind(edits, EditKind::extend_window_low) == 0);
    CHECK(count_kind(edits, EditKind::extend_window_high) == 0);
    CHECK(count_kind(edits, EditKind::shrink_window_low) == 1);
    CHECK(count_kind(edits, EditKind::shrink_window_high) == 1);
    CHECK(count_kind(edits, EditKind::remove_organ) == 0);

    const FeatureSpec point{{"Tongue", "Larynx"}, 50, 50, false, false};
    const auto p = enumerate_candidates(point, default_organ_list());
    CHECK(count_kind(p, EditKind::shrink_window_low) == 0);
    CHECK(count_kind(p, EditKind::shrink_window_high) == 0);
    CHECK(count_kind(p, EditKind::extend_window_low) == 1);
}

TEST_CASE("edits invert") {
    const FeatureSpec spec{{"Parotid_L", "Parotid_R"}, 40, 55, false, false};
    const FeatureSpec removed = apply_edit(spec, {EditKind::remove_organ, "Parotid_R"});
    CHECK(apply_edit(removed, {EditKind::add_organ, "Parotid_R"}) == spec);
    CHECK(apply_edit(apply_edit(spec, {EditKind::extend_window_low, {}}), {EditKind::shrink_window_low, {}}) == spec);
    CHECK(apply_edit(apply_edit(spec, {EditKind::shrink_window_high, {}}), {EditKind::extend_window_high, {}}) == spec);
    CHECK_THROWS_AS(apply_edit(spec, {EditKind::add_organ, "Parotid_L"}), ValidationError);
    CHECK_THROWS_AS(apply_edit(spec, {EditKind::remove_organ, "Tongue"}), ValidationError);
    CHECK_THROWS_AS(apply_edit(spec, {EditKind::add_organ, {}}), ValidationError);
    CHECK(CandidateEdit{EditKind::add_organ, "Tongue"}.label() == "add:Tongue");
}

TEST_CASE("report completeness and deltas") {
    const SyntheticCohort sc = testing::small_synthetic(2, 80);
    SearchRequest req;
    req.spec = {{"Parotid_L", "Larynx"}, 40, 55, false, false};
    req.confounders = {"hpv_positive"};
    const AdditiveEffectsReport rep = evaluate_forward_search(sc.cohort, req);
    const auto edits = enumerate_candidates(req.spec, sc.cohort.organs);
    REQUIRE(rep.entries.size() == edits.size());
    for (std::size_t i = 0; i < edits.size(); ++i) CHECK(rep.entries[i].edit == edits[i]);
    CHECK(rep.selected_rank == 2);

    // recompute one entry by hand
    const auto& entry = *std::find_if(rep.entries.begin(), rep.entries.end(),
                                      [](const EffectEntry& e) { return e.edit.label() == "add:Tongue"; });
    REQUIRE(entry.ok);
    const FeatureSpec next = apply_edit(req.spec, entry.edit);
    const LrtReport base = lrt_clusters(sc.cohort, fit_ranked_model(sc.cohort, req.spec, req.params), req.outcome,
                                        req.confounders);
    const LrtReport cand = lrt_clusters(sc.cohort, fit_ranked_model(sc.cohort, next, req.params), req.outcome,
                                        req.confounders);
    CHECK(entry.delta_bic == cand.clusters[2].bic_full - base.clusters[2].bic_full);
    CHECK(entry.delta_aic == cand.clusters[2].aic_full - base.clusters[2].aic_full);
    CHECK(entry.delta_p == cand.clusters[2].p_value - base.clusters[2].p_value);
    CHECK(rep.shown(entry) == entry.delta_bic);
}

TEST_CASE("serial and parallel reports are byte-identical") {
    const SyntheticCohort sc = testing::small_synthetic(6, 70);
    SearchRequest req;
    req.spec = {{"Parotid_L"}, 40, 55, false, false};
    const std::string s = render(to_json(evaluate_forward_search(sc.cohort, req, Execution::serial)));
    const std::string p = render(to_json(evaluate_forward_search(sc.cohort, req, Execution::parallel)));
    CHECK(s == p);
}

TEST_CASE("a failing candidate does not abort the round") {
    SyntheticCohort sc = testing::small_synthetic(3, 80);
    Cohort& c = sc.cohort;
    // organ with data only for severe patients: adding it leaves one class
    c.organs.push_back({"Sparse", Laterality::midline});
    const std::size_t sym = *c.symptom_index("drymouth"), tp = *c.time_point_index("6mo_post");
    int kept = 0;
    for (Patient& p : c.patients) {
        OrganDvh d = testing::flat_dvh(20.0 + kept % 7);
        d.missing = !(p.symptoms[sym][tp] && *p.symptoms[sym][tp] > 4);
        kept += !d.missing;
        p.dvh.push_back(d);
    }
    REQUIRE(kept > 5);
    SearchRequest req;
    req.spec = {{"Parotid_L", "Tongue"}, 40, 55, false, false};
    const AdditiveEffectsReport rep = evaluate_forward_search(c, req);
    const auto& bad = *std::find_if(rep.entries.begin(), rep.entries.end(),
                                    [](const EffectEntry& e) { return e.edit.label() == "add:Sparse"; });
    CHECK(!bad.ok);
    CHECK(!bad.error.empty());
    const auto ok = std::count_if(rep.entries.begin(), rep.entries.end(), [](const EffectEntry& e) { return e.ok; });
    CHECK(ok == static_cast<long>(rep.entries.size()) - 1);
}

TEST_CASE("metric parsing") {
    CHECK(parse_metric("aic") == Metric::aic);
    CHECK(to_string(Metric::p) == "p");
    CHECK_THROWS_AS(parse_metric("t"), ValidationError);
}

}
