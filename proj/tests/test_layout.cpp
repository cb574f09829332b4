#include <filesystem>

#include "doctest.h"
#include "dass/cohort.hpp"
#include "dass/json_io.hpp"

using namespace dass;

TEST_SUITE("layout") {

TEST_CASE("organ layout agrees with the default organ list") {
    const Json layout = read_json_file(std::filesystem::path(DASS_SOURCE_DIR) / "data" / "organ_layout.json");
    const Json& organs = layout["organs"];
    const auto& defaults = default_organ_list();
    REQUIRE(organs.size() == defaults.size());
    for (std::size_t i = 0; i < defaults.size(); ++i) {
        const Json& o = organs[i];
        CHECK(o["name"] == defaults[i].name);
        CHECK(o["laterality"] == std::string(to_string(defaults[i].laterality)));
        REQUIRE(o["polygon"].is_array());
        CHECK(o["polygon"].size() >= 3);
        for (const Json& pt : o["polygon"]) CHECK(pt.size() == 2);
        CHECK(o["anchor"].size() == 2);
    }
}

}
