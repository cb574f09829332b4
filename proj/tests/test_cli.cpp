#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "commands.hpp"
#include "dass/pipeline.hpp"
#include "dass/service.hpp"

using namespace dass;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"dass"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("dass_cli_" + std::to_string(::getpid()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string small_config(const TempDir& dir) {
    const std::string path = dir / "config.json";
    write(path, R"({"n_patients": 80, "voxels_per_organ": 40})");
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic") {
    TempDir dir;
    const std::string cfg = small_config(dir);
    REQUIRE(run_cli({"synth", "--config", cfg, "--seed", "3", "--out", dir / "a.csv", "--truth", dir / "t.json"}).code == 0);
    REQUIRE(run_cli({"synth", "--config", cfg, "--seed", "3", "--out", dir / "b.csv"}).code == 0);
    CHECK(read_text_file(dir / "a.csv") == read_text_file(dir / "b.csv"));
    CHECK(read_json_file(dir / "t.json")["patients"].size() == 80);
    REQUIRE(run_cli({"synth", "--config", cfg, "--seed", "3", "--out", dir / "c.json"}).code == 0);
    CHECK(cohort_from_json_text(read_text_file(dir / "c.json")) == cohort_from_csv(read_text_file(dir / "a.csv")));
}

TEST_CASE("batch commands") {
    TempDir dir;
    REQUIRE(run_cli({"synth", "--config", small_config(dir), "--seed", "1", "--out", dir / "c.csv"}).code == 0);
    const std::string c = dir / "c.csv";

    const Run cluster = run_cli({"cluster", "--cohort", c});
    REQUIRE(cluster.code == 0);
    const Json model = Json::parse(cluster.out);
    CHECK(model["k"] == 3);
    CHECK(model["assignments"].size() == 80);
    CHECK(run_cli({"cluster", "--cohort", c, "--out", dir / "m.json"}).code == 0);
    CHECK(read_text_file(dir / "m.json") == cluster.out);

    write(dir / "o.json", R"({"threshold": 3})");
    const Run lrt = run_cli({"lrt", "--cohort", c, "--outcome", dir / "o.json", "--confounders", "hpv_positive",
                         "--thresholds", "3,4,5", "--out", dir / "l.csv"});
    REQUIRE(lrt.code == 0);
    const std::string csv = read_text_file(dir / "l.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 3);

    const Run search = run_cli({"search", "--cohort", c, "--metric", "p", "--out", dir / "e.csv"});
    REQUIRE(search.code == 0);
    const std::string effects = read_text_file(dir / "e.csv");
    CHECK(std::count(effects.begin(), effects.end(), '\n') == 50);

    write(dir / "miner.json", R"({"k_beam": 3, "max_rules": 2})");
    const Run rules = run_cli({"rules", "--cohort", c, "--target", "outcome", "--miner", dir / "miner.json",
                           "--scope", "spec", "--out", dir / "r.json"});
    REQUIRE(rules.code == 0);
    CHECK(read_json_file(dir / "r.json").contains("rulesets"));
}

TEST_CASE("lrt matches the service body") {
    TempDir dir;
    REQUIRE(run_cli({"synth", "--config", small_config(dir), "--seed", "2", "--out", dir / "c.csv"}).code == 0);
    const Run lrt = run_cli({"lrt", "--cohort", dir / "c.csv", "--thresholds", "2,4"});
    Service svc;
    const ServiceResponse created = svc.handle(
        {"POST", "/session", {}, Json{{"cohort", {{"path", dir / "c.csv"}}}, {"analysis", to_json(Analysis{})}}.dump()});
    const std::string id = Json::parse(created.body)["session"];
    CHECK(lrt.out == svc.handle({"GET", "/session/" + id + "/lrt", {{"thresholds", "2,4"}}, ""}).body);
}

TEST_CASE("exit codes and no partial output") {
    TempDir dir;
    REQUIRE(run_cli({"synth", "--config", small_config(dir), "--seed", "1", "--out", dir / "c.csv"}).code == 0);
    CHECK(run_cli({}).code == cli::validation);
    CHECK(run_cli({"bogus"}).code == cli::validation);
    CHECK(run_cli({"cluster"}).code == cli::validation);
    CHECK(run_cli({"cluster", "--cohort", dir / "missing.csv"}).code == cli::io);

    write(dir / "bad_spec.json", R"({"organs": ["Nope"]})");
    const Run bad = run_cli({"cluster", "--cohort", dir / "c.csv", "--spec", dir / "bad_spec.json", "--out", dir / "x.json"});
    CHECK(bad.code == cli::validation);
    CHECK(bad.err.find("Nope") != std::string::npos);
    CHECK(!fs::exists(dir / "x.json"));

    write(dir / "typo.json", R"({"kk": 3})");
    CHECK(run_cli({"cluster", "--cohort", dir / "c.csv", "--params", dir / "typo.json"}).code == cli::validation);
    CHECK(run_cli({"search", "--cohort", dir / "c.csv", "--metric", "t"}).code == cli::validation);
    CHECK(run_cli({"rules", "--cohort", dir / "c.csv", "--scope", "some"}).code == cli::validation);
    CHECK(run_cli({"repro-acceptance"}).code == cli::failure);
}

}
