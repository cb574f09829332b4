#include <thread>

#include "doctest.h"
#include "dass/http_server.hpp"
#include "dass/pipeline.hpp"
#include "dass/service.hpp"
#include "helpers.hpp"

#include "httplib.h"

using namespace dass;

namespace {

ServiceRequest req(std::string method, std::string path, std::string body = "",
                   std::map<std::string, std::string> query = {}) {
    return ServiceRequest{std::move(method), std::move(path), std::move(query), std::move(body)};
}

std::string open_session(Service& svc, const Cohort& c, const Analysis& a = {}) {
    const Json body{{"cohort", {{"inline", Json::parse(cohort_to_json_text(c))}}}, {"analysis", to_json(a)}};
    const ServiceResponse r = svc.handle(req("POST", "/session", body.dump()));
    REQUIRE(r.status == 201);
    return Json::parse(r.body)["session"].get<std::string>();
}

Analysis small_analysis() {
    Analysis a;
    a.spec = {{"Parotid_L", "Tongue"}, 40, 55, false, false};
    return a;
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("health and unknown routes") {
    Service svc;
    CHECK(svc.handle(req("GET", "/health")).status == 200);
    CHECK(svc.handle(req("GET", "/nope")).status == 404);
    CHECK(svc.handle(req("GET", "/session/s99/spec")).status == 404);
    CHECK(svc.handle(req("GET", "/organ_layout")).status == 404);
}

TEST_CASE("session lifecycle and revisions") {
    Service svc;
    const Cohort c = testing::small_synthetic(1, 60).cohort;
    const std::string id = open_session(svc, c, small_analysis());
    CHECK(id == "s1");
    const std::string base = "/session/" + id;

    ServiceResponse spec = svc.handle(req("GET", base + "/spec"));
    CHECK(spec.status == 200);
    CHECK(spec.headers["X-Session-Revision"] == "0");
    CHECK(spec.body == render(to_json(small_analysis().spec)));

    const ServiceResponse put = svc.handle(req("PUT", base + "/spec", R"({"organs":["Tongue","Larynx"],"window":{"lo":30,"hi":55}})"));
    CHECK(put.status == 200);
    CHECK(put.headers.at("X-Session-Revision") == "1");

    const ServiceResponse c1 = svc.handle(req("GET", base + "/clusters"));
    const ServiceResponse c2 = svc.handle(req("GET", base + "/clusters"));
    CHECK(c1.status == 200);
    CHECK(c1.body == c2.body);
    CHECK(c1.headers.at("X-Session-Revision") == "1");

    Analysis a = small_analysis();
    a.spec = {{"Tongue", "Larynx"}, 30, 55, false, false};
    CHECK(c1.body == render(cluster_view_json(c, a.spec, fit_model(c, a))));

    CHECK(svc.handle(req("PUT", base + "/params", R"({"k":2})")).headers.at("X-Session-Revision") == "2");
    CHECK(svc.handle(req("GET", base + "/clusters")).body != c1.body);

    CHECK(svc.handle(req("DELETE", base)).status == 200);
    CHECK(svc.handle(req("GET", base + "/spec")).status == 404);
}

TEST_CASE("validation errors carry fields") {
    Service svc;
    const std::string id = open_session(svc, testing::small_synthetic(1, 40).cohort, small_analysis());
    const ServiceResponse r = svc.handle(req("PUT", "/session/" + id + "/spec", R"({"organs":["Nope"],"window":{"lo":41,"hi":55}})"));
    CHECK(r.status == 422);
    const Json body = Json::parse(r.body);
    CHECK(body["error"] == "validation");
    CHECK(body["fields"].size() >= 2);
    CHECK(svc.handle(req("PUT", "/session/" + id + "/spec", "{oops")).status == 422);
    CHECK(svc.handle(req("GET", "/session/" + id + "/lrt", "", {{"thresholds", "x"}})).status == 422);
    CHECK(svc.handle(req("GET", "/session/" + id + "/patient/nobody")).status == 404);
    CHECK(svc.handle(req("POST", "/session", R"({"cohort":{"path":"/no/such/file.csv"}})")).status == 422);
    // rejected mutation leaves the revision alone
    CHECK(svc.handle(req("GET", "/session/" + id + "/spec")).headers.at("X-Session-Revision") == "0");
}

TEST_CASE("concurrent mutation gets 409") {
    Service svc;
    const std::string id = open_session(svc, testing::small_synthetic(1, 40).cohort, small_analysis());
    auto held = svc.hold_mutation(id);
    REQUIRE(held.has_value());
    const ServiceResponse r = svc.handle(req("PUT", "/session/" + id + "/params", R"({"k":2})"));
    CHECK(r.status == 409);
    CHECK(svc.handle(req("GET", "/session/" + id + "/spec")).status == 200);
    held.reset();
    CHECK(svc.handle(req("PUT", "/session/" + id + "/params", R"({"k":2})")).status == 200);
    CHECK(!svc.hold_mutation("s42").has_value());
}

TEST_CASE("read endpoints") {
    Service svc;
    const Cohort c = testing::small_synthetic(2, 60).cohort;
    const std::string base = "/session/" + open_session(svc, c, small_analysis());
    const ServiceResponse lrt = svc.handle(req("GET", base + "/lrt", "", {{"thresholds", "3,4,5"}}));
    REQUIRE(lrt.status == 200);
    CHECK(Json::parse(lrt.body)["thresholds"].size() == 3);
    const ServiceResponse csv = svc.handle(req("GET", base + "/lrt", "", {{"format", "csv"}}));
    CHECK(csv.content_type == "text/csv");
    CHECK(svc.handle(req("GET", base + "/outcome_grid")).status == 200);
    const ServiceResponse sc = svc.handle(req("GET", base + "/scatter", "", {{"x", "dose_pc1"}, {"y", "sym:drymouth@6mo_post"}}));
    REQUIRE(sc.status == 200);
    CHECK(Json::parse(sc.body)["points"].size() == 60);
    CHECK(svc.handle(req("GET", base + "/scatter", "", {{"x", "bogus"}})).status == 422);
    const ServiceResponse p = svc.handle(req("GET", base + "/patient/" + c.patients[4].id));
    REQUIRE(p.status == 200);
    CHECK(Json::parse(p.body)["id"] == c.patients[4].id);
    CHECK(svc.handle(req("PUT", base + "/outcome", R"({"outcome":{"threshold":3},"confounders":["hpv_positive"],"selected_cluster":1})")).status == 200);
    const Json outcome = Json::parse(svc.handle(req("GET", base + "/outcome")).body);
    CHECK(outcome["selected_cluster"] == 1);
    CHECK(outcome["confounders"][0] == "hpv_positive");
}

TEST_CASE("additive effects on the 49-candidate spec") {
    SyntheticConfig cfg;
    cfg.n_patients = 90;
    cfg.voxels_per_organ = 40;
    const Cohort c = generate_synthetic_cohort(cfg, 5).cohort;
    Service svc;
    const std::string base = "/session/" + open_session(svc, c);
    const ServiceResponse r = svc.handle(req("GET", base + "/additive_effects", "", {{"metric", "aic"}}));
    REQUIRE(r.status == 200);
    const Json body = Json::parse(r.body);
    CHECK(body["entries"].size() == 49);
    CHECK(body["metric"] == "aic");
    const ServiceResponse csv = svc.handle(req("GET", base + "/additive_effects", "", {{"format", "csv"}}));
    CHECK(std::count(csv.body.begin(), csv.body.end(), '\n') == 50);
}

TEST_CASE("rules with a constant target") {
    Cohort c = testing::small_synthetic(3, 40).cohort;
    const std::size_t s = *c.symptom_index("drymouth"), t = *c.time_point_index("6mo_post");
    for (Patient& p : c.patients) p.symptoms[s][t] = 0;
    Service svc;
    const std::string base = "/session/" + open_session(svc, c, small_analysis());
    const ServiceResponse r = svc.handle(req("POST", base + "/rules", R"({"target":"outcome"})"));
    REQUIRE(r.status == 200);
    const Json body = Json::parse(r.body);
    CHECK(body["rulesets"].empty());
    CHECK(!body["diagnostic"].get<std::string>().empty());
    const ServiceResponse ok = svc.handle(req("POST", base + "/rules", R"({"target":"cluster:2","scope":"spec","config":{"k_beam":3}})"));
    CHECK(ok.status == 200);
    CHECK(svc.handle(req("POST", base + "/rules", R"({"target":"cluster:9"})")).status == 422);
}

TEST_CASE("export and restore reproduce results") {
    Service svc;
    const std::string base = "/session/" + open_session(svc, testing::small_synthetic(4, 50).cohort, small_analysis());
    const std::string before = svc.handle(req("GET", base + "/lrt")).body;
    const std::string exported = svc.handle(req("GET", base + "/export")).body;
    const ServiceResponse restored = svc.handle(req("POST", "/session", Json{{"restore", Json::parse(exported)}}.dump()));
    REQUIRE(restored.status == 201);
    const std::string id = Json::parse(restored.body)["session"];
    CHECK(svc.handle(req("GET", "/session/" + id + "/lrt")).body == before);
}

TEST_CASE("dev mode adds cross-origin headers") {
    ServiceOptions opts;
    opts.dev = true;
    Service svc(opts);
    const ServiceResponse r = svc.handle(req("GET", "/health"));
    CHECK(r.headers.at("Access-Control-Allow-Origin") == "*");
    CHECK(svc.handle(req("OPTIONS", "/session/s1/spec")).status == 204);
    Service plain;
    CHECK(plain.handle(req("GET", "/health")).headers.count("Access-Control-Allow-Origin") == 0);
}

TEST_CASE("organ layout is served") {
    ServiceOptions opts;
    opts.organ_layout = std::filesystem::path(DASS_SOURCE_DIR) / "data" / "organ_layout.json";
    Service svc(opts);
    const ServiceResponse r = svc.handle(req("GET", "/organ_layout"));
    REQUIRE(r.status == 200);
    CHECK(Json::parse(r.body)["organs"].size() == 45);
}

TEST_CASE("http round trip") {
    ServiceOptions opts;
    opts.default_cohort = std::make_shared<const Cohort>(testing::small_synthetic(1, 40).cohort);
    Service svc(opts);
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);
    for (int i = 0; i < 100 && !client.Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    const auto created = client.Post("/session", R"({"analysis":{"spec":{"organs":["Tongue"]}}})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = Json::parse(created->body)["session"];
    const auto spec = client.Get("/session/" + id + "/spec");
    REQUIRE(spec);
    CHECK(spec->get_header_value("X-Session-Revision") == "0");
    CHECK(Json::parse(spec->body)["organs"][0] == "Tongue");
    const auto lrt = client.Get("/session/" + id + "/lrt?thresholds=3,4");
    REQUIRE(lrt);
    CHECK(lrt->status == 200);
    CHECK(lrt->body == svc.handle(req("GET", "/session/" + id + "/lrt", "", {{"thresholds", "3,4"}})).body);
    const auto missing = client.Get("/session/zzz");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    server.stop();
    t.join();
}

}
