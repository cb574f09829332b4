#include "dass/service.hpp"

#include <algorithm>
#include <shared_mutex>

#include "dass/error.hpp"
#include "text_util.hpp"

namespace dass {

struct Service::Session {
    std::string id;
    std::shared_ptr<const Cohort> cohort;

    std::mutex mutation;  // held for the duration of one PUT
    std::shared_mutex state;
    Analysis analysis;
    std::uint64_t revision = 0;

    std::mutex cache_mutex;
    std::uint64_t cache_revision = 0;
    std::shared_ptr<const ClusterModel> model;
    std::map<std::string, std::string> bodies;
};

namespace {

struct Snapshot {
    Analysis analysis;
    std::uint64_t revision = 0;
};

Snapshot snapshot(Service::Session& s) {
    std::shared_lock lock(s.state);
    return {s.analysis, s.revision};
}

ServiceResponse json_response(int status, const Json& body) {
    ServiceResponse r;
    r.status = status;
    r.body = render(body);
    return r;
}

ServiceResponse error_response(int status, const std::string& kind, const std::string& message,
                               const std::vector<FieldError>& fields = {}) {
    Json f = Json::array();
    for (const auto& fe : fields) f.push_back({{"field", fe.field}, {"message", fe.message}});
    Json body{{"error", kind}, {"message", message}};
    if (!fields.empty()) body["fields"] = f;
    return json_response(status, body);
}

std::shared_ptr<const ClusterModel> model_for(Service::Session& s, const Snapshot& snap) {
    {
        std::lock_guard lock(s.cache_mutex);
        if (s.model && s.cache_revision == snap.revision) return s.model;
    }
    auto model = std::make_shared<const ClusterModel>(fit_model(*s.cohort, snap.analysis));
    std::lock_guard lock(s.cache_mutex);
    if (s.cache_revision == snap.revision) s.model = model;
    return model;
}

template <class Compute>
std::string cached_body(Service::Session& s, const Snapshot& snap, const std::string& key, Compute compute) {
    {
        std::lock_guard lock(s.cache_mutex);
        if (s.cache_revision == snap.revision)
            if (auto it = s.bodies.find(key); it != s.bodies.end()) return it->second;
    }
    std::string body = compute();
    std::lock_guard lock(s.cache_mutex);
    if (s.cache_revision == snap.revision) s.bodies[key] = body;
    return body;
}

std::string query_or(const ServiceRequest& r, const std::string& key, const std::string& fallback) {
    auto it = r.query.find(key);
    return it == r.query.end() ? fallback : it->second;
}

Json outcome_state_json(const Analysis& a) {
    return Json{{"outcome", to_json(a.outcome)},
                {"confounders", a.confounders},
                {"selected_cluster", a.selected_rank ? Json(*a.selected_rank) : Json(nullptr)}};
}

/// Spec and outcome defaults adjusted to what the cohort provides.
Analysis default_analysis(const Cohort& cohort) {
    Analysis a;
    std::vector<std::string> organs;
    for (const auto& o : a.spec.organs)
        if (cohort.organ_index(o)) organs.push_back(o);
    if (organs.empty() && !cohort.organs.empty()) organs.push_back(cohort.organs.front().name);
    a.spec.organs = organs;
    if (!cohort.symptom_index(a.outcome.symptom) && !cohort.symptoms.empty()) a.outcome.symptom = cohort.symptoms.front();
    if (!cohort.time_point_index(a.outcome.time_point) && !cohort.time_points.empty())
        a.outcome.time_point = cohort.time_points.back();
    return a;
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    for (auto part : detail::split(path, '/'))
        if (!part.empty()) out.emplace_back(part);
    return out;
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {}
Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::optional<std::unique_lock<std::mutex>> Service::hold_mutation(const std::string& session) {
    auto s = find(session);
    if (!s) return std::nullopt;
    std::unique_lock lock(s->mutation, std::try_to_lock);
    if (!lock.owns_lock()) return std::nullopt;
    return lock;
}

ServiceResponse Service::handle(const ServiceRequest& request) {
    ServiceResponse resp;
    try {
        const auto parts = split_path(request.path);
        if (request.method == "OPTIONS") {
            resp.status = 204;
            resp.content_type.clear();
        } else if (parts.size() == 1 && parts[0] == "health" && request.method == "GET") {
            resp = json_response(200, Json{{"status", "ok"}});
        } else if (parts.size() == 1 && parts[0] == "organ_layout" && request.method == "GET") {
            if (!options_.organ_layout) resp = error_response(404, "not_found", "no organ layout configured");
            else resp = json_response(200, read_json_file(*options_.organ_layout));
        } else if (parts.size() == 1 && parts[0] == "session" && request.method == "POST") {
            resp = create_session(request);
        } else if (parts.size() >= 2 && parts[0] == "session") {
            auto s = find(parts[1]);
            if (!s) {
                resp = error_response(404, "not_found", "unknown session '" + parts[1] + "'");
            } else {
                std::string rest;
                for (std::size_t i = 2; i < parts.size(); ++i) rest += (i > 2 ? "/" : "") + parts[i];
                if (rest.empty() && request.method == "DELETE") {
                    std::lock_guard lock(sessions_mutex_);
                    sessions_.erase(parts[1]);
                    resp = json_response(200, Json{{"deleted", parts[1]}});
                } else {
                    resp = session_request(s, rest, request);
                }
            }
        } else {
            resp = error_response(404, "not_found", "no route for " + request.method + " " + request.path);
        }
    } catch (const ValidationError& e) {
        resp = error_response(422, "validation", e.what(), e.fields());
    } catch (const IoError& e) {
        resp = error_response(422, "io", e.what());
    } catch (const EngineError& e) {
        resp = error_response(500, "engine", e.what());
    } catch (const std::exception& e) {
        resp = error_response(500, "internal", e.what());
    }
    if (options_.dev) {
        resp.headers["Access-Control-Allow-Origin"] = "*";
        resp.headers["Access-Control-Allow-Methods"] = "GET, PUT, POST, DELETE, OPTIONS";
        resp.headers["Access-Control-Allow-Headers"] = "Content-Type";
        resp.headers["Access-Control-Expose-Headers"] = "X-Session-Revision";
    }
    return resp;
}

ServiceResponse Service::create_session(const ServiceRequest& request) {
    const Json body = request.body.empty() ? Json::object() : parse_json(request.body, "body");
    if (!body.is_object()) throw ValidationError("body", "must be an object");
    for (auto it = body.begin(); it != body.end(); ++it)
        if (it.key() != "cohort" && it.key() != "restore" && it.key() != "analysis" && it.key() != "allow_missing")
            throw ValidationError("body." + it.key(), "unknown key");
    LoadOptions load;
    if (auto it = body.find("allow_missing"); it != body.end()) {
        if (!it->is_boolean()) throw ValidationError("allow_missing", "must be true or false");
        load.allow_missing = it->get<bool>();
    }

    std::shared_ptr<const Cohort> cohort;
    std::optional<Analysis> analysis;
    if (auto it = body.find("restore"); it != body.end()) {
        if (!it->is_object() || !it->contains("cohort") || !it->contains("analysis"))
            throw ValidationError("restore", "expected an exported session with cohort and analysis");
        cohort = std::make_shared<const Cohort>(cohort_from_json_text((*it)["cohort"].dump(), load));
        analysis = analysis_from_json((*it)["analysis"], "restore.analysis");
    } else if (auto c = body.find("cohort"); c != body.end()) {
        if (!c->is_object()) throw ValidationError("cohort", "must be an object");
        if (c->contains("path")) {
            if (!(*c)["path"].is_string()) throw ValidationError("cohort.path", "must be a string");
            cohort = std::make_shared<const Cohort>(load_cohort((*c)["path"].get<std::string>(), load));
        } else if (c->contains("inline")) {
            const Json& in = (*c)["inline"];
            cohort = std::make_shared<const Cohort>(in.is_string() ? cohort_from_csv(in.get<std::string>(), load)
                                                                   : cohort_from_json_text(in.dump(), load));
        } else if (c->contains("synthetic")) {
            const SyntheticConfig cfg = synthetic_config_from_json((*c)["synthetic"], "cohort.synthetic");
            std::uint64_t seed = 0;
            if (c->contains("seed")) {
                if (!(*c)["seed"].is_number_unsigned()) throw ValidationError("cohort.seed", "must be a non-negative integer");
                seed = (*c)["seed"].get<std::uint64_t>();
            }
            cohort = std::make_shared<const Cohort>(generate_synthetic_cohort(cfg, seed).cohort);
        } else {
            throw ValidationError("cohort", "expected one of path, inline, synthetic");
        }
    } else if (options_.default_cohort) {
        cohort = options_.default_cohort;
    } else {
        throw ValidationError("cohort", "no cohort given and the service has no default cohort");
    }
    if (auto it = body.find("analysis"); it != body.end()) analysis = analysis_from_json(*it, "analysis");
    if (!analysis) analysis = default_analysis(*cohort);
    validate_analysis(*analysis, *cohort);

    auto s = std::make_shared<Session>();
    s->cohort = cohort;
    s->analysis = *analysis;
    {
        std::lock_guard lock(sessions_mutex_);
        s->id = "s" + std::to_string(next_id_++);
        sessions_[s->id] = s;
    }
    ServiceResponse r = json_response(201, Json{{"session", s->id},
                                                {"patients", cohort->patients.size()},
                                                {"organs", cohort->organs.size()},
                                                {"analysis", to_json(*analysis)}});
    r.headers["X-Session-Revision"] = "0";
    return r;
}

ServiceResponse Service::session_request(const std::shared_ptr<Session>& s, const std::string& rest,
                                         const ServiceRequest& request) {
    Session& ses = *s;
    const Cohort& cohort = *ses.cohort;
    const std::string& m = request.method;
    ServiceResponse r;
    std::uint64_t revision = 0;

    const bool mutation = m == "PUT" && (rest == "spec" || rest == "params" || rest == "outcome");
    if (mutation) {
        std::unique_lock guard(ses.mutation, std::try_to_lock);
        if (!guard.owns_lock()) return error_response(409, "conflict", "another change to this session is in progress");
        const Json body = parse_json(request.body, "body");
        Analysis next = snapshot(ses).analysis;
        Json echo;
        if (rest == "spec") {
            next.spec = feature_spec_from_json(body, "spec");
        } else if (rest == "params") {
            next.params = cluster_params_from_json(body, "params");
        } else {
            if (!body.is_object()) throw ValidationError("body", "must be an object");
            for (auto it = body.begin(); it != body.end(); ++it) {
                if (it.key() == "outcome") {
                    next.outcome = outcome_spec_from_json(*it, "outcome");
                } else if (it.key() == "confounders") {
                    if (!it->is_array() || !std::all_of(it->begin(), it->end(), [](const Json& e) { return e.is_string(); }))
                        throw ValidationError("confounders", "must be an array of strings");
                    next.confounders = it->get<std::vector<std::string>>();
                } else if (it.key() == "selected_cluster") {
                    if (it->is_null()) next.selected_rank.reset();
                    else if (it->is_number_integer()) next.selected_rank = it->get<int>();
                    else throw ValidationError("selected_cluster", "must be an integer or null");
                } else {
                    throw ValidationError(it.key(), "unknown key");
                }
            }
        }
        validate_analysis(next, cohort);
        {
            std::unique_lock lock(ses.state);
            ses.analysis = next;
            revision = ++ses.revision;
        }
        {
            std::lock_guard lock(ses.cache_mutex);
            ses.cache_revision = revision;
            ses.model.reset();
            ses.bodies.clear();
        }
        if (rest == "spec") echo = to_json(next.spec);
        else if (rest == "params") echo = to_json(next.params);
        else echo = outcome_state_json(next);
        r = json_response(200, echo);
        r.headers["X-Session-Revision"] = std::to_string(revision);
        return r;
    }

    const Snapshot snap = snapshot(ses);
    revision = snap.revision;
    const Analysis& a = snap.analysis;
    auto respond = [&](std::string body) {
        r.status = 200;
        r.body = std::move(body);
    };

    if (m == "GET" && rest.empty()) {
        respond(render(Json{{"session", ses.id},
                            {"patients", cohort.patients.size()},
                            {"organs", cohort.organs.size()},
                            {"analysis", to_json(a)}}));
    } else if (m == "GET" && rest == "spec") {
        respond(render(to_json(a.spec)));
    } else if (m == "GET" && rest == "params") {
        respond(render(to_json(a.params)));
    } else if (m == "GET" && rest == "outcome") {
        respond(render(outcome_state_json(a)));
    } else if (m == "GET" && rest == "export") {
        respond(render(Json{{"analysis", to_json(a)}, {"cohort", Json::parse(cohort_to_json_text(cohort))}}));
    } else if (m == "GET" && rest == "clusters") {
        ClusterViewOptions opts;
        if (auto it = request.query.find("feature"); it != request.query.end()) opts.feature = FeatureKey::parse(it->second);
        const std::string key = "clusters?" + (opts.feature ? opts.feature->str() : std::string());
        respond(cached_body(ses, snap, key, [&] {
            auto model = model_for(ses, snap);
            return render(cluster_view_json(cohort, a.spec, *model, opts));
        }));
    } else if (m == "GET" && rest == "lrt") {
        const std::string text = query_or(request, "thresholds", std::to_string(a.outcome.threshold));
        const std::vector<int> thresholds = parse_int_list(text, "thresholds");
        const std::string format = query_or(request, "format", "json");
        if (format != "json" && format != "csv") throw ValidationError("format", "format must be json or csv");
        respond(cached_body(ses, snap, "lrt?" + text + "&" + format, [&] {
            auto model = model_for(ses, snap);
            if (format == "json") return render(lrt_document(cohort, a, *model, thresholds));
            LrtOptions opts;
            opts.factor = a.factor;
            return lrt_sweep_csv(lrt_threshold_sweep(cohort, *model, a.outcome, thresholds, a.confounders, opts));
        }));
        if (format == "csv") r.content_type = "text/csv";
    } else if (m == "GET" && rest == "outcome_grid") {
        OutcomeGridOptions opts;
        if (auto it = request.query.find("date_bins"); it != request.query.end()) {
            auto v = detail::parse_int(it->second);
            if (!v) throw ValidationError("date_bins", "must be an integer");
            opts.date_bins = static_cast<int>(*v);
        }
        respond(cached_body(ses, snap, "outcome_grid?" + std::to_string(opts.date_bins), [&] {
            auto model = model_for(ses, snap);
            return render(outcome_grid_document(cohort, a, *model, opts));
        }));
    } else if (m == "GET" && rest == "additive_effects") {
        const std::string metric_text = query_or(request, "metric", "bic");
        const Metric metric = parse_metric(metric_text);
        const std::string format = query_or(request, "format", "json");
        if (format != "json" && format != "csv") throw ValidationError("format", "format must be json or csv");
        respond(cached_body(ses, snap, "effects?" + metric_text + "&" + format, [&] {
            const AdditiveEffectsReport rep = run_search(cohort, a, metric);
            return format == "json" ? render(to_json(rep)) : effects_csv(rep);
        }));
        if (format == "csv") r.content_type = "text/csv";
    } else if (m == "GET" && rest == "scatter") {
        const std::string x = query_or(request, "x", "dose_pc1");
        const std::string y = query_or(request, "y", "dose_pc2");
        respond(cached_body(ses, snap, "scatter?" + x + "&" + y, [&] {
            auto model = model_for(ses, snap);
            return render(scatter_document(cohort, a, *model, x, y));
        }));
    } else if (m == "GET" && rest.starts_with("patient/")) {
        const std::string pid = rest.substr(8);
        auto p = cohort.patient_index(pid);
        if (!p) return error_response(404, "not_found", "unknown patient '" + pid + "'");
        respond(render(patient_json(cohort, *p)));
    } else if (m == "POST" && rest == "rules") {
        const Json body = request.body.empty() ? Json::object() : parse_json(request.body, "body");
        if (!body.is_object()) throw ValidationError("body", "must be an object");
        std::string target = "cluster";
        std::string scope = "all";
        MinerConfig config;
        for (auto it = body.begin(); it != body.end(); ++it) {
            if (it.key() == "target" || it.key() == "scope") {
                if (!it->is_string()) throw ValidationError(it.key(), "must be a string");
                (it.key() == "target" ? target : scope) = it->get<std::string>();
            } else if (it.key() == "config") {
                config = miner_config_from_json(*it, "config");
            } else {
                throw ValidationError(it.key(), "unknown key");
            }
        }
        if (scope != "all" && scope != "spec") throw ValidationError("scope", "scope must be all or spec");
        const std::string key = "rules?" + target + "&" + scope + "&" + to_json(config).dump();
        respond(cached_body(ses, snap, key, [&] {
            auto model = model_for(ses, snap);
            return render(rules_document(cohort, a, *model, target, scope == "all", config));
        }));
    } else {
        return error_response(404, "not_found", "no route for " + m + " /session/" + ses.id + "/" + rest);
    }
    r.headers["X-Session-Revision"] = std::to_string(revision);
    return r;
}

}  // namespace dass
