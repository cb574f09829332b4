#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "dass/pipeline.hpp"

namespace dass {

struct ServiceOptions {
    /// Adds permissive cross-origin headers for a UI served elsewhere.
    bool dev = false;
    /// Served at GET /organ_layout when set.
    std::optional<std::filesystem::path> organ_layout;
    /// Cohort used by POST /session when the body names none.
    std::shared_ptr<const Cohort> default_cohort;
};

struct ServiceRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ServiceResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

/// Session-stateful steering API, independent of any HTTP library. Every
/// session response carries X-Session-Revision; bodies match the CLI output
/// for the same cohort and configuration byte for byte.
class Service {
public:
    explicit Service(ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ServiceResponse handle(const ServiceRequest& request);

    /// Holds the mutation slot of a session, as an in-flight PUT would.
    /// Empty when the session is unknown or already busy.
    std::optional<std::unique_lock<std::mutex>> hold_mutation(const std::string& session);

    struct Session;

private:
    std::shared_ptr<Session> find(const std::string& id);
    ServiceResponse create_session(const ServiceRequest& request);
    ServiceResponse session_request(const std::shared_ptr<Session>& s, const std::string& rest,
                                    const ServiceRequest& request);

    ServiceOptions options_;
    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

}  // namespace dass
