#include "monilog/http.hpp"

#include "httplib.h"

namespace monilog {

namespace {

using Req = httplib::Request;
using Res = httplib::Response;

constexpr std::size_t kDefaultPageLimit = 100;
constexpr std::size_t kMaxPageLimit = 1000;

void send_json(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, Json::error_handler_t::replace),
                    "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, Json{{"error", message}}, status);
}

Json body_json(const httplib::Request& req) {
    if (req.body.empty()) {
        return Json::object();
    }
    auto j = parse_json(req.body);
    if (!j.is_object() && !j.is_array()) {
        throw ValidationError("request body must be a JSON object or array");
    }
    return j;
}

std::string actor_of(const Json& body) {
    if (body.is_object() && body.contains("actor")) {
        if (!body.at("actor").is_string()) {
            throw ValidationError("'actor' must be a string");
        }
        return body.at("actor").get<std::string>();
    }
    return "anonymous";
}

std::uint64_t path_id(const httplib::Request& req) {
    double x = 0.0;
    if (!parse_number(req.matches[1].str(), x)) {
        throw ValidationError("malformed id in path");
    }
    return static_cast<std::uint64_t>(x);
}

std::size_t parse_limit(const httplib::Request& req) {
    if (!req.has_param("limit")) {
        return kDefaultPageLimit;
    }
    double x = 0.0;
    const auto text = req.get_param_value("limit");
    if (!parse_number(text, x) || x < 1 || x != static_cast<double>(static_cast<long>(x))) {
        throw ValidationError("limit must be a positive integer");
    }
    return std::min(kMaxPageLimit, static_cast<std::size_t>(x));
}

Json pool_json(const PoolSummary& s) {
    Json j = to_json(s.pool);
    j["examples"] = s.examples;
    j["reports"] = s.reports;
    return j;
}

std::string pool_name(const Service& service, PoolId id) {
    for (const auto& p : service.pools()) {
        if (p.pool.pool_id == id) {
            return p.pool.name;
        }
    }
    return {};
}

Json optional_event(const std::optional<EventId>& id) {
    return id ? Json(*id) : Json(nullptr);
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) { routes(); }

    template <class F>
    httplib::Server::Handler guarded(F f) {
        return [f](const Req& req, Res& res) {
            try {
                f(req, res);
            } catch (const BatchTooLargeError& e) {
                send_error(res, 413, e.what());
            } catch (const NotFoundError& e) {
                send_error(res, 404, e.what());
            } catch (const ValidationError& e) {
                send_error(res, 400, e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        };
    }

    void routes() {
        server.Post("/ingest", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            bool flush = false;
            const Json* records = &body;
            if (body.is_object()) {
                if (!body.contains("records")) {
                    throw ValidationError("missing 'records'");
                }
                records = &body.at("records");
                flush = body.value("flush", false);
            }
            const auto result = service.ingest(*records, flush);
            Json errors = Json::array();
            for (const auto& e : result.errors) {
                errors.push_back({{"index", e.index}, {"message", e.message}});
            }
            send_json(res, {{"accepted", result.accepted},
                            {"errors", std::move(errors)},
                            {"reports", result.new_reports}});
        }));

        server.Get("/anomalies", guarded([this](const Req& req, Res& res) {
            const auto cursor = req.has_param("cursor") ? req.get_param_value("cursor") : "";
            const auto page = service.list_anomalies(cursor, parse_limit(req));
            std::map<PoolId, std::string> names;
            for (const auto& p : service.pools()) {
                names[p.pool.pool_id] = p.pool.name;
            }
            Json items = Json::array();
            for (const auto& r : page.reports) {
                items.push_back(report_view_json(r, names[r.assignment.pool]));
            }
            send_json(res, {{"anomalies", std::move(items)}, {"next_cursor", page.next_cursor}});
        }));

        server.Get("/pools", guarded([this](const Req&, Res& res) {
            Json pools = Json::array();
            for (const auto& p : service.pools()) {
                pools.push_back(pool_json(p));
            }
            send_json(res, {{"pools", std::move(pools)}});
        }));

        server.Post("/pools", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            if (!body.is_object() || !body.contains("name") || !body.at("name").is_string()) {
                throw ValidationError("body needs a string 'name'");
            }
            const auto pool = service.create_pool(body.at("name").get<std::string>(),
                                                  actor_of(body));
            send_json(res, to_json(pool), 201);
        }));

        server.Delete(R"(/pools/(\d+))", guarded([this](const Req& req, Res& res) {
            const auto id = path_id(req);
            const auto moved = service.delete_pool(id, actor_of(body_json(req)));
            send_json(res, {{"deleted", id}, {"reassigned", moved}});
        }));

        server.Post(R"(/anomalies/(\d+)/pool)", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            if (!body.is_object() || !body.contains("pool_id") ||
                !body.at("pool_id").is_number_unsigned()) {
                throw ValidationError("body needs an unsigned integer 'pool_id'");
            }
            const auto id = path_id(req);
            const auto to = body.at("pool_id").get<PoolId>();
            const auto event = service.move_anomaly(id, to, actor_of(body));
            send_json(res, {{"report_id", id},
                            {"pool_id", to},
                            {"pool_name", pool_name(service, to)},
                            {"event_id", optional_event(event)}});
        }));

        server.Post(R"(/anomalies/(\d+)/criticality)", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            if (!body.is_object() || !body.contains("criticality") ||
                !body.at("criticality").is_string()) {
                throw ValidationError("body needs a string 'criticality'");
            }
            const auto id = path_id(req);
            const auto level = parse_criticality(body.at("criticality").get<std::string>());
            const auto event = service.set_criticality(id, level, actor_of(body));
            send_json(res, {{"report_id", id},
                            {"criticality", std::string(to_string(level))},
                            {"event_id", optional_event(event)}});
        }));

        server.Get("/templates", guarded([this](const Req&, Res& res) {
            send_json(res, {{"templates", templates_to_json(service.templates())}});
        }));

        server.Get("/health", guarded([this](const Req&, Res& res) {
            send_json(res, service.health());
        }));

        server.Post("/admin/snapshot", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            const std::string path = body.is_object() ? body.value("path", "") : "";
            const auto written = service.snapshot(path);
            send_json(res, {{"path", written.string()}, {"last_op", service.last_op()}});
        }));

        server.Post("/admin/restore", guarded([this](const Req& req, Res& res) {
            const auto body = body_json(req);
            const std::string path = body.is_object() ? body.value("path", "") : "";
            service.restore(path);
            send_json(res, {{"restored", true}, {"last_op", service.last_op()}});
        }));
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        return impl_->server.bind_to_any_port(host);
    }
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) {
        impl_->server.stop();
    }
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace monilog
