#include "specrag/http_server.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

HttpService::HttpService(PipelineConfig cfg)
    : cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::load() { load(open_index(cfg_)); }

void HttpService::load(std::shared_ptr<const HybridIndex> index) {
    auto svc = std::make_shared<const QueryService>(cfg_, std::move(index));
    std::lock_guard lock(mu_);
    service_ = std::move(svc);
}

bool HttpService::ready() const { return service() != nullptr; }

std::shared_ptr<const QueryService> HttpService::service() const {
    std::lock_guard lock(mu_);
    return service_;
}

int HttpService::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

bool HttpService::listen(const std::string& host, int port) { return server_->listen(host, port); }

void HttpService::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

namespace {

using Clock = std::chrono::steady_clock;

void reply(httplib::Response& res, int status, ojson body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

ojson error_body(const std::string& id, const std::string& message, double ms,
                 const std::vector<std::string>& details = {}) {
    ojson j;
    j["request_id"] = id;
    j["error"] = message;
    if (!details.empty()) j["details"] = details;
    j["timings"] = {{"total_ms", ms}};
    return j;
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Optional boolean member; records a problem when present with another type.
bool opt_bool(const json& body, const char* key, std::vector<std::string>& problems) {
    if (!body.contains(key)) return false;
    if (!body[key].is_boolean()) {
        problems.push_back(std::string("/") + key + ": must be a boolean");
        return false;
    }
    return body[key].get<bool>();
}

}  // namespace

void HttpService::routes() {
    auto request_id = [this] {
        char buf[32];
        std::snprintf(buf, sizeof buf, "req-%06llu",
                      static_cast<unsigned long long>(next_request_.fetch_add(1)));
        return std::string(buf);
    };

    // Wraps a handler with request ids, readiness and error mapping.
    using Handler = std::function<void(const QueryService&, const httplib::Request&,
                                       httplib::Response&, const std::string&, Clock::time_point)>;
    auto wrap = [this, request_id](Handler h) {
        return [this, request_id, h](const httplib::Request& req, httplib::Response& res) {
            auto start = Clock::now();
            std::string id = request_id();
            auto svc = service();
            if (!svc) return reply(res, 503, error_body(id, "index is loading", elapsed_ms(start)));
            try {
                h(*svc, req, res, id, start);
            } catch (const Error& e) {
                bool client = e.code() == ErrorCode::InvalidArgument ||
                              e.code() == ErrorCode::EmptySuite || e.code() == ErrorCode::ParseError;
                reply(res, client ? 400 : 500, error_body(id, e.what(), elapsed_ms(start)));
            } catch (const std::exception& e) {
                reply(res, 500, error_body(id, e.what(), elapsed_ms(start)));
            }
        };
    };

    server_->Post("/v1/query", wrap([](const QueryService& svc, const httplib::Request& req,
                                       httplib::Response& res, const std::string& id,
                                       Clock::time_point start) {
        json body = json::parse(req.body, nullptr, false);
        std::vector<std::string> problems;
        if (body.is_discarded() || !body.is_object()) {
            return reply(res, 400, error_body(id, "body must be a JSON object", elapsed_ms(start)));
        }
        if (!body.contains("question") || !body["question"].is_string()) {
            problems.push_back("/question: required string");
        } else if (text::trim(body["question"].get<std::string>()).empty()) {
            problems.push_back("/question: must not be empty");
        }
        QueryOptions opts;
        opts.deep = opt_bool(body, "deep", problems);
        opts.no_filter = opt_bool(body, "no_filter", problems);
        bool trace = opt_bool(body, "trace", problems);
        for (const auto& [k, _] : body.items()) {
            if (k != "question" && k != "deep" && k != "trace" && k != "no_filter") {
                problems.push_back("/" + k + ": unknown key");
            }
        }
        if (!problems.empty()) {
            return reply(res, 400, error_body(id, "invalid request", elapsed_ms(start), problems));
        }
        ojson doc = svc.query_document(body["question"].get<std::string>(), opts, trace);
        ojson out;
        out["request_id"] = id;
        out["answer"] = std::move(doc["answer"]);
        out["timings"] = std::move(doc["timings"]);
        reply(res, 200, std::move(out));
    }));

    server_->Get("/v1/docs", wrap([](const QueryService& svc, const httplib::Request&,
                                     httplib::Response& res, const std::string& id,
                                     Clock::time_point start) {
        ojson out;
        out["request_id"] = id;
        out["docs"] = svc.docs_document()["docs"];
        out["timings"] = {{"total_ms", elapsed_ms(start)}};
        reply(res, 200, std::move(out));
    }));

    server_->Get(R"(/v1/docs/(.+))", wrap([](const QueryService& svc, const httplib::Request& req,
                                             httplib::Response& res, const std::string& id,
                                             Clock::time_point start) {
        auto doc = svc.doc_document(req.matches[1].str());
        if (!doc) {
            return reply(res, 404, error_body(id, "unknown document '" + req.matches[1].str() + "'",
                                              elapsed_ms(start)));
        }
        ojson out;
        out["request_id"] = id;
        out["document"] = std::move(*doc);
        out["timings"] = {{"total_ms", elapsed_ms(start)}};
        reply(res, 200, std::move(out));
    }));

    server_->Get("/v1/health", wrap([](const QueryService& svc, const httplib::Request&,
                                       httplib::Response& res, const std::string& id,
                                       Clock::time_point start) {
        ojson out;
        out["request_id"] = id;
        out.update(svc.health_document());
        out["timings"] = {{"total_ms", elapsed_ms(start)}};
        reply(res, 200, std::move(out));
    }));

    server_->Post("/v1/eval", wrap([](const QueryService& svc, const httplib::Request& req,
                                      httplib::Response& res, const std::string& id,
                                      Clock::time_point start) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("suite") ||
            !body["suite"].is_array()) {
            return reply(res, 400, error_body(id, "body must be {\"suite\": [records]}",
                                              elapsed_ms(start)));
        }
        std::string jsonl;
        for (const auto& r : body["suite"]) jsonl += r.dump() + "\n";
        auto cases = parse_suite(jsonl, "/suite");
        if (cases.empty()) {
            return reply(res, 400, error_body(id, "suite is empty", elapsed_ms(start)));
        }
        auto report = svc.evaluate(cases, {});
        ojson out;
        out["request_id"] = id;
        out["report"] = report_to_json(report);
        out["timings"] = timings_to_json(report.mean_timings);
        out["timings"]["elapsed_ms"] = elapsed_ms(start);
        reply(res, 200, std::move(out));
    }));
}

}  // namespace specrag
