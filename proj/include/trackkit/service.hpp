#pragma once

// HTTP ingestion service around the catalog. Endpoints:
//
//   POST /surveys            multipart: file, user_handle, [device_model, start_time]
//   GET  /surveys            ?user=&device=&status=&from=&to=
//   GET  /surveys/{id}
//   GET  /surveys/{id}/report
//   POST /hotspots           JSON {"merge_radius": m, "filter": {...}}
//   POST /webhook/bot        bot-update-shaped JSON (see handle_bot_update)
//
// Submissions are processed asynchronously by a small worker pool (one job in
// flight per survey). If auth_token is configured, requests must carry
// "Authorization: Bearer <token>".

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "trackkit/catalog.hpp"

namespace trackkit::service {

using nlohmann::json;

struct ServiceConfig {
    catalog::CatalogConfig catalog;
    std::string host = "127.0.0.1";
    int port = 8080;
    int worker_budget = 2;
    std::string auth_token;  // empty disables auth
};

inline std::string base64_decode(const std::string& in) {
    static const std::string table =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    int val = 0, bits = -8;
    for (char c : in) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const auto pos = table.find(c);
        if (pos == std::string::npos) throw UnreadableFile("invalid base64 payload");
        val = (val << 6) + static_cast<int>(pos);
        bits += 6;
        if (bits >= 0) {
            out.push_back(static_cast<char>((val >> bits) & 0xFF));
            bits -= 8;
        }
    }
    return out;
}

class IngestService {
  public:
    explicit IngestService(ServiceConfig cfg)
        : cfg_(std::move(cfg)), catalog_(cfg_.catalog) {
        for (int i = 0; i < std::max(1, cfg_.worker_budget); ++i)
            workers_.emplace_back([this] { worker_loop(); });
        setup_routes();
    }

    ~IngestService() {
        {
            std::lock_guard lock(queue_mutex_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    catalog::Catalog& survey_catalog() { return catalog_; }

    // Blocks until the submission queue drains (test convenience).
    void wait_idle() {
        std::unique_lock lock(queue_mutex_);
        idle_cv_.wait(lock, [this] { return queue_.empty() && in_flight_.empty(); });
    }

    bool listen() { return server_.listen(cfg_.host, cfg_.port); }
    void stop() { server_.stop(); }
    bool wait_until_ready() {
        server_.wait_until_ready();
        return server_.is_running();
    }
    int port() const { return cfg_.port; }

  private:
    void enqueue(const std::string& survey_id) {
        {
            std::lock_guard lock(queue_mutex_);
            if (in_flight_.count(survey_id)) return;
            queue_.push_back(survey_id);
        }
        queue_cv_.notify_one();
    }

    void worker_loop() {
        while (true) {
            std::string id;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                if (stopping_ && queue_.empty()) return;
                id = queue_.front();
                queue_.pop_front();
                in_flight_.insert(id);
            }
            catalog_.process(id);
            {
                std::lock_guard lock(queue_mutex_);
                in_flight_.erase(id);
            }
            idle_cv_.notify_all();
        }
    }

    bool authorized(const httplib::Request& req) const {
        if (cfg_.auth_token.empty()) return true;
        return req.get_header_value("Authorization") == "Bearer " + cfg_.auth_token;
    }

    static void reply_json(httplib::Response& res, const json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(2) + "\n", "application/json");
    }

    static void reply_error(httplib::Response& res, int status, const std::string& what) {
        reply_json(res, json{{"error", what}}, status);
    }

    json submit_and_enqueue(const std::string& content, const std::string& user,
                            const std::map<std::string, std::string>& declared, int& status) {
        const auto result = catalog_.submit(content, user, declared);
        if (!result.duplicate) enqueue(result.record.survey_id);
        status = result.duplicate ? 200 : 201;
        json j = result.record.to_json();
        j["duplicate"] = result.duplicate;
        return j;
    }

    void setup_routes() {
        server_.set_pre_routing_handler([this](const httplib::Request& req,
                                               httplib::Response& res) {
            if (authorized(req)) return httplib::Server::HandlerResponse::Unhandled;
            reply_error(res, 401, "missing or invalid token");
            return httplib::Server::HandlerResponse::Handled;
        });

        server_.Post("/surveys", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                if (!req.has_file("file")) {
                    reply_error(res, 400, "multipart field 'file' is required");
                    return;
                }
                std::map<std::string, std::string> declared;
                for (const char* key : {"device_model", "start_time"})
                    if (req.has_file(key)) declared[key] = req.get_file_value(key).content;
                const std::string user =
                    req.has_file("user_handle") ? req.get_file_value("user_handle").content : "";
                int status = 201;
                const json j = submit_and_enqueue(req.get_file_value("file").content, user,
                                                  declared, status);
                reply_json(res, j, status);
            } catch (const UnreadableFile& e) {
                reply_error(res, 400, e.what());
            } catch (const std::exception& e) {
                reply_error(res, 500, e.what());
            }
        });

        server_.Get("/surveys", [this](const httplib::Request& req, httplib::Response& res) {
            catalog::ListFilter f;
            f.user = req.get_param_value("user");
            f.device = req.get_param_value("device");
            if (req.has_param("status"))
                f.status = catalog::status_from_string(req.get_param_value("status"));
            UnixTime t = 0;
            if (req.has_param("from") && parse_iso8601(req.get_param_value("from"), t))
                f.from = t;
            if (req.has_param("to") && parse_iso8601(req.get_param_value("to"), t)) f.to = t;
            json arr = json::array();
            for (const auto& rec : catalog_.list(f)) arr.push_back(rec.to_json());
            reply_json(res, {{"surveys", arr}});
        });

        server_.Get(R"(/surveys/([0-9a-f]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        try {
                            reply_json(res, catalog_.get(req.matches[1]).to_json());
                        } catch (const UnknownSurvey& e) {
                            reply_error(res, 404, e.what());
                        }
                    });

        server_.Get(R"(/surveys/([0-9a-f]+)/report)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        try {
                            reply_json(res, catalog_.report(req.matches[1]));
                        } catch (const UnknownSurvey& e) {
                            reply_error(res, 404, e.what());
                        }
                    });

        server_.Post("/hotspots", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const json body = req.body.empty() ? json::object() : json::parse(req.body);
                catalog::ListFilter f;
                if (body.contains("filter")) {
                    const json& jf = body["filter"];
                    f.user = jf.value("user", "");
                    f.device = jf.value("device", "");
                }
                const double radius =
                    body.value("merge_radius", catalog_.config().pipeline.thresholds.merge_radius);
                reply_json(res, catalog_.cluster_all(f, radius));
            } catch (const NoAnalyzedSurveys& e) {
                reply_error(res, 409, e.what());
            } catch (const std::exception& e) {
                reply_error(res, 400, e.what());
            }
        });

        // Generic messenger-bot adapter: {"message": {"from": {"username": u},
        // "document": {"file_name": n, "content_base64": b64}}}. A real bridge
        // downloads the document and forwards it in this shape.
        server_.Post("/webhook/bot", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const json update = json::parse(req.body);
                const json& msg = update.at("message");
                const std::string user = msg.at("from").value("username", "");
                const std::string content =
                    base64_decode(msg.at("document").at("content_base64").get<std::string>());
                int status = 201;
                const json j = submit_and_enqueue(content, user, {}, status);
                reply_json(res, j, status);
            } catch (const UnreadableFile& e) {
                reply_error(res, 400, e.what());
            } catch (const json::exception& e) {
                reply_error(res, 400, std::string("bad bot update: ") + e.what());
            }
        });
    }

    ServiceConfig cfg_;
    catalog::Catalog catalog_;
    httplib::Server server_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<std::string> queue_;
    std::set<std::string> in_flight_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace trackkit::service
