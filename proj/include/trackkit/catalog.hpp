#pragma once

// Directory-per-survey catalog. Layout:
//
//   <root>/surveys/<id>/raw.nmea       immutable upload
//   <root>/surveys/<id>/manifest.json  record state
//   <root>/surveys/<id>/report.json    + stops.geojson, acf_*.csv, precision.csv
//   <root>/index.jsonl                 append-only audit log
//
// A submission is staged under <root>/.staging and renamed into place, so a
// crash leaves either a complete record or nothing visible. The id is derived
// from the content digest, which makes duplicate uploads idempotent.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "trackkit/errors.hpp"
#include "trackkit/pipeline.hpp"
#include "trackkit/report_io.hpp"

namespace trackkit::catalog {

using nlohmann::json;
namespace fs = std::filesystem;

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hexd = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hexd[digest[i] >> 4]);
        out.push_back(hexd[digest[i] & 0xF]);
    }
    return out;
}

enum class Status { received, parsed, analyzed, failed };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::received: return "received";
        case Status::parsed: return "parsed";
        case Status::analyzed: return "analyzed";
        default: return "failed";
    }
}

inline Status status_from_string(const std::string& s) {
    if (s == "received") return Status::received;
    if (s == "parsed") return Status::parsed;
    if (s == "analyzed") return Status::analyzed;
    return Status::failed;
}

struct SurveyRecord {
    std::string survey_id;
    std::string user_handle;
    std::string device_model;
    std::optional<UnixTime> start_time;
    UnixTime received_at = 0;
    std::uint64_t received_seq = 0;
    std::string digest;
    Status status = Status::received;
    std::string failure_reason;
    std::vector<std::string> report_paths;

    json to_json() const {
        json j = {{"survey_id", survey_id},
                  {"user_handle", user_handle},
                  {"device_model", device_model},
                  {"received_at", format_iso8601(received_at)},
                  {"received_seq", received_seq},
                  {"digest", digest},
                  {"status", to_string(status)},
                  {"report_paths", report_paths}};
        if (start_time) j["start_time"] = format_iso8601(*start_time);
        if (!failure_reason.empty()) j["failure_reason"] = failure_reason;
        return j;
    }

    static SurveyRecord from_json(const json& j) {
        SurveyRecord r;
        r.survey_id = j.at("survey_id").get<std::string>();
        r.user_handle = j.value("user_handle", "");
        r.device_model = j.value("device_model", "");
        r.received_seq = j.value("received_seq", std::uint64_t{0});
        r.digest = j.value("digest", "");
        r.status = status_from_string(j.value("status", "failed"));
        r.failure_reason = j.value("failure_reason", "");
        if (j.contains("report_paths"))
            r.report_paths = j.at("report_paths").get<std::vector<std::string>>();
        UnixTime t = 0;
        if (parse_iso8601(j.value("received_at", ""), t)) r.received_at = t;
        if (j.contains("start_time") && parse_iso8601(j["start_time"].get<std::string>(), t))
            r.start_time = t;
        return r;
    }
};

struct HeaderPattern {
    std::string key;    // "device_model" or "start_time"
    std::regex pattern; // one capture group
};

struct CatalogConfig {
    fs::path root;
    pipeline::Config pipeline;
    // Logging apps' header layouts are not standardized, so extraction is
    // pattern-driven and reconfigurable.
    std::vector<HeaderPattern> header_patterns = {
        {"device_model", std::regex(R"(^#\s*device:\s*(.+?)\s*$)")},
        {"start_time", std::regex(R"(^#\s*start:\s*(.+?)\s*$)")},
    };
};

struct ListFilter {
    std::string user;            // exact match when non-empty
    std::string device;          // substring match when non-empty
    std::optional<Status> status;
    std::optional<UnixTime> from;
    std::optional<UnixTime> to;

    bool matches(const SurveyRecord& r) const {
        if (!user.empty() && r.user_handle != user) return false;
        if (!device.empty() && r.device_model.find(device) == std::string::npos) return false;
        if (status && r.status != *status) return false;
        if (from && r.received_at < *from) return false;
        if (to && r.received_at > *to) return false;
        return true;
    }
};

struct SubmitResult {
    SurveyRecord record;
    bool duplicate = false;
};

class Catalog {
  public:
    explicit Catalog(CatalogConfig cfg) : cfg_(std::move(cfg)) {
        fs::create_directories(cfg_.root / "surveys");
        fs::create_directories(cfg_.root / ".staging");
        reload();
    }

    const CatalogConfig& config() const { return cfg_; }

    SubmitResult submit(const std::string& content, const std::string& user_handle,
                        const std::map<std::string, std::string>& declared = {}) {
        if (content.empty()) throw UnreadableFile("empty upload body");
        const std::string digest = sha256_hex(content);
        const std::string id = digest.substr(0, 16);

        std::lock_guard lock(mutex_);
        if (auto it = records_.find(id); it != records_.end()) return {it->second, true};

        SurveyRecord rec;
        rec.survey_id = id;
        rec.user_handle = user_handle;
        rec.digest = digest;
        rec.received_at = now_();
        rec.received_seq = ++seq_;
        rec.status = Status::received;

        // header metadata, declared fields win on conflict
        auto extracted = extract_metadata(content);
        rec.device_model = extracted.count("device_model") ? extracted["device_model"] : "";
        UnixTime t = 0;
        if (extracted.count("start_time") && parse_iso8601(extracted["start_time"], t))
            rec.start_time = t;
        if (auto it = declared.find("device_model"); it != declared.end() && !it->second.empty())
            rec.device_model = it->second;
        if (auto it = declared.find("start_time"); it != declared.end())
            if (parse_iso8601(it->second, t)) rec.start_time = t;

        const fs::path staged = cfg_.root / ".staging" / (id + "." + std::to_string(rec.received_seq));
        fs::create_directories(staged);
        report::write_file_atomic(staged / "raw.nmea", content);
        report::write_file_atomic(staged / "manifest.json", rec.to_json().dump(2) + "\n");
        fs::rename(staged, survey_dir(id));
        append_index(rec);
        records_[id] = rec;
        return {rec, false};
    }

    // Runs the pipeline; failures land in the record, never escape.
    SurveyRecord process(const std::string& survey_id) {
        SurveyRecord rec = get(survey_id);
        try {
            std::ifstream in(survey_dir(survey_id) / "raw.nmea", std::ios::binary);
            if (!in) throw UnreadableFile("raw.nmea missing for " + survey_id);
            auto [fixes, parse_report] = nmea::parse_stream(nmea::read_lines(in));
            update_status(rec, Status::parsed);

            const pipeline::Result res =
                pipeline::run(fixes, parse_report, cfg_.pipeline, survey_id);
            write_reports(rec, res);
            update_status(rec, Status::analyzed);
        } catch (const std::exception& e) {
            rec.status = Status::failed;
            rec.failure_reason = e.what();
            persist(rec);
        }
        return rec;
    }

    SurveyRecord get(const std::string& survey_id) const {
        std::lock_guard lock(mutex_);
        auto it = records_.find(survey_id);
        if (it == records_.end()) throw UnknownSurvey("unknown survey: " + survey_id);
        return it->second;
    }

    json report(const std::string& survey_id) const {
        const SurveyRecord rec = get(survey_id);
        std::ifstream in(survey_dir(survey_id) / "report.json");
        if (!in) throw UnknownSurvey("no report for " + survey_id + " (status " +
                                     to_string(rec.status) + ")");
        json j;
        in >> j;
        j["record"] = rec.to_json();
        return j;
    }

    std::vector<SurveyRecord> list(const ListFilter& filter = {}) const {
        std::lock_guard lock(mutex_);
        std::vector<SurveyRecord> out;
        for (const auto& [id, rec] : records_)
            if (filter.matches(rec)) out.push_back(rec);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.received_seq < b.received_seq;
        });
        return out;
    }

    // Cross-survey hotspot clustering over analyzed surveys' stop events.
    json cluster_all(ListFilter filter, double merge_radius) const {
        filter.status = Status::analyzed;
        const auto analyzed = list(filter);
        if (analyzed.empty()) throw NoAnalyzedSurveys("no analyzed surveys match the filter");

        const geodesy::Projector proj(cfg_.pipeline.projection);
        std::vector<behaviour::StopEvent> events;
        for (const auto& rec : analyzed) {
            std::ifstream in(survey_dir(rec.survey_id) / "stops.geojson");
            if (!in) continue;
            json fc;
            in >> fc;
            for (const auto& feat : fc.at("features")) {
                behaviour::StopEvent ev;
                const auto& c = feat.at("geometry").at("coordinates");
                ev.centroid = proj.forward(c.at(1).get<double>(), c.at(0).get<double>());
                ev.duration = feat.at("properties").at("duration_s").get<double>();
                ev.dispersion = feat.at("properties").value("dispersion_m", 0.0);
                ev.survey_id = feat.at("properties").value("survey_id", rec.survey_id);
                UnixTime t = 0;
                if (parse_iso8601(feat.at("properties").value("start", ""), t)) ev.start = t;
                if (parse_iso8601(feat.at("properties").value("end", ""), t)) ev.end = t;
                events.push_back(std::move(ev));
            }
        }
        return report::hotspots_geojson(behaviour::cluster_hotspots(events, merge_radius), proj);
    }

    // test hook: overridable clock
    void set_clock(UnixTime (*clock)()) { now_ = clock; }

  private:
    fs::path survey_dir(const std::string& id) const { return cfg_.root / "surveys" / id; }

    std::map<std::string, std::string> extract_metadata(const std::string& content) const {
        std::map<std::string, std::string> out;
        std::istringstream in(content);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty() && line.front() == '$') break;  // past the header
            std::smatch m;
            for (const auto& hp : cfg_.header_patterns)
                if (!out.count(hp.key) && std::regex_match(line, m, hp.pattern) && m.size() > 1)
                    out[hp.key] = m[1];
        }
        return out;
    }

    void write_reports(SurveyRecord& rec, const pipeline::Result& res) {
        const geodesy::Projector proj(cfg_.pipeline.projection);
        const fs::path dir = survey_dir(rec.survey_id);
        rec.report_paths.clear();
        auto emit = [&](const std::string& name, const std::string& content) {
            report::write_file_atomic(dir / name, content);
            rec.report_paths.push_back(name);
        };
        emit("report.json", pipeline::result_json(res, cfg_.pipeline).dump(2) + "\n");
        emit("stops.geojson", report::stops_geojson(res.stops, proj).dump(2) + "\n");
        emit("precision.csv", report::precision_csv(res.precision));
        if (res.acf) {
            emit("acf_east.csv", report::acf_csv(res.acf->east));
            emit("acf_north.csv", report::acf_csv(res.acf->north));
        }
    }

    void update_status(SurveyRecord& rec, Status next) {
        rec.status = next;
        persist(rec);
    }

    void persist(const SurveyRecord& rec) {
        std::lock_guard lock(mutex_);
        report::write_file_atomic(survey_dir(rec.survey_id) / "manifest.json",
                                  rec.to_json().dump(2) + "\n");
        records_[rec.survey_id] = rec;
    }

    void append_index(const SurveyRecord& rec) {
        std::ofstream out(cfg_.root / "index.jsonl", std::ios::app);
        out << rec.to_json().dump() << "\n";
    }

    void reload() {
        records_.clear();
        seq_ = 0;
        for (const auto& entry : fs::directory_iterator(cfg_.root / "surveys")) {
            if (!entry.is_directory()) continue;
            std::ifstream in(entry.path() / "manifest.json");
            if (!in) continue;  // incomplete dir, invisible by contract
            try {
                json j;
                in >> j;
                SurveyRecord rec = SurveyRecord::from_json(j);
                seq_ = std::max(seq_, rec.received_seq);
                records_[rec.survey_id] = rec;
            } catch (...) {
            }
        }
    }

    static UnixTime system_now() { return static_cast<UnixTime>(std::time(nullptr)); }

    CatalogConfig cfg_;
    mutable std::mutex mutex_;
    std::map<std::string, SurveyRecord> records_;
    std::uint64_t seq_ = 0;
    UnixTime (*now_)() = &system_now;
};

}  // namespace trackkit::catalog
