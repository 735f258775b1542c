// trackkit: command-line front for the survey-quality toolkit.
//
// Subcommands mirror the pipeline stages (parse, accuracy, precision, acf,
// stops, hotspots), plus the scenario simulator and the ingest service.
// Shared settings come from a JSON config file (--config); explicit flags win
// over config values. Every output file is written atomically; errors go to
// stderr as one JSON object and a nonzero exit code.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trackkit/pipeline.hpp"
#include "trackkit/report_io.hpp"
#include "trackkit/service.hpp"
#include "trackkit/simulate.hpp"

namespace fs = std::filesystem;
using namespace trackkit;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string projection_code;
    std::string registry_path;
    std::string polyline_path;
    // threshold flags; negative / zero sentinels mean "not set on the CLI"
    double speed_threshold = -1.0;
    double min_stop_duration = -1.0;
    int filter_window = -1;
    double merge_radius = -1.0;
    int acf_max_lag = -1;
    double static_window = -1.0;
    int precision_first_n = -1;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("bad config file " + path + ": " + e.what());
    }
}

// Layering: built-in defaults <- config file <- CLI flags.
pipeline::Config assemble_config(const CommonOptions& opt, const json& file_cfg) {
    pipeline::Config cfg;

    std::string code = file_cfg.value("projection", "");
    std::string registry = file_cfg.value("registry", "");
    if (!opt.projection_code.empty()) code = opt.projection_code;
    if (!opt.registry_path.empty()) registry = opt.registry_path;
    if (!code.empty() && code != "EPSG:25832") {
        if (registry.empty())
            throw ConfigError("projection " + code + " needs --registry (JSON parameter file)");
        const auto reg = geodesy::load_registry(registry);
        const auto it = reg.find(code);
        if (it == reg.end()) throw ConfigError("projection " + code + " not in " + registry);
        cfg.projection = it->second;
    } else if (!registry.empty() && !code.empty()) {
        cfg.projection = geodesy::load_registry(registry).at(code);
    }

    if (file_cfg.contains("thresholds")) {
        const json& t = file_cfg["thresholds"];
        auto& th = cfg.thresholds;
        th.speed_threshold = t.value("speed_threshold", th.speed_threshold);
        th.min_stop_duration = t.value("min_stop_duration", th.min_stop_duration);
        th.filter_window = t.value("filter_window", th.filter_window);
        th.merge_radius = t.value("merge_radius", th.merge_radius);
        th.acf_max_lag = t.value("acf_max_lag", th.acf_max_lag);
        th.static_window = t.value("static_window", th.static_window);
        th.precision_first_n = t.value("precision_first_n", th.precision_first_n);
    }
    auto& th = cfg.thresholds;
    if (opt.speed_threshold > 0) th.speed_threshold = opt.speed_threshold;
    if (opt.min_stop_duration > 0) th.min_stop_duration = opt.min_stop_duration;
    if (opt.filter_window > 0) th.filter_window = opt.filter_window;
    if (opt.merge_radius > 0) th.merge_radius = opt.merge_radius;
    if (opt.acf_max_lag > 0) th.acf_max_lag = opt.acf_max_lag;
    if (opt.static_window > 0) th.static_window = opt.static_window;
    if (opt.precision_first_n >= 0) th.precision_first_n = opt.precision_first_n;
    if (th.speed_threshold <= 0 || th.min_stop_duration <= 0 || th.filter_window < 3 ||
        th.merge_radius <= 0 || th.acf_max_lag <= 0 || th.static_window <= 0)
        throw ConfigError("thresholds must be positive (filter window >= 3)");

    std::string polyline = file_cfg.value("polyline", "");
    if (!opt.polyline_path.empty()) polyline = opt.polyline_path;
    if (!polyline.empty()) {
        const geodesy::Projector proj(cfg.projection);
        cfg.polyline = track::load_polyline(polyline, proj);
    }
    return cfg;
}

std::pair<std::vector<nmea::GnssFix>, nmea::ParseReport> parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableFile("cannot open input file: " + path);
    return nmea::parse_stream(in);
}

void write_out(const CommonOptions& opt, const std::string& name, const std::string& content) {
    fs::create_directories(opt.out_dir);
    report::write_file_atomic(fs::path(opt.out_dir) / name, content);
}

void add_common_flags(CLI::App* cmd, CommonOptions& opt, bool with_thresholds = true) {
    cmd->add_option("--config", opt.config_path, "JSON config file (flags win over it)");
    cmd->add_option("-o,--out-dir", opt.out_dir, "output directory (default .)");
    cmd->add_option("--projection", opt.projection_code,
                    "CRS code (default EPSG:25832, built in)");
    cmd->add_option("--registry", opt.registry_path, "CRS parameter registry JSON");
    if (with_thresholds) {
        cmd->add_option("--speed-threshold", opt.speed_threshold, "stop speed threshold, m/s");
        cmd->add_option("--min-duration", opt.min_stop_duration, "min stop duration, s");
        cmd->add_option("--filter-window", opt.filter_window, "median filter window, s (odd)");
        cmd->add_option("--merge-radius", opt.merge_radius, "hotspot merge radius, m");
        cmd->add_option("--max-lag", opt.acf_max_lag, "ACF max lag, s");
        cmd->add_option("--static-window", opt.static_window, "static window duration, s");
        cmd->add_option("--first-n", opt.precision_first_n,
                        "precision: first N epochs per window (0 = all)");
    }
}

// ------------------------------------------------------------------ commands

int cmd_parse(const CommonOptions& opt, const std::string& input) {
    const auto [fixes, report] = parse_file(input);
    write_out(opt, "parse_report.json", report::parse_report_json(report).dump(2) + "\n");
    write_out(opt, "fixes.csv", report::fixes_csv(fixes));
    std::cout << report::parse_report_json(report).dump(2) << "\n";
    return 0;
}

int cmd_accuracy(const CommonOptions& opt, const std::string& input, bool exclude_static) {
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    if (!cfg.polyline) throw ConfigError("accuracy needs a reference polyline (--track)");
    const auto [fixes, parse_report] = parse_file(input);
    const geodesy::Projector proj(cfg.projection);
    auto projected = pipeline::project_fixes(fixes, proj);
    if (projected.empty()) throw EmptyStream("no usable fixes");
    if (exclude_static) {
        const auto w = static_cast<UnixTime>(cfg.thresholds.static_window);
        const UnixTime lo = projected.front().time + w, hi = projected.back().time - w;
        std::vector<track::ProjectedFix> mobile;
        for (const auto& f : projected)
            if (f.time > lo && f.time < hi) mobile.push_back(f);
        projected = std::move(mobile);
        if (projected.size() < 2) throw InsufficientData("nothing left outside static windows");
    }
    const auto st = track::accuracy_stats(track::residual_series(projected, *cfg.polyline));
    write_out(opt, "accuracy.json", report::accuracy_json(st).dump(2) + "\n");
    std::ostringstream ellipses;
    ellipses << "level,semi_major_m,semi_minor_m,orientation_deg\n";
    for (const auto& e : st.ellipses)
        ellipses << e.level << ',' << e.semi_major << ',' << e.semi_minor << ','
                 << e.orientation_deg << '\n';
    write_out(opt, "ellipses.csv", ellipses.str());
    std::cout << report::accuracy_json(st).dump(2) << "\n";
    return 0;
}

int cmd_precision(const CommonOptions& opt, const std::string& input,
                  const std::string& placement) {
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    const auto [fixes, parse_report] = parse_file(input);
    const geodesy::Projector proj(cfg.projection);
    const auto projected = pipeline::project_fixes(fixes, proj);

    quality::StaticWindowConfig swc;
    swc.duration_s = cfg.thresholds.static_window;
    if (placement == "start")
        swc.placement = quality::WindowPlacement::start;
    else if (placement == "end")
        swc.placement = quality::WindowPlacement::end;
    else if (placement != "both")
        throw ConfigError("placement must be start, end or both");

    std::vector<quality::PrecisionReport> rows;
    for (const auto& w : quality::extract_static_windows(projected, swc))
        rows.push_back(quality::static_precision(w, cfg.thresholds.precision_first_n));
    write_out(opt, "precision.csv", report::precision_csv(rows));
    write_out(opt, "precision.json", report::precision_json(rows).dump(2) + "\n");
    std::cout << report::precision_csv(rows);
    return 0;
}

int cmd_acf(const CommonOptions& opt, const std::string& input) {
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    if (!cfg.polyline) throw ConfigError("acf needs a reference polyline (--track)");
    const auto [fixes, parse_report] = parse_file(input);
    const geodesy::Projector proj(cfg.projection);
    const auto projected = pipeline::project_fixes(fixes, proj);
    if (projected.empty()) throw EmptyStream("no usable fixes");
    const auto rs = track::residual_series(projected, *cfg.polyline);
    const auto ra = quality::residual_acf(rs, cfg.thresholds.acf_max_lag);
    write_out(opt, "acf_east.csv", report::acf_csv(ra.east));
    write_out(opt, "acf_north.csv", report::acf_csv(ra.north));
    std::cout << "wrote acf_east.csv and acf_north.csv (n=" << ra.east.n
              << ", significance bound " << ra.east.significance_bound << ")\n";
    return 0;
}

std::vector<behaviour::StopEvent> stops_for_file(const pipeline::Config& cfg,
                                                 const std::string& input,
                                                 const std::string& survey_id) {
    const auto [fixes, parse_report] = parse_file(input);
    const geodesy::Projector proj(cfg.projection);
    const auto projected = pipeline::project_fixes(fixes, proj);
    if (projected.empty()) throw EmptyStream("no usable fixes in " + input);
    const auto speeds = behaviour::median_filter(behaviour::speed_series(projected),
                                                 cfg.thresholds.filter_window);
    return behaviour::detect_stops(projected, speeds, cfg.thresholds.speed_threshold,
                                   cfg.thresholds.min_stop_duration, survey_id);
}

int cmd_stops(const CommonOptions& opt, const std::string& input, const std::string& format) {
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    const auto events = stops_for_file(cfg, input, fs::path(input).stem().string());
    const geodesy::Projector proj(cfg.projection);
    if (format == "csv") {
        write_out(opt, "stops.csv", report::stops_csv(events));
        std::cout << report::stops_csv(events);
    } else {
        const json gj = report::stops_geojson(events, proj);
        write_out(opt, "stops.geojson", gj.dump(2) + "\n");
        std::cout << gj.dump(2) << "\n";
    }
    return 0;
}

int cmd_hotspots(const CommonOptions& opt, const std::vector<std::string>& inputs) {
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    // survey ids: file stems, or the full path when stems collide
    std::vector<std::string> ids;
    std::map<std::string, int> stem_count;
    for (const auto& input : inputs) ++stem_count[fs::path(input).stem().string()];
    for (const auto& input : inputs) {
        const std::string stem = fs::path(input).stem().string();
        ids.push_back(stem_count[stem] > 1 ? input : stem);
    }
    std::vector<behaviour::StopEvent> events;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto ev = stops_for_file(cfg, inputs[i], ids[i]);
        events.insert(events.end(), ev.begin(), ev.end());
    }
    const auto hotspots = behaviour::cluster_hotspots(events, cfg.thresholds.merge_radius);
    const geodesy::Projector proj(cfg.projection);
    const json gj = report::hotspots_geojson(hotspots, proj);
    write_out(opt, "hotspots.geojson", gj.dump(2) + "\n");
    std::cout << gj.dump(2) << "\n";
    return 0;
}

// Scenario config schema (JSON):
//   polyline: path to GeoJSON/CSV track,  OR  ring: {circumference_m, center_lat, center_lon}
//   walk_speed, static_lead, static_tail, stops: [{along_track, duration}]
//   error_model: {sigma, correlation_time, seed, quantize}
//   device, start_time (ISO 8601)
int cmd_simulate(const CommonOptions& opt, const std::string& scenario_path,
                 std::int64_t seed_override) {
    const json sc_json = load_config_file(scenario_path);
    const auto cfg = assemble_config(opt, load_config_file(opt.config_path));
    const geodesy::Projector proj(cfg.projection);

    simulate::Scenario sc;
    if (sc_json.contains("polyline")) {
        sc.polyline = track::load_polyline(sc_json["polyline"].get<std::string>(), proj);
    } else if (sc_json.contains("ring")) {
        const json& r = sc_json["ring"];
        const auto center =
            proj.forward(r.at("center_lat").get<double>(), r.at("center_lon").get<double>());
        const double circumference = r.at("circumference_m").get<double>();
        const int n = std::max(8, static_cast<int>(std::llround(circumference)));
        const double radius = circumference / (2.0 * M_PI);
        std::vector<geodesy::ProjectedPoint> vs;
        for (int i = 0; i < n; ++i) {
            const double a = 2.0 * M_PI * i / n;
            vs.push_back({center.easting + radius * std::cos(a),
                          center.northing + radius * std::sin(a)});
        }
        sc.polyline = track::ReferencePolyline::from_vertices(std::move(vs), true);
    } else {
        throw ConfigError("scenario needs either 'polyline' or 'ring'");
    }
    sc.walk_speed = sc_json.value("walk_speed", sc.walk_speed);
    sc.static_lead = sc_json.value("static_lead", sc.static_lead);
    sc.static_tail = sc_json.value("static_tail", sc.static_tail);
    for (const auto& s : sc_json.value("stops", json::array()))
        sc.stops.push_back({s.at("along_track").get<double>(), s.at("duration").get<double>()});

    simulate::ErrorModel em;
    if (sc_json.contains("error_model")) {
        const json& e = sc_json["error_model"];
        em.sigma = e.value("sigma", em.sigma);
        em.correlation_time = e.value("correlation_time", em.correlation_time);
        em.seed = e.value("seed", em.seed);
        em.quantize = e.value("quantize", em.quantize);
    }
    if (seed_override >= 0) em.seed = static_cast<std::uint64_t>(seed_override);

    UnixTime t0 = make_utc(2021, 2, 3, 11, 31, 0);
    if (sc_json.contains("start_time") &&
        !parse_iso8601(sc_json["start_time"].get<std::string>(), t0))
        throw ConfigError("bad start_time in scenario");
    const std::string device = sc_json.value("device", "simulated-device");

    const auto sim = simulate::simulate_survey(sc, em, proj, t0);
    write_out(opt, "simulated.nmea", simulate::emit_nmea(sim.fixes, device, t0));
    std::ostringstream truth;
    truth << "timestamp,easting,northing\n";
    truth.precision(4);
    truth << std::fixed;
    for (const auto& f : sim.true_path)
        truth << format_iso8601(f.time) << ',' << f.pt.easting << ',' << f.pt.northing << '\n';
    write_out(opt, "true_path.csv", truth.str());
    std::cout << "simulated " << sim.fixes.size() << " epochs (seed " << em.seed
              << ") -> simulated.nmea, true_path.csv\n";
    return 0;
}

int cmd_serve(const CommonOptions& opt, const std::string& root, const std::string& host,
              int port, const std::string& token, int workers) {
    const json file_cfg = load_config_file(opt.config_path);
    service::ServiceConfig cfg;
    cfg.catalog.pipeline = assemble_config(opt, file_cfg);
    const json& svc = file_cfg.value("service", json::object());
    cfg.catalog.root = !root.empty() ? root : svc.value("root", "trackkit-data");
    cfg.host = !host.empty() ? host : svc.value("host", cfg.host);
    cfg.port = port > 0 ? port : svc.value("port", cfg.port);
    cfg.auth_token = !token.empty() ? token : svc.value("token", cfg.auth_token);
    cfg.worker_budget = workers > 0 ? workers : svc.value("workers", cfg.worker_budget);

    service::IngestService ingest(cfg);
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << ", catalog at "
              << fs::absolute(cfg.catalog.root).string() << "\n";
    return ingest.listen() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smartphone GNSS survey quality toolkit"};
    app.require_subcommand(1);

    CommonOptions opt;
    std::string input, format = "geojson", placement = "both", scenario_path;
    std::vector<std::string> inputs;
    bool exclude_static = false;
    std::int64_t seed_override = -1;
    std::string serve_root, serve_host, serve_token;
    int serve_port = 0, serve_workers = 0;

    auto* parse = app.add_subcommand("parse", "parse an NMEA file into fixes + report");
    parse->add_option("input", input, "NMEA file")->required();
    add_common_flags(parse, opt, false);

    auto* accuracy = app.add_subcommand("accuracy", "residual accuracy vs a reference track");
    accuracy->add_option("input", input, "NMEA file")->required();
    accuracy->add_option("--track", opt.polyline_path, "reference polyline (GeoJSON/CSV)");
    accuracy->add_flag("--exclude-static", exclude_static,
                       "drop the lead/tail static windows first");
    add_common_flags(accuracy, opt);

    auto* precision = app.add_subcommand("precision", "static-window precision (1-sigma E/N)");
    precision->add_option("input", input, "NMEA file")->required();
    precision->add_option("--placement", placement, "static windows: start, end or both");
    add_common_flags(precision, opt);

    auto* acf = app.add_subcommand("acf", "residual autocorrelation (east/north)");
    acf->add_option("input", input, "NMEA file")->required();
    acf->add_option("--track", opt.polyline_path, "reference polyline (GeoJSON/CSV)");
    add_common_flags(acf, opt);

    auto* stops = app.add_subcommand("stops", "detect stop events");
    stops->add_option("input", input, "NMEA file")->required();
    stops->add_option("--format", format, "geojson (default) or csv");
    add_common_flags(stops, opt);

    auto* hotspots = app.add_subcommand("hotspots", "cluster stops across surveys");
    hotspots->add_option("inputs", inputs, "NMEA files")->required()->expected(-1);
    add_common_flags(hotspots, opt);

    auto* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic survey");
    simulate_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
    simulate_cmd->add_option("--seed", seed_override, "override the scenario seed");
    add_common_flags(simulate_cmd, opt, false);

    auto* serve = app.add_subcommand("serve", "run the HTTP ingest service");
    serve->add_option("--root", serve_root, "catalog directory");
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port");
    serve->add_option("--token", serve_token, "bearer token (empty disables auth)");
    serve->add_option("--workers", serve_workers, "processing worker threads");
    add_common_flags(serve, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse->parsed()) return cmd_parse(opt, input);
        if (accuracy->parsed()) return cmd_accuracy(opt, input, exclude_static);
        if (precision->parsed()) return cmd_precision(opt, input, placement);
        if (acf->parsed()) return cmd_acf(opt, input);
        if (stops->parsed()) return cmd_stops(opt, input, format);
        if (hotspots->parsed()) return cmd_hotspots(opt, inputs);
        if (simulate_cmd->parsed()) return cmd_simulate(opt, scenario_path, seed_override);
        if (serve->parsed())
            return cmd_serve(opt, serve_root, serve_host, serve_port, serve_token,
                             serve_workers);
    } catch (const Error& e) {
        std::cerr << json{{"error", e.what()}, {"type", "domain"}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"type", "internal"}}.dump() << "\n";
        return 2;
    }
    return 0;
}
