#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "trackkit/track.hpp"

using namespace trackkit;
using namespace trackkit::track;
using test_support::ring_track;

namespace {

// Brute-force oracle: walk every segment at 1 mm steps and take the nearest
// sample. Deliberately knows nothing about feet of perpendiculars.
double brute_force_distance(const ProjectedPoint& fix, const ReferencePolyline& poly,
                            double step = 1e-3) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.segment_count(); ++i) {
        const ProjectedPoint& a = poly.segment_start(i);
        const ProjectedPoint& b = poly.segment_end(i);
        const double len = geodesy::planar_distance(a, b);
        const int samples = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int k = 0; k <= samples; ++k) {
            const double t = double(k) / samples;
            const ProjectedPoint s{a.easting + t * (b.easting - a.easting),
                                   a.northing + t * (b.northing - a.northing)};
            best = std::min(best, geodesy::planar_distance(fix, s));
        }
    }
    return best;
}

ReferencePolyline random_polyline(std::mt19937& rng) {
    std::uniform_int_distribution<int> count(3, 10);
    std::uniform_real_distribution<double> coord(0.0, 50.0);
    for (;;) {
        std::vector<ProjectedPoint> vs;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) vs.push_back({coord(rng), coord(rng)});
        try {
            return ReferencePolyline::from_vertices(std::move(vs), false);
        } catch (const Error&) {
            continue;  // rejected degenerate draw
        }
    }
}

}  // namespace

TEST_CASE("polyline construction validates its invariants") {
    CHECK_THROWS_AS(ReferencePolyline::from_vertices({{0, 0}}, false), TooFewVertices);
    CHECK_THROWS_AS(ReferencePolyline::from_vertices({{0, 0}, {1, 0}}, true), TooFewVertices);
    CHECK_THROWS_AS(ReferencePolyline::from_vertices({{0, 0}, {0, 0}, {1, 0}}, false),
                    MalformedGeometry);
    const auto p = ReferencePolyline::from_vertices({{0, 0}, {10, 0}, {10, 10}, {0, 10}}, true);
    CHECK(p.segment_count() == 4);
    CHECK_THAT(p.length(), Catch::Matchers::WithinAbs(40.0, 1e-12));
    for (std::size_t i = 1; i < p.cumulative_length.size(); ++i)
        CHECK(p.cumulative_length[i] > p.cumulative_length[i - 1]);
}

TEST_CASE("segment line coefficients satisfy the implicit equation") {
    const auto l = SegmentLine::through({2, 3}, {7, 11});
    CHECK_THAT(l.a * l.a + l.b * l.b, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(l.signed_distance({2, 3}), Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_THAT(l.signed_distance({7, 11}), Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_THROWS_AS(SegmentLine::through({1, 1}, {1, 1}), MalformedGeometry);
}

TEST_CASE("closest point: vertex and perpendicular-foot cases") {
    const auto poly = ReferencePolyline::from_vertices({{0, 0}, {100, 0}, {100, 100}}, false);

    const auto on_vertex = closest_point_on_polyline({100, 0}, poly);
    CHECK(on_vertex.distance == 0.0);
    CHECK_THAT(on_vertex.foot.easting, Catch::Matchers::WithinAbs(100.0, 1e-12));

    const auto mid = closest_point_on_polyline({50, 7}, poly);
    CHECK_THAT(mid.distance, Catch::Matchers::WithinAbs(7.0, 1e-12));
    CHECK_THAT(mid.foot.easting, Catch::Matchers::WithinAbs(50.0, 1e-12));
    CHECK(mid.segment_index == 0);
    CHECK_THAT(mid.along_track, Catch::Matchers::WithinAbs(50.0, 1e-12));
    CHECK_THAT(mid.residual_north, Catch::Matchers::WithinAbs(7.0, 1e-12));
    CHECK_THAT(mid.residual_east, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("closest point clamps beyond segment ends") {
    const auto poly = ReferencePolyline::from_vertices({{0, 0}, {10, 0}}, false);
    const auto beyond = closest_point_on_polyline({15, 5}, poly);
    CHECK_THAT(beyond.foot.easting, Catch::Matchers::WithinAbs(10.0, 1e-12));
    CHECK_THAT(beyond.distance, Catch::Matchers::WithinAbs(std::hypot(5.0, 5.0), 1e-12));
}

TEST_CASE("closest point agrees with the dense-sampling oracle") {
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> coord(-10.0, 60.0);
    for (int p = 0; p < 20; ++p) {
        const auto poly = random_polyline(rng);
        for (int i = 0; i < 50; ++i) {
            const ProjectedPoint fix{coord(rng), coord(rng)};
            const auto got = closest_point_on_polyline(fix, poly);
            const double want = brute_force_distance(fix, poly);
            // oracle resolution is 1 mm; the sampled minimum can only overshoot
            CHECK(got.distance <= want + 1e-9);
            CHECK(std::fabs(got.distance - want) < 1e-3);
        }
    }
}

TEST_CASE("projection is idempotent on its own foot") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> coord(-10.0, 60.0);
    const auto poly = random_polyline(rng);
    for (int i = 0; i < 100; ++i) {
        const auto first = closest_point_on_polyline({coord(rng), coord(rng)}, poly);
        const auto again = closest_point_on_polyline(first.foot, poly);
        CHECK(again.distance < 1e-9);
        CHECK(geodesy::planar_distance(again.foot, first.foot) < 1e-9);
    }
}

TEST_CASE("distance to polyline is 1-Lipschitz") {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> coord(-20.0, 70.0);
    const auto poly = random_polyline(rng);
    for (int i = 0; i < 200; ++i) {
        const ProjectedPoint p{coord(rng), coord(rng)}, q{coord(rng), coord(rng)};
        const double dp = closest_point_on_polyline(p, poly).distance;
        const double dq = closest_point_on_polyline(q, poly).distance;
        CHECK(std::fabs(dp - dq) <= geodesy::planar_distance(p, q) + 1e-9);
    }
}

TEST_CASE("cross-track blindness: sliding along the segment is second order") {
    // long straight segment; a fix offset 2 m from its middle
    const auto poly = ReferencePolyline::from_vertices({{0, 0}, {1000, 0}}, false);
    const ProjectedPoint fix{500, 2.0};
    const double base = closest_point_on_polyline(fix, poly).distance;
    for (double eps : {0.001, 0.01, 0.1}) {
        const double shifted =
            closest_point_on_polyline({fix.easting + eps, fix.northing}, poly).distance;
        CHECK(std::fabs(shifted - base) <= eps * eps);  // O(eps^2), here exactly 0
    }
    // the perpendicular direction moves distance at first order
    const double perp = closest_point_on_polyline({500, 2.1}, poly).distance;
    CHECK_THAT(perp - base, Catch::Matchers::WithinAbs(0.1, 1e-9));
}

TEST_CASE("residual series on-track and constant-offset cases") {
    // north-south segment, fixes on it, then offset +2 m east
    const auto poly = ReferencePolyline::from_vertices({{0, 0}, {0, 200}}, false);
    std::vector<ProjectedFix> fixes;
    for (int i = 0; i < 100; ++i) fixes.push_back({1000 + i, {0.0, 2.0 * i}});
    auto rs = residual_series(fixes, poly);
    for (const auto& p : rs.proj) CHECK(p.distance < 1e-12);

    for (auto& f : fixes) f.pt.easting += 2.0;
    rs = residual_series(fixes, poly);
    for (const auto& p : rs.proj) {
        CHECK_THAT(p.residual_east, Catch::Matchers::WithinAbs(2.0, 1e-12));
        CHECK_THAT(p.residual_north, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    CHECK_THROWS_AS(residual_series(std::span<const ProjectedFix>{}, poly), EmptySeries);
}

TEST_CASE("residual RMSE recovers the injected per-axis sigma on a ring") {
    // AR(1) noise on a ring track: the cross-track residual magnitude has
    // RMS equal to the per-axis sigma (one Gaussian component).
    const auto poly = ring_track(840.0, {500000, 5056000});
    const double sigma = 1.2;
    const auto noise_e = test_support::ar1_series(1500, sigma, 30.0, 101);
    const auto noise_n = test_support::ar1_series(1500, sigma, 30.0, 202);
    std::vector<ProjectedFix> fixes;
    for (int i = 0; i < 1500; ++i) {
        const auto on_track = closest_point_on_polyline(
            {500000 + 140 * std::cos(i * 0.007), 5056000 + 140 * std::sin(i * 0.007)}, poly);
        fixes.push_back({i, {on_track.foot.easting + noise_e[i],
                             on_track.foot.northing + noise_n[i]}});
    }
    const auto st = accuracy_stats(residual_series(fixes, poly));
    CHECK_THAT(st.rmse, Catch::Matchers::WithinRel(sigma, 0.10));
}

TEST_CASE("accuracy stats on zero residuals are degenerate") {
    ResidualSeries rs;
    for (int i = 0; i < 10; ++i) {
        rs.time.push_back(i);
        rs.proj.push_back({});
    }
    const auto st = accuracy_stats(rs);
    CHECK(st.rmse == 0.0);
    CHECK(st.percentile_95_distance == 0.0);
    for (const auto& e : st.ellipses) {
        CHECK(e.semi_major == 0.0);
        CHECK(e.semi_minor == 0.0);
    }
    ResidualSeries tiny;
    tiny.time = {0};
    tiny.proj = {{}};
    CHECK_THROWS_AS(accuracy_stats(tiny), InsufficientData);
}

TEST_CASE("chi-square scale factors for the named confidence levels") {
    CHECK_THAT(chi2_quantile_2dof(0.68), Catch::Matchers::WithinAbs(2.2789, 1e-3));
    CHECK_THAT(chi2_quantile_2dof(0.95), Catch::Matchers::WithinAbs(5.9915, 1e-3));
    CHECK_THAT(chi2_quantile_2dof(0.99), Catch::Matchers::WithinAbs(9.2103, 1e-3));
}

TEST_CASE("95% ellipse of isotropic unit-variance residuals is ~2.448") {
    std::mt19937 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    ResidualSeries rs;
    for (int i = 0; i < 10000; ++i) {
        TrackProjection p;
        p.residual_east = normal(rng);
        p.residual_north = normal(rng);
        p.distance = std::hypot(p.residual_east, p.residual_north);
        rs.time.push_back(i);
        rs.proj.push_back(p);
    }
    const auto st = accuracy_stats(rs);
    const auto& e95 = st.ellipses[1];
    CHECK_THAT(e95.semi_major, Catch::Matchers::WithinRel(2.448, 0.05));
    CHECK_THAT(e95.semi_minor, Catch::Matchers::WithinRel(2.448, 0.05));
}

TEST_CASE("anisotropic residuals orient the major axis east") {
    std::mt19937 rng(78);
    std::normal_distribution<double> ne(0.0, 2.0), nn(0.0, 1.0);
    ResidualSeries rs;
    for (int i = 0; i < 20000; ++i) {
        TrackProjection p;
        p.residual_east = ne(rng);
        p.residual_north = nn(rng);
        p.distance = std::hypot(p.residual_east, p.residual_north);
        rs.time.push_back(i);
        rs.proj.push_back(p);
    }
    const auto st = accuracy_stats(rs);
    CHECK(std::fabs(st.ellipses[1].orientation_deg) < 5.0);
    CHECK_THAT(st.ellipses[1].semi_major / st.ellipses[1].semi_minor,
               Catch::Matchers::WithinRel(2.0, 0.05));
}

TEST_CASE("accuracy stats are permutation invariant") {
    std::mt19937 rng(79);
    std::normal_distribution<double> normal(0.0, 1.5);
    ResidualSeries rs;
    for (int i = 0; i < 500; ++i) {
        TrackProjection p;
        p.residual_east = normal(rng);
        p.residual_north = normal(rng);
        p.distance = std::hypot(p.residual_east, p.residual_north);
        rs.time.push_back(i);
        rs.proj.push_back(p);
    }
    auto shuffled = rs;
    std::shuffle(shuffled.proj.begin(), shuffled.proj.end(), rng);
    const auto a = accuracy_stats(rs);
    const auto b = accuracy_stats(shuffled);
    CHECK_THAT(a.rmse, Catch::Matchers::WithinAbs(b.rmse, 1e-12));
    CHECK_THAT(a.cov_ee, Catch::Matchers::WithinAbs(b.cov_ee, 1e-9));
    CHECK_THAT(a.percentile_95_distance,
               Catch::Matchers::WithinAbs(b.percentile_95_distance, 1e-12));
}

TEST_CASE("rotating all residuals rotates the ellipse, axes unchanged") {
    std::mt19937 rng(80);
    std::normal_distribution<double> ne(0.0, 2.0), nn(0.0, 0.7);
    ResidualSeries rs;
    for (int i = 0; i < 5000; ++i) {
        TrackProjection p;
        p.residual_east = ne(rng);
        p.residual_north = nn(rng);
        p.distance = std::hypot(p.residual_east, p.residual_north);
        rs.time.push_back(i);
        rs.proj.push_back(p);
    }
    const double theta = 25.0 * M_PI / 180.0;
    auto rotated = rs;
    for (auto& p : rotated.proj) {
        const double e = p.residual_east, n = p.residual_north;
        p.residual_east = e * std::cos(theta) - n * std::sin(theta);
        p.residual_north = e * std::sin(theta) + n * std::cos(theta);
    }
    const auto a = accuracy_stats(rs);
    const auto b = accuracy_stats(rotated);
    CHECK_THAT(b.ellipses[1].semi_major,
               Catch::Matchers::WithinAbs(a.ellipses[1].semi_major, 1e-9));
    CHECK_THAT(b.ellipses[1].semi_minor,
               Catch::Matchers::WithinAbs(a.ellipses[1].semi_minor, 1e-9));
    double dtheta = b.ellipses[1].orientation_deg - a.ellipses[1].orientation_deg;
    while (dtheta < -90.0) dtheta += 180.0;
    while (dtheta > 90.0) dtheta -= 180.0;
    CHECK_THAT(dtheta, Catch::Matchers::WithinAbs(25.0, 1e-6));
}

TEST_CASE("load_polyline: CSV square, GeoJSON line, degenerate input") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "trackkit_polyline_test";
    fs::create_directories(dir);
    const geodesy::Projector proj;

    {
        std::ofstream csv(dir / "square.csv");
        csv << "0,0\n100,0\n100,100\n0,100\n0,0\n";
    }
    const auto square = load_polyline((dir / "square.csv").string(), proj);
    CHECK(square.closed);
    CHECK(square.segment_count() == 4);

    {
        std::ofstream gj(dir / "line.geojson");
        gj << R"({"type":"LineString","coordinates":[[11.92,45.67],[11.93,45.68]]})";
    }
    const auto line = load_polyline((dir / "line.geojson").string(), proj);
    CHECK_FALSE(line.closed);
    CHECK(line.segment_count() == 1);
    // geodetic input must land near the study area in projected space
    CHECK_THAT(line.vertices[0].northing, Catch::Matchers::WithinAbs(5061553.0, 100.0));

    {
        std::ofstream bad(dir / "bad.csv");
        bad << "500000,5056000\n500000,5056000\n500001,5056001\n";
    }
    CHECK_THROWS_AS(load_polyline((dir / "bad.csv").string(), proj), MalformedGeometry);

    {
        std::ofstream two(dir / "two.csv");
        two << "0,0\n";
    }
    CHECK_THROWS_AS(load_polyline((dir / "two.csv").string(), proj), TooFewVertices);
    fs::remove_all(dir);
}
