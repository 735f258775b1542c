#pragma once

// Shared helpers for the test suites: geometry builders, a reference AR(1)
// generator, and small statistics utilities. Everything here is independent
// of the implementation paths it is used to check, except where a test
// explicitly exercises round-trip behaviour.

#include <cmath>
#include <random>
#include <vector>

#include "trackkit/geodesy.hpp"
#include "trackkit/track.hpp"

namespace test_support {

using trackkit::geodesy::ProjectedPoint;
using trackkit::track::ReferencePolyline;

// Closed ring approximating a circle of the given circumference, vertices
// every ~1 m like the surveyed track.
inline ReferencePolyline ring_track(double circumference, ProjectedPoint center,
                                    double vertex_spacing = 1.0) {
    const int n = std::max(8, static_cast<int>(std::lround(circumference / vertex_spacing)));
    const double r = circumference / (2.0 * M_PI);
    std::vector<ProjectedPoint> vs;
    vs.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * M_PI * i / n;
        vs.push_back({center.easting + r * std::cos(a), center.northing + r * std::sin(a)});
    }
    return ReferencePolyline::from_vertices(std::move(vs), true);
}

// Independent AR(1) reference process (std::mt19937 + std::normal_distribution,
// a different generator stack than the simulator's).
inline std::vector<double> ar1_series(std::size_t n, double sigma, double tau,
                                      unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double phi = std::exp(-1.0 / tau);
    const double innov = sigma * std::sqrt(1.0 - phi * phi);
    std::vector<double> x(n);
    x[0] = sigma * normal(rng);
    for (std::size_t i = 1; i < n; ++i) x[i] = phi * x[i - 1] + innov * normal(rng);
    return x;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

inline double sample_std(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
}

}  // namespace test_support
