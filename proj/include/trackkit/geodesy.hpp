#pragma once

// Transverse Mercator forward/inverse (Krueger series in the third
// flattening n, 4th order) and planar distance. The series meets the sub-mm
// contract within +/-6 degrees of the central meridian; the property tests
// check that rather than assume it.
//
// ETRS89 <-> WGS84 is treated as identity here: the datum drift is decimeter
// scale over decades, two orders of magnitude below the measurement accuracy
// this toolkit quantifies.

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "trackkit/errors.hpp"

#include <nlohmann/json.hpp>

namespace trackkit::geodesy {

struct ProjectionParams {
    double a = 6378137.0;              // semi-major axis, m
    double inv_f = 298.257222101;      // inverse flattening
    double central_meridian = 9.0;     // degrees
    double latitude_of_origin = 0.0;   // degrees
    double k0 = 0.9996;
    double false_easting = 500000.0;   // m
    double false_northing = 0.0;       // m
    std::string registry_code = "EPSG:25832";

    bool valid() const { return a > 0 && inv_f > 0 && k0 > 0 && k0 <= 1.001; }

    // ETRS89 / UTM zone 32N, the frame the study data lives in.
    static ProjectionParams etrs89_utm32n() { return {}; }
};

struct ProjectedPoint {
    double easting = 0.0;
    double northing = 0.0;
};

inline double planar_distance(const ProjectedPoint& a, const ProjectedPoint& b) {
    return std::hypot(a.easting - b.easting, a.northing - b.northing);
}

// Registry file: JSON object mapping registry_code -> parameter object with
// keys a, inv_f, central_meridian, latitude_of_origin, k0, false_easting,
// false_northing.
inline std::map<std::string, ProjectionParams> load_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CRS registry: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad CRS registry " + path + ": " + e.what());
    }
    std::map<std::string, ProjectionParams> out;
    for (auto& [code, v] : j.items()) {
        ProjectionParams p;
        p.registry_code = code;
        p.a = v.at("a").get<double>();
        p.inv_f = v.at("inv_f").get<double>();
        p.central_meridian = v.at("central_meridian").get<double>();
        p.latitude_of_origin = v.value("latitude_of_origin", 0.0);
        p.k0 = v.at("k0").get<double>();
        p.false_easting = v.at("false_easting").get<double>();
        p.false_northing = v.value("false_northing", 0.0);
        if (!p.valid()) throw ConfigError("invalid parameters for " + code);
        out.emplace(code, p);
    }
    return out;
}

class Projector {
  public:
    explicit Projector(ProjectionParams p = ProjectionParams::etrs89_utm32n()) : p_(p) {
        if (!p.valid()) throw ConfigError("invalid projection parameters");
        const double f = 1.0 / p.inv_f;
        e2_ = f * (2.0 - f);
        e_ = std::sqrt(e2_);
        const double n = f / (2.0 - f);
        const double n2 = n * n, n3 = n2 * n, n4 = n3 * n;
        rect_radius_ = p.a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
        alpha_ = {n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
                  13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
                  61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
                  49561.0 * n4 / 161280.0};
        beta_ = {n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
                 n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
                 17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
                 4397.0 * n4 / 161280.0};
        origin_arc_ = (p.latitude_of_origin == 0.0)
                          ? 0.0
                          : rect_radius_ * rectifying_from_conformal(
                                               conformal_latitude(deg2rad(p.latitude_of_origin)));
    }

    const ProjectionParams& params() const { return p_; }

    ProjectedPoint forward(double lat_deg, double lon_deg) const {
        const double dlon = lon_deg - p_.central_meridian;
        if (std::fabs(dlon) > 6.0 + 1e-12)
            throw OutOfZone("longitude " + std::to_string(lon_deg) +
                            " outside +/-6 deg of central meridian");
        if (std::fabs(lat_deg) >= 84.0)
            throw OutOfZone("latitude " + std::to_string(lat_deg) + " outside +/-84 deg");

        const double chi = conformal_latitude(deg2rad(lat_deg));
        const double lam = deg2rad(dlon);
        const double tchi = std::tan(chi);
        const double xi_p = std::atan2(tchi, std::cos(lam));
        const double eta_p = std::asinh(std::sin(lam) /
                                        std::sqrt(tchi * tchi + std::cos(lam) * std::cos(lam)));
        std::complex<double> z(xi_p, eta_p);
        std::complex<double> w = z;
        for (std::size_t j = 0; j < alpha_.size(); ++j)
            w += alpha_[j] * std::sin(2.0 * double(j + 1) * z);
        return {p_.false_easting + p_.k0 * rect_radius_ * w.imag(),
                p_.false_northing + p_.k0 * (rect_radius_ * w.real() - origin_arc_)};
    }

    std::pair<double, double> inverse(const ProjectedPoint& pt) const {
        const double xi = (pt.northing - p_.false_northing + p_.k0 * origin_arc_) /
                          (p_.k0 * rect_radius_);
        const double eta = (pt.easting - p_.false_easting) / (p_.k0 * rect_radius_);
        std::complex<double> z(xi, eta);
        std::complex<double> w = z;
        for (std::size_t j = 0; j < beta_.size(); ++j)
            w -= beta_[j] * std::sin(2.0 * double(j + 1) * z);
        const double xi_p = w.real(), eta_p = w.imag();
        const double chi = std::asin(std::sin(xi_p) / std::cosh(eta_p));
        const double lam = std::atan2(std::sinh(eta_p), std::cos(xi_p));
        const double lat_deg = rad2deg(geodetic_from_conformal(chi));
        const double lon_deg = p_.central_meridian + rad2deg(lam);
        if (std::fabs(lon_deg - p_.central_meridian) > 6.0 + 1e-6 || std::fabs(lat_deg) >= 84.0)
            throw OutOfZone("point inverts outside the zone window");
        return {lat_deg, lon_deg};
    }

  private:
    static double deg2rad(double d) { return d * M_PI / 180.0; }
    static double rad2deg(double r) { return r * 180.0 / M_PI; }

    double conformal_latitude(double phi) const {
        return std::atan(std::sinh(std::asinh(std::tan(phi)) -
                                   e_ * std::atanh(e_ * std::sin(phi))));
    }

    // Newton inversion of the conformal latitude (quadratic convergence, no
    // extra series coefficients).
    double geodetic_from_conformal(double chi) const {
        const double psi0 = std::asinh(std::tan(chi));
        double phi = chi;
        for (int it = 0; it < 30; ++it) {
            const double f = std::asinh(std::tan(phi)) - e_ * std::atanh(e_ * std::sin(phi)) - psi0;
            const double s2 = std::sin(phi) * std::sin(phi);
            const double dfd = (1.0 - e2_) / ((1.0 - e2_ * s2) * std::cos(phi));
            const double step = f / dfd;
            phi -= step;
            if (std::fabs(step) < 1e-15) break;
        }
        return phi;
    }

    // mu(chi): rectifying latitude as a trig series in the conformal latitude.
    double rectifying_from_conformal(double chi) const {
        double mu = chi;
        for (std::size_t j = 0; j < alpha_.size(); ++j)
            mu += alpha_[j] * std::sin(2.0 * double(j + 1) * chi);
        return mu;
    }

    ProjectionParams p_;
    double e_ = 0.0, e2_ = 0.0;
    double rect_radius_ = 0.0;  // k0-free rectifying radius A
    double origin_arc_ = 0.0;   // meridian arc at latitude_of_origin
    std::array<double, 4> alpha_{};
    std::array<double, 4> beta_{};
};

// Ellipsoidal meridian arc length between two latitudes on the same meridian
// (Gauss-Legendre quadrature of the meridian radius; used by the scale
// property test, independent of the series path above).
inline double meridian_arc(const ProjectionParams& p, double lat0_deg, double lat1_deg) {
    const double f = 1.0 / p.inv_f;
    const double e2 = f * (2.0 - f);
    static constexpr std::array<double, 5> nodes = {-0.9061798459386640, -0.5384693101056831,
                                                    0.0, 0.5384693101056831, 0.9061798459386640};
    static constexpr std::array<double, 5> weights = {0.2369268850561891, 0.4786286704993665,
                                                      0.5688888888888889, 0.4786286704993665,
                                                      0.2369268850561891};
    const double a0 = lat0_deg * M_PI / 180.0, a1 = lat1_deg * M_PI / 180.0;
    const double half = (a1 - a0) / 2.0, mid = (a1 + a0) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double t = mid + half * nodes[i];
        const double s2 = std::sin(t) * std::sin(t);
        sum += weights[i] * p.a * (1.0 - e2) / std::pow(1.0 - e2 * s2, 1.5);
    }
    return sum * half;
}

}  // namespace trackkit::geodesy
