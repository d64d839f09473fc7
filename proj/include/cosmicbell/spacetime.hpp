#pragma once

// Star positions, site geodesy, spacelike-separation margins and lookback
// times for a two-station Bell test driven by stellar photons.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "cosmicbell/core.hpp"

namespace cosmicbell::spacetime {

inline constexpr double kLightMetersPerNs = 0.299792458;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double wrap360(double d) {
    d = std::fmod(d, 360.0);
    return d < 0.0 ? d + 360.0 : d;
}

struct StarEntry {
    int hip_id = 0;
    double ra_deg = 0.0;
    double dec_deg = 0.0;
    double distance_ly = 1.0;
    double sigma_ly = 0.0;

    void validate() const {
        if (!(distance_ly > 0.0)) throw ValidationError("star HIP " + std::to_string(hip_id) + ": distance must be positive");
        if (!(sigma_ly >= 0.0)) throw ValidationError("star HIP " + std::to_string(hip_id) + ": negative distance error");
        if (!(ra_deg >= 0.0 && ra_deg < 360.0)) throw ValidationError("star HIP " + std::to_string(hip_id) + ": ra outside [0, 360)");
        if (!(std::abs(dec_deg) <= 90.0)) throw ValidationError("star HIP " + std::to_string(hip_id) + ": dec outside [-90, 90]");
    }
};

struct Site {
    std::string name;
    double lat_deg = 0.0;
    double lon_deg = 0.0;  // east positive
    double elevation_m = 0.0;

    void validate() const {
        if (!(std::abs(lat_deg) <= 90.0)) throw ValidationError("site " + name + ": latitude outside [-90, 90]");
        if (!std::isfinite(lon_deg) || !std::isfinite(elevation_m)) throw ValidationError("site " + name + ": non-finite coordinate");
    }
};

/// Latencies in ns; paths are effective optical fiber lengths nL/c in light-ns.
struct TimingBudget {
    double t_p = 10.0;
    double t_r_a = 254.0, t_r_b = 249.0;
    double t_pc_a = 111.6, t_pc_b = 99.2;
    double t_m_a = 55.4, t_m_b = 99.8;
    double path_a = 646.7, path_b = 583.3;
    double baseline = 610.0;

    // 1-sigma uncertainties of the entries above
    double sigma_t_p = 0.0;
    double sigma_t_r_a = 0.0, sigma_t_r_b = 0.0;
    double sigma_t_pc_a = 0.0, sigma_t_pc_b = 0.0;
    double sigma_t_m_a = 0.0, sigma_t_m_b = 0.0;
    double sigma_path_a = 0.0, sigma_path_b = 0.0;
    double sigma_baseline = 0.0;

    void validate() const {
        const double v[] = {t_p, t_r_a, t_r_b, t_pc_a, t_pc_b, t_m_a, t_m_b, path_a, path_b, baseline,
                            sigma_t_p, sigma_t_r_a, sigma_t_r_b, sigma_t_pc_a, sigma_t_pc_b, sigma_t_m_a,
                            sigma_t_m_b, sigma_path_a, sigma_path_b, sigma_baseline};
        for (double x : v)
            if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("timing budget entries must be finite and nonnegative");
    }
};

struct SpacetimeReport {
    double gamma_a = 0.0, gamma_b = 0.0;  // ns
    double theta_a = 0.0, theta_b = 0.0;  // degrees
    double tau_ab = 0.0;                  // years
    double sigma_tau = 0.0;               // years
    double alpha = 0.0;                   // degrees
};

using UtcTime = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace the T).
inline UtcTime parse_utc(std::string_view s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    int consumed = 0;
    const std::string str(s);
    const int got = std::sscanf(str.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    if (got < 6 || (sep != 'T' && sep != ' ')) throw ValidationError("malformed UTC timestamp '" + str + "'");
    std::string_view rest = s.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == ':') {
        int n = 0;
        if (std::sscanf(std::string(rest).c_str(), ":%2d%n", &sec, &n) != 1) throw ValidationError("malformed seconds in '" + str + "'");
        rest.remove_prefix(static_cast<std::size_t>(n));
    }
    if (rest == "Z") rest = {};
    if (!rest.empty()) throw ValidationError("trailing characters in UTC timestamp '" + str + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw ValidationError("invalid UTC timestamp '" + str + "'");
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

inline std::string format_utc(UtcTime t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(hms.hours().count()), static_cast<long long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

inline double julian_date(UtcTime t) {
    return 2440587.5 + static_cast<double>(t.time_since_epoch().count()) / 86400.0;
}

/// Greenwich mean sidereal time in degrees (Meeus, Astronomical Algorithms 12.4).
inline double gmst_deg(UtcTime t) {
    const double d = julian_date(t) - 2451545.0;
    const double c = d / 36525.0;
    return wrap360(280.46061837 + 360.98564736629 * d + 0.000387933 * c * c - c * c * c / 38710000.0);
}

struct Horizontal {
    double azimuth_deg = 0.0;  // clockwise from north
    double altitude_deg = 0.0;
};

inline Horizontal radec_to_altaz(double ra_deg, double dec_deg, const Site& site, UtcTime t) {
    const double h = deg2rad(gmst_deg(t) + site.lon_deg - ra_deg);
    const double phi = deg2rad(site.lat_deg), dec = deg2rad(dec_deg);
    const double sin_alt = std::sin(phi) * std::sin(dec) + std::cos(phi) * std::cos(dec) * std::cos(h);
    const double east = -std::cos(dec) * std::sin(h);
    const double north = std::sin(dec) * std::cos(phi) - std::cos(dec) * std::sin(phi) * std::cos(h);
    // atan2 keeps full precision near the zenith where asin does not.
    const double alt = std::atan2(sin_alt, std::hypot(east, north));
    return {wrap360(rad2deg(std::atan2(east, north))), rad2deg(alt)};
}

inline Horizontal radec_to_altaz(const StarEntry& star, const Site& site, UtcTime t) {
    return radec_to_altaz(star.ra_deg, star.dec_deg, site, t);
}

struct Equatorial {
    double ra_deg = 0.0;
    double dec_deg = 0.0;
};

/// Inverse of radec_to_altaz in the same sidereal frame.
inline Equatorial altaz_to_radec(const Horizontal& hz, const Site& site, UtcTime t) {
    const double phi = deg2rad(site.lat_deg), alt = deg2rad(hz.altitude_deg), az = deg2rad(hz.azimuth_deg);
    const double sin_dec = std::sin(phi) * std::sin(alt) + std::cos(phi) * std::cos(alt) * std::cos(az);
    const double dec = std::asin(std::clamp(sin_dec, -1.0, 1.0));
    const double h = std::atan2(-std::sin(az) * std::cos(alt), std::cos(phi) * std::sin(alt) - std::sin(phi) * std::cos(alt) * std::cos(az));
    return {wrap360(gmst_deg(t) + site.lon_deg - rad2deg(h)), rad2deg(dec)};
}

/// East-north-up unit vector of a direction given in horizontal coordinates.
inline std::array<double, 3> enu_direction(const Horizontal& hz) {
    const double alt = deg2rad(hz.altitude_deg), az = deg2rad(hz.azimuth_deg);
    return {std::cos(alt) * std::sin(az), std::cos(alt) * std::cos(az), std::sin(alt)};
}

/// WGS84 geodetic -> Earth-centered Earth-fixed, meters.
inline std::array<double, 3> ecef(const Site& s) {
    constexpr double a = 6378137.0;
    constexpr double f = 1.0 / 298.257223563;
    constexpr double e2 = f * (2.0 - f);
    const double phi = deg2rad(s.lat_deg), lam = deg2rad(s.lon_deg);
    const double n = a / std::sqrt(1.0 - e2 * std::sin(phi) * std::sin(phi));
    return {(n + s.elevation_m) * std::cos(phi) * std::cos(lam), (n + s.elevation_m) * std::cos(phi) * std::sin(lam),
            (n * (1.0 - e2) + s.elevation_m) * std::sin(phi)};
}

/// Rotates an ECEF difference vector into the local ENU frame at `origin`.
inline std::array<double, 3> ecef_to_enu(const std::array<double, 3>& d, const Site& origin) {
    const double phi = deg2rad(origin.lat_deg), lam = deg2rad(origin.lon_deg);
    const double sp = std::sin(phi), cp = std::cos(phi), sl = std::sin(lam), cl = std::cos(lam);
    return {-sl * d[0] + cl * d[1], -sp * cl * d[0] - sp * sl * d[1] + cp * d[2], cp * cl * d[0] + cp * sl * d[1] + sp * d[2]};
}

struct Baseline {
    double length_lns = 0.0;
    std::array<double, 3> direction_enu{};  // from A toward B, in A's ENU frame
    double azimuth_deg = 0.0;
    bool zero_length = false;
};

/// Straight-line chord between the two sites.
inline Baseline baseline(const Site& a, const Site& b) {
    a.validate();
    b.validate();
    const auto pa = ecef(a), pb = ecef(b);
    const std::array<double, 3> d{pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]};
    const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    Baseline out;
    out.length_lns = len / kLightMetersPerNs;
    if (len < 1e-9) {
        out.zero_length = true;
        out.length_lns = 0.0;
        return out;
    }
    const auto enu = ecef_to_enu(d, a);
    for (int i = 0; i < 3; ++i) out.direction_enu[static_cast<std::size_t>(i)] = enu[static_cast<std::size_t>(i)] / len;
    out.azimuth_deg = wrap360(rad2deg(std::atan2(enu[0], enu[1])));
    return out;
}

inline double angle_between(const std::array<double, 3>& u, const std::array<double, 3>& v) {
    const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    const double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    const double nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return rad2deg(std::acos(std::clamp(dot / (nu * nv), -1.0, 1.0)));
}

/// Great-circle separation of two sky positions.
inline double angular_separation(const StarEntry& s1, const StarEntry& s2) {
    const double d1 = deg2rad(s1.dec_deg), d2 = deg2rad(s2.dec_deg), dra = deg2rad(s1.ra_deg - s2.ra_deg);
    const double c = std::sin(d1) * std::sin(d2) + std::cos(d1) * std::cos(d2) * std::cos(dra);
    return rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

struct ThetaAngles {
    double theta_a = 0.0;
    double theta_b = 0.0;
};

/// theta_A: Alice's star against the A->B baseline; theta_B: Bob's star
/// against the B->A baseline. Each star is observed in its own site's frame.
inline ThetaAngles theta_angles(const StarEntry& star_a, const StarEntry& star_b, const Site& site_a, const Site& site_b,
                                UtcTime t) {
    const auto pa = ecef(site_a), pb = ecef(site_b);
    const std::array<double, 3> ab{pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]};
    const std::array<double, 3> ba{-ab[0], -ab[1], -ab[2]};
    if (ab[0] == 0.0 && ab[1] == 0.0 && ab[2] == 0.0) throw ValidationError("theta_angles: coincident sites");
    const auto sa = enu_direction(radec_to_altaz(star_a, site_a, t));
    const auto sb = enu_direction(radec_to_altaz(star_b, site_b, t));
    return {angle_between(sa, ecef_to_enu(ab, site_a)), angle_between(sb, ecef_to_enu(ba, site_b))};
}

struct GammaMargins {
    double gamma_a = 0.0;
    double gamma_b = 0.0;
    double sigma_a = 0.0;
    double sigma_b = 0.0;
};

/// Spacelike-separation margins; positive means the remote measurement
/// finishes before the stellar wavefront could inform it.
inline GammaMargins gamma_margins(const TimingBudget& b, double theta_a_deg, double theta_b_deg) {
    b.validate();
    const double ca = std::cos(deg2rad(theta_a_deg)), cb = std::cos(deg2rad(theta_b_deg));
    const double dpath = b.path_a - b.path_b;
    GammaMargins g;
    g.gamma_a = b.baseline * ca - b.t_p - b.t_r_a - b.t_pc_a - b.t_m_b + dpath;
    g.gamma_b = b.baseline * cb - b.t_p - b.t_r_b - b.t_pc_b - b.t_m_a - dpath;
    auto sq = [](double v) { return v * v; };
    const double common = sq(b.sigma_t_p) + sq(b.sigma_path_a) + sq(b.sigma_path_b);
    g.sigma_a = std::sqrt(sq(ca * b.sigma_baseline) + common + sq(b.sigma_t_r_a) + sq(b.sigma_t_pc_a) + sq(b.sigma_t_m_b));
    g.sigma_b = std::sqrt(sq(cb * b.sigma_baseline) + common + sq(b.sigma_t_r_b) + sq(b.sigma_t_pc_b) + sq(b.sigma_t_m_a));
    return g;
}

struct Lookback {
    double tau_years = 0.0;
    double separation_ly = 0.0;
};

/// Time back to where the two emission events' past light cones meet.
inline Lookback lookback(double d_a, double d_b, double alpha_deg) {
    if (!(d_a > 0.0) || !(d_b > 0.0)) throw ValidationError("lookback: distances must be positive");
    const double ca = std::cos(deg2rad(alpha_deg));
    // Written symmetrically so swapping d_a and d_b is bit-identical.
    const double sep2 = std::max(d_a * d_a + d_b * d_b - 2.0 * (d_a * d_b) * ca, 0.0);
    const double sep = std::sqrt(sep2);
    return {0.5 * ((d_a + d_b) + sep), sep};
}

/// First-order propagation of the distance errors through tau.
inline double lookback_sigma(double d_a, double d_b, double alpha_deg, double sigma_a, double sigma_b) {
    if (!(sigma_a >= 0.0) || !(sigma_b >= 0.0)) throw ValidationError("lookback_sigma: sigmas must be nonnegative");
    const auto lb = lookback(d_a, d_b, alpha_deg);
    const double ca = std::cos(deg2rad(alpha_deg));
    double ga = 0.5, gb = 0.5;  // limit at zero separation
    if (lb.separation_ly > 0.0) {
        ga = 0.5 * (1.0 + (d_a - d_b * ca) / lb.separation_ly);
        gb = 0.5 * (1.0 + (d_b - d_a * ca) / lb.separation_ly);
    }
    return std::sqrt(ga * ga * sigma_a * sigma_a + gb * gb * sigma_b * sigma_b);
}

/// Full geometry for one run at one instant.
inline SpacetimeReport evaluate(const StarEntry& star_a, const StarEntry& star_b, const Site& site_a, const Site& site_b,
                                const TimingBudget& budget, UtcTime t) {
    star_a.validate();
    star_b.validate();
    SpacetimeReport r;
    const auto th = theta_angles(star_a, star_b, site_a, site_b, t);
    const auto g = gamma_margins(budget, th.theta_a, th.theta_b);
    r.theta_a = th.theta_a;
    r.theta_b = th.theta_b;
    r.gamma_a = g.gamma_a;
    r.gamma_b = g.gamma_b;
    r.alpha = angular_separation(star_a, star_b);
    r.tau_ab = lookback(star_a.distance_ly, star_b.distance_ly, r.alpha).tau_years;
    r.sigma_tau = lookback_sigma(star_a.distance_ly, star_b.distance_ly, r.alpha, star_a.sigma_ly, star_b.sigma_ly);
    return r;
}

struct ThetaBounds {
    double lo = 17.0;
    double hi = 33.0;
};

struct UtcInterval {
    UtcTime begin;
    UtcTime end;  // last valid second, inclusive
    friend bool operator==(const UtcInterval&, const UtcInterval&) = default;
};

/// Scans the UTC day containing `date` at 1 s steps and returns the maximal
/// runs of seconds with both margins positive and both thetas inside the bounds.
inline std::vector<UtcInterval> validity_window(const StarEntry& star_a, const StarEntry& star_b, const Site& site_a,
                                                const Site& site_b, const TimingBudget& budget, UtcTime date,
                                                ThetaBounds bounds = {}) {
    star_a.validate();
    star_b.validate();
    budget.validate();
    if (!(bounds.lo <= bounds.hi)) throw ValidationError("validity_window: theta bounds are inverted");
    using namespace std::chrono;
    const UtcTime day0 = floor<days>(date);
    std::vector<UtcInterval> out;
    bool in_window = false;
    UtcTime open = day0, last = day0;
    for (int s = 0; s < 86400; ++s) {
        const UtcTime t = day0 + seconds{s};
        const auto th = theta_angles(star_a, star_b, site_a, site_b, t);
        const auto g = gamma_margins(budget, th.theta_a, th.theta_b);
        const bool ok = g.gamma_a > 0.0 && g.gamma_b > 0.0 && th.theta_a >= bounds.lo && th.theta_a <= bounds.hi &&
                        th.theta_b >= bounds.lo && th.theta_b <= bounds.hi;
        if (ok && !in_window) {
            open = t;
            in_window = true;
        }
        if (!ok && in_window) {
            out.push_back({open, last});
            in_window = false;
        }
        last = t;
    }
    if (in_window) out.push_back({open, last});
    return out;
}

}  // namespace cosmicbell::spacetime
