#include "mbsat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat {

namespace {

constexpr double kDeg = kPi / 180.0;

} // namespace

double Vec3::norm() const { return std::sqrt(dot(*this)); }

std::size_t UserDeployment::total() const {
    std::size_t n = 0;
    for (const auto& b : per_beam) n += b.size();
    return n;
}

Vec3 ecef(GeoPoint p, double radius_km) {
    const double lat = p.lat_deg * kDeg;
    const double lon = p.lon_deg * kDeg;
    return {radius_km * std::cos(lat) * std::cos(lon), radius_km * std::cos(lat) * std::sin(lon),
            radius_km * std::sin(lat)};
}

Vec3 satellite_position(const BeamLayout& layout) {
    return ecef({0.0, layout.satellite_lon_deg}, layout.orbit_radius_km);
}

double great_circle_km(GeoPoint a, GeoPoint b) {
    const double lat1 = a.lat_deg * kDeg, lat2 = b.lat_deg * kDeg;
    const double dlat = lat2 - lat1;
    const double dlon = (b.lon_deg - a.lon_deg) * kDeg;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

GeoPoint destination(GeoPoint origin, double bearing_rad, double distance_km) {
    const double delta = distance_km / kEarthRadiusKm;
    const double lat1 = origin.lat_deg * kDeg;
    const double lon1 = origin.lon_deg * kDeg;
    const double sin_lat2 =
        std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(bearing_rad);
    const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
    const double lon2 =
        lon1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(lat1),
                          std::cos(delta) - std::sin(lat1) * sin_lat2);
    return {lat2 / kDeg, lon2 / kDeg};
}

PlaneXY to_tangent_plane(GeoPoint origin, GeoPoint p) {
    const double d = great_circle_km(origin, p);
    if (d == 0.0) return {0.0, 0.0};
    const double lat1 = origin.lat_deg * kDeg, lat2 = p.lat_deg * kDeg;
    const double dlon = (p.lon_deg - origin.lon_deg) * kDeg;
    const double bearing = std::atan2(std::sin(dlon) * std::cos(lat2),
                                      std::cos(lat1) * std::sin(lat2) -
                                          std::sin(lat1) * std::cos(lat2) * std::cos(dlon));
    return {d * std::sin(bearing), d * std::cos(bearing)};
}

GeoPoint from_tangent_plane(GeoPoint origin, PlaneXY xy) {
    const double d = std::hypot(xy.east_km, xy.north_km);
    if (d == 0.0) return origin;
    return destination(origin, std::atan2(xy.east_km, xy.north_km), d);
}

double elevation_deg(GeoPoint p, double satellite_lon_deg, double orbit_radius_km) {
    const Vec3 user = ecef(p);
    const Vec3 los = ecef({0.0, satellite_lon_deg}, orbit_radius_km) - user;
    const double s = los.dot(user) / (los.norm() * user.norm());
    return std::asin(std::clamp(s, -1.0, 1.0)) / kDeg;
}

double slant_range_km(GeoPoint user, const BeamLayout& layout) {
    return (satellite_position(layout) - ecef(user)).norm();
}

double off_axis_angle_rad(const BeamLayout& layout, GeoPoint boresight, GeoPoint p) {
    const Vec3 sat = satellite_position(layout);
    const Vec3 a = ecef(boresight) - sat;
    const Vec3 b = ecef(p) - sat;
    // atan2 of |a x b| and a.b stays accurate for the sub-degree angles of spot beams.
    const Vec3 cross{a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
    return std::atan2(cross.norm(), a.dot(b));
}

BeamLayout generate_hex_layout(int n_rings, double beam_radius_km, GeoPoint center,
                               double satellite_lon_deg) {
    if (n_rings < 0) throw ConfigError("hex layout: n_rings must be >= 0");
    if (!(beam_radius_km > 0.0)) throw ConfigError("hex layout: beam radius must be > 0");
    if (elevation_deg(center, satellite_lon_deg) <= 0.0) {
        throw GeometryError("hex layout: center (" + std::to_string(center.lat_deg) + ", " +
                            std::to_string(center.lon_deg) +
                            ") is not visible from the GEO satellite");
    }

    BeamLayout layout;
    layout.satellite_lon_deg = satellite_lon_deg;
    const double spacing = std::sqrt(3.0) * beam_radius_km;
    int id = 1;
    // Axial coordinates, ring by ring, so beam 1 is the center.
    for (int ring = 0; ring <= n_rings; ++ring) {
        for (int q = -ring; q <= ring; ++q) {
            for (int r = -ring; r <= ring; ++r) {
                const int s = -q - r;
                if (std::max({std::abs(q), std::abs(r), std::abs(s)}) != ring) continue;
                const PlaneXY xy{spacing * (q + 0.5 * r), spacing * (std::sqrt(3.0) / 2.0) * r};
                BeamSpec beam;
                beam.id = id++;
                beam.center = from_tangent_plane(center, xy);
                beam.radius_km = beam_radius_km;
                beam.area_km2 = kPi * beam_radius_km * beam_radius_km;
                layout.beams.push_back(beam);
            }
        }
    }
    validate_layout(layout);
    return layout;
}

BeamLayout parse_beam_layout(std::istream& in, const std::string& source, double satellite_lon_deg) {
    BeamLayout layout;
    layout.satellite_lon_deg = satellite_lon_deg;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::set<int> ids;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto fields = detail::split_csv(trimmed);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"id", "lat_deg", "lon_deg", "radius_km"}) {
                throw ParseError(source, line_no, "expected header 'id,lat_deg,lon_deg,radius_km'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
        BeamSpec beam;
        try {
            beam.id = detail::parse_int(fields[0]);
            beam.center.lat_deg = detail::parse_double(fields[1]);
            beam.center.lon_deg = detail::parse_double(fields[2]);
            beam.radius_km = detail::parse_double(fields[3]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
        if (!ids.insert(beam.id).second) {
            throw ParseError(source, line_no, "duplicate beam id " + std::to_string(beam.id));
        }
        if (!(beam.radius_km > 0.0)) throw ParseError(source, line_no, "radius_km must be > 0");
        if (!(std::abs(beam.center.lat_deg) < 90.0)) {
            throw ParseError(source, line_no, "latitude must lie in (-90, 90)");
        }
        beam.area_km2 = kPi * beam.radius_km * beam.radius_km;
        layout.beams.push_back(beam);
    }
    if (!header_seen) throw ParseError(source, line_no, "missing header");
    std::sort(layout.beams.begin(), layout.beams.end(),
              [](const BeamSpec& a, const BeamSpec& b) { return a.id < b.id; });
    validate_layout(layout);
    return layout;
}

BeamLayout load_beam_layout(const std::filesystem::path& path, double satellite_lon_deg) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open beam layout '" + path.string() + "'");
    return parse_beam_layout(in, path.string(), satellite_lon_deg);
}

void validate_layout(const BeamLayout& layout) {
    if (layout.beams.empty()) throw GeometryError("beam layout is empty");
    std::set<int> ids;
    for (const auto& b : layout.beams) {
        if (!ids.insert(b.id).second) throw GeometryError("duplicate beam id " + std::to_string(b.id));
        if (!(b.radius_km > 0.0)) throw GeometryError("beam " + std::to_string(b.id) + ": radius <= 0");
        if (!(b.area_km2 > 0.0)) throw GeometryError("beam " + std::to_string(b.id) + ": area <= 0");
        if (!(std::abs(b.center.lat_deg) < 90.0)) {
            throw GeometryError("beam " + std::to_string(b.id) + ": |latitude| >= 90");
        }
        if (elevation_deg(b.center, layout.satellite_lon_deg, layout.orbit_radius_km) <= 0.0) {
            throw GeometryError("beam " + std::to_string(b.id) + " is below the GEO horizon");
        }
    }
}

std::size_t users_in_beam(double area_km2, double density, Rounding rounding) {
    const double x = density * area_km2;
    return static_cast<std::size_t>(rounding == Rounding::Round ? std::floor(x + 0.5) : std::floor(x));
}

std::vector<GeoPoint> sample_in_beam(const BeamSpec& beam, std::size_t n, Rng& rng) {
    std::vector<GeoPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = beam.radius_km * std::sqrt(rng.uniform());
        const double bearing = 2.0 * kPi * rng.uniform();
        out.push_back(destination(beam.center, bearing, r));
    }
    return out;
}

UserDeployment deploy_users(const BeamLayout& layout, double density, Rng& rng, Rounding rounding) {
    if (!(density > 0.0)) throw ConfigError("user density must be > 0");
    UserDeployment dep;
    dep.per_beam.resize(layout.size());
    int next_id = 0;
    for (std::size_t b = 0; b < layout.size(); ++b) {
        const auto& beam = layout.beams[b];
        const std::size_t n = users_in_beam(beam.area_km2, density, rounding);
        if (n == 0) {
            dep.warnings.push_back("beam " + std::to_string(beam.id) + " received no users");
            continue;
        }
        auto& users = dep.per_beam[b];
        users.reserve(n);
        for (const GeoPoint& p : sample_in_beam(beam, n, rng)) {
            users.push_back(User{next_id++, static_cast<int>(b), p});
        }
    }
    return dep;
}

} // namespace mbsat
