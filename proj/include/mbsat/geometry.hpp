#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbsat/rng.hpp"

namespace mbsat {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kGeoOrbitRadiusKm = 42164.0;
inline constexpr double kPi = 3.14159265358979323846;

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const;
};

/// Circular footprint of one spot beam.
struct BeamSpec {
    int id = 0;
    GeoPoint center;
    double radius_km = 0.0;
    double area_km2 = 0.0;
};

struct BeamLayout {
    std::vector<BeamSpec> beams;
    double satellite_lon_deg = 30.0;
    double orbit_radius_km = kGeoOrbitRadiusKm;

    std::size_t size() const { return beams.size(); }
};

struct User {
    int id = 0;
    int beam = 0; ///< 0-based index into BeamLayout::beams
    GeoPoint position;
};

struct UserDeployment {
    std::vector<std::vector<User>> per_beam;
    std::vector<std::string> warnings;

    std::size_t total() const;
};

/// How rho * A_b becomes an integer user count.
enum class Rounding { Round, Floor };

/// Local east/north coordinates (km) of an azimuthal-equidistant tangent plane.
struct PlaneXY {
    double east_km = 0.0;
    double north_km = 0.0;
};

Vec3 ecef(GeoPoint p, double radius_km = kEarthRadiusKm);
Vec3 satellite_position(const BeamLayout& layout);

double great_circle_km(GeoPoint a, GeoPoint b);
GeoPoint destination(GeoPoint origin, double bearing_rad, double distance_km);
PlaneXY to_tangent_plane(GeoPoint origin, GeoPoint p);
GeoPoint from_tangent_plane(GeoPoint origin, PlaneXY xy);

/// Elevation of the GEO satellite above the local horizon at p.
double elevation_deg(GeoPoint p, double satellite_lon_deg, double orbit_radius_km = kGeoOrbitRadiusKm);

/// Satellite-to-user distance d_b^(i) on a spherical Earth.
double slant_range_km(GeoPoint user, const BeamLayout& layout);

/// Angle at the satellite between the directions to `boresight` and `p`.
double off_axis_angle_rad(const BeamLayout& layout, GeoPoint boresight, GeoPoint p);

/// Hexagonal lattice of 1 + 3 n (n + 1) beams around `center`.
BeamLayout generate_hex_layout(int n_rings, double beam_radius_km, GeoPoint center,
                               double satellite_lon_deg);

/// Layout CSV with header `id,lat_deg,lon_deg,radius_km`.
BeamLayout load_beam_layout(const std::filesystem::path& path, double satellite_lon_deg);
BeamLayout parse_beam_layout(std::istream& in, const std::string& source, double satellite_lon_deg);

/// Throws GeometryError on an empty layout, bad radius, or a beam the satellite cannot see.
void validate_layout(const BeamLayout& layout);

std::size_t users_in_beam(double area_km2, double density, Rounding rounding);

/// Uniform points on the disk footprint of `beam`.
std::vector<GeoPoint> sample_in_beam(const BeamSpec& beam, std::size_t n, Rng& rng);

UserDeployment deploy_users(const BeamLayout& layout, double density, Rng& rng,
                            Rounding rounding = Rounding::Round);

} // namespace mbsat
