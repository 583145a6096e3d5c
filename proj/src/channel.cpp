#include "mbsat/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat {

void LinkBudgetParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
    };
    positive(carrier_frequency_hz, "link.frequency_hz");
    positive(rx_antenna_diameter_m, "link.rx_diameter_m");
    positive(rx_antenna_efficiency, "link.rx_efficiency");
    positive(noise_temperature_k, "link.noise_temp_k");
    positive(user_bandwidth_hz, "link.bandwidth_hz");
    if (rx_antenna_efficiency > 1.0) throw ConfigError("link.rx_efficiency must lie in (0, 1]");
    if (!std::isfinite(antenna_losses_db) || antenna_losses_db < 0.0) {
        throw ConfigError("link.losses_db must be >= 0");
    }
}

double rx_antenna_gain(const LinkBudgetParams& p) {
    const double x = kPi * p.rx_antenna_diameter_m / p.wavelength_m();
    return p.rx_antenna_efficiency * x * x;
}

double noise_power_w(const LinkBudgetParams& p) {
    return kBoltzmann * p.noise_temperature_k * p.user_bandwidth_hz;
}

double antenna_loss_factor(const LinkBudgetParams& p) {
    return std::pow(10.0, -p.antenna_losses_db / 10.0);
}

double aperture_field(double u, double edge_pedestal) {
    u = std::abs(u);
    if (u < 1e-8) return 1.0;
    const double c = edge_pedestal;
    const double uniform = std::cyl_bessel_j(1.0, u) / u;                // -> 1/2
    const double parabolic = 2.0 * std::cyl_bessel_j(2.0, u) / (u * u);  // -> 1/4
    return (c * uniform + (1.0 - c) * parabolic) / (0.5 * c + 0.25 * (1.0 - c));
}

double half_power_u(double edge_pedestal) {
    double lo = 1e-6, hi = 3.5;
    const auto f = [&](double u) {
        const double e = aperture_field(u, edge_pedestal);
        return e * e - 0.5;
    };
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

GainTable GainTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gain table '" + path.string() + "'");
    return parse(in, path.string());
}

GainTable GainTable::parse(std::istream& in, const std::string& source) {
    std::map<int, std::map<std::pair<double, double>, double>> raw;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fields = detail::split_csv(t);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"feed_id", "lat_deg", "lon_deg", "gain_dBi"}) {
                throw ParseError(source, line_no, "expected header 'feed_id,lat_deg,lon_deg,gain_dBi'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
        try {
            const int feed = static_cast<int>(detail::parse_int(fields[0]));
            const double lat = detail::parse_double(fields[1]);
            const double lon = detail::parse_double(fields[2]);
            const double g = detail::parse_double(fields[3]);
            if (!raw[feed].emplace(std::make_pair(lat, lon), g).second) {
                throw ParseError(source, line_no, "duplicate grid point");
            }
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    if (!header_seen) throw ParseError(source, line_no, "missing header");

    GainTable table;
    for (const auto& [feed, points] : raw) {
        std::set<double> lats, lons;
        for (const auto& [key, g] : points) {
            lats.insert(key.first);
            lons.insert(key.second);
        }
        Grid grid;
        grid.lats.assign(lats.begin(), lats.end());
        grid.lons.assign(lons.begin(), lons.end());
        if (grid.lats.size() < 2 || grid.lons.size() < 2 ||
            grid.lats.size() * grid.lons.size() != points.size()) {
            throw ParseError(source, line_no,
                             "feed " + std::to_string(feed) + ": points do not form a full lat/lon grid");
        }
        grid.gain_db.reserve(points.size());
        for (double lat : grid.lats) {
            for (double lon : grid.lons) grid.gain_db.push_back(points.at({lat, lon}));
        }
        table.grids_.emplace(feed, std::move(grid));
    }
    return table;
}

double GainTable::gain_dbi(int feed_id, GeoPoint p) const {
    const auto it = grids_.find(feed_id);
    if (it == grids_.end()) throw InterpolationError("gain table has no feed " + std::to_string(feed_id));
    const Grid& g = it->second;
    const auto locate = [](const std::vector<double>& axis, double v) -> std::ptrdiff_t {
        if (v < axis.front() || v > axis.back()) return -1;
        auto hi = std::upper_bound(axis.begin(), axis.end(), v);
        if (hi == axis.end()) --hi;
        return std::max<std::ptrdiff_t>(0, (hi - axis.begin()) - 1);
    };
    const auto i = locate(g.lats, p.lat_deg);
    const auto j = locate(g.lons, p.lon_deg);
    if (i < 0 || j < 0) {
        throw InterpolationError("point (" + std::to_string(p.lat_deg) + ", " + std::to_string(p.lon_deg) +
                                 ") outside the gain grid of feed " + std::to_string(feed_id));
    }
    const std::size_t nlon = g.lons.size();
    const double t = (p.lat_deg - g.lats[i]) / (g.lats[i + 1] - g.lats[i]);
    const double s = (p.lon_deg - g.lons[j]) / (g.lons[j + 1] - g.lons[j]);
    const double g00 = g.gain_db[i * nlon + j], g01 = g.gain_db[i * nlon + j + 1];
    const double g10 = g.gain_db[(i + 1) * nlon + j], g11 = g.gain_db[(i + 1) * nlon + j + 1];
    return (1 - t) * ((1 - s) * g00 + s * g01) + t * ((1 - s) * g10 + s * g11);
}

// ---------------------------------------------------------------------------

void AntennaPattern::validate() const {
    if (mode == PatternMode::TaperedAperture) {
        if (!(edge_pedestal > 0.0 && edge_pedestal <= 1.0)) {
            throw ConfigError("antenna.edge_pedestal must lie in (0, 1]");
        }
        if (!std::isfinite(peak_gain_dbi)) throw ConfigError("antenna.peak_gain_dbi must be finite");
    } else if (!table) {
        throw ConfigError("antenna.mode=table requires antenna.table");
    }
}

namespace {

Vec3 unit(const Vec3& v) {
    const double n = v.norm();
    return {v.x / n, v.y / n, v.z / n};
}

double angle_between_units(const Vec3& a, const Vec3& b) {
    const Vec3 c{a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
    return std::atan2(c.norm(), a.dot(b));
}

} // namespace

MultibeamAntenna::MultibeamAntenna(AntennaPattern pattern, const BeamLayout& layout)
    : pattern_(std::move(pattern)), layout_(layout), satellite_(satellite_position(layout)) {
    pattern_.validate();
    u_half_power_ = half_power_u(pattern_.edge_pedestal);
    peak_linear_ = std::pow(10.0, pattern_.peak_gain_dbi / 10.0);
    for (const BeamSpec& beam : layout_.beams) {
        boresight_.push_back(unit(ecef(beam.center) - satellite_));
        double sum = 0.0;
        constexpr int kEdgeSamples = 8;
        for (int k = 0; k < kEdgeSamples; ++k) {
            const GeoPoint edge = destination(beam.center, 2.0 * kPi * k / kEdgeSamples, beam.radius_km);
            sum += off_axis_angle_rad(layout_, beam.center, edge);
        }
        edge_angle_.push_back(sum / kEdgeSamples);
        sin_edge_.push_back(std::sin(edge_angle_.back()));
    }
    if (pattern_.mode == PatternMode::GainTable) {
        for (const BeamSpec& beam : layout_.beams) {
            if (!pattern_.table->has_feed(beam.id)) {
                throw ConfigError("gain table has no rows for feed " + std::to_string(beam.id));
            }
        }
    }
}

double MultibeamAntenna::gain_at_off_axis(std::size_t feed, double theta_rad) const {
    const double u = u_half_power_ * std::sin(theta_rad) / sin_edge_.at(feed);
    const double e = aperture_field(u, pattern_.edge_pedestal);
    return peak_linear_ * e * e;
}

double MultibeamAntenna::gain(std::size_t feed, GeoPoint p) const {
    if (feed >= feeds()) throw ConfigError("feed index " + std::to_string(feed) + " out of range");
    if (pattern_.mode == PatternMode::GainTable) {
        return std::pow(10.0, pattern_.table->gain_dbi(layout_.beams[feed].id, p) / 10.0);
    }
    const Vec3 dir = unit(ecef(p) - satellite_);
    return gain_at_off_axis(feed, angle_between_units(boresight_[feed], dir));
}

void MultibeamAntenna::gains(GeoPoint p, std::span<double> out) const {
    if (pattern_.mode == PatternMode::GainTable) {
        for (std::size_t j = 0; j < feeds(); ++j) out[j] = gain(j, p);
        return;
    }
    const Vec3 dir = unit(ecef(p) - satellite_);
    for (std::size_t j = 0; j < feeds(); ++j) {
        out[j] = gain_at_off_axis(j, angle_between_units(boresight_[j], dir));
    }
}

// ---------------------------------------------------------------------------

std::vector<double> draw_phases(std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (double& v : out) v = 2.0 * kPi * rng.uniform();
    return out;
}

std::complex<double> channel_coefficient(double feed_gain_linear, double slant_range_km,
                                         double phase_offset_rad, const LinkBudgetParams& p) {
    const double lambda = p.wavelength_m();
    const double d = slant_range_km * 1000.0;
    const double magnitude = std::sqrt(rx_antenna_gain(p) * antenna_loss_factor(p) * feed_gain_linear) /
                             (4.0 * kPi * (d / lambda) * std::sqrt(noise_power_w(p)));
    return magnitude * std::polar(1.0, -(2.0 * kPi / lambda) * d) * std::polar(1.0, -phase_offset_rad);
}

BeamChannels synthesize_channels(const UserDeployment& deployment, const BeamLayout& layout,
                                 const MultibeamAntenna& antenna, const LinkBudgetParams& params,
                                 std::span<const double> phases, PhasePer phase_per) {
    const std::size_t nb = layout.size();
    if (deployment.per_beam.size() != nb || antenna.feeds() != nb) {
        throw ConfigError("deployment, antenna and layout disagree on the number of beams");
    }
    if (phases.size() != nb) throw ConfigError("expected one phase offset per beam");

    const double lambda = params.wavelength_m();
    const double k0 = 2.0 * kPi / lambda;
    const double scale = std::sqrt(rx_antenna_gain(params) * antenna_loss_factor(params)) /
                         std::sqrt(noise_power_w(params));
    std::vector<std::complex<double>> feed_phasor(nb);
    for (std::size_t j = 0; j < nb; ++j) feed_phasor[j] = std::polar(1.0, -phases[j]);

    BeamChannels out(nb);
    std::vector<double> g(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        out[b].reserve(deployment.per_beam[b].size());
        for (const User& user : deployment.per_beam[b]) {
            const double d = slant_range_km(user.position, layout) * 1000.0;
            const std::complex<double> path = std::polar(1.0, -k0 * d);
            antenna.gains(user.position, g);
            UserChannel ch{user.id, user.beam, Eigen::RowVectorXcd(static_cast<Eigen::Index>(nb))};
            for (std::size_t j = 0; j < nb; ++j) {
                const double magnitude = scale * std::sqrt(g[j]) / (4.0 * kPi * (d / lambda));
                const auto theta = phase_per == PhasePer::Feed ? feed_phasor[j] : feed_phasor[b];
                ch.coefficients[static_cast<Eigen::Index>(j)] = magnitude * path * theta;
            }
            out[b].push_back(std::move(ch));
        }
    }
    return out;
}

BeamChannels synthesize_channels(const UserDeployment& deployment, const BeamLayout& layout,
                                 const MultibeamAntenna& antenna, const LinkBudgetParams& params,
                                 Rng& rng, PhasePer phase_per) {
    const auto phases = draw_phases(layout.size(), rng);
    return synthesize_channels(deployment, layout, antenna, params, phases, phase_per);
}

} // namespace mbsat
