#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mbsat/geometry.hpp"
#include "mbsat/rng.hpp"

namespace mbsat {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kBoltzmann = 1.380649e-23;

struct LinkBudgetParams {
    double carrier_frequency_hz = 19.5e9;
    double rx_antenna_diameter_m = 0.6;
    double rx_antenna_efficiency = 0.6;
    double antenna_losses_db = 2.55; ///< G_loss, as a positive loss in dB
    double noise_temperature_k = 207.0;
    double user_bandwidth_hz = 500e6;

    double wavelength_m() const { return kSpeedOfLight / carrier_frequency_hz; }
    void validate() const;
};

/// G_R = efficiency * (pi D / lambda)^2.
double rx_antenna_gain(const LinkBudgetParams& p);
/// P_Z = kappa T_b B_w.
double noise_power_w(const LinkBudgetParams& p);
/// Linear G_loss (< 1 for a positive dB loss).
double antenna_loss_factor(const LinkBudgetParams& p);

/// Normalised far field of a circular aperture with illumination C + (1 - C)(1 - r^2).
/// C = 1 is the uniform aperture, 2 J1(u) / u. Equals 1 at u = 0.
double aperture_field(double u, double edge_pedestal = 1.0);

/// u at which aperture_field(u)^2 = 1/2.
double half_power_u(double edge_pedestal = 1.0);

/// Per-feed gain grid read from `feed_id,lat_deg,lon_deg,gain_dBi` rows.
class GainTable {
public:
    static GainTable load(const std::filesystem::path& path);
    static GainTable parse(std::istream& in, const std::string& source);

    /// Bilinear interpolation in (lat, lon). Throws InterpolationError off-grid.
    double gain_dbi(int feed_id, GeoPoint p) const;
    bool has_feed(int feed_id) const { return grids_.count(feed_id) != 0; }

private:
    struct Grid {
        std::vector<double> lats;
        std::vector<double> lons;
        std::vector<double> gain_db; ///< row-major, lats x lons
    };
    std::map<int, Grid> grids_;
};

enum class PatternMode { TaperedAperture, GainTable };

struct AntennaPattern {
    PatternMode mode = PatternMode::TaperedAperture;
    double peak_gain_dbi = 52.0;
    double edge_pedestal = 1.0; ///< taper of the tapered-aperture mode, in (0, 1]
    std::shared_ptr<const GainTable> table;

    void validate() const;
};

/// Transmit gains G_bj of all feeds of one layout.
///
/// In tapered-aperture mode feed j points at beam j's center and its aperture
/// constant puts the -3 dB level at the beam radius: u = u_3dB sin(theta) / sin(theta_edge),
/// theta_edge being the mean off-axis angle of eight points on the beam-edge circle.
class MultibeamAntenna {
public:
    MultibeamAntenna(AntennaPattern pattern, const BeamLayout& layout);

    std::size_t feeds() const { return boresight_.size(); }

    /// Linear gain of feed `feed` (0-based) towards `p`.
    double gain(std::size_t feed, GeoPoint p) const;

    /// Linear gains of every feed towards `p`.
    void gains(GeoPoint p, std::span<double> out) const;

    /// Tapered mode only: gain at a given off-axis angle of `feed`.
    double gain_at_off_axis(std::size_t feed, double theta_rad) const;

    double edge_angle_rad(std::size_t feed) const { return edge_angle_[feed]; }
    const AntennaPattern& pattern() const { return pattern_; }

private:
    AntennaPattern pattern_;
    BeamLayout layout_;
    Vec3 satellite_;
    std::vector<Vec3> boresight_; ///< unit vectors from the satellite
    std::vector<double> edge_angle_;
    std::vector<double> sin_edge_;
    double u_half_power_ = 0.0;
    double peak_linear_ = 1.0;
};

/// How the random phase offset is indexed: per transmitting feed (theta_j) or per
/// receiving beam (theta_b, the literal subscript).
enum class PhasePer { Feed, Beam };

struct UserChannel {
    int user_id = 0;
    int beam = 0;
    Eigen::RowVectorXcd coefficients; ///< h_b^(i), length N_B
};

using BeamChannels = std::vector<std::vector<UserChannel>>;

/// One U[0, 2 pi) offset per feed (or per beam).
std::vector<double> draw_phases(std::size_t n, Rng& rng);

/// Channel coefficient for one user-feed pair, in noise-normalised units.
std::complex<double> channel_coefficient(double feed_gain_linear, double slant_range_km,
                                         double phase_offset_rad, const LinkBudgetParams& p);

BeamChannels synthesize_channels(const UserDeployment& deployment, const BeamLayout& layout,
                                 const MultibeamAntenna& antenna, const LinkBudgetParams& params,
                                 std::span<const double> phases, PhasePer phase_per = PhasePer::Feed);

BeamChannels synthesize_channels(const UserDeployment& deployment, const BeamLayout& layout,
                                 const MultibeamAntenna& antenna, const LinkBudgetParams& params,
                                 Rng& rng, PhasePer phase_per = PhasePer::Feed);

} // namespace mbsat
