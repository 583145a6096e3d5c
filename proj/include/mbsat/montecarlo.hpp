#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbsat/channel.hpp"
#include "mbsat/clustering.hpp"
#include "mbsat/geometry.hpp"
#include "mbsat/link.hpp"
#include "mbsat/precoding.hpp"
#include "mbsat/rng.hpp"

namespace mbsat {

enum class LayoutSource { Hex, File };

struct LayoutConfig {
    LayoutSource source = LayoutSource::Hex;
    int rings = 1;
    double beam_radius_km = 200.0;
    GeoPoint center{47.0, 10.0};
    double satellite_lon_deg = 30.0;
    std::filesystem::path path;
    Rounding rounding = Rounding::Round;
};

struct SimConfig {
    LayoutConfig layout;
    double density = 1.25e-3; ///< users / km^2

    int cluster_size = 4; ///< K; for k-means++ the average size, N_K = floor(N_U / K)
    Algorithm algorithm = Algorithm::MaxDist;
    Metric metric = Metric::Channel;
    bool scale_features = false;
    KMeansOptions kmeans;

    PrecoderType precoder = PrecoderType::PAC;
    PowerModel power;
    LinkBudgetParams link;
    AntennaPattern antenna;
    std::filesystem::path antenna_table;
    PhasePer phase_per = PhasePer::Feed;

    RateModel rate_model = RateModel::ModCod;
    std::filesystem::path modcod_table; ///< empty: built-in table

    int iterations = 50;
    std::uint64_t seed = 1;
    bool include_reserve = false;
    /// Seeds depend on the iteration only, so every grid point sees the same drops.
    bool common_random_numbers = true;

    /// Checks value ranges only; files are checked by prepare_scenario.
    void validate() const;
};

/// Everything an iteration needs, built once and shared read-only by the workers.
struct Scenario {
    SimConfig config;
    BeamLayout layout;
    std::shared_ptr<const MultibeamAntenna> antenna;
    RateFunction rate;
    double per_stream_power = 0.0;
    std::vector<std::size_t> users_per_beam;
    std::vector<std::string> warnings;
};

Scenario prepare_scenario(const SimConfig& config);

struct FrameEntry {
    int cluster = -1; ///< -1: beam has no users and stays silent
    bool reserve = false;
};

struct FrameSchedule {
    std::vector<std::vector<FrameEntry>> frames; ///< frames[f][b]

    std::size_t size() const { return frames.size(); }
};

/// Frame c serves cluster c of every beam; beams that ran out repeat a random served cluster.
FrameSchedule build_schedule(std::span<const std::size_t> clusters_per_beam, Rng& rng);

struct IterationResult {
    std::vector<ClusterLinkResult> clusters; ///< ordered by (frame, beam)
    std::vector<std::size_t> users_per_beam;
    std::size_t frames = 0;
    std::size_t kmeans_nonconverged = 0;
};

/// One Monte Carlo drop: deployment, channels, then evaluate_drop.
IterationResult run_iteration(const Scenario& scenario, std::uint64_t iteration_seed);

/// Clustering, frame schedule, precoding and link evaluation of a given drop.
IterationResult evaluate_drop(const Scenario& scenario, const UserDeployment& deployment,
                              const BeamChannels& channels, std::uint64_t iteration_seed);

struct CumulativeSummary {
    std::vector<double> probability; ///< 0, 0.01, ..., 1
    std::vector<double> value;
};

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::span<const double> sorted, double p);
CumulativeSummary cdf_summary(std::vector<double> samples, std::size_t points = 101);

struct RateReport {
    std::size_t iterations = 0;
    std::size_t clusters = 0;        ///< non-re-serve clusters
    std::size_t reserve_clusters = 0;
    double avg_rate = 0.0;           ///< mean over non-re-serve clusters
    double avg_rate_se = 0.0;        ///< batch-means standard error over iterations
    double avg_rate_with_reserve = 0.0;
    double outage_frac = 0.0;
    std::size_t kmeans_nonconverged = 0;

    std::vector<double> iteration_rates;  ///< per-iteration mean rate
    std::vector<double> serving_sinr_db;  ///< one sample per non-re-serve cluster
    std::vector<double> sigma_dgamma_db;  ///< one sample per non-re-serve cluster
    std::vector<std::array<double, 3>> iteration_sigma_quartiles;
    std::map<std::size_t, std::size_t> size_histogram;
    std::vector<std::string> warnings;

    /// Per-cluster records, kept only when requested.
    std::vector<IterationResult> detail;

    /// The value used for the sweep-level figure of merit (honours include_reserve).
    double headline_rate(bool include_reserve) const { return include_reserve ? avg_rate_with_reserve : avg_rate; }
};

/// Deterministic reduction in iteration order.
RateReport aggregate(std::span<const IterationResult> iterations, bool keep_detail = false);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Rethrows the lowest-index failure.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Axis order: algorithm, metric, precoder, rho, psat, K.
using AxisIndex = std::array<std::size_t, 6>;

std::uint64_t iteration_seed(const SimConfig& config, const AxisIndex& axes, std::size_t iteration);

RateReport simulate(const Scenario& scenario, const AxisIndex& axes, int jobs, bool keep_detail = false);

struct SweepAxes {
    std::vector<Algorithm> algorithms;
    std::vector<Metric> metrics;
    std::vector<PrecoderType> precoders;
    std::vector<double> rho;
    std::vector<double> psat;
    std::vector<int> K;

    /// One-value axes taken from `base`.
    static SweepAxes single(const SimConfig& base);
};

struct GridPoint {
    std::size_t index = 0;
    AxisIndex axes{};
    SimConfig config;

    /// Stable file-name-safe identifier.
    std::string id() const;
};

/// Cartesian product in axis order, K varying fastest. Empty axes are an error.
std::vector<GridPoint> expand_grid(const SimConfig& base, const SweepAxes& axes);

struct PointOutcome {
    GridPoint point;
    std::optional<RateReport> report;
    std::string error;
};

struct SweepOptions {
    int jobs = 1;
    bool keep_detail = false;
    /// Return true to skip a point (e.g. its result already exists).
    std::function<bool(const GridPoint&)> skip;
    std::function<void(const PointOutcome&)> on_point;
};

/// Runs every grid point. Failures are collected per point instead of aborting the sweep.
std::vector<PointOutcome> sweep(const std::vector<GridPoint>& grid, const SweepOptions& options);

} // namespace mbsat
