#include "mbsat/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat {

void SimConfig::validate() const {
    if (layout.source == LayoutSource::Hex) {
        if (layout.rings < 0) throw ConfigError("layout.rings must be >= 0");
        if (!(layout.beam_radius_km > 0.0)) throw ConfigError("layout.beam_radius_km must be > 0");
        if (!(std::abs(layout.center.lat_deg) < 90.0)) throw ConfigError("layout.center_lat must lie in (-90, 90)");
    } else if (layout.path.empty()) {
        throw ConfigError("layout.source=file requires layout.path");
    }
    if (!(density > 0.0) || !std::isfinite(density)) throw ConfigError("users.density must be > 0");
    if (cluster_size < 1) throw ConfigError("cluster.K must be >= 1");
    if (!(kmeans.tol >= 0.0)) throw ConfigError("cluster.kmeans_tol must be >= 0");
    if (kmeans.max_iter < 1) throw ConfigError("cluster.kmeans_max_iter must be >= 1");
    if (iterations < 1) throw ConfigError("sim.iterations must be >= 1");
    power.validate();
    link.validate();
    if (antenna.mode == PatternMode::GainTable && antenna_table.empty() && !antenna.table) {
        throw ConfigError("antenna.mode=table requires antenna.table");
    }
}

Scenario prepare_scenario(const SimConfig& config) {
    config.validate();
    Scenario sc;
    sc.config = config;
    if (config.layout.source == LayoutSource::Hex) {
        sc.layout = generate_hex_layout(config.layout.rings, config.layout.beam_radius_km, config.layout.center,
                                        config.layout.satellite_lon_deg);
    } else {
        if (!std::filesystem::exists(config.layout.path)) {
            throw ConfigError("layout.path '" + config.layout.path.string() + "' does not exist");
        }
        sc.layout = load_beam_layout(config.layout.path, config.layout.satellite_lon_deg);
    }
    validate_layout(sc.layout);

    AntennaPattern pattern = config.antenna;
    if (pattern.mode == PatternMode::GainTable && !pattern.table) {
        if (!std::filesystem::exists(config.antenna_table)) {
            throw ConfigError("antenna.table '" + config.antenna_table.string() + "' does not exist");
        }
        pattern.table = std::make_shared<const GainTable>(GainTable::load(config.antenna_table));
    }
    sc.antenna = std::make_shared<const MultibeamAntenna>(pattern, sc.layout);

    sc.rate.model = config.rate_model;
    if (!config.modcod_table.empty()) {
        if (!std::filesystem::exists(config.modcod_table)) {
            throw ConfigError("rate.modcod_table '" + config.modcod_table.string() + "' does not exist");
        }
        sc.rate.table = std::make_shared<const ModCodTable>(ModCodTable::load(config.modcod_table));
    }
    sc.per_stream_power = config.power.per_stream_power(sc.layout.size());

    std::size_t total = 0;
    for (const BeamSpec& beam : sc.layout.beams) {
        const std::size_t n = users_in_beam(beam.area_km2, config.density, config.layout.rounding);
        sc.users_per_beam.push_back(n);
        total += n;
        if (n == 0) {
            sc.warnings.push_back("beam " + std::to_string(beam.id) + " receives no users and is not scheduled");
        } else if (n < static_cast<std::size_t>(config.cluster_size)) {
            throw ConfigError("cluster.K=" + std::to_string(config.cluster_size) + " exceeds the " +
                              std::to_string(n) + " users of beam " + std::to_string(beam.id));
        }
    }
    if (total == 0) throw ConfigError("users.density leaves every beam empty");
    return sc;
}

FrameSchedule build_schedule(std::span<const std::size_t> clusters_per_beam, Rng& rng) {
    FrameSchedule s;
    std::size_t n_frames = 0;
    for (std::size_t c : clusters_per_beam) n_frames = std::max(n_frames, c);
    s.frames.assign(n_frames, std::vector<FrameEntry>(clusters_per_beam.size()));
    for (std::size_t f = 0; f < n_frames; ++f) {
        for (std::size_t b = 0; b < clusters_per_beam.size(); ++b) {
            const std::size_t own = clusters_per_beam[b];
            if (own == 0) continue;
            FrameEntry& e = s.frames[f][b];
            if (f < own) {
                e.cluster = static_cast<int>(f);
            } else {
                e.cluster = static_cast<int>(rng.index(own));
                e.reserve = true;
            }
        }
    }
    return s;
}

namespace {

Partition partition_beam(const Scenario& sc, const std::vector<User>& users, const BeamSpec& beam,
                         std::span<const UserChannel> channels, Rng& rng) {
    const SimConfig& cfg = sc.config;
    const int k = cfg.cluster_size;
    // Unicast is the same canonical partition whichever algorithm is configured.
    if (k == 1) return unicast_partition(users.size(), cfg.algorithm);
    FeatureMatrix f = feature_vectors(users, beam, channels, cfg.metric);
    if (cfg.scale_features) scale_unit_variance(f);
    switch (cfg.algorithm) {
    case Algorithm::UpperBound: return cluster_upperbound(f, k, rng);
    case Algorithm::Random: return cluster_random(f, k, rng);
    case Algorithm::MaxDist: return cluster_maxdist(f, k);
    case Algorithm::KMeansPP: return cluster_kmeanspp(f, clusters_for(users.size(), k), rng, cfg.kmeans);
    }
    throw ConfigError("unknown clustering algorithm");
}

} // namespace

IterationResult run_iteration(const Scenario& sc, std::uint64_t seed) {
    const SimConfig& cfg = sc.config;

    Rng deploy_rng(derive_seed(seed, Stream::Deploy));
    const UserDeployment dep = deploy_users(sc.layout, cfg.density, deploy_rng, cfg.layout.rounding);
    Rng phase_rng(derive_seed(seed, Stream::Phase));
    const BeamChannels channels = synthesize_channels(dep, sc.layout, *sc.antenna, cfg.link, phase_rng, cfg.phase_per);
    return evaluate_drop(sc, dep, channels, seed);
}

IterationResult evaluate_drop(const Scenario& sc, const UserDeployment& dep, const BeamChannels& channels,
                              std::uint64_t seed) {
    const SimConfig& cfg = sc.config;
    const std::size_t nb = sc.layout.size();
    if (dep.per_beam.size() != nb || channels.size() != nb) {
        throw ConfigError("drop does not match the layout's beam count");
    }

    IterationResult out;
    std::vector<Partition> parts(nb);
    std::vector<std::size_t> n_clusters(nb, 0);
    for (std::size_t b = 0; b < nb; ++b) {
        out.users_per_beam.push_back(dep.per_beam[b].size());
        if (dep.per_beam[b].empty()) continue;
        Rng cluster_rng(derive_seed(seed, Stream::Cluster, b));
        parts[b] = partition_beam(sc, dep.per_beam[b], sc.layout.beams[b], channels[b], cluster_rng);
        parts[b].beam = static_cast<int>(b);
        if (!parts[b].converged) ++out.kmeans_nonconverged;
        n_clusters[b] = parts[b].size();
    }

    Rng schedule_rng(derive_seed(seed, Stream::Schedule));
    const FrameSchedule schedule = build_schedule(n_clusters, schedule_rng);
    out.frames = schedule.size();

    std::vector<int> active;
    std::vector<double> sinr;
    const double p = sc.per_stream_power;
    for (std::size_t f = 0; f < schedule.size(); ++f) {
        active.clear();
        for (std::size_t b = 0; b < nb; ++b) {
            if (schedule.frames[f][b].cluster >= 0) active.push_back(static_cast<int>(b));
        }
        CMatrix h_eq(static_cast<Eigen::Index>(active.size()), static_cast<Eigen::Index>(nb));
        for (std::size_t s = 0; s < active.size(); ++s) {
            const int b = active[s];
            const auto& members = parts[b].clusters[schedule.frames[f][b].cluster];
            h_eq.row(static_cast<Eigen::Index>(s)) = equivalent_channel(channels[b], members);
        }
        const CMatrix w = build_precoder(cfg.precoder, h_eq, active, p);
        for (std::size_t s = 0; s < active.size(); ++s) {
            const int b = active[s];
            const FrameEntry& e = schedule.frames[f][b];
            const auto& members = parts[b].clusters[e.cluster];
            sinr.clear();
            for (int m : members) sinr.push_back(user_sinr(channels[b][m].coefficients, w, s, p));
            ClusterLinkResult r = cluster_link_result(sinr, sc.rate);
            r.beam = b;
            r.cluster = e.cluster;
            r.frame = static_cast<int>(f);
            r.reserve = e.reserve;
            for (int m : members) r.users.push_back(dep.per_beam[b][m].id);
            out.clusters.push_back(std::move(r));
        }
    }
    return out;
}

double quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CumulativeSummary cdf_summary(std::vector<double> samples, std::size_t points) {
    CumulativeSummary s;
    if (samples.empty() || points < 2) return s;
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 0; i < points; ++i) {
        const double p = static_cast<double>(i) / static_cast<double>(points - 1);
        s.probability.push_back(p);
        s.value.push_back(quantile(samples, p));
    }
    return s;
}

RateReport aggregate(std::span<const IterationResult> iterations, bool keep_detail) {
    if (iterations.empty()) throw ConfigError("aggregate needs at least one iteration");
    RateReport r;
    r.iterations = iterations.size();
    double sum = 0.0, sum_all = 0.0;
    std::size_t outages = 0, all = 0;
    std::vector<double> sigma_iter;
    for (const IterationResult& it : iterations) {
        double it_sum = 0.0;
        std::size_t it_count = 0;
        sigma_iter.clear();
        for (const ClusterLinkResult& c : it.clusters) {
            sum_all += c.rate;
            ++all;
            if (c.reserve) {
                ++r.reserve_clusters;
                continue;
            }
            it_sum += c.rate;
            ++it_count;
            if (c.outage) ++outages;
            r.serving_sinr_db.push_back(c.serving_sinr_db);
            const double sigma = loss_stddev_db(c);
            r.sigma_dgamma_db.push_back(sigma);
            sigma_iter.push_back(sigma);
            ++r.size_histogram[c.size()];
        }
        sum += it_sum;
        r.clusters += it_count;
        r.kmeans_nonconverged += it.kmeans_nonconverged;
        r.iteration_rates.push_back(it_count ? it_sum / static_cast<double>(it_count) : 0.0);
        std::sort(sigma_iter.begin(), sigma_iter.end());
        if (!sigma_iter.empty()) {
            r.iteration_sigma_quartiles.push_back(
                {quantile(sigma_iter, 0.25), quantile(sigma_iter, 0.5), quantile(sigma_iter, 0.75)});
        }
    }
    if (r.clusters > 0) {
        r.avg_rate = sum / static_cast<double>(r.clusters);
        r.outage_frac = static_cast<double>(outages) / static_cast<double>(r.clusters);
    }
    if (all > 0) r.avg_rate_with_reserve = sum_all / static_cast<double>(all);
    const std::size_t n = r.iteration_rates.size();
    if (n > 1) {
        double mean = 0.0;
        for (double x : r.iteration_rates) mean += x;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : r.iteration_rates) ss += (x - mean) * (x - mean);
        r.avg_rate_se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    if (r.kmeans_nonconverged > 0) {
        r.warnings.push_back(std::to_string(r.kmeans_nonconverged) + " k-means++ runs hit cluster.kmeans_max_iter");
    }
    if (keep_detail) r.detail.assign(iterations.begin(), iterations.end());
    return r;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::uint64_t iteration_seed(const SimConfig& config, const AxisIndex& axes, std::size_t iteration) {
    if (config.common_random_numbers) return derive_seed(config.seed, {iteration});
    return derive_seed(config.seed, {axes[0], axes[1], axes[2], axes[3], axes[4], axes[5], iteration});
}

RateReport simulate(const Scenario& sc, const AxisIndex& axes, int jobs, bool keep_detail) {
    const auto n = static_cast<std::size_t>(sc.config.iterations);
    std::vector<IterationResult> results(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        try {
            results[i] = run_iteration(sc, iteration_seed(sc.config, axes, i));
        } catch (const Error& e) {
            throw NumericalError("iteration " + std::to_string(i) + ": " + e.what());
        }
    });
    RateReport r = aggregate(results, keep_detail);
    r.warnings.insert(r.warnings.begin(), sc.warnings.begin(), sc.warnings.end());
    return r;
}

SweepAxes SweepAxes::single(const SimConfig& base) {
    SweepAxes a;
    a.algorithms = {base.algorithm};
    a.metrics = {base.metric};
    a.precoders = {base.precoder};
    a.rho = {base.density};
    a.psat = {base.power.psat_w};
    a.K = {base.cluster_size};
    return a;
}

std::string GridPoint::id() const {
    std::string s = std::string(to_string(config.algorithm)) + "_" + std::string(to_string(config.metric)) + "_" +
                    std::string(to_string(config.precoder)) + "_K" + std::to_string(config.cluster_size) + "_rho" +
                    detail::format_double(config.density) + "_psat" + detail::format_double(config.power.psat_w);
    for (char& c : s) {
        if (c == '+') c = 'p';
    }
    return s;
}

std::vector<GridPoint> expand_grid(const SimConfig& base, const SweepAxes& a) {
    const auto check = [](std::size_t n, const char* name) {
        if (n == 0) throw ConfigError(std::string("sweep axis '") + name + "' is empty");
    };
    check(a.algorithms.size(), "sweep.algorithm");
    check(a.metrics.size(), "sweep.metric");
    check(a.precoders.size(), "sweep.precoder");
    check(a.rho.size(), "sweep.rho");
    check(a.psat.size(), "sweep.psat");
    check(a.K.size(), "sweep.K");
    std::vector<GridPoint> grid;
    for (std::size_t i0 = 0; i0 < a.algorithms.size(); ++i0)
        for (std::size_t i1 = 0; i1 < a.metrics.size(); ++i1)
            for (std::size_t i2 = 0; i2 < a.precoders.size(); ++i2)
                for (std::size_t i3 = 0; i3 < a.rho.size(); ++i3)
                    for (std::size_t i4 = 0; i4 < a.psat.size(); ++i4)
                        for (std::size_t i5 = 0; i5 < a.K.size(); ++i5) {
                            GridPoint g;
                            g.index = grid.size();
                            g.axes = {i0, i1, i2, i3, i4, i5};
                            g.config = base;
                            g.config.algorithm = a.algorithms[i0];
                            g.config.metric = a.metrics[i1];
                            g.config.precoder = a.precoders[i2];
                            g.config.density = a.rho[i3];
                            g.config.power.psat_w = a.psat[i4];
                            g.config.cluster_size = a.K[i5];
                            grid.push_back(std::move(g));
                        }
    return grid;
}

std::vector<PointOutcome> sweep(const std::vector<GridPoint>& grid, const SweepOptions& options) {
    std::vector<PointOutcome> out;
    out.reserve(grid.size());
    for (const GridPoint& g : grid) {
        PointOutcome o;
        o.point = g;
        if (options.skip && options.skip(g)) {
            out.push_back(std::move(o));
            if (options.on_point) options.on_point(out.back());
            continue;
        }
        try {
            const Scenario sc = prepare_scenario(g.config);
            o.report = simulate(sc, g.axes, options.jobs, options.keep_detail);
        } catch (const Error& e) {
            o.error = e.what();
        }
        out.push_back(std::move(o));
        if (options.on_point) options.on_point(out.back());
    }
    return out;
}

} // namespace mbsat
