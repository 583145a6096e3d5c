// Acceptance criteria 1-13. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbsat/clustering.hpp"
#include "mbsat/link.hpp"
#include "mbsat/montecarlo.hpp"
#include "mbsat/precoding.hpp"
#include "oracles.hpp"

using namespace mbsat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Standard error of the mean of a paired difference.
double paired_se(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 2) return 0.0;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double m = mean(d);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

double sample_se(const std::vector<double>& v) {
    const std::vector<double> zero(v.size(), 0.0);
    return paired_se(v, zero);
}

SimConfig desk(double rho, int k, Algorithm alg, int iterations) {
    SimConfig c;
    c.density = rho;
    c.cluster_size = k;
    c.algorithm = alg;
    c.metric = Metric::Channel;
    c.precoder = PrecoderType::PAC;
    c.iterations = iterations;
    c.seed = 2024;
    return c;
}

RateReport run(const SimConfig& c) {
    return simulate(prepare_scenario(c), AxisIndex{}, 1);
}

/// Random per-beam instances: users of the central beam, with real channel rows.
struct InstanceFactory {
    BeamLayout layout = generate_hex_layout(1, 200.0, {47.0, 10.0}, 30.0);
    MultibeamAntenna antenna{AntennaPattern{}, layout};
    LinkBudgetParams link;

    FeatureMatrix make(std::size_t n, Metric metric, Rng& rng) const {
        UserDeployment dep;
        dep.per_beam.resize(layout.size());
        const auto pts = sample_in_beam(layout.beams[0], n, rng);
        for (std::size_t i = 0; i < n; ++i) dep.per_beam[0].push_back(User{static_cast<int>(i), 0, pts[i]});
        const BeamChannels ch = synthesize_channels(dep, layout, antenna, link, rng);
        return feature_vectors(dep.per_beam[0], layout.beams[0], ch[0], metric);
    }
};

Outcome c1_partition_validity() {
    InstanceFactory f;
    Rng rng(101);
    std::size_t violations = 0, checked = 0;
    std::string first;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.index(200);
        const int k = static_cast<int>(1 + rng.index(std::min<std::size_t>(12, n)));
        const Metric m = t % 2 ? Metric::Channel : Metric::Euclidean2d;
        const FeatureMatrix x = f.make(n, m, rng);
        const std::array<Partition, 3> parts = {cluster_random(x, k, rng), cluster_maxdist(x, k),
                                                cluster_kmeanspp(x, std::max<std::size_t>(1, clusters_for(n, k)), rng)};
        for (const auto& p : parts) {
            ++checked;
            const std::string v = partition_violation(p, n);
            if (!v.empty()) {
                if (first.empty()) first = v;
                ++violations;
            }
        }
    }
    return {violations == 0, fmt("%zu partitions, %zu violations%s%s", checked, violations,
                                 first.empty() ? "" : "; first: ", first.c_str())};
}

FeatureMatrix line(std::initializer_list<double> v) {
    FeatureMatrix f(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) f(i++, 0) = x;
    return f;
}

Outcome c2_algorithm_oracles() {
    const FeatureMatrix f = line({0, 1, 8, 10});
    // g = 4.75, farthest is 10, its neighbour 8; then g = 0.5, tie between 0 and 1 goes to 0.
    const std::vector<std::vector<int>> maxdist_expected{{3, 2}, {0, 1}};
    const std::vector<std::vector<int>> random_expected{{0, 1}, {2, 3}};
    const ReferencePicker first = [](std::span<const int>) { return std::size_t{0}; };
    const bool md = cluster_maxdist(f, 2).clusters == maxdist_expected;
    const bool rd = cluster_random(f, 2, first).clusters == random_expected;
    const auto rem = cluster_random(line({0, 1, 2, 3, 4}), 2, first).clusters;
    const bool sizes = rem.size() == 3 && rem[0].size() == 2 && rem[1].size() == 2 && rem[2].size() == 1;
    const auto ub = cluster_upperbound(line({0, 1, 5, 9}), 2, std::size_t{2}).clusters;
    const bool ubok = ub == std::vector<std::vector<int>>{{2, 1}};
    return {md && rd && sizes && ubok,
            fmt("maxdist %s, random %s, remainder %s, upperbound %s", md ? "ok" : "mismatch", rd ? "ok" : "mismatch",
                sizes ? "ok" : "mismatch", ubok ? "ok" : "mismatch")};
}

Outcome c3_precoder_numerics() {
    Rng rng(303);
    double worst_res = 0, worst_pac = 0, worst_spc = 0, worst_zf = 0;
    for (int t = 0; t < 100; ++t) {
        for (Eigen::Index n : {4, 8}) {
            const CMatrix h = oracle::random_complex(n, n, rng);
            Eigen::VectorXd alpha(n);
            for (Eigen::Index i = 0; i < n; ++i) alpha(i) = rng.uniform(0.01, 10.0);
            const CMatrix w = mmse_precoder(h, alpha);
            const CMatrix hh = h.adjoint();
            const CMatrix lhs = (hh * h + CMatrix(alpha.cast<std::complex<double>>().asDiagonal())) * w - hh;
            worst_res = std::max(worst_res, lhs.norm() / hh.norm());

            const CMatrix pac = normalize_pac(w);
            for (Eigen::Index r = 0; r < pac.rows(); ++r)
                worst_pac = std::max(worst_pac, std::abs(pac.row(r).norm() - 1.0));
            const CMatrix spc = normalize_spc(w);
            const double tr = (spc.adjoint() * spc).trace().real();
            worst_spc = std::max(worst_spc, std::abs(tr - static_cast<double>(n)) / static_cast<double>(n));

            const CMatrix zf = h * mmse_precoder(h, 1e-12);
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index c = 0; c < n; ++c)
                    if (r != c) worst_zf = std::max(worst_zf, std::abs(zf(r, c)));
        }
    }
    const bool ok = worst_res < 1e-10 && worst_pac <= 1e-9 && worst_spc <= 1e-9 && worst_zf < 1e-6;
    return {ok, fmt("max residual %.2e, |row norm-1| %.2e, trace rel err %.2e, ZF off-diag %.2e", worst_res,
                    worst_pac, worst_spc, worst_zf)};
}

Outcome c4_lloyd_monotonicity() {
    InstanceFactory f;
    Rng rng(404);
    std::size_t violations = 0, steps = 0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 2 + rng.index(199);
        const FeatureMatrix x = f.make(n, t % 2 ? Metric::Channel : Metric::Euclidean2d, rng);
        const Partition p = cluster_kmeanspp(x, 1 + rng.index(std::max<std::size_t>(1, n / 2)), rng);
        for (std::size_t i = 1; i < p.sse_history.size(); ++i) {
            ++steps;
            // Relative slack of 1e-12 absorbs summation-order rounding only.
            if (p.sse_history[i] > p.sse_history[i - 1] * (1 + 1e-12)) ++violations;
        }
    }
    return {violations == 0, fmt("500 runs, %zu Lloyd steps, %zu increases", steps, violations)};
}

Outcome c5_min_variance() {
    InstanceFactory f;
    Rng rng(505);
    int wins = 0;
    const int total = 200;
    for (int t = 0; t < total; ++t) {
        const std::size_t n = 20 + rng.index(181);
        const int k = static_cast<int>(2 + rng.index(11));
        const FeatureMatrix x = f.make(n, t % 2 ? Metric::Channel : Metric::Euclidean2d, rng);
        const Partition md = cluster_maxdist(x, k);
        const Partition km = cluster_kmeanspp(x, md.size(), rng);
        if (sse_cost(km, x) <= sse_cost(md, x)) ++wins;
    }
    const double frac = static_cast<double>(wins) / total;
    return {frac >= 0.9, fmt("kmeans++ SSE <= maxdist SSE in %d/%d (%.1f%%, need >= 90%%)", wins, total, 100 * frac)};
}

Outcome c6_rate_ordering() {
    const int iters = 100;
    const std::array<int, 3> ks{2, 6, 12};
    const std::array<Algorithm, 3> algs{Algorithm::UpperBound, Algorithm::MaxDist, Algorithm::Random};
    RateReport r[3][3];
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t k = 0; k < 3; ++k) r[a][k] = run(desk(1.25e-3, ks[k], algs[a], iters));

    bool ok = true;
    std::ostringstream os;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t a = 0; a + 1 < 3; ++a) {
            const double se = paired_se(r[a][k].iteration_rates, r[a + 1][k].iteration_rates);
            const bool pass = r[a][k].avg_rate >= r[a + 1][k].avg_rate - se;
            ok = ok && pass;
            if (!pass)
                os << fmt("K=%d %s %.4f < %s %.4f (se %.4f); ", ks[k], std::string(to_string(algs[a])).c_str(),
                          r[a][k].avg_rate, std::string(to_string(algs[a + 1])).c_str(), r[a + 1][k].avg_rate, se);
        }
    }
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t k = 0; k + 1 < 3; ++k) {
            const double se = paired_se(r[a][k].iteration_rates, r[a][k + 1].iteration_rates);
            const bool pass = r[a][k].avg_rate >= r[a][k + 1].avg_rate - se;
            ok = ok && pass;
            if (!pass)
                os << fmt("%s K=%d %.4f < K=%d %.4f; ", std::string(to_string(algs[a])).c_str(), ks[k],
                          r[a][k].avg_rate, ks[k + 1], r[a][k + 1].avg_rate);
        }
    }
    std::ostringstream table;
    for (std::size_t a = 0; a < 3; ++a) {
        table << to_string(algs[a]) << "[";
        for (std::size_t k = 0; k < 3; ++k) table << fmt(k ? " %.3f" : "%.3f", r[a][k].avg_rate);
        table << "] ";
    }
    return {ok, fmt("%d iterations, K=2/6/12 %s%s", iters, table.str().c_str(), os.str().c_str())};
}

Outcome c7_density_trend() {
    const int iters = 50;
    const RateReport lo = run(desk(1.25e-3, 12, Algorithm::MaxDist, iters));
    const RateReport hi = run(desk(1e-2, 12, Algorithm::MaxDist, iters));
    // Different densities are different drops: independent samples.
    const double se = std::hypot(sample_se(lo.iteration_rates), sample_se(hi.iteration_rates));
    return {hi.avg_rate >= lo.avg_rate - se,
            fmt("maxdist K=12: rate(1e-2) %.4f vs rate(1.25e-3) %.4f, se %.4f", hi.avg_rate, lo.avg_rate, se)};
}

Outcome c8_unicast_degeneracy() {
    std::vector<double> rates;
    for (auto a : {Algorithm::UpperBound, Algorithm::Random, Algorithm::MaxDist, Algorithm::KMeansPP})
        rates.push_back(run(desk(1.25e-3, 1, a, 20)).avg_rate);
    const bool same = std::all_of(rates.begin(), rates.end(), [&](double v) { return v == rates[0]; });
    return {same, fmt("rates %.17g %.17g %.17g %.17g", rates[0], rates[1], rates[2], rates[3])};
}

Outcome c9_zero_loss() {
    std::size_t clusters = 0, bad = 0;
    for (auto a : {Algorithm::Random, Algorithm::MaxDist, Algorithm::KMeansPP}) {
        const SimConfig c = desk(1.25e-3, 4, a, 1);
        const Scenario sc = prepare_scenario(c);
        Rng rng(909);
        UserDeployment dep = deploy_users(sc.layout, c.density, rng);
        for (std::size_t b = 0; b < dep.per_beam.size(); ++b)
            for (auto& u : dep.per_beam[b]) u.position = sc.layout.beams[b].center;
        const BeamChannels ch = synthesize_channels(dep, sc.layout, *sc.antenna, c.link, rng);
        const IterationResult it = evaluate_drop(sc, dep, ch, 99);
        for (const auto& r : it.clusters) {
            ++clusters;
            bool ok = true;
            for (std::size_t i = 0; i < r.size(); ++i) {
                ok = ok && r.loss_db[i] == 0.0 && r.member_sinr_db[i] == r.serving_sinr_db;
                ok = ok && r.rate == sc.rate(from_db(r.member_sinr_db[i]));
            }
            ok = ok && loss_stddev_db(r) == 0.0;
            if (!ok) ++bad;
        }
    }
    return {clusters > 0 && bad == 0, fmt("%zu clusters of co-located users, %zu with loss", clusters, bad)};
}

std::size_t max_cluster_size(const RateReport& r) {
    return r.size_histogram.empty() ? 0 : r.size_histogram.rbegin()->first;
}

Outcome c10_size_spread() {
    SimConfig c = desk(1e-2, 2, Algorithm::KMeansPP, 20);
    const std::size_t chan = max_cluster_size(run(c));
    c.metric = Metric::Euclidean2d;
    const std::size_t eucl = max_cluster_size(run(c));
    return {chan >= eucl, fmt("20 iterations: max size channel %zu, euclidean %zu", chan, eucl)};
}

Outcome c11_sigma_ordering() {
    const int iters = 50;
    const RateReport km = run(desk(2.5e-3, 6, Algorithm::KMeansPP, iters));
    const std::array<std::pair<const char*, RateReport>, 2> others{
        std::pair{"maxdist", run(desk(2.5e-3, 6, Algorithm::MaxDist, iters))},
        std::pair{"random", run(desk(2.5e-3, 6, Algorithm::Random, iters))}};
    auto quartiles = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return std::array<double, 3>{quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
    };
    auto column = [](const RateReport& r, std::size_t q) {
        std::vector<double> v;
        for (const auto& a : r.iteration_sigma_quartiles) v.push_back(a[q]);
        return v;
    };
    const auto qk = quartiles(km.sigma_dgamma_db);
    bool ok = true;
    std::ostringstream os;
    os << fmt("kmeans++ [%.3f %.3f %.3f]", qk[0], qk[1], qk[2]);
    for (const auto& [name, rep] : others) {
        const auto qo = quartiles(rep.sigma_dgamma_db);
        os << fmt(" %s [%.3f %.3f %.3f]", name, qo[0], qo[1], qo[2]);
        for (std::size_t q = 0; q < 3; ++q) {
            // 1 SE of the quartile difference, from paired per-iteration quartiles.
            const double se = paired_se(column(km, q), column(rep, q));
            if (qk[q] > qo[q] + se) {
                ok = false;
                os << fmt(" (Q%zu above by %.3f, se %.3f)", q + 1, qk[q] - qo[q], se);
            }
        }
    }
    return {ok, os.str()};
}

double fitted_slope(const std::vector<double>& n, const std::vector<double>& t) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n.size(); ++i) {
        x.push_back(std::log(n[i]));
        y.push_back(std::log(t[i]));
    }
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

double best_time(const std::function<void()>& fn, int repeats) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

Outcome c12_complexity() {
    InstanceFactory f;
    const std::vector<double> sizes{100, 200, 400, 800};
    const int k = 4;
    std::vector<double> t_rand, t_md, t_km;
    // Summed best-of-5 times over independent drops, so that the Lloyd iteration count of a
    // single instance does not dominate one size.
    for (double nd : sizes) {
        const auto n = static_cast<std::size_t>(nd);
        double tr = 0, tm = 0, tk = 0;
        for (int inst = 0; inst < 8; ++inst) {
            Rng data(1200 + 31 * n + static_cast<std::size_t>(inst));
            const FeatureMatrix x = f.make(n, Metric::Euclidean2d, data);
            tr += best_time([&] { Rng r(1); (void)cluster_random(x, k, r); }, 5);
            tm += best_time([&] { (void)cluster_maxdist(x, k); }, 5);
            tk += best_time([&] { Rng r(1); (void)cluster_kmeanspp(x, clusters_for(n, k), r); }, 5);
        }
        t_rand.push_back(tr);
        t_md.push_back(tm);
        t_km.push_back(tk);
    }
    const double s_rand = fitted_slope(sizes, t_rand);
    const double s_md = fitted_slope(sizes, t_md);
    const double s_km = fitted_slope(sizes, t_km);
    const bool ok = std::abs(s_rand - 2.0) <= 0.4 && std::abs(s_md - 2.0) <= 0.4 && s_km < 1.5;
    return {ok, fmt("log-log slopes: random %.2f, maxdist %.2f (need 2.0 +- 0.4), kmeans++ %.2f (need < 1.5)",
                    s_rand, s_md, s_km)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome c13_reproducibility() {
    const auto base = std::filesystem::temp_directory_path() / "mbsat_acceptance_repro";
    std::filesystem::remove_all(base);
    std::string csv[2];
    const int jobs[2] = {1, 8};
    for (int i = 0; i < 2; ++i) {
        const auto out = base / ("jobs" + std::to_string(jobs[i]));
        const std::string cmd = std::string("\"") + MBSAT_SIM_EXE + "\" sweep --seed 77 --jobs " +
                                std::to_string(jobs[i]) + " --out \"" + out.string() +
                                "\" --set sim.iterations=6 --set sweep.algorithm=random,maxdist,kmeanspp"
                                " --set sweep.K=2,6 --set sweep.metric=channel,euclidean"
                                " --set sweep.rho=0.00125,0.0025 > /dev/null";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) return {false, fmt("sweep with --jobs %d exited with %d", jobs[i], rc)};
        csv[i] = slurp(out / "summary.csv");
    }
    const std::size_t lines = static_cast<std::size_t>(std::count(csv[0].begin(), csv[0].end(), '\n'));
    const bool ok = !csv[0].empty() && csv[0] == csv[1];
    std::filesystem::remove_all(base);
    return {ok, fmt("summary.csv (%zu lines) %s between --jobs 1 and --jobs 8", lines,
                    ok ? "byte-identical" : "differs")};
}

} // namespace

int main(int argc, char** argv) {
    // Optional arguments: criterion numbers to run (default: all).
    std::vector<bool> wanted(14, argc < 2);
    for (int a = 1; a < argc; ++a) {
        const int c = std::atoi(argv[a]);
        if (c >= 1 && c <= 13) wanted[static_cast<std::size_t>(c)] = true;
    }
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"partition validity", c1_partition_validity},
        {"algorithm hand traces", c2_algorithm_oracles},
        {"precoder numerics", c3_precoder_numerics},
        {"Lloyd monotonicity", c4_lloyd_monotonicity},
        {"minimum-variance dominance", c5_min_variance},
        {"rate ordering trend", c6_rate_ordering},
        {"density trend", c7_density_trend},
        {"unicast degeneracy", c8_unicast_degeneracy},
        {"zero-loss degeneracy", c9_zero_loss},
        {"cluster-size spread", c10_size_spread},
        {"sigma_dgamma ordering", c11_sigma_ordering},
        {"complexity benchmark", c12_complexity},
        {"reproducibility", c13_reproducibility},
    };
    int failures = 0;
    std::size_t ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!wanted[i + 1]) continue;
        ++ran;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
