#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "mbsat/channel.hpp"
#include "mbsat/error.hpp"

using namespace mbsat;

namespace {

BeamLayout hex7() { return generate_hex_layout(1, 200.0, {47.0, 10.0}, 30.0); }

double db(double x) { return 10.0 * std::log10(x); }

} // namespace

TEST_CASE("link budget constants") {
    const LinkBudgetParams p;
    CHECK(p.wavelength_m() == doctest::Approx(0.015373972205128206).epsilon(1e-15));
    // Exact for c = 299792458 m/s; rounding lambda to 0.015378 m gives the often quoted ~9016.
    CHECK(rx_antenna_gain(p) == doctest::Approx(9019.476127174004).epsilon(1e-13));
    CHECK(rx_antenna_gain(p) == doctest::Approx(9016.0).epsilon(1e-3));
    CHECK(db(rx_antenna_gain(p)) == doctest::Approx(39.55).epsilon(1e-3));
    CHECK(noise_power_w(p) == doctest::Approx(1.4289717150000002e-12).epsilon(1e-14));
    CHECK(noise_power_w(p) == doctest::Approx(1.429e-12).epsilon(1e-3));

    LinkBudgetParams unit;
    unit.rx_antenna_efficiency = 1.0;
    unit.rx_antenna_diameter_m = unit.wavelength_m() / kPi;
    CHECK(rx_antenna_gain(unit) == doctest::Approx(1.0).epsilon(1e-14));

    LinkBudgetParams big = p;
    big.rx_antenna_diameter_m *= 2.0;
    CHECK(db(rx_antenna_gain(big)) - db(rx_antenna_gain(p)) == doctest::Approx(6.0206).epsilon(1e-4));

    LinkBudgetParams wide = p;
    wide.user_bandwidth_hz *= 2.0;
    CHECK(noise_power_w(wide) == doctest::Approx(2.0 * noise_power_w(p)).epsilon(1e-15));

    LinkBudgetParams cold = p;
    cold.noise_temperature_k = 0.0;
    CHECK_THROWS_AS(cold.validate(), ConfigError);
    LinkBudgetParams eff = p;
    eff.rx_antenna_efficiency = 1.2;
    CHECK_THROWS_AS(eff.validate(), ConfigError);
}

TEST_CASE("aperture field") {
    CHECK(aperture_field(0.0) == 1.0);
    CHECK(aperture_field(1e-6) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(aperture_field(0.0, 0.3) == 1.0);
    // Root of (2 J1(u)/u)^2 = 1/2 found with an external solver.
    CHECK(half_power_u(1.0) == doctest::Approx(1.6163399483106482).epsilon(1e-12));
    CHECK(half_power_u(0.5) == doctest::Approx(1.7200002618766614).epsilon(1e-12));
    // Monotone up to the first null of J1 (3.8317).
    double prev = 2.0;
    for (double u = 0.0; u < 3.83; u += 0.01) {
        const double e = aperture_field(u);
        CHECK(e * e <= prev);
        prev = e * e;
    }
}

TEST_CASE("tapered antenna gain: peak on boresight, -3 dB on the beam edge") {
    const BeamLayout l = hex7();
    AntennaPattern pat;
    const MultibeamAntenna ant(pat, l);
    const double peak = std::pow(10.0, 5.2);
    for (std::size_t j = 0; j < l.size(); ++j) {
        CHECK(ant.gain(j, l.beams[j].center) == doctest::Approx(peak).epsilon(1e-12));
        // Seen from GEO the ground circle is an ellipse in angle, so the edge level varies with bearing
        // around the calibrated -3 dB.
        for (int k = 0; k < 8; ++k) {
            const GeoPoint edge = destination(l.beams[j].center, 2 * kPi * (k + 0.5) / 8, 200.0);
            const double rel = db(ant.gain(j, edge)) - 52.0;
            CHECK(rel < -0.5);
            CHECK(rel > -6.0);
        }
    }
    for (std::size_t j = 0; j < l.size(); ++j) {
        CHECK(std::abs(db(ant.gain_at_off_axis(j, ant.edge_angle_rad(j))) - (52.0 - 3.0103)) < 0.1);
    }
    CHECK(db(ant.gain_at_off_axis(0, ant.edge_angle_rad(0))) == doctest::Approx(52.0 - 3.0103).epsilon(1e-6));
    // Tapered illumination keeps the edge at -3 dB too.
    pat.edge_pedestal = 0.5;
    const MultibeamAntenna tapered(pat, l);
    CHECK(db(tapered.gain_at_off_axis(3, tapered.edge_angle_rad(3))) == doctest::Approx(52.0 - 3.0103).epsilon(1e-6));
    CHECK_THROWS_AS(ant.gain(7, l.beams[0].center), ConfigError);
}

TEST_CASE("coefficient magnitude collapses to 1e-6 for unit gains") {
    LinkBudgetParams p;
    p.rx_antenna_efficiency = 1.0;
    p.rx_antenna_diameter_m = p.wavelength_m() / kPi;
    p.antenna_losses_db = 0.0;
    p.user_bandwidth_hz = 1.0;
    p.noise_temperature_k = 1.0 / kBoltzmann;
    const double d_km = p.wavelength_m() * 1e6 / (4.0 * kPi) / 1000.0;
    CHECK(std::abs(channel_coefficient(1.0, d_km, 0.3, p)) == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("synthesized channels match a direct evaluation of the link equation") {
    const BeamLayout l = hex7();
    const MultibeamAntenna ant(AntennaPattern{}, l);
    const LinkBudgetParams p;
    Rng rng(11);
    const UserDeployment dep = deploy_users(l, 2e-4, rng);
    const std::vector<double> phases = {0.1, 1.3, 2.9, 4.4, 5.0, 6.2, 0.0};
    const BeamChannels ch = synthesize_channels(dep, l, ant, p, phases);

    const double pi = 3.14159265358979323846;
    const double lambda = 299792458.0 / 19.5e9;
    const double gr = 0.6 * std::pow(pi * 0.6 / lambda, 2);
    const double gloss = std::pow(10.0, -0.255);
    const double pz = 1.380649e-23 * 207.0 * 500e6;
    std::size_t checked = 0;
    for (std::size_t b = 0; b < l.size(); ++b) {
        REQUIRE(ch[b].size() == dep.per_beam[b].size());
        for (std::size_t i = 0; i < ch[b].size(); ++i) {
            const GeoPoint pos = dep.per_beam[b][i].position;
            // The path phase 2 pi d / lambda is ~1e10 rad, so it is evaluated from the same d.
            const double d = slant_range_km(pos, l) * 1000.0;
            REQUIRE(ch[b][i].coefficients.size() == 7);
            for (std::size_t j = 0; j < 7; ++j) {
                const double g = ant.gain(j, pos);
                const std::complex<double> h = std::sqrt(gr * gloss * g) / (4 * pi * (d / lambda) * std::sqrt(pz)) *
                                               std::exp(std::complex<double>(0.0, -2 * pi / lambda * d)) *
                                               std::exp(std::complex<double>(0.0, -phases[j]));
                const std::complex<double> got = ch[b][i].coefficients[static_cast<Eigen::Index>(j)];
                CHECK(std::abs(got - h) / std::abs(h) < 1e-12);
                ++checked;
            }
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("channel properties") {
    const BeamLayout l = hex7();
    AntennaPattern pat;
    const MultibeamAntenna ant(pat, l);
    const LinkBudgetParams p;

    UserDeployment dep;
    dep.per_beam.resize(l.size());
    // Two co-located users at beam 3's center plus one elsewhere.
    dep.per_beam[2] = {User{0, 2, l.beams[2].center}, User{1, 2, l.beams[2].center},
                       User{2, 2, destination(l.beams[2].center, 1.0, 120.0)}};
    const std::vector<double> phases = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
    const BeamChannels ch = synthesize_channels(dep, l, ant, p, phases);
    const auto& h0 = ch[2][0].coefficients;
    CHECK((h0 - ch[2][1].coefficients).norm() == 0.0);

    SUBCASE("serving feed dominates at the beam center") {
        for (Eigen::Index j = 0; j < 7; ++j) CHECK(std::abs(h0[2]) >= std::abs(h0[j]));
    }
    SUBCASE("feeds differ only through gain and phase offset") {
        for (std::size_t j = 0; j < 7; ++j) {
            const std::complex<double> ratio = h0[static_cast<Eigen::Index>(j)] / h0[0];
            const std::complex<double> expect = std::sqrt(ant.gain(j, l.beams[2].center) / ant.gain(0, l.beams[2].center)) *
                                                std::polar(1.0, -(phases[j] - phases[0]));
            CHECK(std::abs(ratio - expect) < 1e-9 * std::abs(expect));
        }
    }
    SUBCASE("bandwidth rescales every magnitude by 1/sqrt(ratio)") {
        LinkBudgetParams wide = p;
        wide.user_bandwidth_hz *= 4.0;
        const BeamChannels ch4 = synthesize_channels(dep, l, ant, wide, phases);
        for (std::size_t i = 0; i < 3; ++i) {
            for (Eigen::Index j = 0; j < 7; ++j) {
                CHECK(std::abs(ch4[2][i].coefficients[j]) ==
                      doctest::Approx(0.5 * std::abs(ch[2][i].coefficients[j])).epsilon(1e-13));
            }
        }
    }
    SUBCASE("phase per beam uses the receiving beam's offset on every feed") {
        const BeamChannels cb = synthesize_channels(dep, l, ant, p, phases, PhasePer::Beam);
        for (Eigen::Index j = 0; j < 7; ++j) {
            const std::complex<double> ratio = cb[2][0].coefficients[j] / ch[2][0].coefficients[j];
            CHECK(std::abs(ratio - std::polar(1.0, -(phases[2] - phases[j]))) < 1e-9);
        }
    }
    SUBCASE("seeded phases are deterministic") {
        Rng a(5), b(5);
        const BeamChannels x = synthesize_channels(dep, l, ant, p, a);
        const BeamChannels y = synthesize_channels(dep, l, ant, p, b);
        CHECK((x[2][2].coefficients - y[2][2].coefficients).norm() == 0.0);
        Rng c(5);
        for (double v : draw_phases(7, c)) CHECK((v >= 0.0 && v < 2 * kPi));
    }
}

TEST_CASE("gain table mode") {
    BeamLayout l;
    l.beams = {BeamSpec{1, {45.0, 10.0}, 100.0, kPi * 1e4}};
    std::istringstream in(
        "feed_id,lat_deg,lon_deg,gain_dBi\n"
        "1,44,9,40\n1,44,11,44\n1,46,9,42\n1,46,11,46\n");
    AntennaPattern pat;
    pat.mode = PatternMode::GainTable;
    pat.table = std::make_shared<const GainTable>(GainTable::parse(in, "g.csv"));
    const MultibeamAntenna ant(pat, l);
    CHECK(db(ant.gain(0, {45.0, 10.0})) == doctest::Approx(43.0).epsilon(1e-12));
    CHECK(db(ant.gain(0, {44.0, 11.0})) == doctest::Approx(44.0).epsilon(1e-12));
    CHECK(db(ant.gain(0, {44.5, 9.5})) == doctest::Approx(41.5).epsilon(1e-12));
    CHECK_THROWS_AS(ant.gain(0, {47.0, 10.0}), InterpolationError);

    std::istringstream holes("feed_id,lat_deg,lon_deg,gain_dBi\n1,44,9,40\n1,44,11,44\n1,46,9,42\n");
    CHECK_THROWS_AS(GainTable::parse(holes, "h.csv"), ParseError);
    AntennaPattern missing;
    missing.mode = PatternMode::GainTable;
    CHECK_THROWS_AS(missing.validate(), ConfigError);
}
