#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mbsat/error.hpp"
#include "mbsat/geometry.hpp"

using namespace mbsat;

namespace {
BeamLayout layout_at(double sat_lon) {
    BeamLayout l;
    l.satellite_lon_deg = sat_lon;
    return l;
}
} // namespace

TEST_CASE("slant range: nadir and off-nadir points") {
    const BeamLayout l = layout_at(30.0);
    CHECK(slant_range_km({0.0, 30.0}, l) == doctest::Approx(35793.0).epsilon(1e-12));
    // Law-of-cosines values computed outside this code base.
    CHECK(slant_range_km({50.0, 30.0}, l) == doctest::Approx(38380.36637520807).epsilon(1e-12));
    CHECK(slant_range_km({45.0, 10.0}, l) == doctest::Approx(38228.3576237268).epsilon(1e-12));
    CHECK(slant_range_km({12.5, -3.0}, l) == slant_range_km({12.5, -3.0}, l));
}

TEST_CASE("hex layout beam count is 1 + 3n(n+1)") {
    for (int n = 0; n <= 6; ++n) {
        const BeamLayout l = generate_hex_layout(n, 150.0, {45.0, 10.0}, 30.0);
        CHECK(l.size() == static_cast<std::size_t>(1 + 3 * n * (n + 1)));
    }
    CHECK(generate_hex_layout(4, 150.0, {45.0, 10.0}, 30.0).size() == 61);
}

TEST_CASE("hex layout geometry") {
    const GeoPoint c{47.0, 10.0};
    const BeamLayout l = generate_hex_layout(1, 200.0, c, 30.0);
    REQUIRE(l.size() == 7);
    CHECK(l.beams[0].center.lat_deg == doctest::Approx(c.lat_deg));
    CHECK(l.beams[0].center.lon_deg == doctest::Approx(c.lon_deg));
    for (std::size_t b = 0; b < l.size(); ++b) {
        CHECK(l.beams[b].id == static_cast<int>(b) + 1);
        CHECK(l.beams[b].area_km2 == doctest::Approx(kPi * 200.0 * 200.0));
    }
    for (std::size_t b = 1; b < l.size(); ++b) {
        const PlaneXY xy = to_tangent_plane(c, l.beams[b].center);
        CHECK(std::hypot(xy.east_km, xy.north_km) == doctest::Approx(std::sqrt(3.0) * 200.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(generate_hex_layout(1, 200.0, {0.0, -150.0}, 30.0), GeometryError);
    CHECK_THROWS_AS(generate_hex_layout(-1, 200.0, c, 30.0), ConfigError);
}

TEST_CASE("tangent plane round trip") {
    const GeoPoint o{47.0, 10.0};
    for (double e : {-300.0, 0.0, 120.0}) {
        for (double n : {-250.0, 0.0, 80.0}) {
            const GeoPoint p = from_tangent_plane(o, {e, n});
            const PlaneXY back = to_tangent_plane(o, p);
            CHECK(back.east_km == doctest::Approx(e).epsilon(1e-9).scale(1.0));
            CHECK(back.north_km == doctest::Approx(n).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("beam layout CSV") {
    SUBCASE("valid two-row file") {
        std::istringstream in("id,lat_deg,lon_deg,radius_km\n2,45.0,12.5,150\n1,46.0,10.0,150\n");
        const BeamLayout l = parse_beam_layout(in, "two.csv", 30.0);
        REQUIRE(l.size() == 2);
        CHECK(l.beams[0].id == 1);
        CHECK(l.beams[1].center.lon_deg == 12.5);
    }
    SUBCASE("duplicate id names the line") {
        std::istringstream in("id,lat_deg,lon_deg,radius_km\n1,45,10,150\n1,46,11,150\n");
        try {
            parse_beam_layout(in, "dup.csv", 30.0);
            FAIL("no error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("malformed row") {
        std::istringstream in("id,lat_deg,lon_deg,radius_km\n1,45,ten,150\n");
        CHECK_THROWS_AS(parse_beam_layout(in, "bad.csv", 30.0), ParseError);
    }
    SUBCASE("shipped example") {
        const BeamLayout l = load_beam_layout(std::string(MBSAT_DATA_DIR) + "/hex7_layout.csv", 30.0);
        CHECK(l.size() == 7);
    }
}

TEST_CASE("user counts follow rho * A") {
    CHECK(users_in_beam(80000.0, 1.25e-3, Rounding::Round) == 100);
    CHECK(users_in_beam(1000.0, 2.5e-3, Rounding::Round) == 3);
    CHECK(users_in_beam(1000.0, 2.5e-3, Rounding::Floor) == 2);
    for (double rho : {1.25e-3, 2.5e-3, 1e-2}) {
        const BeamLayout l = generate_hex_layout(1, 200.0, {47.0, 10.0}, 30.0);
        Rng rng(3);
        const UserDeployment d = deploy_users(l, rho, rng);
        for (std::size_t b = 0; b < l.size(); ++b) {
            CHECK(d.per_beam[b].size() == users_in_beam(l.beams[b].area_km2, rho, Rounding::Round));
        }
    }
}

TEST_CASE("deployment: determinism, containment, empty beams") {
    const BeamLayout l = generate_hex_layout(1, 200.0, {47.0, 10.0}, 30.0);
    Rng a(42), b(42);
    const UserDeployment da = deploy_users(l, 2.5e-3, a);
    const UserDeployment db = deploy_users(l, 2.5e-3, b);
    REQUIRE(da.total() == db.total());
    for (std::size_t k = 0; k < l.size(); ++k) {
        for (std::size_t i = 0; i < da.per_beam[k].size(); ++i) {
            CHECK(da.per_beam[k][i].position == db.per_beam[k][i].position);
            CHECK(great_circle_km(da.per_beam[k][i].position, l.beams[k].center) <= 200.0 * (1 + 1e-9));
            CHECK(da.per_beam[k][i].beam == static_cast<int>(k));
        }
    }
    Rng c(1);
    const UserDeployment sparse = deploy_users(l, 1e-6, c);
    CHECK(sparse.total() == 0);
    CHECK(sparse.warnings.size() == l.size());
    Rng d(1);
    CHECK_THROWS_AS(deploy_users(l, 0.0, d), ConfigError);
}

TEST_CASE("uniform disk: mean radius is 2/3 of the beam radius") {
    BeamSpec beam{1, {47.0, 10.0}, 250.0, kPi * 250.0 * 250.0};
    Rng rng(7);
    const auto pts = sample_in_beam(beam, 20000, rng);
    double sum = 0.0;
    for (const auto& p : pts) sum += great_circle_km(p, beam.center);
    CHECK(sum / pts.size() == doctest::Approx(2.0 / 3.0 * 250.0).epsilon(0.02));
}
