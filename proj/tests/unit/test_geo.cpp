#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "cef/geo.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cef;
using namespace cef::geo;

namespace {

Event at(GeoPoint p, double speed = 5.0, double heading = 0.0, std::string partition = "v") {
  Event e(0, std::move(partition));
  e.set("lon", p.lon);
  e.set("lat", p.lat);
  e.set("speed", speed);
  e.set("heading", heading);
  return e;
}

// Point `km` north of p along the meridian.
GeoPoint north(GeoPoint p, double km) { return {p.lon, p.lat + km / (kEarthRadiusKm * std::numbers::pi / 180.0)}; }

}  // namespace

TEST_CASE("haversine desk checks") {
  CHECK(distanceKm({3.0, 4.0}, {3.0, 4.0}) == 0.0);
  CHECK(std::fabs(distanceKm({0, 0}, {0, 1}) - 111.195) <= 0.001);
  CHECK(std::fabs(distanceKm({0, 0}, {180, 0}) - std::numbers::pi * kEarthRadiusKm) <= 0.01);
  CHECK(std::fabs(distanceKm({10, 30}, {-170, -30}) - std::numbers::pi * kEarthRadiusKm) <= 0.01);
}

TEST_CASE("distance: symmetry and triangle inequality") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint a{lon(rng), lat(rng)}, b{lon(rng), lat(rng)}, c{lon(rng), lat(rng)};
    CHECK(std::fabs(distanceKm(a, b) - distanceKm(b, a)) <= 1e-6);
    CHECK(distanceKm(a, c) <= distanceKm(a, b) + distanceKm(b, c) + 1e-6);
  }
}

TEST_CASE("bearing and angular difference") {
  CHECK(bearingDeg({0, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(bearingDeg({0, 0}, {1, 0}) == doctest::Approx(90.0));
  CHECK(bearingDeg({0, 1}, {0, 0}) == doctest::Approx(180.0));
  CHECK(bearingDeg({1, 0}, {0, 0}) == doctest::Approx(270.0));
  CHECK(angularDifferenceDeg(350, 10) == doctest::Approx(20.0));
  CHECK(angularDifferenceDeg(0, 180) == doctest::Approx(180.0));
}

TEST_CASE("point in polygon agrees with the winding number on random points") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int poly = 0; poly < 10; ++poly) {
    // Convex polygon: sorted angles around a centre.
    const GeoPoint c{-5 + u(rng), 48 + u(rng)};
    std::vector<double> angles(3 + rng() % 6);
    for (auto& a : angles) a = 2 * std::numbers::pi * u(rng);
    std::sort(angles.begin(), angles.end());
    Polygon pg;
    for (double a : angles) pg.ring.push_back({c.lon + 0.5 * std::cos(a), c.lat + 0.5 * std::sin(a)});
    for (int i = 0; i < 100; ++i) {
      const GeoPoint p{c.lon - 0.6 + 1.2 * u(rng), c.lat - 0.6 + 1.2 * u(rng)};
      REQUIRE(pointInPolygon(p, pg) == (oracle::windingNumber(p, pg.ring) != 0));
    }
  }
}

TEST_CASE("point in a concave polygon") {
  // U shape opening north.
  Polygon u{{{0, 0}, {3, 0}, {3, 3}, {2, 3}, {2, 1}, {1, 1}, {1, 3}, {0, 3}}};
  CHECK(pointInPolygon({0.5, 2}, u));
  CHECK(pointInPolygon({2.5, 2}, u));
  CHECK_FALSE(pointInPolygon({1.5, 2}, u));
  CHECK(pointInPolygon({1.5, 0.5}, u));
  CHECK_FALSE(pointInPolygon({4, 1}, u));
}

TEST_CASE("regions and background knowledge") {
  GeoContext ctx;
  parseRegions(R"([
    {"name": "Port", "point": [-4.49, 48.38]},
    {"name": "Harbour", "circle": {"center": [-4.49, 48.38], "radius_km": 5}},
    {"name": "Box", "polygon": [[-5, 48], [-4, 48], [-4, 49], [-5, 49]]}
  ])",
               ctx);
  CHECK(ctx.points.count("Port"));
  CHECK(ctx.regions.count("Harbour"));
  CHECK(ctx.regions.at("Box").contains({-4.5, 48.5}));
  CHECK_FALSE(ctx.regions.at("Box").contains({-3.5, 48.5}));
  CHECK(ctx.regions.at("Box").anchor().lon == doctest::Approx(-4.5));
  CHECK_THROWS_AS(parseRegions("[{\"name\": \"bad\", \"polygon\": [[0,0],[1,1]]}]", ctx), DataError);
  CHECK_THROWS_AS(parseRegions("not json", ctx), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "cef_geo_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "vessels.txt");
    f << "# fishing\nv1\n\n  v2  \n";
  }
  loadFishingVessels((dir / "vessels.txt").string(), ctx);
  CHECK(ctx.fishingVessels == std::set<std::string, std::less<>>{"v1", "v2"});
  CHECK_THROWS_AS(loadFishingVessels((dir / "missing.txt").string(), ctx), DataError);
}

TEST_CASE("built-in predicates") {
  GeoContext ctx;
  const GeoPoint port{-4.49, 48.38};
  ctx.points["PortCoords"] = port;
  ctx.regions["Harbour"] = {"Harbour", Circle{port, 5.0}};
  ctx.regions["Box"] = {"Box", Polygon{{{-5, 48}, {-4, 48}, {-4, 49}, {-5, 49}}}};
  ctx.fishingVessels = {"trawler"};
  const auto reg = builtinRegistry(ctx);
  auto make = [&](const char* name, std::vector<Constant> args) { return reg.make(name, "x", std::move(args)); };
  auto P = Constant::identifier("PortCoords");

  const auto six = at(north(port, 6.0));
  CHECK(make("Distance", {P, Constant::number(5), Constant::number(7)}).evaluate(six));
  CHECK_FALSE(make("Distance", {P, Constant::number(7), Constant::number(10)}).evaluate(six));
  CHECK(make("Distance", {Constant::pair(-4.49, 48.38), Constant::number(5), Constant::number(7)}).evaluate(six));
  CHECK_FALSE(make("WithinCircle", {P, Constant::number(5)}).evaluate(six));
  CHECK(make("WithinCircle", {P, Constant::number(6.5)}).evaluate(six));
  CHECK_FALSE(make("InArea", {Constant::identifier("Harbour")}).evaluate(six));
  CHECK(make("InArea", {Constant::identifier("Harbour")}).evaluate(at(north(port, 4.0))));
  CHECK(make("InArea", {Constant::identifier("Box")}).evaluate(six));
  CHECK(make("SpeedBetween", {Constant::number(1), Constant::number(9)}).evaluate(at(port, 5.0)));
  CHECK_FALSE(make("SpeedBetween", {Constant::number(1), Constant::number(9)}).evaluate(at(port, 9.0)));

  // Six km north of the port, the port lies due south.
  const auto towards = make("HeadingTowards", {P});
  CHECK(towards.evaluate(at(north(port, 6.0), 5, 180.0)));
  CHECK(towards.evaluate(at(north(port, 6.0), 5, 194.0)));
  CHECK_FALSE(towards.evaluate(at(north(port, 6.0), 5, 200.0)));
  CHECK(towards.evaluate(at(port, 5, 77.0)));  // at the target

  const auto fishing = make("IsFishingVessel", {});
  CHECK(fishing.evaluate(at(port, 5, 0, "trawler")));
  CHECK_FALSE(fishing.evaluate(at(port, 5, 0, "ferry")));

  CHECK_THROWS_AS(make("Distance", {Constant::identifier("Nowhere"), Constant::number(0), Constant::number(1)}),
                  DataError);
  CHECK_THROWS_AS(make("InArea", {Constant::identifier("PortCoords")}), DataError);
  Event bare(0, "v");
  CHECK_THROWS_AS(make("SpeedBetween", {Constant::number(1), Constant::number(9)}).evaluate(bare),
                  MissingAttribute);
}

TEST_CASE("distance bands share a quantity and prune") {
  GeoContext ctx;
  ctx.points["P"] = {0, 0};
  const auto reg = builtinRegistry(ctx);
  std::vector<PredicateAtom> ps{
      reg.make("Distance", "x", {Constant::identifier("P"), Constant::number(7), Constant::number(10)}),
      reg.make("Distance", "x", {Constant::identifier("P"), Constant::number(5), Constant::number(7)}),
      reg.make("WithinCircle", "x", {Constant::identifier("P"), Constant::number(5)})};
  // Disjoint bands: only "none" and the three singletons survive.
  CHECK(computeMinterms(ps, SatOracle{SatStrategy::IntervalPruning}).size() == 4);
}
