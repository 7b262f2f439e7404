#pragma once

// Maritime predicate library: great-circle distances, regions and the
// kinematic atoms used by the approaching and fishing patterns.
//
// Events are read through the attributes `lon`, `lat` (degrees), `speed`
// (knots) and `heading` (course over ground, degrees in [0, 360)).

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cef/algebra.hpp"

namespace cef::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

struct Circle {
  GeoPoint center;
  double radiusKm = 0.0;
};

struct Polygon {
  std::vector<GeoPoint> ring;  // implicitly closed, >= 3 vertices
};

struct Region {
  std::string name;
  std::variant<Circle, Polygon> shape;

  bool contains(const GeoPoint& p) const;
  /// Circle center or vertex centroid; the target for heading tests.
  GeoPoint anchor() const;
};

double distanceKm(const GeoPoint& p, const GeoPoint& q);
/// Initial great-circle bearing from p towards q, degrees in [0, 360).
double bearingDeg(const GeoPoint& p, const GeoPoint& q);
/// Absolute difference of two headings folded into [0, 180].
double angularDifferenceDeg(double a, double b);
/// Even-odd ray casting in the (lon, lat) plane.
bool pointInPolygon(const GeoPoint& p, const Polygon& polygon);

/// Named constants and background knowledge the atoms resolve against.
struct GeoContext {
  std::map<std::string, GeoPoint, std::less<>> points;
  std::map<std::string, Region, std::less<>> regions;
  std::set<std::string, std::less<>> fishingVessels;
  double headingToleranceDeg = 15.0;

  /// Resolves a (lon, lat) pair, a named point, or a region's anchor.
  GeoPoint resolvePoint(const Constant& c) const;
  const Region& region(const Constant& c) const;
};

/// Reads `[{"name": ..., "point": [lon, lat]} | {"name", "circle": {"center": [lon, lat],
/// "radius_km": r}} | {"name", "polygon": [[lon, lat], ...]}, ...]`.
void loadRegions(const std::string& path, GeoContext& ctx);
void parseRegions(const std::string& json, GeoContext& ctx);
/// One vessel id per line; blank lines and `#` comments ignored.
void loadFishingVessels(const std::string& path, GeoContext& ctx);

/// Generic atoms plus Distance, WithinCircle, InArea, SpeedBetween,
/// HeadingTowards and IsFishingVessel bound to `ctx` (copied).
PredicateRegistry builtinRegistry(GeoContext ctx = {});

}  // namespace cef::geo
