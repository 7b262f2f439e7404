#include "cef/geo.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace cef::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

GeoPoint position(const Event& e) { return {e.number("lon"), e.number("lat")}; }

std::string pointKey(const GeoPoint& p) {
  return Constant::pair(p.lon, p.lat).canonical();
}

GeoPoint readPoint(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 2) throw DataError("region '" + name + "': expected [lon, lat]");
  GeoPoint p{j[0].get<double>(), j[1].get<double>()};
  if (p.lon < -180.0 || p.lon > 180.0 || p.lat < -90.0 || p.lat > 90.0)
    throw DataError("region '" + name + "': coordinates out of range");
  return p;
}

class DistanceBand final : public AtomEvaluator {
 public:
  DistanceBand(GeoPoint target, double lo, double hi) : target_(target), lo_(lo), hi_(hi) {}
  bool evaluate(const Event& e) const override {
    const double d = distanceKm(position(e), target_);
    return d >= lo_ && d < hi_;
  }
  std::optional<Band> band() const override { return Band{"distance:" + pointKey(target_), lo_, hi_}; }

 private:
  GeoPoint target_;
  double lo_, hi_;
};

class RegionMembership final : public AtomEvaluator {
 public:
  explicit RegionMembership(Region region) : region_(std::move(region)) {}
  bool evaluate(const Event& e) const override { return region_.contains(position(e)); }
  std::optional<Band> band() const override {
    if (const auto* c = std::get_if<Circle>(&region_.shape))
      return Band{"distance:" + pointKey(c->center), -INFINITY, c->radiusKm};
    return std::nullopt;
  }

 private:
  Region region_;
};

class SpeedBand final : public AtomEvaluator {
 public:
  SpeedBand(double lo, double hi) : lo_(lo), hi_(hi) {}
  bool evaluate(const Event& e) const override {
    const double v = e.number("speed");
    return v >= lo_ && v < hi_;
  }
  std::optional<Band> band() const override { return Band{"attr:speed", lo_, hi_}; }

 private:
  double lo_, hi_;
};

class HeadingTowards final : public AtomEvaluator {
 public:
  HeadingTowards(GeoPoint target, double tolerance) : target_(target), tolerance_(tolerance) {}
  bool evaluate(const Event& e) const override {
    const GeoPoint p = position(e);
    const double heading = e.number("heading");
    if (distanceKm(p, target_) == 0.0) return true;
    return angularDifferenceDeg(heading, bearingDeg(p, target_)) <= tolerance_;
  }

 private:
  GeoPoint target_;
  double tolerance_;
};

class FishingVessel final : public AtomEvaluator {
 public:
  explicit FishingVessel(std::shared_ptr<const std::set<std::string, std::less<>>> list)
      : list_(std::move(list)) {}
  bool evaluate(const Event& e) const override { return list_->count(e.partition) > 0; }

 private:
  std::shared_ptr<const std::set<std::string, std::less<>>> list_;
};

double numberArg(std::span<const Constant> a, std::size_t i, const char* pred) {
  if (i >= a.size() || a[i].kind != Constant::Kind::Number)
    throw DataError(std::string(pred) + ": argument " + std::to_string(i + 2) + " must be a number");
  return a[i].x;
}

void arity(std::span<const Constant> a, std::size_t n, const char* usage) {
  if (a.size() != n) throw DataError(std::string("expected ") + usage);
}

}  // namespace

double distanceKm(const GeoPoint& p, const GeoPoint& q) {
  const double phi1 = p.lat * kDegToRad;
  const double phi2 = q.lat * kDegToRad;
  const double dphi = (q.lat - p.lat) * kDegToRad;
  const double dlambda = (q.lon - p.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double bearingDeg(const GeoPoint& p, const GeoPoint& q) {
  const double phi1 = p.lat * kDegToRad;
  const double phi2 = q.lat * kDegToRad;
  const double dlambda = (q.lon - p.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::atan2(y, x) / kDegToRad;
  deg = std::fmod(deg + 360.0, 360.0);
  return deg;
}

double angularDifferenceDeg(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

bool pointInPolygon(const GeoPoint& p, const Polygon& polygon) {
  const auto& v = polygon.ring;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].lat > p.lat) != (v[j].lat > p.lat)) {
      const double x = v[j].lon + (p.lat - v[j].lat) * (v[i].lon - v[j].lon) / (v[i].lat - v[j].lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

bool Region::contains(const GeoPoint& p) const {
  if (const auto* c = std::get_if<Circle>(&shape)) return distanceKm(p, c->center) < c->radiusKm;
  return pointInPolygon(p, std::get<Polygon>(shape));
}

GeoPoint Region::anchor() const {
  if (const auto* c = std::get_if<Circle>(&shape)) return c->center;
  const auto& ring = std::get<Polygon>(shape).ring;
  GeoPoint g;
  for (const auto& v : ring) {
    g.lon += v.lon;
    g.lat += v.lat;
  }
  g.lon /= static_cast<double>(ring.size());
  g.lat /= static_cast<double>(ring.size());
  return g;
}

GeoPoint GeoContext::resolvePoint(const Constant& c) const {
  if (c.kind == Constant::Kind::Pair) return {c.x, c.y};
  if (c.kind == Constant::Kind::Identifier || c.kind == Constant::Kind::String) {
    if (auto it = points.find(c.text); it != points.end()) return it->second;
    if (auto it = regions.find(c.text); it != regions.end()) return it->second.anchor();
    throw DataError("unknown point '" + c.text + "'");
  }
  throw DataError("expected a point name or (lon, lat) pair, found " + c.canonical());
}

const Region& GeoContext::region(const Constant& c) const {
  if (c.kind == Constant::Kind::Identifier || c.kind == Constant::Kind::String) {
    if (auto it = regions.find(c.text); it != regions.end()) return it->second;
    throw DataError("unknown region '" + c.text + "'");
  }
  throw DataError("expected a region name, found " + c.canonical());
}

void parseRegions(const std::string& text, GeoContext& ctx) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("regions file: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("regions file: expected a JSON list");
  try {
    for (const auto& item : doc) {
      const auto name = item.at("name").get<std::string>();
      if (item.contains("point")) {
        ctx.points[name] = readPoint(item["point"], name);
      } else if (item.contains("circle")) {
        const auto& c = item["circle"];
        const double r = c.at("radius_km").get<double>();
        if (!(r > 0.0)) throw DataError("region '" + name + "': radius must be positive");
        ctx.regions[name] = Region{name, Circle{readPoint(c.at("center"), name), r}};
      } else if (item.contains("polygon")) {
        Polygon poly;
        for (const auto& v : item["polygon"]) poly.ring.push_back(readPoint(v, name));
        if (poly.ring.size() >= 2 && poly.ring.front().lon == poly.ring.back().lon &&
            poly.ring.front().lat == poly.ring.back().lat)
          poly.ring.pop_back();
        if (poly.ring.size() < 3) throw DataError("region '" + name + "': polygon needs >= 3 vertices");
        ctx.regions[name] = Region{name, std::move(poly)};
      } else {
        throw DataError("region '" + name + "': expected point, circle or polygon");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("regions file: ") + e.what());
  }
}

void loadRegions(const std::string& path, GeoContext& ctx) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open regions file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  parseRegions(ss.str(), ctx);
}

void loadFishingVessels(const std::string& path, GeoContext& ctx) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vessel list " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    ctx.fishingVessels.insert(line.substr(b, e - b + 1));
  }
}

PredicateRegistry builtinRegistry(GeoContext ctx) {
  PredicateRegistry r = genericRegistry();
  auto shared = std::make_shared<const GeoContext>(std::move(ctx));

  r.add("Distance", [shared](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 3, "Distance(x, point, lo, hi)");
    return std::make_shared<DistanceBand>(shared->resolvePoint(a[0]), numberArg(a, 1, "Distance"),
                                          numberArg(a, 2, "Distance"));
  });
  r.add("WithinCircle", [shared](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 2, "WithinCircle(x, point, radiusKm)");
    return std::make_shared<DistanceBand>(shared->resolvePoint(a[0]), -INFINITY,
                                          numberArg(a, 1, "WithinCircle"));
  });
  r.add("InArea", [shared](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 1, "InArea(x, region)");
    return std::make_shared<RegionMembership>(shared->region(a[0]));
  });
  r.add("SpeedBetween", [](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 2, "SpeedBetween(x, lo, hi)");
    return std::make_shared<SpeedBand>(numberArg(a, 0, "SpeedBetween"), numberArg(a, 1, "SpeedBetween"));
  });
  r.add("HeadingTowards", [shared](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 1, "HeadingTowards(x, point)");
    return std::make_shared<HeadingTowards>(shared->resolvePoint(a[0]), shared->headingToleranceDeg);
  });
  r.add("IsFishingVessel", [shared](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    arity(a, 0, "IsFishingVessel(x)");
    auto list = std::shared_ptr<const std::set<std::string, std::less<>>>(shared, &shared->fishingVessels);
    return std::make_shared<FishingVessel>(std::move(list));
  });
  return r;
}

}  // namespace cef::geo
