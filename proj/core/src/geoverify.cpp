#include "gateward/geoverify.hpp"

#include <algorithm>
#include <cmath>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

std::vector<HalfPlane> ConvexPolygon::edges() const {
    std::vector<HalfPlane> out;
    const size_t n = pts.size();
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec2 a = pts[i];
        const Vec2 b = pts[(i + 1) % n];
        // CCW order: interior lies left of a->b, so outward normal is
        // (dy, -dx) and the interior satisfies dot(n, p) <= dot(n, a).
        const Vec2 nrm{b.y - a.y, -(b.x - a.x)};
        out.push_back({nrm, dot(nrm, a)});
    }
    return out;
}

bool in_disk(const Disk& d, Vec2 p, double tol) {
    return distance(d.center, p) <= d.radius + tol;
}

bool in_half_plane(const HalfPlane& h, Vec2 p, double tol) {
    const double scale = std::max(1.0, norm(h.n));
    return dot(h.n, p) <= h.b + tol * scale;
}

namespace {

bool feasible(Vec2 p, const std::vector<Disk>& disks,
              const std::vector<HalfPlane>& hps, double tol) {
    for (const auto& d : disks)
        if (!in_disk(d, p, tol)) return false;
    for (const auto& h : hps)
        if (!in_half_plane(h, p, tol)) return false;
    return true;
}

void circle_circle(const Disk& a, const Disk& b, std::vector<Vec2>& out) {
    const double d = distance(a.center, b.center);
    if (d < 1e-12) return;  // concentric: no boundary intersection
    if (d > a.radius + b.radius + 1e-12) return;
    if (d < std::fabs(a.radius - b.radius) - 1e-12) return;
    // Point on the radical line at parameter t along a->b.
    const double t = (a.radius * a.radius - b.radius * b.radius + d * d) / (2.0 * d);
    const double h2 = a.radius * a.radius - t * t;
    const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    const Vec2 u{(b.center.x - a.center.x) / d, (b.center.y - a.center.y) / d};
    const Vec2 m{a.center.x + t * u.x, a.center.y + t * u.y};
    out.push_back({m.x + h * u.y, m.y - h * u.x});
    out.push_back({m.x - h * u.y, m.y + h * u.x});
}

void circle_line(const Disk& d, const HalfPlane& h, std::vector<Vec2>& out) {
    const double nn = norm(h.n);
    if (nn < 1e-12) return;
    const Vec2 u{h.n.x / nn, h.n.y / nn};
    const double c = h.b / nn;  // line: dot(u, p) = c
    const double dist = dot(u, d.center) - c;
    const double h2 = d.radius * d.radius - dist * dist;
    if (h2 < -1e-12) return;
    const double s = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    const Vec2 foot{d.center.x - dist * u.x, d.center.y - dist * u.y};
    const Vec2 t{-u.y, u.x};
    out.push_back({foot.x + s * t.x, foot.y + s * t.y});
    out.push_back({foot.x - s * t.x, foot.y - s * t.y});
}

void line_line(const HalfPlane& a, const HalfPlane& b, std::vector<Vec2>& out) {
    const double det = a.n.x * b.n.y - a.n.y * b.n.x;
    if (std::fabs(det) < 1e-12) return;  // parallel
    out.push_back({(a.b * b.n.y - b.b * a.n.y) / det,
                   (a.n.x * b.b - b.n.x * a.b) / det});
}

}  // namespace

std::optional<Vec2> feasible_point(const std::vector<Disk>& disks,
                                   const std::vector<HalfPlane>& half_planes,
                                   double tol) {
    std::vector<Vec2> cands;
    cands.push_back({0.0, 0.0});
    for (const auto& d : disks) cands.push_back(d.center);
    for (const auto& h : half_planes) {
        // Anchor: the point of the boundary line closest to the origin.
        const double nn2 = dot(h.n, h.n);
        if (nn2 > 1e-24)
            cands.push_back({h.n.x * h.b / nn2, h.n.y * h.b / nn2});
    }
    for (size_t i = 0; i < disks.size(); ++i)
        for (size_t j = i + 1; j < disks.size(); ++j)
            circle_circle(disks[i], disks[j], cands);
    for (const auto& d : disks)
        for (const auto& h : half_planes) circle_line(d, h, cands);
    for (size_t i = 0; i < half_planes.size(); ++i)
        for (size_t j = i + 1; j < half_planes.size(); ++j)
            line_line(half_planes[i], half_planes[j], cands);

    for (const auto& p : cands)
        if (feasible(p, disks, half_planes, tol)) return p;
    return std::nullopt;
}

bool FeasibleRegion::empty(double tol) const {
    return !feasible_point(disks, {}, tol).has_value();
}

bool FeasibleRegion::contains(Vec2 p, double tol) const {
    for (const auto& d : disks)
        if (!in_disk(d, p, tol)) return false;
    return true;
}

json FeasibleRegion::to_json() const {
    json arr = json::array();
    for (const auto& d : disks)
        arr.push_back(json{{"x", d.center.x}, {"y", d.center.y}, {"radius", d.radius}});
    return json{{"disks", arr}};
}

FeasibleRegion FeasibleRegion::from_json(const json& j) {
    FeasibleRegion r;
    for (const auto& d : j.at("disks"))
        r.disks.push_back({{d.at("x").get<double>(), d.at("y").get<double>()},
                           d.at("radius").get<double>()});
    return r;
}

double LatencyModel::one_way_latency(double distance_km, Rng& rng) const {
    double t = distance_km / kSpeedOfLightKmPerS + extra_delay_s;
    if (jitter_s > 0.0) t += rng.uniform_double() * jitter_s;
    return t;
}

ChallengeResult run_challenge(const Station& station, const EchoResponder& chip,
                              const LatencyModel& model, const KeyDirectory& keys,
                              Rng& rng, const SignatureScheme& scheme) {
    ChallengeResult out;
    if (!chip.sign_echo) {
        out.status = ChallengeStatus::no_response;
        return out;
    }
    uint8_t nb[16];
    for (int i = 0; i < 16; ++i) nb[i] = static_cast<uint8_t>(rng.next_u64() >> 8);
    const json challenge{{"type", "GeoChallenge"},
                         {"station", station.station_id},
                         {"chip", chip.id},
                         {"nonce", hex_encode(Bytes(nb, nb + 16))}};

    const double dist = distance(station.location, chip.location);
    const double up = model.one_way_latency(dist, rng);
    const SignedEnvelope echo = chip.sign_echo(challenge);
    const double down = model.one_way_latency(dist, rng);

    if (!verify_envelope(scheme, echo, keys) || echo.signer != chip.id) {
        out.status = ChallengeStatus::bad_signature;
        return out;
    }
    // The echo must quote this challenge, or it is a replay.
    const json echoed = echo.payload();
    if (!echoed.contains("challenge") || echoed.at("challenge") != challenge) {
        out.status = ChallengeStatus::bad_signature;
        return out;
    }
    out.status = ChallengeStatus::ok;
    out.rtt_s = up + chip.processing_s + down;
    return out;
}

double distance_bound(double rtt_s, double processing_allowance_s, bool one_way) {
    const double t = std::max(0.0, rtt_s - processing_allowance_s);
    return one_way ? kSpeedOfLightKmPerS * t : kSpeedOfLightKmPerS * t / 2.0;
}

FeasibleRegion locate(const std::vector<std::pair<Station, double>>& bounds_km) {
    FeasibleRegion r;
    r.disks.reserve(bounds_km.size());
    for (const auto& [st, radius] : bounds_km)
        r.disks.push_back({st.location, radius});
    return r;
}

const char* geo_verdict_name(GeoVerdict v) {
    switch (v) {
        case GeoVerdict::confirmed_inside: return "confirmed_inside";
        case GeoVerdict::confirmed_outside: return "confirmed_outside";
        case GeoVerdict::indeterminate: return "indeterminate";
        case GeoVerdict::empty_region: return "empty_region";
    }
    return "?";
}

GeoVerdict verify_within(const FeasibleRegion& region, const ConvexPolygon& zone,
                         double tol) {
    if (region.empty(tol)) return GeoVerdict::empty_region;
    const auto edges = zone.edges();
    if (!feasible_point(region.disks, edges, tol).has_value())
        return GeoVerdict::confirmed_outside;
    // Contained iff no part of the region escapes past any single edge.
    bool inside = true;
    for (const auto& e : edges) {
        const HalfPlane outsideward{{-e.n.x, -e.n.y}, -e.b};
        if (feasible_point(region.disks, {outsideward}, tol).has_value()) {
            inside = false;
            break;
        }
    }
    return inside ? GeoVerdict::confirmed_inside : GeoVerdict::indeterminate;
}

}  // namespace gateward
