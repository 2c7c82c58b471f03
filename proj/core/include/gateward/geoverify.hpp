#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/crypto.hpp"
#include "gateward/envelope.hpp"
#include "gateward/rng.hpp"

namespace gateward {

// Speed of light in km/s.
inline constexpr double kSpeedOfLightKmPerS = 299'792.458;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a);
double distance(Vec2 a, Vec2 b);

struct Disk {
    Vec2 center;
    double radius = 0.0;  // km
};

// Closed half-plane {p : dot(n, p) <= b}. n need not be unit length.
struct HalfPlane {
    Vec2 n;
    double b = 0.0;
};

// Convex polygon, vertices in counter-clockwise order.
struct ConvexPolygon {
    std::vector<Vec2> pts;
    std::vector<HalfPlane> edges() const;  // interior half-planes
};

inline constexpr double kGeoTolKm = 1e-9;

bool in_disk(const Disk& d, Vec2 p, double tol = kGeoTolKm);
bool in_half_plane(const HalfPlane& h, Vec2 p, double tol = kGeoTolKm);

// Finds any point lying in every disk and every half-plane, or nullopt if the
// intersection is empty. Exact witness enumeration (no sampling): candidate
// points are disk centers, per-line anchor points, and all pairwise boundary
// intersections among circles and lines.
std::optional<Vec2> feasible_point(const std::vector<Disk>& disks,
                                   const std::vector<HalfPlane>& half_planes,
                                   double tol = kGeoTolKm);

// Intersection of distance-bound disks around stations.
struct FeasibleRegion {
    std::vector<Disk> disks;

    bool empty(double tol = kGeoTolKm) const;
    bool contains(Vec2 p, double tol = kGeoTolKm) const;

    nlohmann::json to_json() const;
    static FeasibleRegion from_json(const nlohmann::json& j);
};

struct Station {
    std::string station_id;
    Vec2 location;
    KeyPair key;
};

// Simulated network: one-way latency = distance/c + extra_delay + U(0, jitter).
// extra_delay and jitter are both >= 0, so latency never beats light.
struct LatencyModel {
    double extra_delay_s = 0.0;
    double jitter_s = 0.0;

    double one_way_latency(double distance_km, Rng& rng) const;
};

// What a challenge needs to know about the far end. `sign_echo` returns the
// chip's signed echo of the challenge payload (tests may tamper here);
// unreachable chips have sign_echo == nullptr.
struct EchoResponder {
    std::string id;
    Vec2 location;
    double processing_s = 0.0;  // fixed response-handling time
    std::function<SignedEnvelope(const nlohmann::json& challenge)> sign_echo;
};

enum class ChallengeStatus { ok, no_response, bad_signature };

struct ChallengeResult {
    ChallengeStatus status = ChallengeStatus::no_response;
    double rtt_s = 0.0;  // valid only when status == ok
};

// Timed exchange of signed messages between one station and one chip.
ChallengeResult run_challenge(const Station& station, const EchoResponder& chip,
                              const LatencyModel& model, const KeyDirectory& keys,
                              Rng& rng, const SignatureScheme& scheme = ed25519());

// Upper bound on chip distance from the measuring station. The round-trip
// form halves the allowance-corrected time; a literal one-way reading is
// available behind the flag (it doubles the claimed radius and is unsound
// against the round-trip physics here, but kept for comparison).
double distance_bound(double rtt_s, double processing_allowance_s,
                      bool one_way = false);

FeasibleRegion locate(const std::vector<std::pair<Station, double>>& bounds_km);

enum class GeoVerdict { confirmed_inside, confirmed_outside, indeterminate, empty_region };

const char* geo_verdict_name(GeoVerdict v);

GeoVerdict verify_within(const FeasibleRegion& region, const ConvexPolygon& zone,
                         double tol = kGeoTolKm);

}  // namespace gateward
