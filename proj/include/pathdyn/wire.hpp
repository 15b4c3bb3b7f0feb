#pragma once

// JSON encodings shared by the field sidecars, the CLI and the HTTP service.
//
//   Vec2             [x, y]
//   Region           {"kind": "circle",  "center": [x, y], "radius": r}
//                    {"kind": "ellipse", "center": [x, y], "radii": [rx, ry]}
//                    {"kind": "polygon", "vertices": [[x, y], ...]}
//   IntegrationParams {"t0", "tau", "dt", "rk_tol"}
//   BinningPolicy    {"n", "alpha_range": [lo, hi], "beta_range": [lo, hi],
//                     "clamp_percentiles": [lo, hi]}
//   GridSpec         {"origin", "spacing", "nx", "ny", "t_min", "t_max", "nt"}

#include <string>
#include <string_view>

#include "json.hpp"

#include "pathdyn/simfield.hpp"

namespace pathdyn {

void to_json(nlohmann::json& j, const Vec2& v);
void from_json(const nlohmann::json& j, Vec2& v);
void to_json(nlohmann::json& j, const Region& r);
/// Throws std::invalid_argument on malformed or degenerate regions.
void from_json(const nlohmann::json& j, Region& r);
void to_json(nlohmann::json& j, const IntegrationParams& p);
void from_json(const nlohmann::json& j, IntegrationParams& p);
void to_json(nlohmann::json& j, const BinningPolicy& p);
void from_json(const nlohmann::json& j, BinningPolicy& p);
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
void to_json(nlohmann::json& j, const QueryProvenance& q);
void from_json(const nlohmann::json& j, QueryProvenance& q);

Fingerprint parse_fingerprint(std::string_view hex);

/// "circle:cx,cy,r", "ellipse:cx,cy,rx,ry", "polygon:x1,y1,x2,y2,..." or a
/// JSON object as above.
Region parse_region(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace pathdyn
