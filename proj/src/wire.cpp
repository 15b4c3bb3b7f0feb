#include "pathdyn/wire.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <stdexcept>

namespace pathdyn {

using nlohmann::json;

void to_json(json& j, const Vec2& v) { j = json::array({v.x, v.y}); }

void from_json(const json& j, Vec2& v) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw std::invalid_argument("expected a [x, y] number pair");
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(json& j, const Region& r) {
  j = json::object();
  j["kind"] = to_string(r.kind);
  switch (r.kind) {
    case Region::Kind::circle:
      j["center"] = r.center;
      j["radius"] = r.radius;
      break;
    case Region::Kind::ellipse:
      j["center"] = r.center;
      j["radii"] = r.radii;
      break;
    case Region::Kind::polygon:
      j["vertices"] = r.vertices;
      break;
  }
}

void from_json(const json& j, Region& r) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument("region must be an object with a string \"kind\"");
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number())
      throw std::invalid_argument(std::string("region field \"") + key + "\" must be a number");
    return j[key].get<double>();
  };
  auto pair = [&](const char* key) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("region field \"") + key + "\" missing");
    return j[key].get<Vec2>();
  };
  const auto kind = j["kind"].get<std::string>();
  if (kind == "circle") {
    r = Region::circle(pair("center"), number("radius"));
  } else if (kind == "ellipse") {
    r = Region::ellipse(pair("center"), pair("radii"));
  } else if (kind == "polygon") {
    if (!j.contains("vertices") || !j["vertices"].is_array())
      throw std::invalid_argument("polygon region needs a \"vertices\" array");
    std::vector<Vec2> vertices;
    for (const auto& v : j["vertices"]) vertices.push_back(v.get<Vec2>());
    r = Region::polygon(std::move(vertices));
  } else {
    throw std::invalid_argument("unknown region kind \"" + kind + "\"");
  }
}

void to_json(json& j, const IntegrationParams& p) {
  j = json{{"t0", p.t0}, {"tau", p.tau}, {"dt", p.dt_sample}, {"rk_tol", p.rk_tol}};
}

void from_json(const json& j, IntegrationParams& p) {
  p.t0 = j.at("t0").get<double>();
  p.tau = j.at("tau").get<double>();
  p.dt_sample = j.at("dt").get<double>();
  p.rk_tol = j.value("rk_tol", 1e-6);
}

void to_json(json& j, const BinningPolicy& p) {
  j = json{{"n", p.n},
           {"alpha_range", {p.alpha_lo, p.alpha_hi}},
           {"beta_range", {p.beta_lo, p.beta_hi}},
           {"clamp_percentiles", {p.clamp_lo_percentile, p.clamp_hi_percentile}}};
}

void from_json(const json& j, BinningPolicy& p) {
  p.n = j.at("n").get<std::size_t>();
  p.alpha_lo = j.at("alpha_range").at(0).get<double>();
  p.alpha_hi = j.at("alpha_range").at(1).get<double>();
  p.beta_lo = j.at("beta_range").at(0).get<double>();
  p.beta_hi = j.at("beta_range").at(1).get<double>();
  if (j.contains("clamp_percentiles")) {
    p.clamp_lo_percentile = j["clamp_percentiles"].at(0).get<double>();
    p.clamp_hi_percentile = j["clamp_percentiles"].at(1).get<double>();
  }
}

void to_json(json& j, const GridSpec& g) {
  j = json{{"origin", g.origin}, {"spacing", g.spacing}, {"nx", g.nx},       {"ny", g.ny},
           {"t_min", g.t_min},   {"t_max", g.t_max},     {"nt", g.nt}};
}

void from_json(const json& j, GridSpec& g) {
  g.origin = j.at("origin").get<Vec2>();
  g.spacing = j.at("spacing").get<Vec2>();
  g.nx = j.at("nx").get<std::uint32_t>();
  g.ny = j.at("ny").get<std::uint32_t>();
  g.t_min = j.at("t_min").get<double>();
  g.t_max = j.at("t_max").get<double>();
  g.nt = j.at("nt").get<std::uint32_t>();
}

void to_json(json& j, const QueryProvenance& q) {
  j = json{{"region", q.region},
           {"binning", q.policy},
           {"integration", q.params},
           {"field_fingerprint", to_hex(q.field_fingerprint)}};
}

void from_json(const json& j, QueryProvenance& q) {
  q.region = j.at("region").get<Region>();
  q.policy = j.at("binning").get<BinningPolicy>();
  q.params = j.at("integration").get<IntegrationParams>();
  q.field_fingerprint = parse_fingerprint(j.at("field_fingerprint").get<std::string>());
}

Fingerprint parse_fingerprint(std::string_view hex) {
  Fingerprint fp{};
  if (hex.size() != 2 * fp.size()) throw std::invalid_argument("fingerprint must be 64 hex digits");
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const auto res = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, fp[i], 16);
    if (res.ec != std::errc{} || res.ptr != hex.data() + 2 * i + 2)
      throw std::invalid_argument("fingerprint must be 64 hex digits");
  }
  return fp;
}

namespace {

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string token(text.substr(0, comma));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != token.size())
      throw std::invalid_argument("region parameter \"" + token + "\" is not a number");
    out.push_back(value);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

Region parse_region(std::string_view text) {
  if (!text.empty() && text.front() == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("region JSON: ") + e.what());
    }
    return j.get<Region>();
  }
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("region must look like kind:v1,v2,...");
  const auto kind = text.substr(0, colon);
  const auto v = parse_numbers(text.substr(colon + 1));
  if (kind == "circle") {
    if (v.size() != 3) throw std::invalid_argument("circle needs cx,cy,r");
    return Region::circle({v[0], v[1]}, v[2]);
  }
  if (kind == "ellipse") {
    if (v.size() != 4) throw std::invalid_argument("ellipse needs cx,cy,rx,ry");
    return Region::ellipse({v[0], v[1]}, {v[2], v[3]});
  }
  if (kind == "polygon") {
    if (v.size() % 2 != 0) throw std::invalid_argument("polygon needs x,y pairs");
    std::vector<Vec2> vertices;
    for (std::size_t i = 0; i < v.size(); i += 2) vertices.push_back({v[i], v[i + 1]});
    return Region::polygon(std::move(vertices));
  }
  throw std::invalid_argument("unknown region kind \"" + std::string(kind) + "\"");
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace pathdyn
