#include "pathdyn/service.hpp"

#include <cmath>
#include <cstring>

#include "httplib.h"
#include "pathdyn/wire.hpp"

namespace pathdyn {

using nlohmann::json;

namespace {

constexpr std::size_t kPreviewLength = 256;

ApiResult error(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

struct BadRequest : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw BadRequest(std::string("field \"") + key + "\" has the wrong type");
  }
}

std::string encode_f32(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = std::isfinite(values[i]) ? static_cast<float>(values[i]) : std::nanf("");
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  return base64_encode(bytes);
}

json header_json(const DynamicsCache& cache) {
  const auto& h = cache.header();
  return json{{"field_fingerprint", to_hex(h.field_fingerprint)},
              {"integration", h.params},
              {"seeds", h.seeds},
              {"samples_per_seed", h.n},
              {"seed_count", h.seed_count()},
              {"byte_size", cache.byte_size()}};
}

/// Nearest seed to p, or npos when p lies outside the seed grid.
std::size_t nearest_seed(const GridSpec& seeds, Vec2 p) {
  const Vec2 hi = seeds.extent_max();
  if (!(p.x >= seeds.origin.x && p.x <= hi.x && p.y >= seeds.origin.y && p.y <= hi.y))
    return static_cast<std::size_t>(-1);
  const auto i = static_cast<std::size_t>(std::lround((p.x - seeds.origin.x) / seeds.spacing.x));
  const auto j = static_cast<std::size_t>(std::lround((p.y - seeds.origin.y) / seeds.spacing.y));
  return std::min<std::size_t>(j, seeds.ny - 1) * seeds.nx + std::min<std::size_t>(i, seeds.nx - 1);
}

json seed_histogram(const DynamicsCache& cache, std::size_t seed, const BinningPolicy& policy) {
  const DynamicsView r = cache.record(seed);
  json out{{"seed_index", seed}, {"seed", r.seed}, {"valid_count", r.valid_count}};
  out["bins"] = r.valid_count > 0 ? json(histogram(r, policy).bins) : json::array();
  return out;
}

}  // namespace

void Service::add_cache(const std::string& id, std::shared_ptr<const DynamicsCache> cache) {
  Entry e;
  e.default_policy = fit_binning(cache->records());
  e.cache = std::move(cache);
  caches_[id] = std::move(e);
}

const Service::Entry* Service::find(const std::string& id) const {
  const auto it = caches_.find(id);
  return it == caches_.end() ? nullptr : &it->second;
}

ApiResult Service::datasets() const {
  json list = json::array();
  for (const auto& [id, e] : caches_) {
    json item = header_json(*e.cache);
    item["id"] = id;
    list.push_back(std::move(item));
  }
  return {200, json{{"datasets", list}}};
}

ApiResult Service::info(const std::string& id) const {
  const Entry* e = find(id);
  if (e == nullptr) return error(404, "unknown_cache", "no cache with id \"" + id + "\"");
  json body = header_json(*e->cache);
  body["id"] = id;
  body["default_binning"] = e->default_policy;
  return {200, body};
}

ApiResult Service::query(const std::string& id, const std::string& body) const {
  const Entry* e = find(id);
  if (e == nullptr) return error(404, "unknown_cache", "no cache with id \"" + id + "\"");

  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& ex) {
    return error(400, "invalid_json", ex.what());
  }

  try {
    if (!req.is_object()) throw BadRequest("request body must be a JSON object");
    if (!req.contains("region")) throw BadRequest("field \"region\" is required");
    Region region;
    try {
      region = req["region"].get<Region>();
    } catch (const json::exception& ex) {
      throw BadRequest(std::string("region: ") + ex.what());
    }

    BinningPolicy policy = e->default_policy;
    if (req.contains("bins")) {
      const auto& bins = req["bins"];
      if (bins.is_string() && bins.get<std::string>() == "auto") {
      } else if (bins.is_number_integer() && bins.get<long long>() >= 2) {
        policy = policy.with_bins(bins.get<std::size_t>());
      } else {
        throw BadRequest("field \"bins\" must be \"auto\" or an integer >= 2");
      }
    }
    const Colormap cmap = parse_colormap(field_or<std::string>(req, "colormap", "viridis"));
    const bool want_raster = field_or<bool>(req, "include_raster", true);
    const bool want_field = field_or<bool>(req, "include_field", false);
    const bool want_reference = field_or<bool>(req, "include_reference", true);

    SimilarityTiming timing;
    DivergenceField field;
    try {
      field = similarity_field(*e->cache, region, policy, &timing);
    } catch (const DistributionError& ex) {
      return error(422, "empty_region", ex.what());
    }

    json resp;
    resp["cache"] = id;
    resp["provenance"] = field.query;
    resp["timing"] = {{"reference_ms", timing.reference_ms}, {"field_ms", timing.field_ms}};
    json f{{"nx", field.spec.nx}, {"ny", field.spec.ny}, {"seeds", field.spec}};
    if (want_field) {
      f["encoding"] = "f32le-base64";
      f["data"] = encode_f32(field.values);
    }
    if (want_raster) {
      f["png_base64"] = base64_encode(encode_png(colorize(field.values, field.spec.nx, field.spec.ny, cmap)));
      f["colormap"] = to_string(cmap);
    }
    resp["field"] = std::move(f);

    if (want_reference) {
      const DynHistogram ref = reference_distribution(e->cache->records(), region, policy);
      resp["reference"] = {{"bins", ref.bins}, {"n", policy.n}, {"sample_count", ref.sample_count}};
    }

    const std::size_t worst = field.argmax();
    if (worst < field.values.size()) {
      json a = seed_histogram(*e->cache, worst, policy);
      a["divergence"] = field.values[worst];
      resp["most_dissimilar"] = std::move(a);
    }

    if (req.contains("probe")) {
      Vec2 p;
      try {
        p = req["probe"].get<Vec2>();
      } catch (const std::exception&) {
        throw BadRequest("field \"probe\" must be [x, y]");
      }
      const std::size_t seed = nearest_seed(e->cache->header().seeds, p);
      if (seed >= field.values.size()) return error(404, "probe_outside_grid", "probe point outside the seed grid");
      json pr = seed_histogram(*e->cache, seed, policy);
      pr["divergence"] = std::isfinite(field.values[seed]) ? json(field.values[seed]) : json(nullptr);
      resp["probe"] = std::move(pr);
    }
    return {200, resp};
  } catch (const BadRequest& ex) {
    return error(400, "invalid_request", ex.what());
  } catch (const std::invalid_argument& ex) {
    return error(400, "invalid_request", ex.what());
  }
}

ApiResult Service::probe(const std::string& id, double x, double y) const {
  const Entry* e = find(id);
  if (e == nullptr) return error(404, "unknown_cache", "no cache with id \"" + id + "\"");
  const std::size_t seed = nearest_seed(e->cache->header().seeds, {x, y});
  if (seed >= e->cache->seed_count()) return error(404, "probe_outside_grid", "probe point outside the seed grid");

  json out = seed_histogram(*e->cache, seed, e->default_policy);
  const DynamicsView r = e->cache->record(seed);
  const std::size_t stride = std::max<std::size_t>(1, (r.valid_count + kPreviewLength - 1) / kPreviewLength);
  json alphas = json::array(), betas = json::array();
  for (std::size_t i = 0; i < r.valid_count; i += stride) {
    alphas.push_back(r.alphas[i]);
    betas.push_back(r.betas[i]);
  }
  out["preview"] = {{"stride", stride}, {"alphas", alphas}, {"betas", betas}};
  out["binning"] = e->default_policy;
  return {200, out};
}

void Service::mount(httplib::Server& server) const {
  auto reply = [](httplib::Response& res, const ApiResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/datasets", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, datasets());
  });
  server.Get(R"(/cache/([^/]+)/info)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, info(req.matches[1]));
  });
  server.Post(R"(/cache/([^/]+)/query)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, query(req.matches[1], req.body));
  });
  server.Get(R"(/cache/([^/]+)/probe)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("x") || !req.has_param("y")) {
      reply(res, error(400, "invalid_request", "x and y query parameters are required"));
      return;
    }
    double x = 0.0, y = 0.0;
    try {
      x = std::stod(req.get_param_value("x"));
      y = std::stod(req.get_param_value("y"));
    } catch (const std::exception&) {
      reply(res, error(400, "invalid_request", "x and y must be numbers"));
      return;
    }
    reply(res, probe(req.matches[1], x, y));
  });
}

json strip_timing(json response) {
  response.erase("timing");
  return response;
}

}  // namespace pathdyn
