#pragma once

// HTTP front end for interactive region queries against loaded caches.
//
//   GET  /datasets                 loaded caches and their headers
//   GET  /cache/{id}/info          header, footprint and default binning
//   POST /cache/{id}/query         QueryRequest -> QueryResponse
//   GET  /cache/{id}/probe?x=&y=   histogram and alpha/beta preview of the
//                                  seed nearest to (x, y)
//
// Errors are {"error": {"code": ..., "message": ...}} with status 400
// (malformed request), 404 (unknown cache, probe outside the seed grid) or
// 422 (region selects no seed). See docs/api.md for the field reference.

#include <map>
#include <memory>
#include <string>

#include "json.hpp"

#include "pathdyn/simfield.hpp"
#include "pathdyn/store.hpp"

namespace httplib {
class Server;
}

namespace pathdyn {

struct ApiResult {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  /// Fits the default binning of the cache once; queries reuse its ranges.
  void add_cache(const std::string& id, std::shared_ptr<const DynamicsCache> cache);

  ApiResult datasets() const;
  ApiResult info(const std::string& id) const;
  ApiResult query(const std::string& id, const std::string& body) const;
  ApiResult probe(const std::string& id, double x, double y) const;

  /// Registers the routes on server.
  void mount(httplib::Server& server) const;

 private:
  struct Entry {
    std::shared_ptr<const DynamicsCache> cache;
    BinningPolicy default_policy;
  };
  const Entry* find(const std::string& id) const;

  std::map<std::string, Entry> caches_;
};

/// Timing fields are the only part of a query response that may differ
/// between identical requests.
nlohmann::json strip_timing(nlohmann::json response);

}  // namespace pathdyn
