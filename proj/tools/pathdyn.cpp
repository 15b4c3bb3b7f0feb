// pathdyn: batch and service entry points.
//
// Every subcommand exits 0 on success. On failure it prints one line
//   error: <code>: <message>
// to stderr and exits nonzero.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "httplib.h"
#include "pathdyn/advect.hpp"
#include "pathdyn/distribution.hpp"
#include "pathdyn/dynamics.hpp"
#include "pathdyn/field.hpp"
#include "pathdyn/parallel.hpp"
#include "pathdyn/service.hpp"
#include "pathdyn/simfield.hpp"
#include "pathdyn/store.hpp"
#include "pathdyn/wire.hpp"

namespace fs = std::filesystem;
using namespace pathdyn;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Extent {
  std::vector<double> x{0.0, 1.0};
  std::vector<double> y{0.0, 1.0};
  std::vector<double> t{0.0, 1.0};
  std::uint32_t nx = 64, ny = 64, nt = 2;

  GridSpec spec() const {
    return GridSpec::from_extent({x[0], y[0]}, {x[1], y[1]}, nx, ny, t[0], t[1], nt);
  }
};

void add_extent_options(CLI::App* cmd, Extent& e) {
  cmd->add_option("--x-range", e.x, "domain x bounds")->expected(2);
  cmd->add_option("--y-range", e.y, "domain y bounds")->expected(2);
  cmd->add_option("--t-range", e.t, "time bounds")->expected(2);
  cmd->add_option("--nx", e.nx, "grid nodes along x");
  cmd->add_option("--ny", e.ny, "grid nodes along y");
  cmd->add_option("--nt", e.nt, "time frames");
}

struct IntegrationOptions {
  double t0 = 0.0;
  double tau = 1.0;
  double dt = 0.01;
  double rk_tol = 1e-6;
  std::size_t stride = 1;

  IntegrationParams params() const { return {t0, tau, dt, rk_tol}; }
};

void add_integration_options(CLI::App* cmd, IntegrationOptions& o) {
  cmd->add_option("--t0", o.t0, "start time")->required();
  cmd->add_option("--tau", o.tau, "signed integration time (negative = backward)")->required();
  cmd->add_option("--dt", o.dt, "sample distance")->capture_default_str();
  cmd->add_option("--rk-tol", o.rk_tol, "integrator error tolerance")->capture_default_str();
  cmd->add_option("--stride", o.stride, "seed every stride-th grid node")->capture_default_str();
}

std::optional<std::size_t> parse_bins(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || n < 2) throw UsageError("--bins must be 'auto' or an integer >= 2");
  return static_cast<std::size_t>(n);
}

int fail(const std::string& code, const std::string& message) {
  std::cerr << "error: " << code << ": " << message << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pathline dynamics similarity engine"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "parallel workers (0 = all cores)");

  // gen-field
  auto* gen = app.add_subcommand("gen-field", "rasterize an analytic flow to a VF2D dataset");
  std::string gen_name;
  double blend = 0.3;
  Extent gen_extent;
  fs::path gen_out;
  gen->add_option("--name", gen_name,
                  "constant | rigid_rotation | saddle | double_gyre | two_population")
      ->required();
  gen->add_option("--blend", blend, "blend band width for two_population")->capture_default_str();
  add_extent_options(gen, gen_extent);
  gen->add_option("--out", gen_out, "output dataset")->required();

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "validate a VF2D file or wrap a raw f32 (u,v) payload into one");
  fs::path ingest_in, ingest_out;
  bool ingest_raw = false;
  Extent ingest_extent;
  ingest->add_option("input", ingest_in, "input file")->required();
  ingest->add_option("output", ingest_out, "output dataset")->required();
  ingest->add_flag("--raw", ingest_raw,
                   "input is a headerless little-endian f32 payload in t, y, x order");
  add_extent_options(ingest, ingest_extent);

  // build-dynamics
  auto* build = app.add_subcommand("build-dynamics", "integrate all seeds and store alpha/beta");
  fs::path build_field, build_out;
  IntegrationOptions build_opts;
  build->add_option("--field", build_field, "VF2D dataset")->required();
  add_integration_options(build, build_opts);
  build->add_option("--out", build_out, "output cache")->required();

  // similarity
  auto* sim = app.add_subcommand("similarity", "divergence field against a reference region");
  fs::path sim_cache, sim_image, sim_field;
  std::string sim_region, sim_bins = "auto", sim_cmap = "viridis";
  sim->add_option("--cache", sim_cache, "dynamics cache")->required();
  sim->add_option("--region", sim_region,
                  "circle:cx,cy,r | ellipse:cx,cy,rx,ry | polygon:x1,y1,... | JSON")
      ->required();
  sim->add_option("--bins", sim_bins, "bins per invariant or 'auto' (sqrt N)")->capture_default_str();
  sim->add_option("--colormap", sim_cmap, "viridis | grayscale | diverging")->capture_default_str();
  sim->add_option("--image", sim_image, "PNG output");
  sim->add_option("--out-field", sim_field, "SF2D output (plus .json provenance)");

  // ftle
  auto* ftle = app.add_subcommand("ftle", "FTLE field by one of three estimators");
  fs::path ftle_in, ftle_image, ftle_field_out;
  std::string ftle_method = "flow_map", ftle_mapping = "hencky", ftle_cmap = "viridis";
  IntegrationOptions ftle_opts;
  ftle->add_option("--field", ftle_in, "VF2D dataset")->required();
  ftle->add_option("--method", ftle_method, "flow_map | localized | strain_sum")->capture_default_str();
  ftle->add_option("--strain-mapping", ftle_mapping, "hencky | green_lagrange")->capture_default_str();
  ftle->add_option("--colormap", ftle_cmap, "viridis | grayscale | diverging")->capture_default_str();
  add_integration_options(ftle, ftle_opts);
  ftle->add_option("--image", ftle_image, "PNG output (scaled to the finite range)");
  ftle->add_option("--out-field", ftle_field_out, "SF2D output");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP service over loaded caches");
  std::vector<fs::path> serve_caches;
  int port = 0;
  std::string host = "127.0.0.1";
  fs::path cache_dir;
  serve->add_option("--cache", serve_caches, "cache files (id = file stem)");
  serve->add_option("--cache-dir", cache_dir, "load every *.dync here (default $PATHDYN_CACHE_DIR)");
  serve->add_option("--port", port, "listen port (default $PATHDYN_PORT or 8080)");
  serve->add_option("--host", host, "listen address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  set_worker_count(workers);

  try {
    if (*gen) {
      const GridSpec spec = gen_extent.spec();
      const VectorField2D field = gen_name == "two_population" ? make_two_population(spec, blend)
                                                                : make_analytic(gen_name, spec);
      save_dataset(field, gen_out);
      std::cout << "wrote " << gen_out.string() << " fingerprint " << to_hex(load_dataset(gen_out).fingerprint())
                << '\n';
    } else if (*ingest) {
      if (ingest_raw) {
        const GridSpec spec = ingest_extent.spec();
        std::ifstream in(ingest_in, std::ios::binary);
        if (!in) throw DatasetError(DatasetErrc::io, "cannot open " + ingest_in.string());
        const std::uint64_t expected = dataset_payload_bytes(spec);
        if (fs::file_size(ingest_in) != expected)
          throw DatasetError(DatasetErrc::size_mismatch,
                             "raw payload must be " + std::to_string(expected) + " bytes");
        std::vector<float> data(expected / sizeof(float));
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
        for (float v : data)
          if (!std::isfinite(v)) throw DatasetError(DatasetErrc::non_finite, "raw payload has non-finite values");
        save_dataset(VectorField2D(spec, std::move(data), Fingerprint{}), ingest_out);
      } else {
        save_dataset(load_dataset(ingest_in), ingest_out);
      }
      // Fingerprint of the written file, which is what caches will reference.
      const VectorField2D check = load_dataset(ingest_out);
      std::cout << "wrote " << ingest_out.string() << " fingerprint " << to_hex(check.fingerprint()) << '\n';
    } else if (*build) {
      const VectorField2D field = load_dataset(build_field);
      const GridSpec seeds = seed_spec(field.spec(), build_opts.stride);
      BuildStats stats;
      const DynamicsCache cache = build_cache(field, build_opts.params(), seeds, &stats);
      save_cache(cache, build_out);
      std::cout << "seeds " << cache.seed_count() << " N " << cache.samples_per_seed() << " bytes "
                << stats.byte_size << " build_seconds " << stats.wall_seconds << " workers "
                << stats.workers << '\n';
    } else if (*sim) {
      const DynamicsCache cache = load_cache(sim_cache);
      const Region region = parse_region(sim_region);
      const BinningPolicy policy = fit_binning(cache.records(), parse_bins(sim_bins));
      SimilarityTiming timing;
      reset_field_sample_count();
      const DivergenceField field = similarity_field(cache, region, policy, &timing);
      const std::uint64_t samples = field_sample_count();
      if (!sim_image.empty()) render(field, parse_colormap(sim_cmap), sim_image);
      if (!sim_field.empty()) export_field(field, sim_field);
      std::cout << "bins " << policy.n << " reference_ms " << timing.reference_ms << " field_ms "
                << timing.field_ms << " field_samples " << samples << '\n';
    } else if (*ftle) {
      const VectorField2D field = load_dataset(ftle_in);
      FtleMethod method;
      if (ftle_method == "flow_map") method = FtleMethod::flow_map;
      else if (ftle_method == "localized") method = FtleMethod::localized;
      else if (ftle_method == "strain_sum") method = FtleMethod::strain_sum;
      else throw UsageError("unknown --method " + ftle_method);
      StrainSumMapping mapping;
      if (ftle_mapping == "hencky") mapping = StrainSumMapping::hencky;
      else if (ftle_mapping == "green_lagrange") mapping = StrainSumMapping::green_lagrange;
      else throw UsageError("unknown --strain-mapping " + ftle_mapping);

      const GridSpec seeds = seed_spec(field.spec(), ftle_opts.stride);
      const FtleField result = ftle_field(field, ftle_opts.params(), seeds, method, mapping);
      if (!ftle_field_out.empty()) write_scalar_field(ftle_field_out, seeds.nx, seeds.ny, result.values);
      if (!ftle_image.empty()) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double v : result.values)
          if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
        write_png(colorize(result.values, seeds.nx, seeds.ny, parse_colormap(ftle_cmap), lo, hi), ftle_image);
      }
    } else if (*serve) {
      if (port == 0) {
        const char* env = std::getenv("PATHDYN_PORT");
        port = env != nullptr ? std::atoi(env) : 8080;
      }
      if (cache_dir.empty()) {
        if (const char* env = std::getenv("PATHDYN_CACHE_DIR")) cache_dir = env;
      }
      if (!cache_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(cache_dir))
          if (entry.path().extension() == ".dync") serve_caches.push_back(entry.path());
      }
      if (serve_caches.empty()) throw UsageError("serve needs --cache, --cache-dir or PATHDYN_CACHE_DIR");

      Service service;
      for (const auto& path : serve_caches) {
        service.add_cache(path.stem().string(), std::make_shared<const DynamicsCache>(load_cache(path)));
        std::cout << "loaded " << path.stem().string() << '\n';
      }
      httplib::Server server;
      service.mount(server);
      std::cout << "listening on " << host << ':' << port << std::endl;
      if (!server.listen(host, port)) throw std::runtime_error("cannot listen on port " + std::to_string(port));
    }
  } catch (const UsageError& e) {
    return fail("usage", e.what());
  } catch (const DatasetError& e) {
    return fail("dataset", e.what());
  } catch (const CacheError& e) {
    return fail("cache", e.what());
  } catch (const DistributionError& e) {
    return fail("distribution", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
