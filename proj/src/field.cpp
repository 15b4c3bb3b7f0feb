#include "pathdyn/field.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <unordered_set>

#include "bytes.hpp"

namespace pathdyn {

namespace {

constexpr std::array<char, 4> kDatasetMagic{'V', 'F', '2', 'D'};

// Fractional grid coordinates this close to an integer are snapped onto it so
// that queries at node positions reproduce stored values exactly.
constexpr double kSnap = 1e-12;

double snap_fraction(double f) {
  if (f < kSnap) return 0.0;
  if (f > 1.0 - kSnap) return 1.0;
  return f;
}

// --- instrumentation -------------------------------------------------------

struct CounterRegistry {
  std::mutex mutex;
  std::unordered_set<std::atomic<std::uint64_t>*> live;
  std::uint64_t retired = 0;
  std::atomic<std::uint64_t> baseline{0};
};

CounterRegistry& registry() {
  static CounterRegistry r;
  return r;
}

struct ThreadCounter {
  std::atomic<std::uint64_t> value{0};
  ThreadCounter() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.live.insert(&value);
  }
  ~ThreadCounter() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.retired += value.load(std::memory_order_relaxed);
    r.live.erase(&value);
  }
};

inline void count_sample() {
  thread_local ThreadCounter counter;
  // Only the owning thread writes, so a relaxed load/store pair suffices.
  counter.value.store(counter.value.load(std::memory_order_relaxed) + 1,
                      std::memory_order_relaxed);
}

std::uint64_t total_samples() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::uint64_t total = r.retired;
  for (const auto* c : r.live) total += c->load(std::memory_order_relaxed);
  return total;
}

}  // namespace

std::uint64_t field_sample_count() {
  return total_samples() - registry().baseline.load();
}

void reset_field_sample_count() { registry().baseline.store(total_samples()); }

// --- hashing ---------------------------------------------------------------

std::string to_hex(const Fingerprint& fp) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : fp) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Fingerprint sha256(std::span<const std::uint8_t> bytes) {
  Fingerprint fp{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), fp.data(), &len, EVP_sha256(), nullptr);
  return fp;
}

namespace {

class Sha256Stream {
 public:
  Sha256Stream() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256Stream() { EVP_MD_CTX_free(ctx_); }
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  Fingerprint finish() {
    Fingerprint fp{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, fp.data(), &len);
    return fp;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

// --- GridSpec --------------------------------------------------------------

void GridSpec::validate() const {
  auto fail = [](const char* msg) { throw std::invalid_argument(std::string("GridSpec: ") + msg); };
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y)) fail("origin must be finite");
  if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !std::isfinite(spacing.x) ||
      !std::isfinite(spacing.y))
    fail("spacing must be positive and finite");
  if (nx < 2 || ny < 2) fail("nx and ny must be at least 2");
  if (nt < 2) fail("nt must be at least 2");
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !(t_min < t_max))
    fail("t_min must be less than t_max");
}

double GridSpec::frame_time(std::size_t k) const {
  if (k + 1 == nt) return t_max;
  return t_min + static_cast<double>(k) * time_step();
}

bool GridSpec::contains_point(Vec2 x) const {
  const Vec2 hi = extent_max();
  return x.x >= origin.x && x.x <= hi.x && x.y >= origin.y && x.y <= hi.y;
}

bool GridSpec::contains_time(double t) const {
  const double tol = 1e-9 * (t_max - t_min);
  return t >= t_min - tol && t <= t_max + tol;
}

GridSpec GridSpec::from_extent(Vec2 lo, Vec2 hi, std::uint32_t nx, std::uint32_t ny,
                               double t_min, double t_max, std::uint32_t nt) {
  GridSpec s;
  s.origin = lo;
  s.spacing = {(hi.x - lo.x) / (nx - 1.0), (hi.y - lo.y) / (ny - 1.0)};
  s.nx = nx;
  s.ny = ny;
  s.t_min = t_min;
  s.t_max = t_max;
  s.nt = nt;
  s.validate();
  return s;
}

// --- VectorField2D ---------------------------------------------------------

VectorField2D::VectorField2D(GridSpec spec, std::vector<float> data, Fingerprint fingerprint)
    : spec_(spec), data_(std::move(data)), fingerprint_(fingerprint) {
  spec_.validate();
  if (data_.size() != 2 * spec_.node_count() * spec_.nt)
    throw std::invalid_argument("VectorField2D: payload size does not match spec");
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); }))
    throw std::invalid_argument("VectorField2D: non-finite velocity component");
}

Mat2 VectorField2D::node_gradient(std::size_t k, std::size_t i, std::size_t j) const {
  const std::size_t nx = spec_.nx;
  const std::size_t ny = spec_.ny;

  auto derivative = [&](std::size_t idx, std::size_t n, double h, auto at) -> Vec2 {
    if (idx > 0 && idx + 1 < n) {
      return (1.0 / (2.0 * h)) * (at(idx + 1) - at(idx - 1));
    }
    if (n == 2) {
      return (1.0 / h) * (at(1) - at(0));
    }
    if (idx == 0) {
      return (1.0 / (2.0 * h)) * (-3.0 * at(0) + 4.0 * at(1) - at(2));
    }
    return (1.0 / (2.0 * h)) * (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3));
  };

  const Vec2 ddx = derivative(i, nx, spec_.spacing.x,
                              [&](std::size_t ii) { return node_velocity(k, ii, j); });
  const Vec2 ddy = derivative(j, ny, spec_.spacing.y,
                              [&](std::size_t jj) { return node_velocity(k, i, jj); });
  return {ddx.x, ddy.x, ddx.y, ddy.y};
}

bool VectorField2D::locate(Vec2 x, double t, Stencil& s) const {
  if (!spec_.contains_point(x) || !spec_.contains_time(t)) return false;

  const double gx = (x.x - spec_.origin.x) / spec_.spacing.x;
  const double gy = (x.y - spec_.origin.y) / spec_.spacing.y;
  const double gt = std::clamp((t - spec_.t_min) / spec_.time_step(), 0.0, spec_.nt - 1.0);

  s.i0 = std::min<std::size_t>(static_cast<std::size_t>(gx), spec_.nx - 2);
  s.j0 = std::min<std::size_t>(static_cast<std::size_t>(gy), spec_.ny - 2);
  s.k0 = std::min<std::size_t>(static_cast<std::size_t>(gt), spec_.nt - 2);
  s.fx = snap_fraction(gx - static_cast<double>(s.i0));
  s.fy = snap_fraction(gy - static_cast<double>(s.j0));
  s.ft = snap_fraction(gt - static_cast<double>(s.k0));
  s.k1 = s.k0 + 1;
  return true;
}

namespace {

template <class T>
T bilinear(const T& v00, const T& v10, const T& v01, const T& v11, double fx, double fy) {
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace

VelocitySample VectorField2D::sample(Vec2 x, double t) const {
  count_sample();
  VelocitySample out;
  Stencil s;
  if (!locate(x, t, s)) return out;
  out.inside = true;

  auto frame = [&](std::size_t k, Vec2& vel, Mat2& grad) {
    vel = bilinear(node_velocity(k, s.i0, s.j0), node_velocity(k, s.i0 + 1, s.j0),
                   node_velocity(k, s.i0, s.j0 + 1), node_velocity(k, s.i0 + 1, s.j0 + 1), s.fx,
                   s.fy);
    grad = bilinear(node_gradient(k, s.i0, s.j0), node_gradient(k, s.i0 + 1, s.j0),
                    node_gradient(k, s.i0, s.j0 + 1), node_gradient(k, s.i0 + 1, s.j0 + 1), s.fx,
                    s.fy);
  };

  Vec2 v0, v1;
  Mat2 g0, g1;
  frame(s.k0, v0, g0);
  if (s.ft == 0.0) {
    out.velocity = v0;
    out.gradient = g0;
    return out;
  }
  frame(s.k1, v1, g1);
  out.velocity = (1.0 - s.ft) * v0 + s.ft * v1;
  out.gradient = (1.0 - s.ft) * g0 + s.ft * g1;
  return out;
}

bool VectorField2D::velocity(Vec2 x, double t, Vec2& out) const {
  count_sample();
  Stencil s;
  if (!locate(x, t, s)) return false;
  auto frame = [&](std::size_t k) {
    return bilinear(node_velocity(k, s.i0, s.j0), node_velocity(k, s.i0 + 1, s.j0),
                    node_velocity(k, s.i0, s.j0 + 1), node_velocity(k, s.i0 + 1, s.j0 + 1), s.fx,
                    s.fy);
  };
  const Vec2 v0 = frame(s.k0);
  out = s.ft == 0.0 ? v0 : (1.0 - s.ft) * v0 + s.ft * frame(s.k1);
  return true;
}

// --- dataset files ---------------------------------------------------------

std::string_view to_string(DatasetErrc code) {
  switch (code) {
    case DatasetErrc::io: return "io";
    case DatasetErrc::bad_magic: return "bad_magic";
    case DatasetErrc::unsupported_version: return "unsupported_version";
    case DatasetErrc::malformed_header: return "malformed_header";
    case DatasetErrc::size_mismatch: return "size_mismatch";
    case DatasetErrc::non_finite: return "non_finite";
  }
  return "unknown";
}

std::uint64_t dataset_payload_bytes(const GridSpec& spec) {
  return std::uint64_t{spec.nt} * spec.ny * spec.nx * 2 * sizeof(float);
}

std::vector<std::uint8_t> encode_dataset_header(const GridSpec& spec) {
  detail::ByteWriter w;
  for (char c : kDatasetMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kDatasetVersion);
  w.put(spec.nx);
  w.put(spec.ny);
  w.put(spec.nt);
  w.put(spec.origin.x);
  w.put(spec.origin.y);
  w.put(spec.spacing.x);
  w.put(spec.spacing.y);
  w.put(spec.t_min);
  w.put(spec.t_max);
  return w.take();
}

GridSpec parse_dataset_header(std::span<const std::uint8_t> header) {
  if (header.size() < kDatasetHeaderBytes)
    throw DatasetError(DatasetErrc::malformed_header, "header shorter than 68 bytes");
  detail::ByteReader r(header);
  for (char c : kDatasetMagic) {
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c))
      throw DatasetError(DatasetErrc::bad_magic, "expected VF2D");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw DatasetError(DatasetErrc::unsupported_version, "version " + std::to_string(version));
  GridSpec spec;
  spec.nx = r.get<std::uint32_t>();
  spec.ny = r.get<std::uint32_t>();
  spec.nt = r.get<std::uint32_t>();
  spec.origin.x = r.get<double>();
  spec.origin.y = r.get<double>();
  spec.spacing.x = r.get<double>();
  spec.spacing.y = r.get<double>();
  spec.t_min = r.get<double>();
  spec.t_max = r.get<double>();
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw DatasetError(DatasetErrc::malformed_header, e.what());
  }
  return spec;
}

VectorField2D load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrc::io, "cannot open " + path.string());

  std::error_code ec;
  const std::uint64_t file_bytes = std::filesystem::file_size(path, ec);
  if (ec) throw DatasetError(DatasetErrc::io, "cannot stat " + path.string());

  std::vector<std::uint8_t> header(kDatasetHeaderBytes);
  in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  if (in.gcount() != static_cast<std::streamsize>(header.size()))
    throw DatasetError(DatasetErrc::malformed_header, "file shorter than header");
  const GridSpec spec = parse_dataset_header(header);

  const std::uint64_t payload = dataset_payload_bytes(spec);
  if (file_bytes != kDatasetHeaderBytes + payload) {
    throw DatasetError(DatasetErrc::size_mismatch,
                       "header declares " + std::to_string(payload) + " payload bytes, file has " +
                           std::to_string(file_bytes - kDatasetHeaderBytes));
  }

  Sha256Stream hash;
  hash.update(header.data(), header.size());

  std::vector<float> data(payload / sizeof(float));
  constexpr std::size_t kChunk = std::size_t{1} << 24;
  auto* bytes = reinterpret_cast<char*>(data.data());
  for (std::uint64_t off = 0; off < payload; off += kChunk) {
    const auto n = static_cast<std::streamsize>(std::min<std::uint64_t>(kChunk, payload - off));
    in.read(bytes + off, n);
    if (in.gcount() != n) throw DatasetError(DatasetErrc::size_mismatch, "payload truncated");
    hash.update(bytes + off, static_cast<std::size_t>(n));
  }

  const auto bad = std::find_if(data.begin(), data.end(), [](float v) { return !std::isfinite(v); });
  if (bad != data.end()) {
    throw DatasetError(DatasetErrc::non_finite,
                       "non-finite value at float index " + std::to_string(bad - data.begin()));
  }
  return VectorField2D(spec, std::move(data), hash.finish());
}

void save_dataset(const VectorField2D& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(DatasetErrc::io, "cannot create " + path.string());
  const auto header = encode_dataset_header(field.spec());
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  const auto data = field.data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw DatasetError(DatasetErrc::io, "write failed for " + path.string());
}

// --- analytic flows --------------------------------------------------------

FlowFunction analytic_flow(std::string_view name) {
  if (name == "constant") return [](Vec2, double) { return Vec2{1.0, 0.0}; };
  if (name == "rigid_rotation") return [](Vec2 p, double) { return Vec2{-p.y, p.x}; };
  if (name == "saddle") return [](Vec2 p, double) { return Vec2{p.x, -p.y}; };
  if (name == "double_gyre") {
    return [](Vec2 p, double t) {
      constexpr double A = 0.1;
      constexpr double eps = 0.25;
      constexpr double omega = 2.0 * std::numbers::pi / 10.0;
      constexpr double pi = std::numbers::pi;
      const double s = std::sin(omega * t);
      const double a = eps * s;
      const double b = 1.0 - 2.0 * eps * s;
      const double f = a * p.x * p.x + b * p.x;
      const double dfdx = 2.0 * a * p.x + b;
      return Vec2{-pi * A * std::sin(pi * f) * std::cos(pi * p.y),
                  pi * A * std::cos(pi * f) * std::sin(pi * p.y) * dfdx};
    };
  }
  throw std::invalid_argument("unknown analytic field: " + std::string(name));
}

VectorField2D rasterize(const GridSpec& spec, const FlowFunction& fn, std::string_view tag) {
  spec.validate();
  std::vector<float> data(2 * spec.node_count() * spec.nt);
  std::size_t idx = 0;
  for (std::size_t k = 0; k < spec.nt; ++k) {
    const double t = spec.frame_time(k);
    for (std::size_t j = 0; j < spec.ny; ++j) {
      for (std::size_t i = 0; i < spec.nx; ++i) {
        const Vec2 v = fn(spec.node(i, j), t);
        data[idx++] = static_cast<float>(v.x);
        data[idx++] = static_cast<float>(v.y);
      }
    }
  }
  detail::ByteWriter w;
  for (char c : tag) w.put(static_cast<std::uint8_t>(c));
  w.put_bytes(encode_dataset_header(spec));
  return VectorField2D(spec, std::move(data), sha256(w.bytes()));
}

VectorField2D make_analytic(std::string_view name, const GridSpec& spec) {
  return rasterize(spec, analytic_flow(name), name);
}

FlowFunction two_population_flow(const GridSpec& spec, double blend_width) {
  const Vec2 lo = spec.extent_min();
  const Vec2 hi = spec.extent_max();
  const double mid_x = 0.5 * (lo.x + hi.x);
  const double cy = 0.5 * (lo.y + hi.y);
  const Vec2 left_center{0.5 * (lo.x + mid_x), cy};
  const Vec2 right_center{0.5 * (mid_x + hi.x), cy};
  return [=](Vec2 p, double) {
    const Vec2 rot{-(p.y - left_center.y), p.x - left_center.x};
    const Vec2 sad{-(p.x - right_center.x), p.y - right_center.y};
    double w = 0.0;  // weight of the right population
    if (blend_width <= 0.0) {
      w = p.x < mid_x ? 0.0 : 1.0;
    } else {
      w = std::clamp((p.x - (mid_x - 0.5 * blend_width)) / blend_width, 0.0, 1.0);
    }
    return (1.0 - w) * rot + w * sad;
  };
}

VectorField2D make_two_population(const GridSpec& spec, double blend_width) {
  return rasterize(spec, two_population_flow(spec, blend_width),
                   "two_population:" + std::to_string(blend_width));
}

}  // namespace pathdyn
