#include "pathdyn/simfield.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "bytes.hpp"
#include "pathdyn/parallel.hpp"
#include "pathdyn/wire.hpp"

namespace pathdyn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kBlock = 256;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::size_t DivergenceField::argmax() const {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  return best;
}

DivergenceField similarity_field(std::span<const DynamicsView> records, const GridSpec& seeds,
                                 const Region& region, const BinningPolicy& policy,
                                 SimilarityTiming* timing) {
  policy.validate();
  if (records.size() != seeds.node_count())
    throw std::invalid_argument("similarity_field: record count does not match the seed layout");

  auto start = std::chrono::steady_clock::now();
  const DynHistogram reference = reference_distribution(records, region, policy);
  if (timing != nullptr) timing->reference_ms = elapsed_ms(start);

  start = std::chrono::steady_clock::now();
  DivergenceField out;
  out.spec = seeds;
  out.query.region = region;
  out.query.policy = policy;
  out.values.assign(records.size(), kNaN);

  const std::size_t blocks = (records.size() + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t block) {
    BinCounts counts(policy.n);
    std::vector<double> bins(policy.total_bins());
    const std::size_t end = std::min(records.size(), (block + 1) * kBlock);
    for (std::size_t s = block * kBlock; s < end; ++s) {
      const DynamicsView& r = records[s];
      if (r.valid_count == 0) continue;
      std::fill(counts.alpha.begin(), counts.alpha.end(), 0);
      std::fill(counts.beta.begin(), counts.beta.end(), 0);
      counts.alpha_total = counts.beta_total = 0;
      counts.add(r, policy);
      normalize_into(counts, bins);
      out.values[s] = jsd(bins, reference.bins) / std::numbers::ln2;
    }
  });
  if (timing != nullptr) timing->field_ms = elapsed_ms(start);
  return out;
}

DivergenceField similarity_field(const DynamicsCache& cache, const Region& region,
                                 const BinningPolicy& policy, SimilarityTiming* timing) {
  DivergenceField f =
      similarity_field(cache.records(), cache.header().seeds, region, policy, timing);
  f.query.params = cache.header().params;
  f.query.field_fingerprint = cache.header().field_fingerprint;
  return f;
}

// --- colormaps ---------------------------------------------------------------

Colormap parse_colormap(std::string_view name) {
  if (name == "viridis") return Colormap::viridis;
  if (name == "grayscale") return Colormap::grayscale;
  if (name == "diverging") return Colormap::diverging;
  throw std::invalid_argument("unknown colormap \"" + std::string(name) + "\"");
}

std::string_view to_string(Colormap cmap) {
  switch (cmap) {
    case Colormap::viridis: return "viridis";
    case Colormap::grayscale: return "grayscale";
    case Colormap::diverging: return "diverging";
  }
  return "unknown";
}

namespace {

struct Anchor {
  double r, g, b;
};

// Viridis sampled at 0, 1/4, 1/2, 3/4, 1.
constexpr std::array<Anchor, 5> kViridis{{{0x44, 0x01, 0x54},
                                          {0x3b, 0x52, 0x8b},
                                          {0x21, 0x91, 0x8c},
                                          {0x5e, 0xc9, 0x62},
                                          {0xfd, 0xe7, 0x25}}};
// Blue - light gray - red.
constexpr std::array<Anchor, 3> kDiverging{{{0x3b, 0x4c, 0xc0}, {0xdd, 0xdd, 0xdd}, {0xb4, 0x04, 0x26}}};

template <std::size_t N>
Rgb piecewise(const std::array<Anchor, N>& anchors, double u) {
  const double pos = u * static_cast<double>(N - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), N - 2);
  const double f = pos - static_cast<double>(i);
  auto mix = [&](double a, double b) {
    return static_cast<std::uint8_t>(std::lround(a + f * (b - a)));
  };
  return {mix(anchors[i].r, anchors[i + 1].r), mix(anchors[i].g, anchors[i + 1].g),
          mix(anchors[i].b, anchors[i + 1].b)};
}

}  // namespace

Rgb map_color(Colormap cmap, double v, double lo, double hi) {
  if (!std::isfinite(v)) return kMaskColor;
  const double u = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  switch (cmap) {
    case Colormap::grayscale: {
      const auto g = static_cast<std::uint8_t>(std::lround(u * 255.0));
      return {g, g, g};
    }
    case Colormap::viridis: return piecewise(kViridis, u);
    case Colormap::diverging: return piecewise(kDiverging, u);
  }
  return kMaskColor;
}

RgbImage colorize(std::span<const double> values, std::size_t nx, std::size_t ny, Colormap cmap,
                  double lo, double hi) {
  if (values.size() != nx * ny) throw std::invalid_argument("colorize: size mismatch");
  RgbImage img;
  img.width = nx;
  img.height = ny;
  img.pixels.resize(nx * ny);
  for (std::size_t row = 0; row < ny; ++row) {
    const std::size_t j = ny - 1 - row;
    for (std::size_t i = 0; i < nx; ++i) img.pixels[row * nx + i] = map_color(cmap, values[j * nx + i], lo, hi);
  }
  return img;
}

// --- PNG ---------------------------------------------------------------------

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  static_assert(sizeof(Rgb) == 3);
  const void* pixels = image.pixels.data();
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, pixels, 0, nullptr))
    throw std::runtime_error(std::string("png encode: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr))
    throw std::runtime_error(std::string("png encode: ") + img.message);
  out.resize(size);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  RgbImage out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(out.width * out.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  png_image_free(&img);
  return out;
}

RgbImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void render(const DivergenceField& field, Colormap cmap, const std::filesystem::path& out) {
  write_png(colorize(field.values, field.spec.nx, field.spec.ny, cmap), out);
}

// --- scalar field files ------------------------------------------------------

namespace {
constexpr std::array<char, 4> kScalarMagic{'S', 'F', '2', 'D'};
}

void write_scalar_field(const std::filesystem::path& path, std::uint32_t nx, std::uint32_t ny,
                        std::span<const double> values) {
  if (values.size() != std::size_t{nx} * ny)
    throw std::invalid_argument("write_scalar_field: size mismatch");
  detail::ByteWriter w;
  for (char c : kScalarMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kScalarFieldVersion);
  w.put(nx);
  w.put(ny);
  for (double v : values) w.put(std::isfinite(v) ? static_cast<float>(v) : std::numeric_limits<float>::quiet_NaN());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ScalarGrid read_scalar_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes);
  try {
    for (char c : kScalarMagic)
      if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c))
        throw std::runtime_error("not an SF2D file: " + path.string());
    const auto version = r.get<std::uint32_t>();
    if (version != kScalarFieldVersion)
      throw std::runtime_error("unsupported SF2D version " + std::to_string(version));
    ScalarGrid g;
    g.nx = r.get<std::uint32_t>();
    g.ny = r.get<std::uint32_t>();
    const std::size_t count = std::size_t{g.nx} * g.ny;
    if (bytes.size() != 16 + count * sizeof(float))
      throw std::runtime_error("SF2D payload size mismatch: " + path.string());
    g.values.resize(count);
    for (auto& v : g.values) v = r.get<float>();
    return g;
  } catch (const std::out_of_range&) {
    throw std::runtime_error("truncated SF2D file: " + path.string());
  }
}

std::filesystem::path provenance_path(const std::filesystem::path& field_path) {
  auto p = field_path;
  p += ".json";
  return p;
}

void export_field(const DivergenceField& field, const std::filesystem::path& out) {
  write_scalar_field(out, field.spec.nx, field.spec.ny, field.values);
  const nlohmann::json meta{{"format", "SF2D"},
                            {"version", kScalarFieldVersion},
                            {"quantity", "normalized_jsd"},
                            {"seeds", field.spec},
                            {"query", field.query}};
  std::ofstream side(provenance_path(out), std::ios::trunc);
  side << meta.dump(2) << '\n';
  if (!side) throw std::runtime_error("cannot write " + provenance_path(out).string());
}

QueryProvenance read_provenance(const std::filesystem::path& field_path) {
  std::ifstream in(provenance_path(field_path));
  if (!in) throw std::runtime_error("cannot open " + provenance_path(field_path).string());
  const auto meta = nlohmann::json::parse(in);
  return meta.at("query").get<QueryProvenance>();
}

}  // namespace pathdyn
