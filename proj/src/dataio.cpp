#include "strata/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "strata/error.hpp"

namespace strata {

namespace {

constexpr std::uint32_t kCanonicalNanF32 = 0x7FC00000u;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  if (std::isnan(f)) bits = kCanonicalNanF32;
  put_u32(out, bits);
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  std::string buf;
  std::size_t pos = 0;
  std::string where;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw FormatError(where + ": truncated reading " + what + " at byte offset " +
                        std::to_string(pos));
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
};

Reader open_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  Reader r;
  r.buf.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  r.where = path;
  return r;
}

void write_all(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

Raster Raster::filled(std::uint32_t h, std::uint32_t w, double v) {
  Raster r;
  r.height = h;
  r.width = w;
  r.values.assign(static_cast<std::size_t>(h) * w, v);
  return r;
}

std::vector<std::uint8_t> Raster::valid_mask() const {
  std::vector<std::uint8_t> m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m[i] = std::isfinite(values[i]) ? 1 : 0;
  return m;
}

std::size_t Raster::valid_count() const {
  std::size_t n = 0;
  for (const double v : values) n += std::isfinite(v) ? 1 : 0;
  return n;
}

// ---- PCT1 ------------------------------------------------------------------

PointCloudTile read_tile(const std::string& path) {
  Reader r = open_all(path);
  r.need(4, "magic");
  if (r.buf.compare(0, 4, "PCT1") != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  r.pos = 4;
  const std::uint32_t n = r.u32("point count");
  if (n == 0) throw FormatError(path + ": empty tile");
  PointCloudTile t;
  t.x.reserve(n);
  t.y.reserve(n);
  t.z.reserve(n);
  t.r.reserve(n);
  t.g.reserve(n);
  t.b.reserve(n);
  t.intensity.reserve(n);
  t.label.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t rec_off = r.pos;
    float v[7];
    for (float& f : v) f = r.f32("point record");
    for (int j = 0; j < 3; ++j)
      if (!std::isfinite(v[j]))
        throw FormatError(path + ": non-finite coordinate at byte offset " +
                          std::to_string(rec_off + 4 * static_cast<std::size_t>(j)));
    const std::uint8_t label = r.u8("class label");
    if (label >= kNumPointClasses)
      throw FormatError(path + ": unknown class label " + std::to_string(label) +
                        " at byte offset " + std::to_string(r.pos - 1));
    t.x.push_back(v[0]);
    t.y.push_back(v[1]);
    t.z.push_back(v[2]);
    t.r.push_back(v[3]);
    t.g.push_back(v[4]);
    t.b.push_back(v[5]);
    t.intensity.push_back(v[6]);
    t.label.push_back(label);
  }
  return t;
}

void write_tile(const PointCloudTile& tile, const std::string& path) {
  std::string out = "PCT1";
  put_u32(out, static_cast<std::uint32_t>(tile.size()));
  for (std::size_t i = 0; i < tile.size(); ++i) {
    put_f32(out, static_cast<float>(tile.x[i]));
    put_f32(out, static_cast<float>(tile.y[i]));
    put_f32(out, static_cast<float>(tile.z[i]));
    put_f32(out, static_cast<float>(tile.r[i]));
    put_f32(out, static_cast<float>(tile.g[i]));
    put_f32(out, static_cast<float>(tile.b[i]));
    put_f32(out, static_cast<float>(tile.intensity[i]));
    out.push_back(static_cast<char>(tile.label[i]));
  }
  write_all(path, out);
}

// ---- RAS1 ------------------------------------------------------------------

Raster read_raster(const std::string& path) {
  Reader r = open_all(path);
  r.need(4, "magic");
  if (r.buf.compare(0, 4, "RAS1") != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  r.pos = 4;
  Raster out;
  out.height = r.u32("height");
  out.width = r.u32("width");
  if (out.height == 0 || out.width == 0) throw FormatError(path + ": zero raster dimension");
  out.origin_x = r.f64("origin_x");
  out.origin_y = r.f64("origin_y");
  out.cell_size = r.f64("cell_size");
  const std::size_t n = static_cast<std::size_t>(out.height) * out.width;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = r.f32("raster value");
  return out;
}

void write_raster(const Raster& raster, const std::string& path) {
  if (raster.values.size() != static_cast<std::size_t>(raster.height) * raster.width)
    throw DimensionError("write_raster: value count does not match dims");
  std::string out = "RAS1";
  put_u32(out, raster.height);
  put_u32(out, raster.width);
  put_f64(out, raster.origin_x);
  put_f64(out, raster.origin_y);
  put_f64(out, raster.cell_size);
  for (const double v : raster.values) put_f32(out, static_cast<float>(v));
  write_all(path, out);
}

// ---- stats file ------------------------------------------------------------

namespace {
const char* const kAttrNames[4] = {"r", "g", "b", "i"};
}

void write_stats(const NormStats& s, const std::string& path) {
  std::ostringstream out;
  out << "z_min=" << fmt17(s.z_min) << "\n";
  out << "z_max=" << fmt17(s.z_max) << "\n";
  for (int a = 0; a < 4; ++a)
    out << "attr_mean_" << kAttrNames[a] << "=" << fmt17(s.attr_mean[a]) << "\n";
  for (int a = 0; a < 4; ++a)
    out << "attr_std_" << kAttrNames[a] << "=" << fmt17(s.attr_std[a]) << "\n";
  out << "target_mean=" << fmt17(s.target_mean) << "\n";
  out << "target_std=" << fmt17(s.target_std) << "\n";
  out << "clip_low=" << fmt17(s.clip_low) << "\n";
  out << "clip_high=" << fmt17(s.clip_high) << "\n";
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c)
    out << "class_count_" << (c + 1) << "=" << fmt17(s.class_counts[c]) << "\n";
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c)
    out << "class_weight_" << (c + 1) << "=" << fmt17(s.class_weights[c]) << "\n";
  write_all(path, out.str());
}

NormStats read_stats(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::map<std::string, double> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  const auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(path + ": missing key " + key);
    return it->second;
  };
  NormStats s;
  s.z_min = get("z_min");
  s.z_max = get("z_max");
  for (int a = 0; a < 4; ++a) {
    s.attr_mean[a] = get(std::string("attr_mean_") + kAttrNames[a]);
    s.attr_std[a] = get(std::string("attr_std_") + kAttrNames[a]);
  }
  s.target_mean = get("target_mean");
  s.target_std = get("target_std");
  s.clip_low = get("clip_low");
  s.clip_high = get("clip_high");
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c) {
    s.class_counts[c] = get("class_count_" + std::to_string(c + 1));
    s.class_weights[c] = get("class_weight_" + std::to_string(c + 1));
  }
  return s;
}

// ---- preprocessing ---------------------------------------------------------

PointCloudTile normalize_tile(const PointCloudTile& tile, const NormStats& stats) {
  if (tile.size() == 0) throw DegenerateInputError("normalize_tile: empty tile");
  if (!(tile.extent > 0.0))
    throw DataError("normalize_tile: degenerate tile extent");
  if (!(stats.z_max > stats.z_min))
    throw DataError("normalize_tile: degenerate z range");
  PointCloudTile out = tile;
  const double inv_extent = 2.0 / tile.extent;
  const double inv_z = 1.0 / (stats.z_max - stats.z_min);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.x[i] = (tile.x[i] - tile.origin_x) * inv_extent - 1.0;
    out.y[i] = (tile.y[i] - tile.origin_y) * inv_extent - 1.0;
    out.z[i] = (tile.z[i] - stats.z_min) * inv_z;
  }
  const auto standardize = [](std::vector<double>& v, double mu, double sd) {
    for (double& a : v) a = (a - mu) / sd;
  };
  for (int a = 0; a < 4; ++a)
    if (!(stats.attr_std[a] > 0.0))
      throw DataError("normalize_tile: attribute std must be positive");
  standardize(out.r, stats.attr_mean[0], stats.attr_std[0]);
  standardize(out.g, stats.attr_mean[1], stats.attr_std[1]);
  standardize(out.b, stats.attr_mean[2], stats.attr_std[2]);
  standardize(out.intensity, stats.attr_mean[3], stats.attr_std[3]);
  out.normalized = true;
  out.standardized = true;
  return out;
}

Raster normalize_target(const Raster& raster, const NormStats& stats) {
  if (!(stats.target_std > 0.0))
    throw DataError("normalize_target: target std must be positive");
  Raster out = raster;
  for (double& v : out.values) {
    if (!std::isfinite(v)) continue;
    const double clipped = std::clamp(v, stats.clip_low, stats.clip_high);
    v = (clipped - stats.target_mean) / stats.target_std;
  }
  return out;
}

Raster denormalize_target(const Raster& raster, const NormStats& stats) {
  Raster out = raster;
  for (double& v : out.values) {
    if (!std::isfinite(v)) continue;
    v = v * stats.target_std + stats.target_mean;
  }
  return out;
}

int severity_class(double v_cm) {
  if (!std::isfinite(v_cm)) throw DataError("severity_class: non-finite value");
  if (v_cm > 1.6) return 0;
  if (v_cm > 1.0) return 1;
  if (v_cm > 0.5) return 2;
  if (v_cm > 0.2) return 3;
  if (v_cm >= -0.2) return 4;
  if (v_cm >= -1.0) return 5;
  return 6;
}

std::vector<int> discretize(const Raster& raster_cm) {
  std::vector<int> out(raster_cm.values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::isfinite(raster_cm.values[i]) ? severity_class(raster_cm.values[i]) : -1;
  return out;
}

std::array<double, kNumSeverityClasses> class_weights(
    const std::array<double, kNumSeverityClasses>& counts, WeightScheme scheme) {
  double max_count = 0.0;
  for (const double c : counts) max_count = std::max(max_count, c);
  if (max_count <= 0.0) {
    std::array<double, kNumSeverityClasses> w;
    w.fill(1.0);
    return w;
  }
  std::array<double, kNumSeverityClasses> w{};
  double max_w = 0.0;
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c) {
    if (counts[c] > 0.0) {
      const double ratio = max_count / counts[c];
      w[c] = scheme == WeightScheme::inv_square ? ratio * ratio : ratio;
      max_w = std::max(max_w, w[c]);
    }
  }
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c)
    if (counts[c] <= 0.0) w[c] = max_w;
  return w;
}

PointCloudTile cap_points(const PointCloudTile& tile, std::size_t max_n) {
  if (max_n == 0) throw DegenerateInputError("cap_points: max_n must be >= 1");
  const std::size_t n = tile.size();
  if (n <= max_n) return tile;

  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cx += tile.x[i];
    cy += tile.y[i];
    cz += tile.z[i];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  cz /= static_cast<double>(n);

  const auto dist2 = [&](std::size_t a, std::size_t b) {
    const double dx = tile.x[a] - tile.x[b];
    const double dy = tile.y[a] - tile.y[b];
    const double dz = tile.z[a] - tile.z[b];
    return dx * dx + dy * dy + dz * dz;
  };

  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = tile.x[i] - cx, dy = tile.y[i] - cy, dz = tile.z[i] - cz;
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best) {
      best = d2;
      seed = i;
    }
  }

  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[seed] = 1;
  for (std::size_t i = 0; i < n; ++i) mind[i] = dist2(i, seed);
  std::size_t selected = 1;
  while (selected < max_n) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (pick == n || mind[i] > mind[pick]) pick = i;
    }
    taken[pick] = 1;
    ++selected;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i]) mind[i] = std::min(mind[i], dist2(i, pick));
  }

  PointCloudTile out;
  out.origin_x = tile.origin_x;
  out.origin_y = tile.origin_y;
  out.extent = tile.extent;
  out.epoch = tile.epoch;
  out.normalized = tile.normalized;
  out.standardized = tile.standardized;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) continue;
    out.x.push_back(tile.x[i]);
    out.y.push_back(tile.y[i]);
    out.z.push_back(tile.z[i]);
    out.r.push_back(tile.r[i]);
    out.g.push_back(tile.g[i]);
    out.b.push_back(tile.b[i]);
    out.intensity.push_back(tile.intensity[i]);
    out.label.push_back(tile.label[i]);
  }
  return out;
}

void rotate_tile_quarter(PointCloudTile& tile, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  for (std::size_t i = 0; i < tile.size(); ++i) {
    const double x = tile.x[i], y = tile.y[i];
    switch (q) {
      case 1: tile.x[i] = -y; tile.y[i] = x; break;
      case 2: tile.x[i] = -x; tile.y[i] = -y; break;
      case 3: tile.x[i] = y; tile.y[i] = -x; break;
      default: break;
    }
  }
}

Raster rotate_raster_quarter(const Raster& raster, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  if (q == 0) return raster;
  if (raster.height != raster.width)
    throw DimensionError("rotate_raster_quarter: square raster required");
  const std::size_t h = raster.height;
  Raster out = raster;
  // One CCW quarter turn: the value at (row i, col j) moves to
  // (row j, col h-1-i), matching the point map (x,y) -> (-y,x).
  const auto rot1 = [h](const Raster& in) {
    Raster o = in;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < h; ++j) o.at(j, h - 1 - i) = in.at(i, j);
    return o;
  };
  for (int t = 0; t < q; ++t) out = rot1(out);
  return out;
}

void augment(PointCloudTile& tile, Raster& target, Rng& rng, double jitter_sigma) {
  if (!tile.normalized) throw DataError("augment: tile must be normalized");
  const int q = static_cast<int>(rng.next_below(4));
  rotate_tile_quarter(tile, q);
  target = rotate_raster_quarter(target, q);
  if (jitter_sigma > 0.0) {
    const double clip = 3.0 * jitter_sigma;
    const auto jitter = [&](double v) {
      const double j = std::clamp(rng.next_gaussian() * jitter_sigma, -clip, clip);
      return v + j;
    };
    for (std::size_t i = 0; i < tile.size(); ++i) {
      tile.x[i] = jitter(tile.x[i]);
      tile.y[i] = jitter(tile.y[i]);
      tile.z[i] = jitter(tile.z[i]);
    }
  }
}

SplitResult split_tiles(std::size_t tile_count) {
  SplitResult s;
  for (std::size_t i = 0; i < tile_count; ++i) {
    if (i % 5 == 0)
      s.eval.push_back(i);
    else
      s.train.push_back(i);
  }
  return s;
}

bool target_in_range(const Raster& raster_cm) {
  for (const double v : raster_cm.values) {
    if (!std::isfinite(v)) continue;
    if (std::abs(v) > 100.0) return false;
  }
  return true;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DegenerateInputError("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double rank = (p / 100.0) * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

NormStats compute_norm_stats(const std::vector<const PointCloudTile*>& train_tiles,
                             const std::vector<const Raster*>& train_targets) {
  if (train_tiles.empty() || train_targets.empty())
    throw DegenerateInputError("compute_norm_stats: empty training split");

  NormStats s;
  s.z_min = std::numeric_limits<double>::infinity();
  s.z_max = -std::numeric_limits<double>::infinity();
  double count = 0.0;
  std::array<double, 4> sum{}, sumsq{};
  for (const PointCloudTile* t : train_tiles) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      s.z_min = std::min(s.z_min, t->z[i]);
      s.z_max = std::max(s.z_max, t->z[i]);
      const double a[4] = {t->r[i], t->g[i], t->b[i], t->intensity[i]};
      for (int j = 0; j < 4; ++j) {
        sum[j] += a[j];
        sumsq[j] += a[j] * a[j];
      }
      count += 1.0;
    }
  }
  if (count == 0.0) throw DegenerateInputError("compute_norm_stats: no points");
  if (!(s.z_max > s.z_min)) throw DataError("compute_norm_stats: degenerate z range");
  for (int j = 0; j < 4; ++j) {
    s.attr_mean[j] = sum[j] / count;
    const double var = sumsq[j] / count - s.attr_mean[j] * s.attr_mean[j];
    s.attr_std[j] = std::sqrt(std::max(var, 0.0));
    if (!(s.attr_std[j] > 0.0))
      throw DataError("compute_norm_stats: constant attribute channel");
  }

  std::vector<double> targets;
  for (const Raster* r : train_targets)
    for (const double v : r->values)
      if (std::isfinite(v)) targets.push_back(v);
  if (targets.size() < 2) throw DegenerateInputError("compute_norm_stats: no valid target pixels");
  s.clip_low = percentile(targets, 1.0);
  s.clip_high = percentile(targets, 99.0);
  if (!(s.clip_low < s.clip_high)) throw DataError("compute_norm_stats: degenerate clip range");

  double tsum = 0.0, tsumsq = 0.0;
  s.class_counts.fill(0.0);
  for (double v : targets) {
    v = std::clamp(v, s.clip_low, s.clip_high);
    tsum += v;
    tsumsq += v * v;
    s.class_counts[static_cast<std::size_t>(severity_class(v))] += 1.0;
  }
  const double tn = static_cast<double>(targets.size());
  s.target_mean = tsum / tn;
  const double tvar = tsumsq / tn - s.target_mean * s.target_mean;
  s.target_std = std::sqrt(std::max(tvar, 0.0));
  if (!(s.target_std > 0.0)) throw DataError("compute_norm_stats: constant target");
  s.class_weights = class_weights(s.class_counts, WeightScheme::inv_freq);
  return s;
}

// ---- dataset directory -----------------------------------------------------

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ostringstream out;
  out << "# strata dataset manifest\n";
  out << "count=" << entries.size() << "\n";
  for (const ManifestEntry& e : entries) {
    out << "tile " << e.index << " " << (e.eval ? "eval" : "train") << " " << e.tile_path
        << " " << e.raster_path << " " << fmt17(e.origin_x) << " " << fmt17(e.origin_y)
        << " " << fmt17(e.extent) << " " << (e.epoch.empty() ? "-" : e.epoch) << "\n";
  }
  write_all(path, out.str());
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t expected = 0;
  bool have_count = false;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("count=", 0) == 0) {
      expected = static_cast<std::size_t>(std::stoull(line.substr(6)));
      have_count = true;
      continue;
    }
    std::istringstream ss(line);
    std::string tag, split;
    ManifestEntry e;
    ss >> tag >> e.index >> split >> e.tile_path >> e.raster_path >> e.origin_x >>
        e.origin_y >> e.extent >> e.epoch;
    if (!ss || tag != "tile" || (split != "train" && split != "eval"))
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed manifest line");
    e.eval = split == "eval";
    if (e.epoch == "-") e.epoch.clear();
    entries.push_back(std::move(e));
  }
  if (have_count && entries.size() != expected)
    throw FormatError(path + ": manifest count mismatch");
  return entries;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto entries = read_manifest((fs::path(dir) / "manifest.txt").string());
  if (entries.empty()) throw DataError("load_dataset: empty manifest in " + dir);
  Dataset ds;
  ds.stats = read_stats((fs::path(dir) / "stats.txt").string());
  ds.tiles.reserve(entries.size());
  ds.targets.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    PointCloudTile t = read_tile((fs::path(dir) / e.tile_path).string());
    t.origin_x = e.origin_x;
    t.origin_y = e.origin_y;
    t.extent = e.extent;
    t.epoch = e.epoch;
    Raster r = read_raster((fs::path(dir) / e.raster_path).string());
    if (!target_in_range(r))
      throw DataError("load_dataset: target exceeds +-1 m in tile " +
                      std::to_string(e.index));
    const std::size_t idx = ds.tiles.size();
    ds.tiles.push_back(std::move(t));
    ds.targets.push_back(std::move(r));
    if (e.eval)
      ds.eval_ids.push_back(idx);
    else
      ds.train_ids.push_back(idx);
  }
  return ds;
}

} // namespace strata
