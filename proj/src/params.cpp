#include "strata/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "strata/error.hpp"

namespace strata {

DenseArray& ParameterStore::create(const std::string& name,
                                   std::vector<std::size_t> shape) {
  if (entries_.count(name))
    throw ConfigError("parameter already exists: " + name);
  Entry e;
  e.value = DenseArray::zeros(shape);
  e.grad = DenseArray::zeros(shape);
  e.m = DenseArray::zeros(shape);
  e.v = DenseArray::zeros(std::move(shape));
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

DenseArray& ParameterStore::create_linear_weight(const std::string& name,
                                                 std::size_t fan_in,
                                                 std::size_t fan_out,
                                                 std::uint64_t seed) {
  DenseArray& w = create(name, {fan_in, fan_out});
  Rng rng(Rng::derive(seed, name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

DenseArray& ParameterStore::create_conv3x3_weight(const std::string& name,
                                                  std::size_t cin,
                                                  std::size_t cout,
                                                  std::uint64_t seed) {
  DenseArray& w = create(name, {3, 3, cin, cout});
  Rng rng(Rng::derive(seed, name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(9 * cin));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

DenseArray& ParameterStore::create_zeros(const std::string& name, std::size_t n) {
  return create(name, {n});
}

DenseArray& ParameterStore::create_ones(const std::string& name, std::size_t n) {
  DenseArray& a = create(name, {n});
  a.fill(1.0);
  return a;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

void ParameterStore::scale_grads(double s) {
  for (auto& [name, e] : entries_)
    for (double& g : e.grad.data) g *= s;
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

void adamw_step(ParameterStore& store, const AdamWConfig& cfg) {
  store.set_step_count(store.step_count() + 1);
  const double t = static_cast<double>(store.step_count());
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      const double g = e.grad.data[i];
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m.data[i] / bc1;
      const double vhat = e.v.data[i] / bc2;
      e.value.data[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                                   cfg.weight_decay * e.value.data[i]);
    }
    e.grad.fill(0.0);
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string where;

  bool eof() const { return pos >= buf.size(); }
  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size())
      throw FormatError(where + ": truncated reading " + what + " at byte offset " +
                        std::to_string(pos));
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
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
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void append_entry(std::string& out, const std::string& name, const DenseArray& a) {
  if (name.size() > 0xFFFF) throw IoError("checkpoint entry name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  if (a.rank() > 0xFF) throw IoError("checkpoint entry rank too large");
  out.push_back(static_cast<char>(a.rank()));
  for (const std::size_t d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (const double v : a.data) put_f64(out, v);
}

} // namespace

void save_checkpoint(const ParameterStore& store, const std::string& path,
                     bool include_optimizer_state) {
  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  for (const auto& [name, e] : store.entries()) append_entry(out, name, e.value);
  if (include_optimizer_state) {
    for (const auto& [name, e] : store.entries()) {
      append_entry(out, "__opt.m." + name, e.m);
      append_entry(out, "__opt.v." + name, e.v);
    }
    append_entry(out, "__opt.step",
                 DenseArray::scalar(static_cast<double>(store.step_count())));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

void load_checkpoint(ParameterStore& store, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  r.pos = 4;
  const std::uint16_t ver = r.u16("version");
  if (ver != kVersion)
    throw FormatError(path + ": unsupported format version " + std::to_string(ver));
  while (!r.eof()) {
    const std::uint16_t nlen = r.u16("name length");
    const std::string name = r.bytes(nlen, "name");
    const std::uint8_t rank = r.u8("rank");
    std::vector<std::size_t> shape;
    shape.reserve(rank);
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const std::uint32_t d = r.u32("dim");
      if (d == 0) throw FormatError(path + ": zero dimension in entry " + name);
      shape.push_back(d);
      numel *= d;
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64("payload");
    DenseArray arr(std::move(shape), std::move(data));

    if (name == "__opt.step") {
      store.set_step_count(static_cast<std::uint64_t>(arr.data[0]));
    } else if (name.rfind("__opt.m.", 0) == 0) {
      auto& e = store.entry(name.substr(8));
      if (!e.m.same_shape(arr)) throw FormatError(path + ": moment shape mismatch for " + name);
      e.m = std::move(arr);
    } else if (name.rfind("__opt.v.", 0) == 0) {
      auto& e = store.entry(name.substr(8));
      if (!e.v.same_shape(arr)) throw FormatError(path + ": moment shape mismatch for " + name);
      e.v = std::move(arr);
    } else {
      if (store.has(name)) {
        auto& e = store.entry(name);
        if (!e.value.same_shape(arr))
          throw FormatError(path + ": shape mismatch for " + name + ": file " +
                            shape_str(arr.shape) + " vs store " + shape_str(e.value.shape));
        e.value = std::move(arr);
      } else {
        store.create(name, arr.shape);
        store.value(name) = std::move(arr);
      }
    }
  }
}

} // namespace strata
