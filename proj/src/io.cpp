#include "cstoc/io.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cstoc/rng.hpp"

namespace cstoc {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- binary layout helpers (little-endian host) ---

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void put_u64(std::string& out, std::uint64_t v) { put_bytes(out, &v, 8); }
void put_i32(std::string& out, std::int32_t v) { put_bytes(out, &v, 4); }
void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }
void put_u8(std::string& out, std::uint8_t v) { put_bytes(out, &v, 1); }

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

struct Reader {
  const char* p;
  const char* end;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) {
      throw SpecError("field image is truncated");
    }
  }
  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, p, n);
    p += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    raw(&v, 4);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1u << 20)) throw SpecError("field image carries an oversized string");
    need(n);
    std::string s(p, n);
    p += n;
    return s;
  }
};

constexpr char kMagic[8] = {'C', 'S', 'T', 'O', 'C', 'F', '0', '1'};

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  const std::filesystem::path dir = path.has_parent_path()
                                        ? path.parent_path()
                                        : std::filesystem::path(".");
  // A name unique to this process and content keeps concurrent writers from
  // clobbering each other's temporaries.
  const std::uint64_t tag =
      mix64(std::hash<std::string>{}(path.string()) ^ (std::uint64_t(::getpid()) << 32) ^
            bytes.size());
  const std::filesystem::path tmp =
      dir / (path.filename().string() + ".tmp." + std::to_string(tag));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SpecError("cannot open temporary file for " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw SpecError("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void Manifest::set_config(std::string key, std::string value) {
  for (auto& [k, v] : config_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  config_.emplace_back(std::move(key), std::move(value));
}

void Manifest::add_artifact(const std::filesystem::path& dir, const std::string& name,
                            std::string_view bytes) {
  write_file_atomic(dir / name, bytes);
  artifacts_.push_back({name, sha256_hex(bytes), bytes.size()});
}

std::string Manifest::to_text() const {
  std::string out;
  for (const auto& [k, v] : config_) {
    out += "# " + k + "=" + v + "\n";
  }
  for (const Artifact& a : artifacts_) {
    out += a.name + "\t" + a.hash + "\t" + std::to_string(a.bytes) + "\n";
  }
  return out;
}

void Manifest::write(const std::filesystem::path& dir) const {
  write_file_atomic(dir / "manifest.tsv", to_text());
}

std::string field_to_csv(const ValueField& field, const PolicyField* policy) {
  const Grid& g = field.grid;
  std::string out = "t,x1";
  if (g.has_m()) out += ",m";
  out += ",value,masked";
  if (policy != nullptr) {
    for (int i = 0; i < policy->u_dim; ++i) out += ",u" + std::to_string(i + 1);
    for (int i = 0; i < policy->a_dim; ++i) out += ",a" + std::to_string(i + 1);
  }
  out += "\n";

  for (int it = 0; it <= g.nt(); ++it) {
    const std::string ts = format_double(g.time.time(it));
    for (int ix = 0; ix < g.nx(); ++ix) {
      const std::string xs = format_double(g.x.at(ix));
      for (int im = 0; im < g.nm(); ++im) {
        out += ts;
        out += ',';
        out += xs;
        if (g.has_m()) {
          out += ',';
          out += format_double(g.m->at(im));
        }
        out += ',';
        out += format_double(field.at(it, ix, im));
        out += ',';
        out += field.is_masked(it, ix, im) ? '1' : '0';
        if (policy != nullptr) {
          const auto us = policy->u_at(it, ix, im);
          for (double u : us) {
            out += ',';
            out += format_double(u);
          }
          const auto as = policy->a_at(it, ix, im);
          for (double a : as) {
            out += ',';
            out += format_double(a);
          }
        }
        out += '\n';
      }
    }
  }
  return out;
}

std::string field_to_binary(const ValueField& field) {
  std::string out;
  out.reserve(64 + field.value.size() * 9);
  put_bytes(out, kMagic, sizeof(kMagic));
  const Grid& g = field.grid;
  put_f64(out, g.time.start());
  put_f64(out, g.time.end());
  put_i32(out, g.time.steps());
  put_f64(out, g.x.lo);
  put_f64(out, g.x.hi);
  put_i32(out, g.x.nodes);
  put_u8(out, g.has_m() ? 1 : 0);
  if (g.has_m()) {
    put_f64(out, g.m->lo);
    put_f64(out, g.m->hi);
    put_i32(out, g.m->nodes);
  }
  const FieldMetadata& md = field.meta;
  put_str(out, md.equation);
  put_f64(out, md.truncation_A);
  put_i32(out, md.u_resolution);
  put_i32(out, md.a_resolution);
  put_f64(out, md.discount);
  put_f64(out, md.mask_margin);
  put_i32(out, md.substeps);
  put_str(out, md.lateral);
  put_u8(out, md.log_x ? 1 : 0);
  put_i32(out, md.pure_m_span);
  put_str(out, md.mask_note);
  put_u64(out, field.value.size());
  put_bytes(out, field.value.data(), field.value.size() * sizeof(double));
  put_u64(out, field.masked.size());
  put_bytes(out, field.masked.data(), field.masked.size());
  return out;
}

ValueField field_from_binary(std::string_view bytes) {
  Reader r{bytes.data(), bytes.data() + bytes.size()};
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SpecError("not a field image (bad magic)");
  }
  const double t0 = r.f64();
  const double t1 = r.f64();
  const int steps = r.i32();
  Axis x;
  x.lo = r.f64();
  x.hi = r.f64();
  x.nodes = r.i32();
  const bool has_m = r.u8() != 0;
  Grid grid;
  if (has_m) {
    Axis m;
    m.lo = r.f64();
    m.hi = r.f64();
    m.nodes = r.i32();
    grid = Grid::make(TimeGrid(t0, t1, steps), x, m);
  } else {
    grid = Grid::make(TimeGrid(t0, t1, steps), x);
  }
  ValueField field = ValueField::zeros(grid);
  FieldMetadata& md = field.meta;
  md.equation = r.str();
  md.truncation_A = r.f64();
  md.u_resolution = r.i32();
  md.a_resolution = r.i32();
  md.discount = r.f64();
  md.mask_margin = r.f64();
  md.substeps = r.i32();
  md.lateral = r.str();
  md.log_x = r.u8() != 0;
  md.pure_m_span = r.i32();
  md.mask_note = r.str();

  const std::uint64_t nv = r.u64();
  if (nv != field.value.size()) throw SpecError("field image payload does not match its grid");
  r.raw(field.value.data(), nv * sizeof(double));
  const std::uint64_t nb = r.u64();
  if (nb != field.masked.size()) throw SpecError("field image mask does not match its grid");
  r.raw(field.masked.data(), nb);
  field.check_consistent();
  return field;
}

}  // namespace cstoc
