#ifndef LSMBD_IO_HPP
#define LSMBD_IO_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lsmbd/errors.hpp"
#include "lsmbd/matrix.hpp"

namespace lsmbd {

static_assert(std::endian::native == std::endian::little,
              "array container assumes a little-endian host");

// Binary array container shared by datasets and checkpoints:
//
//   bytes 0-7   magic "LSMBDAF1"
//   u32         container version (1)
//   u32         metadata count, then per entry: u32 key length, key bytes,
//               u32 value length, value bytes (UTF-8)
//   u32         array count, then per array: u32 name length, name bytes,
//               u32 ndim, u64 shape[ndim]
//   payload     per array, in declaration order: prod(shape) float64 values,
//               little-endian IEEE-754, column-major for 2-D arrays
//
// All integers are little-endian fixed width. Writing the same content twice
// produces byte-identical files.
struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t elements() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
};

struct ArrayFile {
  static constexpr char kMagic[8] = {'L', 'S', 'M', 'B', 'D', 'A', 'F', '1'};
  static constexpr std::uint32_t kVersion = 1;

  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedArray> arrays;

  void set_meta(const std::string& key, const std::string& value) {
    for (auto& kv : meta)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    meta.emplace_back(key, value);
  }

  const std::string* find_meta(const std::string& key) const {
    for (const auto& kv : meta)
      if (kv.first == key) return &kv.second;
    return nullptr;
  }

  std::string meta_or_throw(const std::string& key) const {
    const std::string* v = find_meta(key);
    if (v == nullptr) throw IoError("array file: missing metadata key '" + key + "'");
    return *v;
  }

  void add_array(std::string name, std::vector<std::size_t> shape,
                 std::vector<double> data) {
    NamedArray arr{std::move(name), std::move(shape), std::move(data)};
    if (arr.elements() != arr.data.size())
      throw DimensionError("array file: shape does not match data size for '" +
                           arr.name + "'");
    arrays.push_back(std::move(arr));
  }

  void add_matrix(const std::string& name, const Matrix& m) {
    add_array(name, {m.rows, m.cols}, m.data);
  }

  void add_vector(const std::string& name, const std::vector<double>& v) {
    add_array(name, {v.size()}, v);
  }

  const NamedArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }

  const NamedArray& get(const std::string& name) const {
    const NamedArray* a = find(name);
    if (a == nullptr) throw IoError("array file: missing array '" + name + "'");
    return *a;
  }

  Matrix get_matrix(const std::string& name) const {
    const NamedArray& a = get(name);
    if (a.shape.size() != 2)
      throw IoError("array file: '" + name + "' is not two-dimensional");
    Matrix m(a.shape[0], a.shape[1]);
    m.data = a.data;
    return m;
  }

  std::vector<double> get_vector(const std::string& name) const {
    const NamedArray& a = get(name);
    if (a.shape.size() != 1)
      throw IoError("array file: '" + name + "' is not one-dimensional");
    return a.data;
  }

  void save(const std::filesystem::path& path) const;
  static ArrayFile load(const std::filesystem::path& path);
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

}  // namespace detail

inline void ArrayFile::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  detail::put_u32(os, kVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    detail::put_str(os, k);
    detail::put_str(os, v);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    detail::put_str(os, a.name);
    detail::put_u32(os, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) detail::put_u64(os, d);
  }
  for (const auto& a : arrays)
    os.write(reinterpret_cast<const char*>(a.data.data()),
             static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  if (!os) throw IoError("write failed: " + path.string());
}

inline ArrayFile ArrayFile::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("not an array container: " + path.string());
  const std::uint32_t version = detail::get_u32(is);
  if (version != kVersion)
    throw IoError("unsupported container version " + std::to_string(version) +
                  " in " + path.string());
  ArrayFile f;
  const std::uint32_t nmeta = detail::get_u32(is);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = detail::get_str(is);
    std::string v = detail::get_str(is);
    f.meta.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t narr = detail::get_u32(is);
  f.arrays.resize(narr);
  for (std::uint32_t i = 0; i < narr; ++i) {
    f.arrays[i].name = detail::get_str(is);
    const std::uint32_t ndim = detail::get_u32(is);
    f.arrays[i].shape.resize(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d)
      f.arrays[i].shape[d] = static_cast<std::size_t>(detail::get_u64(is));
  }
  for (auto& a : f.arrays) {
    a.data.resize(a.elements());
    is.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!is) throw IoError("truncated array container: " + path.string());
  return f;
}

// Deterministic numeric formatting: shortest round-trip representation.
inline std::string format_double(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char ibuf[32];
    std::snprintf(ibuf, sizeof ibuf, "%.0f", v);
    return ibuf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // tighten when a shorter form round-trips exactly
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

struct CsvWriter {
  std::ofstream os;
  std::size_t n_cols = 0;
  std::size_t col = 0;

  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : os(path, std::ios::trunc), n_cols(header.size()) {
    if (!os) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i > 0) os << ',';
      os << header[i];
    }
    os << '\n';
  }

  CsvWriter& field(const std::string& s) {
    if (col > 0) os << ',';
    os << s;
    if (++col == n_cols) {
      os << '\n';
      col = 0;
    }
    return *this;
  }
  CsvWriter& field(double v) { return field(std::isnan(v) ? std::string() : format_double(v)); }
  CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }
  CsvWriter& field(long v) { return field(std::to_string(v)); }
  CsvWriter& field(int v) { return field(std::to_string(v)); }
  CsvWriter& field(bool v) { return field(std::string(v ? "1" : "0")); }
};

}  // namespace lsmbd

#endif  // LSMBD_IO_HPP
