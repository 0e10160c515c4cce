// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "visrssi/errors.hpp"

namespace visrssi {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("parameter file truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_parameters(const ParameterSet& params) {
  std::vector<std::uint8_t> out(std::begin(kParamMagic), std::end(kParamMagic));
  put<std::uint32_t>(out, kParamFormatVersion);
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.values()) put<double>(out, v);
  }
  return out;
}

void decode_parameters(const std::vector<std::uint8_t>& bytes, ParameterSet& params) {
  Reader r(bytes);
  if (r.get_string(sizeof(kParamMagic)) != std::string(kParamMagic, sizeof(kParamMagic)))
    throw FormatError("not a parameter file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kParamFormatVersion) throw FormatError("unsupported parameter file version " + std::to_string(version));
  const auto count = r.get<std::uint64_t>();
  std::map<std::string, Tensor> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.get_string(name_len);
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    Tensor t(shape);
    for (double& v : t.values()) v = r.get<double>();
    records.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after parameter records");
  if (records.size() != params.size()) {
    throw FormatError("parameter file holds " + std::to_string(records.size()) + " records, model expects " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = records.find(p.name);
    if (it == records.end()) throw FormatError("parameter file is missing " + p.name);
    if (!it->second.same_shape(p.value))
      throw FormatError("shape mismatch for " + p.name + ": file " + shape_string(it->second.shape()) + ", model " +
                        shape_string(p.value.shape()));
    p.value = it->second;
  }
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& params) {
  const auto bytes = encode_parameters(params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

void load_parameters(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  decode_parameters(bytes, params);
}

}  // namespace visrssi
