#include "protoseg/cloud.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "bytes.hpp"
#include "protoseg/errors.hpp"

namespace protoseg {

namespace {

constexpr std::uint8_t kFlagInstance = 0x01;
constexpr std::uint8_t kFlagSemantic = 0x02;
constexpr std::size_t kMaxPoints = 50'000'000;
constexpr std::size_t kMaxChannels = 4096;
constexpr std::size_t kMaxCells = 200'000'000;

bool fits_f32(double v) {
  return std::isfinite(v) && std::abs(v) <= double(std::numeric_limits<float>::max());
}

}  // namespace

namespace bytes {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError("read failed on " + path);
  return buf;
}

void write_file(const std::string& path, std::span<const unsigned char> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("write failed on " + path);
}

}  // namespace bytes

void PointCloud::bounds(double lo[3], double hi[3]) const {
  const std::size_t n = size();
  for (int c = 0; c < 3; ++c) {
    lo[c] = std::numeric_limits<double>::infinity();
    hi[c] = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = point(i);
    for (int c = 0; c < 3; ++c) {
      if (p[c] < lo[c]) lo[c] = p[c];
      if (p[c] > hi[c]) hi[c] = p[c];
    }
  }
}

void PointCloud::validate() const {
  if (channels < 3) throw FormatError("cloud: needs at least 3 channels (XYZ)");
  if (data.empty() || data.size() % channels != 0)
    throw FormatError("cloud: " + std::to_string(data.size()) +
                      " values do not form points of " + std::to_string(channels) + " channels");
  const std::size_t n = size();
  for (double v : data)
    if (!fits_f32(v)) throw FormatError("cloud: non-finite or out-of-range channel value");
  for (const auto* labels : {&instance, &semantic}) {
    if (labels->empty()) continue;
    if (labels->size() != n)
      throw FormatError("cloud: " + std::to_string(labels->size()) + " labels for " +
                        std::to_string(n) + " points");
    for (std::int32_t v : *labels)
      if (v < -1 || (v >= 0 && static_cast<std::size_t>(v) >= n))
        throw FormatError("cloud: label " + std::to_string(v) + " outside [-1, N)");
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> idx) const {
  PointCloud out;
  out.channels = channels;
  out.data.reserve(idx.size() * channels);
  for (std::size_t i : idx)
    out.data.insert(out.data.end(), point(i), point(i) + channels);
  if (has_instance()) {
    out.instance.reserve(idx.size());
    for (std::size_t i : idx) out.instance.push_back(instance[i]);
  }
  if (has_semantic()) {
    out.semantic.reserve(idx.size());
    for (std::size_t i : idx) out.semantic.push_back(semantic[i]);
  }
  return out;
}

PointCloud decode_cloud(std::span<const unsigned char> raw) {
  bytes::Reader r(raw);
  char magic[4];
  r.raw(magic, 4, "cloud magic");
  if (std::memcmp(magic, "PCL1", 4) != 0) throw FormatError("cloud: bad magic at byte 0");
  const std::uint8_t flags = r.u8("cloud flags");
  if (flags & ~(kFlagInstance | kFlagSemantic)) r.fail("cloud: unknown flag bits");
  const std::uint32_t n = r.u32("point count");
  const std::uint32_t ch = r.u32("channel count");
  if (n == 0) r.fail("cloud: zero points");
  if (ch < 3) r.fail("cloud: fewer than 3 channels");
  if (n > kMaxPoints || ch > kMaxChannels ||
      static_cast<std::size_t>(n) * ch > kMaxCells)
    r.fail("cloud: N*I overflows the supported size");

  PointCloud cloud;
  cloud.channels = ch;
  cloud.data.resize(static_cast<std::size_t>(n) * ch);
  for (std::size_t i = 0; i < cloud.data.size(); ++i) {
    const float v = r.f32("channel data");
    if (!std::isfinite(v)) r.fail("cloud: non-finite channel value");
    cloud.data[i] = v;
  }
  if (flags & kFlagInstance) {
    cloud.instance.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::int32_t v = r.i32("instance labels");
      if (v < -1 || (v >= 0 && static_cast<std::uint32_t>(v) >= n))
        r.fail("cloud: instance label " + std::to_string(v) + " outside [-1, N)");
      cloud.instance[i] = v;
    }
  }
  if (flags & kFlagSemantic) {
    cloud.semantic.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::int32_t v = r.i32("semantic labels");
      if (v < -1 || (v >= 0 && static_cast<std::uint32_t>(v) >= n))
        r.fail("cloud: semantic label " + std::to_string(v) + " outside [-1, N)");
      cloud.semantic[i] = v;
    }
  }
  if (!r.done()) r.fail("cloud: trailing bytes");
  return cloud;
}

std::vector<unsigned char> encode_cloud(const PointCloud& cloud) {
  cloud.validate();
  bytes::Writer w;
  w.raw("PCL1", 4);
  std::uint8_t flags = 0;
  if (cloud.has_instance()) flags |= kFlagInstance;
  if (cloud.has_semantic()) flags |= kFlagSemantic;
  w.u8(flags);
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  w.u32(static_cast<std::uint32_t>(cloud.channels));
  for (double v : cloud.data) w.f32(static_cast<float>(v));
  for (std::int32_t v : cloud.instance) w.i32(v);
  for (std::int32_t v : cloud.semantic) w.i32(v);
  return std::move(w.buffer());
}

PointCloud read_cloud(const std::string& path) {
  try {
    return decode_cloud(bytes::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
  bytes::write_file(path, encode_cloud(cloud));
}

}  // namespace protoseg
