#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace protoseg {

/// N points with I channels each (row-major; channels 0..2 are XYZ in
/// meters) plus optional per-point instance and semantic labels. Label
/// vectors are either empty or exactly N long; -1 marks an unlabeled point.
struct PointCloud {
  std::size_t channels = 0;
  std::vector<double> data;
  std::vector<std::int32_t> instance;
  std::vector<std::int32_t> semantic;

  std::size_t size() const { return channels == 0 ? 0 : data.size() / channels; }
  bool has_instance() const { return !instance.empty(); }
  bool has_semantic() const { return !semantic.empty(); }

  const double* point(std::size_t i) const { return data.data() + i * channels; }
  double x(std::size_t i) const { return point(i)[0]; }
  double y(std::size_t i) const { return point(i)[1]; }
  double z(std::size_t i) const { return point(i)[2]; }

  /// Axis-aligned bounds of the first 3 channels.
  void bounds(double lo[3], double hi[3]) const;

  /// Throws FormatError if any documented invariant is violated.
  void validate() const;

  /// New cloud holding the selected points (labels subset along).
  PointCloud subset(std::span<const std::size_t> idx) const;
};

/// Binary cloud file: magic "PCL1", u8 flags (bit0 instance labels, bit1
/// semantic labels), u32 N, u32 I, N*I little-endian f32 channels, then
/// optional N i32 instance ids and optional N i32 semantic ids.
PointCloud read_cloud(const std::string& path);
void write_cloud(const PointCloud& cloud, const std::string& path);

/// Same format, operating on in-memory buffers (used by the fuzz tests).
PointCloud decode_cloud(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_cloud(const PointCloud& cloud);

}  // namespace protoseg
