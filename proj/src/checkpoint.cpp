#include "protoseg/checkpoint.hpp"

#include <cmath>
#include <unordered_set>

#include "bytes.hpp"
#include "protoseg/errors.hpp"

namespace protoseg {

namespace {

constexpr std::uint32_t kMaxTensors = 1'000'000;
constexpr std::size_t kMaxRank = 8;
constexpr std::size_t kMaxElements = 200'000'000;

}  // namespace

std::vector<unsigned char> encode_checkpoint(std::span<const NamedTensor> tensors) {
  bytes::Writer w;
  w.raw("PSG1", 4);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.size() > 0xffff)
      throw FormatError("checkpoint: tensor name length " + std::to_string(name.size()) +
                        " unsupported");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.f64(v);
  }
  return std::move(w.buffer());
}

std::vector<NamedTensor> decode_checkpoint(std::span<const unsigned char> raw) {
  bytes::Reader r(raw);
  char magic[4];
  r.raw(magic, 4, "checkpoint magic");
  if (std::memcmp(magic, "PSG1", 4) != 0) throw FormatError("checkpoint: bad magic at byte 0");
  const std::uint32_t count = r.u32("tensor count");
  if (count == 0 || count > kMaxTensors) r.fail("checkpoint: implausible tensor count");

  std::vector<NamedTensor> out;
  out.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint32_t ti = 0; ti < count; ++ti) {
    const std::uint16_t name_len = r.u16("tensor name length");
    if (name_len == 0) r.fail("checkpoint: empty tensor name");
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len, "tensor name");
    for (unsigned char c : name)
      if (c < 0x20 || c > 0x7e) r.fail("checkpoint: non-printable tensor name");
    if (!seen.insert(name).second) r.fail("checkpoint: duplicate tensor '" + name + "'");

    const std::uint8_t rank = r.u8("tensor rank");
    if (rank == 0 || rank > kMaxRank) r.fail("checkpoint: rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t elems = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("tensor dims");
      if (dim == 0) r.fail("checkpoint: zero-sized dimension");
      shape[d] = dim;
      if (elems > kMaxElements / dim) r.fail("checkpoint: element count overflow");
      elems *= dim;
    }
    std::vector<double> values(elems);
    for (std::size_t i = 0; i < elems; ++i) {
      values[i] = r.f64("tensor payload");
      if (!std::isfinite(values[i])) r.fail("checkpoint: non-finite value in '" + name + "'");
    }
    out.emplace_back(std::move(name), Tensor::from(std::move(values), std::move(shape)));
  }
  if (!r.done()) r.fail("checkpoint: trailing bytes");
  return out;
}

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors) {
  bytes::write_file(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(bytes::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

const Tensor* find_tensor(std::span<const NamedTensor> tensors, const std::string& name) {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void load_into(std::span<const NamedTensor> params, std::span<const NamedTensor> loaded) {
  for (const auto& [name, t] : params) {
    const Tensor* src = find_tensor(loaded, name);
    if (!src) throw FormatError("checkpoint: missing tensor '" + name + "'");
    if (src->shape() != t.shape())
      throw FormatError("checkpoint: tensor '" + name + "' has shape " +
                        shape_string(src->shape()) + ", expected " + shape_string(t.shape()));
    Tensor dst = t;
    std::copy(src->values().begin(), src->values().end(), dst.mutable_values().begin());
  }
}

}  // namespace protoseg
