#pragma once

// Single-file NIfTI-1 (.nii / .nii.gz) reading and writing.
//
// Writes are always little-endian with a 348-byte header, an empty 4-byte
// extension block and voxel data at offset 352. Labels and masks are stored
// as uint8, intensities as float32. Reads accept either byte order and the
// common integer and floating datatypes.

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "chdseg/volume.hpp"

namespace chdseg {

namespace nifti_type {
inline constexpr std::int16_t kUInt8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kInt32 = 8;
inline constexpr std::int16_t kFloat32 = 16;
inline constexpr std::int16_t kFloat64 = 64;
inline constexpr std::int16_t kInt8 = 256;
inline constexpr std::int16_t kUInt16 = 512;
inline constexpr std::int16_t kUInt32 = 768;
}  // namespace nifti_type

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiDataOffset = 352;

struct NiftiHeader {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = static_cast<float>(kNiftiDataOffset);
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 3> quatern{};
  std::array<float, 3> qoffset{};
  std::array<std::array<float, 4>, 3> srow{};
  std::uint8_t xyzt_units = 0;
  std::array<char, 4> magic{'n', '+', '1', '\0'};
  bool big_endian = false;

  Dims dims() const { return {dim[1], dim[2], dim[3]}; }
  VoxelSpacing spacing() const { return {pixdim[1], pixdim[2], pixdim[3]}; }
  Vec3 origin() const {
    if (sform_code > 0) return {srow[0][3], srow[1][3], srow[2][3]};
    if (qform_code > 0) return {qoffset[0], qoffset[1], qoffset[2]};
    return {};
  }
  bool integer_type() const {
    using namespace nifti_type;
    return datatype == kUInt8 || datatype == kInt8 || datatype == kInt16 || datatype == kUInt16 ||
           datatype == kInt32 || datatype == kUInt32;
  }
};

namespace detail {

inline std::size_t nifti_type_size(std::int16_t t) {
  using namespace nifti_type;
  switch (t) {
    case kUInt8:
    case kInt8: return 1;
    case kInt16:
    case kUInt16: return 2;
    case kInt32:
    case kUInt32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

inline bool is_gzip(const std::string& bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

inline std::string gunzip(const std::string& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error("nifti: zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::string out;
  char chunk[1 << 16];
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(chunk);
    zs.avail_out = sizeof(chunk);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error("nifti: corrupt gzip stream");
    }
    out.append(chunk, sizeof(chunk) - zs.avail_out);
  } while (ret != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (ret != Z_STREAM_END) throw Error("nifti: truncated gzip stream");
  return out;
}

inline std::string gzip(const std::string& in) {
  z_stream zs{};
  // windowBits 16+15 writes a gzip wrapper with mtime 0, so output is reproducible
  if (deflateInit2(&zs, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("nifti: zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int ret = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (ret != Z_STREAM_END) throw Error("nifti: gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class ByteReader {
public:
  ByteReader(const std::string& b, bool swap) : bytes_(b), swap_(swap) {}
  template <typename T>
  T at(std::size_t off) const {
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + off, sizeof(T));
    const bool host_big = std::endian::native == std::endian::big;
    if (swap_ != host_big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

private:
  const std::string& bytes_;
  bool swap_;  // file is big-endian
};

template <typename T>
void put_at(std::string& buf, std::size_t off, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  std::memcpy(buf.data() + off, b, sizeof(T));
}

inline NiftiHeader parse_nifti_header(const std::string& bytes) {
  if (bytes.size() < kNiftiHeaderSize) throw Error("nifti: file shorter than 348-byte header");
  NiftiHeader h;
  // Byte order: sizeof_hdr must read as 348, and dim[0] as 1..7.
  bool big = false;
  {
    ByteReader le(bytes, false);
    const auto sz = le.at<std::int32_t>(0);
    const auto d0 = le.at<std::int16_t>(40);
    if (!(sz == 348 && d0 >= 1 && d0 <= 7)) {
      ByteReader be(bytes, true);
      if (be.at<std::int32_t>(0) == 348 && be.at<std::int16_t>(40) >= 1 && be.at<std::int16_t>(40) <= 7)
        big = true;
      else if (sz != 348)
        throw Error("nifti: bad header size");
      else
        throw Error("nifti: bad dim[0]");
    }
  }
  std::memcpy(h.magic.data(), bytes.data() + 344, 4);
  if (!(h.magic[0] == 'n' && h.magic[1] == '+' && h.magic[2] == '1' && h.magic[3] == '\0'))
    throw Error("nifti: bad magic (expected single-file \"n+1\")");
  ByteReader r(bytes, big);
  h.big_endian = big;
  for (std::size_t i = 0; i < 8; ++i) h.dim[i] = r.at<std::int16_t>(40 + 2 * i);
  h.datatype = r.at<std::int16_t>(70);
  h.bitpix = r.at<std::int16_t>(72);
  for (std::size_t i = 0; i < 8; ++i) h.pixdim[i] = r.at<float>(76 + 4 * i);
  h.vox_offset = r.at<float>(108);
  h.scl_slope = r.at<float>(112);
  h.scl_inter = r.at<float>(116);
  h.xyzt_units = static_cast<std::uint8_t>(bytes[123]);
  h.qform_code = r.at<std::int16_t>(252);
  h.sform_code = r.at<std::int16_t>(254);
  for (std::size_t i = 0; i < 3; ++i) h.quatern[i] = r.at<float>(256 + 4 * i);
  for (std::size_t i = 0; i < 3; ++i) h.qoffset[i] = r.at<float>(268 + 4 * i);
  for (std::size_t row = 0; row < 3; ++row)
    for (std::size_t c = 0; c < 4; ++c) h.srow[row][c] = r.at<float>(280 + 16 * row + 4 * c);

  const int nd = h.dim[0];
  for (int i = 1; i <= 3; ++i) {
    if (i <= nd && h.dim[static_cast<std::size_t>(i)] < 1) throw Error("nifti: non-positive dimension");
    if (i > nd) h.dim[static_cast<std::size_t>(i)] = 1;
  }
  for (int i = 4; i <= nd; ++i)
    if (h.dim[static_cast<std::size_t>(i)] > 1) throw Error("nifti: only 3D volumes are supported");
  for (int i = 1; i <= 3; ++i)
    if (!(h.pixdim[static_cast<std::size_t>(i)] > 0.0f) || !std::isfinite(h.pixdim[static_cast<std::size_t>(i)]))
      throw Error("nifti: spatial pixdim must be positive");
  if (nifti_type_size(h.datatype) == 0)
    throw Error("nifti: unsupported datatype " + std::to_string(h.datatype));
  if (h.vox_offset < 348.0f) throw Error("nifti: vox_offset inside header");
  return h;
}

inline std::string load_nifti_bytes(const std::string& path) {
  std::string bytes = slurp(path);
  if (is_gzip(bytes)) bytes = gunzip(bytes);
  return bytes;
}

// Decodes voxel i (native value, before scaling) as double.
inline double nifti_voxel(const std::string& bytes, const NiftiHeader& h, std::size_t i) {
  using namespace nifti_type;
  ByteReader r(bytes, h.big_endian);
  const auto off = static_cast<std::size_t>(h.vox_offset) + i * nifti_type_size(h.datatype);
  switch (h.datatype) {
    case kUInt8: return static_cast<unsigned char>(bytes[off]);
    case kInt8: return static_cast<signed char>(bytes[off]);
    case kInt16: return r.at<std::int16_t>(off);
    case kUInt16: return r.at<std::uint16_t>(off);
    case kInt32: return r.at<std::int32_t>(off);
    case kUInt32: return r.at<std::uint32_t>(off);
    case kFloat32: return r.at<float>(off);
    case kFloat64: return r.at<double>(off);
    default: throw Error("nifti: unsupported datatype");
  }
}

inline void check_data_size(const std::string& bytes, const NiftiHeader& h) {
  const auto need = static_cast<std::size_t>(h.vox_offset) + h.dims().count() * nifti_type_size(h.datatype);
  if (bytes.size() < need) throw Error("nifti: truncated data section");
}

inline bool has_scaling(const NiftiHeader& h) {
  return h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
}

inline std::string encode_nifti(const Dims& d, const VoxelSpacing& s, const Vec3& origin,
                                std::int16_t datatype, const std::string& payload) {
  std::string buf(kNiftiDataOffset, '\0');
  put_at<std::int32_t>(buf, 0, 348);
  buf[38] = 'r';  // regular
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                        static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) put_at<std::int16_t>(buf, 40 + 2 * i, dim[i]);
  put_at<std::int16_t>(buf, 70, datatype);
  put_at<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * nifti_type_size(datatype)));
  const std::array<float, 8> pixdim{1.0f, static_cast<float>(s.dx), static_cast<float>(s.dy),
                                    static_cast<float>(s.dz), 1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) put_at<float>(buf, 76 + 4 * i, pixdim[i]);
  put_at<float>(buf, 108, static_cast<float>(kNiftiDataOffset));
  put_at<float>(buf, 112, 1.0f);
  put_at<float>(buf, 116, 0.0f);
  buf[123] = 2;  // mm
  put_at<std::int16_t>(buf, 252, 1);
  put_at<std::int16_t>(buf, 254, 1);
  put_at<float>(buf, 268, static_cast<float>(origin.x));
  put_at<float>(buf, 272, static_cast<float>(origin.y));
  put_at<float>(buf, 276, static_cast<float>(origin.z));
  const std::array<std::array<float, 4>, 3> srow{{{static_cast<float>(s.dx), 0, 0, static_cast<float>(origin.x)},
                                                  {0, static_cast<float>(s.dy), 0, static_cast<float>(origin.y)},
                                                  {0, 0, static_cast<float>(s.dz), static_cast<float>(origin.z)}}};
  for (std::size_t row = 0; row < 3; ++row)
    for (std::size_t c = 0; c < 4; ++c) put_at<float>(buf, 280 + 16 * row + 4 * c, srow[row][c]);
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  buf += payload;
  return buf;
}

inline void write_bytes(const std::string& bytes, const std::string& path, bool compress) {
  const std::string out = compress ? gzip(bytes) : bytes;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed for '" + path + "'");
}

inline void check_dims_fit(const Dims& d) {
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) throw Error("nifti: dimension exceeds int16 range");
}

}  // namespace detail

inline NiftiHeader read_nifti_header(const std::string& path) {
  return detail::parse_nifti_header(detail::load_nifti_bytes(path));
}

/// Reads any supported datatype as float intensities, applying scl_slope /
/// scl_inter when the slope is nonzero.
inline std::pair<IntensityVolume, NiftiHeader> read_nifti_intensity(const std::string& path) {
  const std::string bytes = detail::load_nifti_bytes(path);
  const NiftiHeader h = detail::parse_nifti_header(bytes);
  detail::check_data_size(bytes, h);
  IntensityVolume v(h.dims(), h.spacing(), h.origin());
  const bool scale = detail::has_scaling(h);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double raw = detail::nifti_voxel(bytes, h, i);
    v[i] = static_cast<float>(scale ? raw * h.scl_slope + h.scl_inter : raw);
  }
  return {std::move(v), h};
}

/// Reads an integer-typed file as labels. Every value must be a defined
/// label code (0..10).
inline std::pair<LabelVolume, NiftiHeader> read_nifti_labels(const std::string& path) {
  const std::string bytes = detail::load_nifti_bytes(path);
  const NiftiHeader h = detail::parse_nifti_header(bytes);
  detail::check_data_size(bytes, h);
  if (!h.integer_type()) throw Error("nifti: label volume must have an integer datatype");
  LabelVolume v(h.dims(), h.spacing(), h.origin());
  const bool scale = detail::has_scaling(h);
  for (std::size_t i = 0; i < v.size(); ++i) {
    double val = detail::nifti_voxel(bytes, h, i);
    if (scale) val = val * h.scl_slope + h.scl_inter;
    if (val != std::floor(val) || val < 0 || val > kMaxLabelCode)
      throw Error("nifti: label value " + std::to_string(val) + " outside the label vocabulary");
    v[i] = static_cast<Label>(static_cast<int>(val));
  }
  return {std::move(v), h};
}

inline Mask read_nifti_mask(const std::string& path) {
  auto [v, h] = read_nifti_intensity(path);
  return make_mask(v, [](float x) { return x != 0.0f; });
}

inline void write_nifti(const IntensityVolume& v, const std::string& path, bool compress) {
  detail::check_dims_fit(v.dims());
  std::string payload(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) detail::put_at<float>(payload, 4 * i, v[i]);
  detail::write_bytes(detail::encode_nifti(v.dims(), v.spacing(), v.origin(), nifti_type::kFloat32, payload),
                      path, compress);
}

inline void write_nifti(const LabelVolume& v, const std::string& path, bool compress) {
  detail::check_dims_fit(v.dims());
  std::string payload(v.size(), '\0');
  for (std::size_t i = 0; i < v.size(); ++i) payload[i] = static_cast<char>(code(v[i]));
  detail::write_bytes(detail::encode_nifti(v.dims(), v.spacing(), v.origin(), nifti_type::kUInt8, payload),
                      path, compress);
}

inline void write_nifti(const Mask& v, const std::string& path, bool compress) {
  detail::check_dims_fit(v.dims());
  std::string payload(v.data().begin(), v.data().end());
  detail::write_bytes(detail::encode_nifti(v.dims(), v.spacing(), v.origin(), nifti_type::kUInt8, payload),
                      path, compress);
}

/// Compression is chosen from the extension: ".gz" compresses.
inline bool wants_gzip(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

}  // namespace chdseg
