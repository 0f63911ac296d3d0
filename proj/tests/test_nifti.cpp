#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace chdseg;
using namespace testsupport;

namespace {

IntensityVolume random_intensity(std::uint32_t seed) {
  std::mt19937 rng(seed);
  IntensityVolume v({17, 12, 9}, {0.25, 0.75, 1.5}, {-12.5, 3.0, 40.25});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::uniform_real_distribution<float>(-1000, 3000)(rng);
  return v;
}

LabelVolume random_labels(std::uint32_t seed) {
  std::mt19937 rng(seed);
  LabelVolume v({11, 13, 7}, {0.5, 0.5, 2.0}, {1.0, -2.0, 0.5});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Label>(rng() % (kMaxLabelCode + 1));
  return v;
}

void write_raw(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void put(std::string& b, std::size_t off, T v, bool big = false) {
  char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  if (big) std::reverse(tmp, tmp + sizeof(T));
  std::memcpy(b.data() + off, tmp, sizeof(T));
}

}  // namespace

TEST(Nifti, IntensityRoundTripIsBitExact) {
  const auto dir = scratch_dir("nifti_rt");
  const auto v = random_intensity(1);
  for (bool gz : {false, true}) {
    const auto p = (dir / (gz ? "a.nii.gz" : "a.nii")).string();
    write_nifti(v, p, gz);
    const auto [r, h] = read_nifti_intensity(p);
    EXPECT_TRUE(r.same_grid(v));
    EXPECT_EQ(0, std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)));
    EXPECT_EQ(h.datatype, nifti_type::kFloat32);
    EXPECT_FLOAT_EQ(h.scl_slope, 1.0f);
    EXPECT_FLOAT_EQ(h.scl_inter, 0.0f);
  }
}

TEST(Nifti, LabelAndMaskRoundTripIsBitExact) {
  const auto dir = scratch_dir("nifti_lab");
  const auto v = random_labels(2);
  Mask m({5, 6, 7}, {1, 1, 1});
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = i % 3 == 0;
  for (bool gz : {false, true}) {
    const auto p = (dir / (gz ? "l.nii.gz" : "l.nii")).string();
    write_nifti(v, p, gz);
    const auto [r, h] = read_nifti_labels(p);
    EXPECT_TRUE(r.same_grid(v));
    EXPECT_EQ(r.storage(), v.storage());
    EXPECT_EQ(h.datatype, nifti_type::kUInt8);
    const auto pm = (dir / (gz ? "m.nii.gz" : "m.nii")).string();
    write_nifti(m, pm, gz);
    EXPECT_EQ(read_nifti_mask(pm).storage(), m.storage());
  }
}

TEST(Nifti, CompressedOutputStartsWithGzipMagic) {
  const auto dir = scratch_dir("nifti_gz");
  write_nifti(random_labels(3), (dir / "x.nii.gz").string(), true);
  const auto b = slurp(dir / "x.nii.gz");
  ASSERT_GE(b.size(), 2u);
  EXPECT_EQ(static_cast<unsigned char>(b[0]), 0x1f);
  EXPECT_EQ(static_cast<unsigned char>(b[1]), 0x8b);
}

TEST(Nifti, UncompressedFileSizeMatchesLayout) {
  const auto dir = scratch_dir("nifti_size");
  LabelVolume v({64, 64, 64}, {1, 1, 1});
  write_nifti(v, (dir / "c.nii").string(), false);
  EXPECT_EQ(fs::file_size(dir / "c.nii"), geometry_oracle()["nifti_64cube_uint8_bytes"].get<std::uintmax_t>());
}

TEST(Nifti, WritesAreDeterministic) {
  const auto dir = scratch_dir("nifti_det");
  const auto v = random_intensity(4);
  write_nifti(v, (dir / "a.nii.gz").string(), true);
  write_nifti(v, (dir / "b.nii.gz").string(), true);
  EXPECT_EQ(slurp(dir / "a.nii.gz"), slurp(dir / "b.nii.gz"));
}

TEST(Nifti, HandBuiltFixtureOpensAsLabels) {
  const auto& fx = geometry_oracle()["nifti_fixture"];
  const auto [v, h] = read_nifti_labels(source_path("tests/data/labels_016.nii").string());
  EXPECT_EQ(v.dims(), (Dims{fx["dims"][0], fx["dims"][1], fx["dims"][2]}));
  EXPECT_DOUBLE_EQ(v.spacing().dx, fx["spacing"][0].get<double>());
  EXPECT_DOUBLE_EQ(v.spacing().dy, fx["spacing"][1].get<double>());
  EXPECT_DOUBLE_EQ(v.spacing().dz, fx["spacing"][2].get<double>());
  ASSERT_EQ(v.size(), fx["values"].size());
  std::set<int> seen;
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(code(v[i]), fx["values"][i].get<int>());
    seen.insert(code(v[i]));
  }
  EXPECT_EQ(seen, (std::set<int>{0, 1, 6}));
  // slope 0 means no scaling
  const auto [f, hf] = read_nifti_intensity(source_path("tests/data/labels_016.nii").string());
  EXPECT_EQ(f[1], static_cast<float>(fx["values"][1].get<int>()));
}

TEST(Nifti, BigEndianFileIsHonoured) {
  const auto dir = scratch_dir("nifti_be");
  std::string b(352, '\0');
  put<std::int32_t>(b, 0, 348, true);
  const std::int16_t dim[8] = {3, 2, 2, 1, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(b, 40 + 2 * i, dim[i], true);
  put<std::int16_t>(b, 70, nifti_type::kInt16, true);
  put<std::int16_t>(b, 72, 16, true);
  const float pix[8] = {1, 1.5f, 2, 3, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<float>(b, 76 + 4 * i, pix[i], true);
  put<float>(b, 108, 352.0f, true);
  put<float>(b, 112, 2.0f, true);   // slope
  put<float>(b, 116, -1.0f, true);  // intercept
  std::memcpy(b.data() + 344, "n+1\0", 4);
  std::string data(8, '\0');
  const std::int16_t vals[4] = {1, 2, -3, 300};
  for (int i = 0; i < 4; ++i) put<std::int16_t>(data, 2 * i, vals[i], true);
  write_raw(dir / "be.nii", b + data);
  const auto [v, h] = read_nifti_intensity((dir / "be.nii").string());
  EXPECT_TRUE(h.big_endian);
  EXPECT_DOUBLE_EQ(v.spacing().dx, 1.5);
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(v[static_cast<std::size_t>(i)], 2.0f * vals[i] - 1.0f);
}

TEST(Nifti, RejectsMalformedFiles) {
  const auto dir = scratch_dir("nifti_bad");
  LabelVolume v({4, 4, 4}, {1, 1, 1});
  write_nifti(v, (dir / "good.nii").string(), false);
  const auto good = slurp(dir / "good.nii");

  auto expect_error = [&](const std::string& bytes, const std::string& needle) {
    write_raw(dir / "bad.nii", bytes);
    try {
      (void)read_nifti_intensity((dir / "bad.nii").string());
      ADD_FAILURE() << "no error for " << needle;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  std::string bad_magic = good;
  std::memcpy(bad_magic.data() + 344, "xyz\0", 4);
  expect_error(bad_magic, "bad magic");
  std::string pair = good;
  std::memcpy(pair.data() + 344, "ni1\0", 4);
  expect_error(pair, "bad magic");
  std::string dtype = good;
  put<std::int16_t>(dtype, 70, 128);  // RGB24
  expect_error(dtype, "unsupported datatype");
  expect_error(good.substr(0, good.size() - 10), "truncated");
  expect_error(good.substr(0, 200), "shorter than 348");
  std::string neg = good;
  put<float>(neg, 80, -1.0f);
  expect_error(neg, "pixdim");
}

TEST(Nifti, LabelRequestRejectsOutOfVocabularyCodes) {
  const auto dir = scratch_dir("nifti_vocab");
  IntensityVolume v({3, 3, 3}, {1, 1, 1});
  v[4] = 11;
  write_nifti(v, (dir / "f.nii").string(), false);
  EXPECT_THROW(read_nifti_labels((dir / "f.nii").string()), Error);  // float datatype
  Mask m({3, 3, 3}, {1, 1, 1});
  m[0] = 11;
  write_nifti(m, (dir / "m.nii").string(), false);
  try {
    (void)read_nifti_labels((dir / "m.nii").string());
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("outside the label vocabulary"), std::string::npos);
  }
}

TEST(Nifti, UnwritablePathThrows) {
  LabelVolume v({2, 2, 2}, {1, 1, 1});
  EXPECT_THROW(write_nifti(v, "/nonexistent_dir_for_chdseg/x.nii", false), Error);
}
