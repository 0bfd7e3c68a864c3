// Copyright (c) 2026 The stutterkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/labels.hpp"
#include "stutter/manifest.hpp"
#include "stutter/synthetic.hpp"
#include "test_util.hpp"

namespace stutter {
namespace {

using testing::TempDir;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no stutter::Error thrown";
  return ErrorCode::InvalidArgument;
}

Tensor random_tensor(int t, int d, Rng& rng) {
  std::normal_distribution<float> n(0.0f, 3.0f);
  Tensor x(t, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = n(rng);
  return x;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

TEST(Labels, CodesFormABijection) {
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassLabel l = label_from_code(c);
    EXPECT_EQ(code(l), c);
    EXPECT_EQ(parse_label(to_string(l)), l);
  }
  EXPECT_EQ(code(ClassLabel::Repetition), 0);
  EXPECT_EQ(code(ClassLabel::Prolongation), 1);
  EXPECT_EQ(code(ClassLabel::Block), 2);
  EXPECT_EQ(code(ClassLabel::Interjection), 3);
  EXPECT_EQ(code(ClassLabel::Fluent), 4);
  EXPECT_EQ(code_of([] { parse_label("sound_rep"); }), ErrorCode::UnknownLabel);
  EXPECT_EQ(code_of([] { parse_source("hubert"); }), ErrorCode::UnknownSource);
}

TEST(Emb1, HeaderLayoutIsExact) {
  Tensor x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const auto bytes = emb1::encode(x);
  ASSERT_EQ(bytes.size(), 16u + 4u * 6u);
  const unsigned char expected[16] = {'E', 'M', 'B', '1', 0x01, 0x01, 0x00, 0x00, 2, 0, 0, 0, 3, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data(), expected, 16), 0);
  // Row-major float32 little-endian payload: 1.0f = 00 00 80 3f, 2.0f = 00 00 00 40.
  const unsigned char one[4] = {0x00, 0x00, 0x80, 0x3f};
  const unsigned char two[4] = {0x00, 0x00, 0x00, 0x40};
  EXPECT_EQ(std::memcmp(bytes.data() + 16, one, 4), 0);
  EXPECT_EQ(std::memcmp(bytes.data() + 20, two, 4), 0);
}

TEST(Emb1, FourValueTensorIsThirtyTwoBytesOnDisk) {
  TempDir dir;
  Tensor x(1, 4);
  x << 1, 2, 3, 4;
  write_embedding(x, dir / "a.emb");
  // 16-byte header plus four float32 values.
  EXPECT_EQ(std::filesystem::file_size(dir / "a.emb"), 16u + 4u * 4u);
  const auto h = read_embedding_header(dir / "a.emb");
  EXPECT_EQ(h.frames, 1u);
  EXPECT_EQ(h.dims, 4u);
}

TEST(Emb1, EcapaShapedRoundTrip) {
  TempDir dir;
  Rng rng(3);
  const Tensor x = random_tensor(1, 192, rng);
  write_embedding(x, dir / "e.emb");
  const Tensor y = read_embedding(dir / "e.emb");
  EXPECT_EQ(y.rows(), 1);
  EXPECT_EQ(y.cols(), 192);
  EXPECT_TRUE(bit_equal(x, y));
}

TEST(Emb1, RandomSevenByFiveRoundTrip) {
  TempDir dir;
  Rng rng(7);
  const Tensor x = random_tensor(7, 5, rng);
  write_embedding(x, dir / "r.emb");
  EXPECT_TRUE(bit_equal(x, read_embedding(dir / "r.emb")));
}

TEST(Emb1, RoundTripIsBitExactForAwkwardValues) {
  Tensor x(2, 4);
  x << -0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max(),
      std::numeric_limits<float>::lowest(), 1e-38f, -1.5f, 3.14159274f, std::numeric_limits<float>::min();
  const auto bytes = emb1::encode(x);
  const Tensor y = emb1::decode(bytes);
  EXPECT_TRUE(bit_equal(x, y));
  EXPECT_EQ(emb1::encode(y), bytes);
}

TEST(Emb1, PropertyRoundTripOverRandomShapes) {
  Rng rng(11);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_int_distribution<std::uint32_t> bits(0, 0xFFFFFFFFu);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      float f;
      do {
        const std::uint32_t b = bits(rng);
        std::memcpy(&f, &b, 4);
      } while (!std::isfinite(f));
      x.data()[i] = f;
    }
    const auto bytes = emb1::encode(x);
    const Tensor y = emb1::decode(bytes);
    ASSERT_TRUE(bit_equal(x, y)) << "trial " << trial;
    ASSERT_EQ(emb1::encode(y), bytes);
  }
}

TEST(Emb1, RejectsBadMagic) {
  Tensor x(1, 2);
  x << 1, 2;
  auto bytes = emb1::encode(x);
  std::memcpy(bytes.data(), "XXXX", 4);
  EXPECT_EQ(code_of([&] { emb1::decode(bytes); }), ErrorCode::BadMagic);
}

TEST(Emb1, RejectsUnsupportedVersionAndDtype) {
  Tensor x(1, 2);
  x << 1, 2;
  auto bytes = emb1::encode(x);
  bytes[4] = 0x02;
  EXPECT_EQ(code_of([&] { emb1::decode(bytes); }), ErrorCode::UnsupportedVersion);
  bytes = emb1::encode(x);
  bytes[5] = 0x02;
  EXPECT_EQ(code_of([&] { emb1::decode(bytes); }), ErrorCode::UnsupportedVersion);
}

TEST(Emb1, RejectsWrongPayloadSize) {
  Tensor x(2, 3);
  x.setOnes();
  auto bytes = emb1::encode(x);
  auto shorter = bytes;
  shorter.pop_back();
  EXPECT_EQ(code_of([&] { emb1::decode(shorter); }), ErrorCode::TruncatedPayload);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(code_of([&] { emb1::decode(longer); }), ErrorCode::TruncatedPayload);
  const std::vector<unsigned char> header_only(bytes.begin(), bytes.begin() + 10);
  EXPECT_EQ(code_of([&] { emb1::decode(header_only); }), ErrorCode::TruncatedPayload);
}

TEST(Emb1, RejectsNonFiniteValues) {
  Tensor x(1, 3);
  x << 1, std::numeric_limits<float>::quiet_NaN(), 3;
  TempDir dir;
  EXPECT_EQ(code_of([&] { write_embedding(x, dir / "n.emb"); }), ErrorCode::NonFiniteValue);
  Tensor ok(1, 3);
  ok << 1, 2, 3;
  auto bytes = emb1::encode(ok);
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(bytes.data() + 16 + 4, &inf, 4);
  EXPECT_EQ(code_of([&] { emb1::decode(bytes); }), ErrorCode::NonFiniteValue);
}

TEST(Emb1, WriteToMissingDirectoryIsIoFailure) {
  TempDir dir;
  Tensor x(1, 1);
  x << 1;
  EXPECT_EQ(code_of([&] { write_embedding(x, dir / "no/such/dir/x.emb"); }), ErrorCode::IoFailure);
}

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(5);
    write_embedding(random_tensor(1, kEcapaDim, rng), dir_ / "c1_ecapa.emb");
    write_embedding(random_tensor(9, kW2v2Dim, rng), dir_ / "c1_l11.emb");
    write_embedding(random_tensor(4, kW2v2Dim, rng), dir_ / "c2_l11.emb");
  }

  std::filesystem::path write(const std::string& body) {
    const auto path = dir_ / "manifest.csv";
    testing::spit(path, body);
    return path;
  }

  static constexpr const char* kHeader = "clip_id,podcast_id,label,source,layer,path\n";
  TempDir dir_;
};

TEST_F(ManifestTest, LoadsValidRowsInOrder) {
  const auto path = write(std::string(kHeader) +
                          "c2,podB,block,w2v2,11,c2_l11.emb\n"
                          "c1,podA,fluent,ecapa,0,c1_ecapa.emb\n"
                          "c1,podA,fluent,w2v2,11,c1_l11.emb\n");
  const auto m = load_manifest(path);
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_EQ(m.rows[0].clip_id, "c2");
  EXPECT_EQ(m.rows[0].label, ClassLabel::Block);
  EXPECT_EQ(m.rows[1].source, Source::Ecapa);
  EXPECT_EQ(m.rows[1].layer, 0);
  EXPECT_EQ(m.rows[2].layer, 11);
  EXPECT_EQ(m.rows[2].resolved, dir_.path() / "c1_l11.emb");
  EXPECT_EQ(validate_manifest(path), 3u);
}

TEST_F(ManifestTest, LoadingIsIdempotentAndWriteInvertsIt) {
  const auto path = write(std::string(kHeader) + "c1,podA,fluent,ecapa,0,c1_ecapa.emb\nc2,podB,block,w2v2,11,c2_l11.emb\n");
  const auto a = load_manifest(path);
  const auto b = load_manifest(path);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].clip_id, b.rows[i].clip_id);
    EXPECT_EQ(a.rows[i].resolved, b.rows[i].resolved);
  }
  const auto before = testing::slurp(path);
  write_manifest(a, dir_ / "copy.csv");
  EXPECT_EQ(testing::slurp(dir_ / "copy.csv"), before);
}

TEST_F(ManifestTest, AcceptsByteOrderMarkAndCrlf) {
  const auto path = write("\xEF\xBB\xBF" "clip_id,podcast_id,label,source,layer,path\r\nc1,podA,fluent,ecapa,0,c1_ecapa.emb\r\n");
  EXPECT_EQ(load_manifest(path).rows.size(), 1u);
}

TEST_F(ManifestTest, RejectsMissingOrWrongHeader) {
  EXPECT_EQ(code_of([&] { load_manifest(write("c1,podA,fluent,ecapa,0,c1_ecapa.emb\n")); }), ErrorCode::MissingHeader);
  EXPECT_EQ(code_of([&] { load_manifest(write("")); }), ErrorCode::MissingHeader);
  EXPECT_EQ(code_of([&] { load_manifest(write("clip,podcast,label,source,layer,path\n")); }), ErrorCode::MissingHeader);
}

TEST_F(ManifestTest, RejectsUnknownLabel) {
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,sound_rep,ecapa,0,c1_ecapa.emb\n")); }),
            ErrorCode::UnknownLabel);
}

TEST_F(ManifestTest, RejectsUnknownSource) {
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,hubert,0,c1_ecapa.emb\n")); }),
            ErrorCode::UnknownSource);
}

TEST_F(ManifestTest, RejectsDuplicateKey) {
  EXPECT_EQ(code_of([&] {
              load_manifest(write(std::string(kHeader) + "c1,podA,fluent,w2v2,11,c1_l11.emb\nc1,podA,fluent,w2v2,11,c2_l11.emb\n"));
            }),
            ErrorCode::DuplicateKey);
}

TEST_F(ManifestTest, RejectsUnresolvablePath) {
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,ecapa,0,missing.emb\n")); }),
            ErrorCode::UnresolvablePath);
  EXPECT_EQ(code_of([&] { load_manifest(dir_ / "nope.csv"); }), ErrorCode::UnresolvablePath);
}

TEST_F(ManifestTest, RejectsHeaderMismatch) {
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,w2v2,11,c1_ecapa.emb\n")); }),
            ErrorCode::HeaderMismatch);
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,ecapa,0,c1_l11.emb\n")); }),
            ErrorCode::HeaderMismatch);
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,w2v2,14,c1_l11.emb\n")); }),
            ErrorCode::HeaderMismatch);
  EXPECT_EQ(code_of([&] { load_manifest(write(std::string(kHeader) + "c1,podA,fluent,ecapa,3,c1_ecapa.emb\n")); }),
            ErrorCode::HeaderMismatch);
}

TEST_F(ManifestTest, ValidateDecodesPayloads) {
  auto bytes = testing::slurp(dir_ / "c2_l11.emb");
  bytes.resize(bytes.size() - 4);
  testing::spit(dir_ / "c2_l11.emb", bytes);
  const auto path = write(std::string(kHeader) + "c2,podB,block,w2v2,11,c2_l11.emb\n");
  EXPECT_EQ(code_of([&] { validate_manifest(path); }), ErrorCode::TruncatedPayload);
}

SyntheticOptions small_synth(std::uint64_t seed) {
  SyntheticOptions o;
  o.num_podcasts = 10;
  o.clips_per_podcast = 3;
  o.seed = seed;
  o.layers = {1, 11};
  o.min_frames = 5;
  o.max_frames = 9;
  return o;
}

TEST(Synthetic, ShapesAndManifestContract) {
  TempDir dir;
  SyntheticOptions o = small_synth(1);
  o.min_frames = 140;
  o.max_frames = 160;
  const auto m = generate_synthetic(o, dir.path());
  EXPECT_EQ(m.rows.size(), 10u * 3u * 3u);
  for (const auto& row : m.rows) {
    const auto h = read_embedding_header(row.resolved);
    if (row.source == Source::Ecapa) {
      EXPECT_EQ(h.frames, 1u);
      EXPECT_EQ(h.dims, 192u);
    } else {
      EXPECT_GE(h.frames, 140u);
      EXPECT_LE(h.frames, 160u);
      EXPECT_EQ(h.dims, 768u);
    }
  }
  EXPECT_EQ(validate_manifest(dir / "manifest.csv"), m.rows.size());
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  TempDir a, b, c;
  const auto ma = generate_synthetic(small_synth(42), a.path());
  generate_synthetic(small_synth(42), b.path());
  generate_synthetic(small_synth(43), c.path());
  EXPECT_EQ(testing::slurp(a / "manifest.csv"), testing::slurp(b / "manifest.csv"));
  bool any_difference = false;
  for (const auto& row : ma.rows) {
    EXPECT_EQ(testing::slurp(a.path() / row.path), testing::slurp(b.path() / row.path)) << row.path;
    if (std::filesystem::exists(c.path() / row.path) &&
        testing::slurp(a.path() / row.path) != testing::slurp(c.path() / row.path))
      any_difference = true;
  }
  EXPECT_TRUE(any_difference);
}

TEST(Synthetic, ClassMeansAreSeparatedBySep) {
  TempDir dir;
  SyntheticOptions o = small_synth(9);
  o.num_podcasts = 10;
  o.clips_per_podcast = 40;
  o.class_sep = 20.0;
  o.layers = {};
  o.noise_std = 1e-3;
  const auto m = generate_synthetic(o, dir.path());
  std::array<Eigen::VectorXd, kNumClasses> first;
  for (const auto& row : m.rows) {
    const Eigen::VectorXd v = read_embedding(row.resolved).row(0).transpose().cast<double>();
    auto& slot = first[code(row.label)];
    if (slot.size() == 0) slot = v;
  }
  for (int a = 0; a < kNumClasses; ++a)
    for (int b = a + 1; b < kNumClasses; ++b) {
      if (first[a].size() == 0 || first[b].size() == 0) continue;
      EXPECT_NEAR((first[a] - first[b]).norm(), 20.0, 0.05);
    }
}

TEST(Synthetic, ZeroSepGivesIdenticalClassMeans) {
  TempDir dir;
  SyntheticOptions o = small_synth(2);
  o.class_sep = 0.0;
  o.layers = {};
  o.noise_std = 1e-6;
  const auto m = generate_synthetic(o, dir.path());
  for (const auto& row : m.rows) EXPECT_LT(read_embedding(row.resolved).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Synthetic, LabelsFollowProfile) {
  TempDir dir;
  SyntheticOptions o = small_synth(3);
  o.num_podcasts = 20;
  o.clips_per_podcast = 100;
  o.layers = {};
  const auto m = generate_synthetic(o, dir.path());
  std::array<int, kNumClasses> counts{};
  for (const auto& row : m.rows) counts[code(row.label)]++;
  const double n = static_cast<double>(m.rows.size());
  for (int c = 0; c < kNumClasses; ++c) {
    const double p = kDefaultClassProfile[c];
    EXPECT_NEAR(counts[c] / n, p, 4.0 * std::sqrt(p * (1 - p) / n)) << "class " << c;
  }
}

TEST(Synthetic, RejectsInvalidArguments) {
  TempDir dir;
  SyntheticOptions o = small_synth(1);
  o.num_podcasts = 9;
  EXPECT_EQ(code_of([&] { generate_synthetic(o, dir.path()); }), ErrorCode::InvalidArgument);
  o = small_synth(1);
  o.class_sep = -1.0;
  EXPECT_EQ(code_of([&] { generate_synthetic(o, dir.path()); }), ErrorCode::InvalidArgument);
  o = small_synth(1);
  o.layers = {14};
  EXPECT_EQ(code_of([&] { generate_synthetic(o, dir.path()); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace stutter
