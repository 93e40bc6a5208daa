#include <gtest/gtest.h>

#include <cmath>

#include "semverd/core.hpp"
#include "semverd/digest.hpp"
#include "semverd/rng.hpp"
#include "test_util.hpp"

using namespace semverd;
using semverd::test::error_of;

TEST(Cosine, Examples) {
  const std::vector<double> x{1, 0}, y{0, 1}, d{1, 1}, neg{-1, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_NEAR(cosine_similarity(d, x), 0.70710678, 1e-8);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, neg), -1.0);
}

TEST(Cosine, Errors) {
  const std::vector<double> a{1, 0}, b{1, 0, 0}, z{0, 0}, tiny{1e-13, 0};
  EXPECT_EQ(error_of([&] { (void)cosine_similarity(a, b); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([&] { (void)cosine_similarity(a, z); }), Errc::ZeroVector);
  EXPECT_EQ(error_of([&] { (void)cosine_similarity(tiny, a); }), Errc::ZeroVector);
}

TEST(Cosine, ClampsRoundingAboveOne) {
  // Self-similarity of an awkward vector can round above 1 without the clamp.
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    auto v = test::random_vector(rng, 7, 1e3);
    const double s = cosine_similarity(v, v);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Normalize, Examples) {
  const auto v = l2_normalize(std::vector<double>{3, 4});
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);
  const auto u = l2_normalize(std::vector<double>{1, 0, 0});
  EXPECT_EQ(u.raw(), (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(error_of([] { (void)l2_normalize(std::vector<double>{0, 0}); }), Errc::ZeroVector);
}

TEST(Normalize, UnitNormAndDirection) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto raw = test::random_vector(rng, 16, 1.0 + 100.0 * rng.uniform());
    const auto v = l2_normalize(raw);
    EXPECT_NEAR(l2_norm(v), 1.0, 1e-12);
    EXPECT_NEAR(cosine_similarity(v, raw), 1.0, 1e-12);
  }
}

TEST(Euclidean, Examples) {
  EXPECT_DOUBLE_EQ(euclidean_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(euclidean_distance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(euclidean_distance(std::vector<double>{1}, std::vector<double>{4}), 3.0);
  EXPECT_EQ(error_of([] { (void)euclidean_distance(std::vector<double>{1}, std::vector<double>{1, 2}); }),
            Errc::DimensionMismatch);
}

TEST(Euclidean, MetricProperties) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto a = test::random_vector(rng, 8), b = test::random_vector(rng, 8), c = test::random_vector(rng, 8);
    EXPECT_DOUBLE_EQ(euclidean_distance(a, b), euclidean_distance(b, a));
    EXPECT_LE(euclidean_distance(a, c), euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12);
  }
}

TEST(Digest, KnownSha256) {
  // FIPS 180-2 test vector.
  EXPECT_EQ(text_digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(text_digest(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Rng, DeterministicAndDerivedStreamsDiffer) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  auto s1 = Rng::derive(42, 1), s2 = Rng::derive(42, 2);
  EXPECT_NE(s1.next_u64(), s2.next_u64());
}

TEST(Rng, UniformRangeAndBelow) {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(7), 7u);
  }
}

TEST(Error, IndexedMessage) {
  const Error e = Error(Errc::EmptyText, "blank").at(3);
  EXPECT_EQ(e.code(), Errc::EmptyText);
  EXPECT_EQ(e.index(), 3u);
  EXPECT_NE(std::string(e.what()).find("index 3"), std::string::npos);
}
