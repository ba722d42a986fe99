#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/core/mask.hpp"

using namespace mid;

TEST_CASE("rng streams replay by identity and by key") {
  RngStream a(42, "x", 3);
  RngStream b(42, "x", 3);
  RngStream c(42, "x", 4);
  RngStream replay = RngStream::from_key(a.key());
  const std::uint64_t first = a.next_u64();
  CHECK(first == b.next_u64());
  CHECK(first != c.next_u64());
  CHECK(first == replay.next_u64());
}

TEST_CASE("derive does not consume parent draws") {
  RngStream a(1, "p");
  RngStream b(1, "p");
  (void)a.derive("child", 2);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.derive("child", 2).key() == b.derive("child", 2).key());
  CHECK(a.derive("child", 2).key() != a.derive("child", 3).key());
}

TEST_CASE("uniform and normal moments") {
  RngStream rng(5, "moments");
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("mask count stays inside 6-sigma binomial bounds") {
  for (double alpha : {0.1, 0.5, 0.8, 0.9}) {
    RngStream rng(7, "mask");
    const BinaryMask m = sample_mask(256, 256, alpha, rng);
    const double n = 256.0 * 256.0;
    const double sd = std::sqrt(n * alpha * (1.0 - alpha));
    CHECK(std::abs(static_cast<double>(m.masked_count()) - n * alpha) <= 6.0 * sd);
    CHECK(m.alpha() == alpha);
  }
  RngStream rng(7, "mask");
  CHECK(sample_mask(256, 256, 0.8, rng).masked_fraction() == doctest::Approx(0.8).epsilon(0.025));
}

TEST_CASE("mask extremes") {
  RngStream rng(1, "m");
  CHECK(sample_mask(8, 8, 0.0, rng).masked_count() == 0);
  CHECK(sample_mask(8, 8, 1.0, rng).masked_count() == 64);
  CHECK_THROWS_AS((void)sample_mask(8, 8, 1.5, rng), InvalidArgument);
}

TEST_CASE("apply_mask zeroes every channel of masked pixels") {
  const ImageTensor img = test::uniform_image(6, 5, 3, 1);
  RngStream rng(2, "m");
  const BinaryMask m = sample_mask(6, 5, 0.5, rng);
  const ImageTensor out = apply_mask(img, m);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 5; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == (m.at(y, x) ? img.at(y, x, c) : 0.0f));
    }
  }
}

TEST_CASE("ratio specs") {
  RngStream rng(3, "r");
  CHECK(sample_mask_ratio(MaskRatioSpec::fixed(0.6), rng) == 0.6);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double a = sample_mask_ratio(MaskRatioSpec::interval(0.5, 0.7), rng);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  CHECK(lo >= 0.5);
  CHECK(hi <= 0.7);
  CHECK(hi - lo > 0.19);
  CHECK_THROWS_AS(MaskRatioSpec::interval(0.7, 0.5), InvalidArgument);
  CHECK_THROWS_AS(MaskRatioSpec::fixed(-0.1), InvalidArgument);
}

TEST_CASE("ratio specs serialize as number or pair") {
  CHECK(mask_ratio_to_json(MaskRatioSpec::fixed(0.8)) == nlohmann::json(0.8));
  CHECK(mask_ratio_to_json(MaskRatioSpec::interval(0.5, 0.7)) == nlohmann::json::array({0.5, 0.7}));
  CHECK(mask_ratio_from_json(nlohmann::json::array({0.5, 0.7})) == MaskRatioSpec::interval(0.5, 0.7));
  CHECK(mask_ratio_from_json(0.3) == MaskRatioSpec::fixed(0.3));
}

TEST_CASE("reflect padding mirrors without repeating the edge") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(12, 5) == 4);
  CHECK(reflect_index(0, 1) == 0);
  ImageTensor img(1, 3, 1);
  img.at(0, 0, 0) = 1;
  img.at(0, 1, 0) = 2;
  img.at(0, 2, 0) = 3;
  const ImageTensor p = pad_reflect(img, 1, 4, 4);
  CHECK(p.width() == 4);
  CHECK(p.height() == 4);
  CHECK(p.at(0, 3, 0) == 2);
  CHECK(p.at(0, 0, 0) == 1);
}

TEST_CASE("elementwise helpers reject shape mismatch") {
  CHECK_THROWS_AS((void)add(ImageTensor(2, 2, 1), ImageTensor(2, 3, 1)), InvalidArgument);
  const ImageTensor c = clip01(scale(test::uniform_image(4, 4, 1, 3), 3.0f));
  for (float v : c.values()) CHECK((v >= 0.0f && v <= 1.0f));
}
