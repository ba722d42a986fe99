#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/eval/kl.hpp"
#include "mid/eval/metrics.hpp"

using namespace mid;

namespace {

ImageTensor filled(int h, int w, int c, float v) { return ImageTensor(h, w, c, v); }

// 32x32 test patterns; reference SSIM values come from scikit-image
// structural_similarity(gaussian_weights=True, sigma=1.5,
// use_sample_covariance=False).
struct Patterns {
  ImageTensor checker{32, 32, 1}, inverse{32, 32, 1}, ramp{32, 32, 1}, ramp2{32, 32, 1};
  Patterns() {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const float v = static_cast<float>((y / 4 + x / 4) % 2);
        const double g = (x / 31.0) * (0.5 + 0.5 * y / 31.0);
        checker.at(y, x, 0) = v;
        inverse.at(y, x, 0) = 1.0f - v;
        ramp.at(y, x, 0) = static_cast<float>(g);
        ramp2.at(y, x, 0) = static_cast<float>(g * g);
      }
    }
  }
};

}  // namespace

TEST_CASE("PSNR closed forms") {
  CHECK(psnr(filled(8, 8, 1, 0.0f), filled(8, 8, 1, 0.1f)) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(filled(8, 8, 3, 0.0f), filled(8, 8, 3, 1.0f)) == doctest::Approx(0.0));
  CHECK(psnr(filled(8, 8, 1, 0.3f), filled(8, 8, 1, 0.3f)) == kPsnrCap);
  CHECK(psnr(filled(8, 8, 1, 0.0f), filled(8, 8, 1, 25.5f), 255.0) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK_THROWS_AS((void)psnr(filled(8, 8, 1, 0), filled(8, 9, 1, 0)), InvalidArgument);
}

TEST_CASE("SSIM matches the reference implementation") {
  const Patterns p;
  CHECK(std::abs(ssim(p.checker, p.inverse) - -0.903411668365663) < 1e-6);
  CHECK(std::abs(ssim(p.ramp, p.ramp2) - 0.591882261525996) < 1e-6);
  CHECK(ssim(p.ramp, p.ramp) == doctest::Approx(1.0));
  CHECK(ssim(p.ramp, p.ramp2) == doctest::Approx(ssim(p.ramp2, p.ramp)));
}

TEST_CASE("SSIM with data range 255 on unit-range data inflates the score") {
  const Patterns p;
  CHECK(std::abs(ssim(p.checker, p.inverse, 255.0) - 0.9767436023961181) < 1e-6);
  CHECK(std::abs(ssim(p.ramp, p.ramp2, 255.0) - 0.9934051515522716) < 1e-6);
}

TEST_CASE("SSIM averages channels") {
  const Patterns p;
  ImageTensor a(32, 32, 3), b(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      a.at(y, x, 0) = p.checker.at(y, x, 0);
      a.at(y, x, 1) = p.ramp.at(y, x, 0);
      a.at(y, x, 2) = p.ramp2.at(y, x, 0);
      b.at(y, x, 0) = p.inverse.at(y, x, 0);
      b.at(y, x, 1) = p.ramp2.at(y, x, 0);
      b.at(y, x, 2) = p.ramp.at(y, x, 0);
    }
  }
  CHECK(std::abs(ssim(a, b) - 0.09345095156210965) < 1e-6);
}

TEST_CASE("SSIM needs images at least one window wide") {
  CHECK_THROWS_AS((void)ssim(filled(8, 8, 1, 0), filled(8, 8, 1, 0)), InvalidArgument);
}

TEST_CASE("KL of known distributions") {
  const PatchDistribution p(1, 2, {0.5, 0.5});
  const PatchDistribution q(1, 2, {0.9, 0.1});
  CHECK(kl_exact(p, p).value == doctest::Approx(0.0));
  CHECK(kl_exact(p, q).value == doctest::Approx(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(5.0)));
  const PatchDistribution point(1, 2, {1.0, 0.0});
  CHECK(kl_exact(point, p).value == doctest::Approx(std::log(2.0)));
  const KlResult bad = kl_exact(p, point);
  CHECK(bad.support_violated);
  CHECK(bad.value == std::numeric_limits<double>::infinity());
}

TEST_CASE("patch distributions validate their tables") {
  CHECK_THROWS_AS(PatchDistribution(2, 2, {0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(PatchDistribution(1, 2, {0.6, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(PatchDistribution(1, 2, {1.5, -0.5}), InvalidArgument);
  const PatchDistribution w = PatchDistribution::from_weights(1, 3, {1.0, 1.0, 2.0});
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w.digit(5, 0) == 2);
}

TEST_CASE("marginalizing sums out hidden positions") {
  // index = d0 + 2 d1
  const PatchDistribution p(2, 2, {0.1, 0.2, 0.3, 0.4});
  const PatchDistribution m0 = marginalize(p, VisibleHiddenSplit::from_bits(2, 0b01));
  CHECK(m0[0] == doctest::Approx(0.4));
  CHECK(m0[1] == doctest::Approx(0.6));
  const PatchDistribution m1 = marginalize(p, VisibleHiddenSplit::from_bits(2, 0b10));
  CHECK(m1[0] == doctest::Approx(0.3));
  CHECK(m1[1] == doctest::Approx(0.7));
  const PatchDistribution none = marginalize(p, VisibleHiddenSplit::from_bits(2, 0));
  CHECK(none.size() == 1);
  CHECK(none[0] == doctest::Approx(1.0));
  CHECK(marginalize(p, VisibleHiddenSplit::from_bits(2, 0b11)).probs() == p.probs());
}

TEST_CASE("joint KL never falls below the visible-marginal KL") {
  RngStream rng(3, "kl");
  const KlGapReport small = verify_kl_gap(2000, 2, 2, 3, rng);
  CHECK(small.violations == 0);
  CHECK(small.min_slack > -1e-9);
  RngStream rng2(4, "kl");
  CHECK(verify_kl_gap(20000, 2, 2, 2, rng2).violations == 0);
}
