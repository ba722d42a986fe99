#include "mid/core/mask.hpp"

#include <cmath>
#include <sstream>

#include "mid/core/error.hpp"

namespace mid {

namespace {

bool is_ratio(double r) { return std::isfinite(r) && r >= 0.0 && r <= 1.0; }

}  // namespace

MaskRatioSpec MaskRatioSpec::fixed(double ratio) {
  if (!is_ratio(ratio)) throw InvalidArgument("masking ratio must lie in [0, 1]");
  return {ratio, ratio, true};
}

MaskRatioSpec MaskRatioSpec::interval(double lo, double hi) {
  if (!is_ratio(lo) || !is_ratio(hi) || lo > hi) {
    throw InvalidArgument("masking ratio interval must satisfy 0 <= lo <= hi <= 1");
  }
  return {lo, hi, false};
}

std::string MaskRatioSpec::to_string() const {
  std::ostringstream os;
  if (fixed_) {
    os << lo_;
  } else {
    os << '[' << lo_ << ", " << hi_ << ']';
  }
  return os.str();
}

double sample_mask_ratio(const MaskRatioSpec& spec, RngStream& rng) {
  if (spec.is_fixed()) return spec.lo();
  return rng.uniform(spec.lo(), spec.hi());
}

BinaryMask sample_mask(int height, int width, double alpha, RngStream& rng) {
  if (!is_ratio(alpha)) throw InvalidArgument("sample_mask: alpha must lie in [0, 1]");
  if (height <= 0 || width <= 0) throw InvalidArgument("sample_mask: dimensions must be positive");
  std::vector<unsigned char> bits(static_cast<std::size_t>(height) * width);
  for (auto& b : bits) b = rng.uniform() < alpha ? 0 : 1;
  return {height, width, alpha, std::move(bits)};
}

ImageTensor apply_mask(const ImageTensor& img, const BinaryMask& mask) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw InvalidArgument("apply_mask: mask and image spatial dimensions differ");
  }
  ImageTensor out = img;
  const int c = img.channels();
  auto data = out.data();
  auto bits = mask.bits();
  for (std::size_t p = 0; p < bits.size(); ++p) {
    if (bits[p] == 0) {
      for (int k = 0; k < c; ++k) data[p * c + k] = 0.0f;
    }
  }
  return out;
}

}  // namespace mid
