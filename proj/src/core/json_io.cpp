#include "mid/core/json_io.hpp"

#include "mid/core/error.hpp"

namespace mid {

nlohmann::json mask_ratio_to_json(const MaskRatioSpec& spec) {
  if (spec.is_fixed()) return spec.lo();
  return nlohmann::json::array({spec.lo(), spec.hi()});
}

MaskRatioSpec mask_ratio_from_json(const nlohmann::json& j) {
  if (j.is_number()) return MaskRatioSpec::fixed(j.get<double>());
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return MaskRatioSpec::interval(j[0].get<double>(), j[1].get<double>());
  }
  throw InvalidArgument("masking ratio must be a number or a [lo, hi] pair, got " + j.dump());
}

}  // namespace mid
