#pragma once

#include "json.hpp"
#include "mid/core/mask.hpp"

namespace mid {

/// Fixed ratios serialize as a number, intervals as [lo, hi].
nlohmann::json mask_ratio_to_json(const MaskRatioSpec& spec);
MaskRatioSpec mask_ratio_from_json(const nlohmann::json& j);

}  // namespace mid
