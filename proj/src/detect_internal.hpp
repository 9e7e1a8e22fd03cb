// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include "provsem/detect.hpp"

namespace provsem {

// Shared between the GBDT and XGBOD serializers.
nlohmann::json gbdt_manifest_json(const GbdtModel& model);
GbdtModel gbdt_from_manifest_json(const nlohmann::json& manifest);

}  // namespace provsem
