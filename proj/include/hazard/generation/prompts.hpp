#pragma once

#include <string_view>

namespace hazard::gen {

// Changing the wording invalidates trained checkpoints; bump the version.
inline constexpr std::string_view kInstructionVersion = "v1";
inline constexpr std::string_view kInstructionTemplate =
    "Describe the hazard that may happen a few seconds later , referring to each highlighted object as Entity #n .";

}  // namespace hazard::gen
