#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace svdkd {

// Declaration order is the total order used wherever modality pairs are
// enumerated.
enum class Modality : std::uint8_t { kRgb = 0, kIr = 1, kSketch = 2, kText = 3 };

inline constexpr std::size_t kModalityCount = 4;

inline constexpr std::array<Modality, kModalityCount> kAllModalities = {
    Modality::kRgb, Modality::kIr, Modality::kSketch, Modality::kText};

constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

std::string_view to_string(Modality m);

// Accepts the lowercase serialized names only. Throws FormatError otherwise.
Modality parse_modality(std::string_view name);

// The six unordered pairs (a, b) with a < b, in lexicographic order of the
// modality ordering: (rgb,ir) (rgb,sketch) (rgb,text) (ir,sketch) (ir,text)
// (sketch,text).
const std::array<std::pair<Modality, Modality>, 6>& modality_pairs();

}  // namespace svdkd
