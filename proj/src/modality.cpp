#include "svdkd/modality.hpp"

#include <string>

#include "svdkd/errors.hpp"

namespace svdkd {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kRgb: return "rgb";
    case Modality::kIr: return "ir";
    case Modality::kSketch: return "sketch";
    case Modality::kText: return "text";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == name) return m;
  }
  throw FormatError("unknown modality '" + std::string(name) +
                    "' (expected rgb, ir, sketch or text)");
}

const std::array<std::pair<Modality, Modality>, 6>& modality_pairs() {
  static const auto pairs = [] {
    std::array<std::pair<Modality, Modality>, 6> out{};
    std::size_t next = 0;
    for (std::size_t a = 0; a < kModalityCount; ++a) {
      for (std::size_t b = a + 1; b < kModalityCount; ++b) {
        out[next++] = {kAllModalities[a], kAllModalities[b]};
      }
    }
    return out;
  }();
  return pairs;
}

}  // namespace svdkd
