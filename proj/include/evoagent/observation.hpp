#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace evoagent {

// Relative screen rectangle, all coordinates in [0, 1].
struct BBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool valid() const noexcept;
  bool operator==(const BBox&) const = default;
};

struct DetectedElement {
  std::size_t index = 0;
  BBox bbox;
  std::string role_hint;
  std::string ocr_text;
  std::string visual_descriptor;  // stable appearance token, never empty

  bool operator==(const DetectedElement&) const = default;
};

struct ScreenObservation {
  std::vector<DetectedElement> elements;
  std::string raster_ref;
  std::int64_t captured_at = 0;

  bool operator==(const ScreenObservation&) const = default;
};

/// Checks indices are 0..n-1 in order and every descriptor is non-empty.
std::vector<std::string> validate_observation(const ScreenObservation& obs);

// Sorted multiset of visual descriptors.
using Fingerprint = std::vector<std::string>;

Fingerprint fingerprint_of(const std::vector<DetectedElement>& elements);
Fingerprint page_fingerprint(const ScreenObservation& obs);

/// Multiset Jaccard: |A ∩ B| / |A ∪ B| with multiplicities. Two empty multisets compare as 1.
double fingerprint_similarity(const Fingerprint& a, const Fingerprint& b);

}  // namespace evoagent
