#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "evoagent/embedding.hpp"
#include "evoagent/error.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

bool BBox::valid() const noexcept {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return unit(x0) && unit(y0) && unit(x1) && unit(y1) && x0 <= x1 && y0 <= y1;
}

std::vector<std::string> validate_observation(const ScreenObservation& obs) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < obs.elements.size(); ++i) {
    const auto& el = obs.elements[i];
    if (el.index != i) {
      problems.push_back("element " + std::to_string(i) + " carries index " +
                         std::to_string(el.index));
    }
    if (el.visual_descriptor.empty()) {
      problems.push_back("element " + std::to_string(i) + " has an empty visual descriptor");
    }
    if (!el.bbox.valid()) problems.push_back("element " + std::to_string(i) + " has a bad bbox");
  }
  return problems;
}

Fingerprint fingerprint_of(const std::vector<DetectedElement>& elements) {
  Fingerprint fp;
  fp.reserve(elements.size());
  for (const auto& el : elements) fp.push_back(el.visual_descriptor);
  std::sort(fp.begin(), fp.end());
  return fp;
}

Fingerprint page_fingerprint(const ScreenObservation& obs) { return fingerprint_of(obs.elements); }

double fingerprint_similarity(const Fingerprint& a, const Fingerprint& b) {
  if (a.empty() && b.empty()) return 1.0;
  // Both sides are sorted, so a merge walk counts min/max multiplicities.
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++uni;
      ++ia;
    } else if (*ib < *ia) {
      ++uni;
      ++ib;
    } else {
      ++inter;
      ++uni;
      ++ia;
      ++ib;
    }
  }
  uni += static_cast<std::size_t>(a.end() - ia) + static_cast<std::size_t>(b.end() - ib);
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Embedding Embedding::normalized(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  if (!(sq > 0.0)) throw Error(Errc::invalid_argument, "cannot normalize a zero vector");
  const double n = std::sqrt(sq);
  for (double& v : values) v /= n;
  return Embedding(std::move(values));
}

double Embedding::norm() const noexcept {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  return std::sqrt(sq);
}

bool Embedding::is_unit(double tolerance) const noexcept {
  return std::abs(norm() - 1.0) <= tolerance;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(Errc::dimension_mismatch, "embedding dimensions differ: " +
                                              std::to_string(a.dimension()) + " vs " +
                                              std::to_string(b.dimension()));
  }
  const auto va = a.values();
  const auto vb = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
  return dot;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t SplitMix64::next() noexcept {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept {
  return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
}

Embedding ReferenceEmbedder::embed(std::string_view descriptor) const {
  if (descriptor.empty()) throw Error(Errc::empty_descriptor, "cannot embed an empty descriptor");
  SplitMix64 rng(fnv1a64(descriptor));
  std::vector<double> values;
  values.reserve(dimension_);
  while (values.size() < dimension_) {
    const double u1 = 1.0 - rng.uniform();  // (0, 1]
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    values.push_back(r * std::cos(theta));
    if (values.size() < dimension_) values.push_back(r * std::sin(theta));
  }
  return Embedding::normalized(std::move(values));
}

Embedding quantize(const Embedding& e) {
  std::vector<double> out;
  out.reserve(e.dimension());
  char buf[32];
  for (double v : e.values()) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out.push_back(std::strtod(buf, nullptr));
  }
  return Embedding(std::move(out));
}

}  // namespace evoagent
