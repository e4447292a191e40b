#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace evoagent {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr double kUnitNormTolerance = 1e-6;

class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}

  /// Scales to unit L2 norm. Throws Errc::invalid_argument for a zero vector.
  static Embedding normalized(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  double norm() const noexcept;
  bool is_unit(double tolerance = kUnitNormTolerance) const noexcept;

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

/// Dot product of two unit vectors. Throws Errc::dimension_mismatch.
double cosine(const Embedding& a, const Embedding& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view descriptor) const = 0;
  virtual std::size_t dimension() const noexcept = 0;
};

std::uint64_t fnv1a64(std::string_view data) noexcept;

// Splittable generator; split() derives an independent stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  double uniform() noexcept;  // [0, 1), 53 bits
  SplitMix64 split() noexcept { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

// Deterministic stand-in for a visual feature extractor: the descriptor's FNV-1a hash seeds
// SplitMix64, Box-Muller turns uniforms into standard normals, and the result is normalized.
class ReferenceEmbedder final : public Embedder {
 public:
  explicit ReferenceEmbedder(std::size_t dimension = kEmbeddingDim) : dimension_(dimension) {}

  /// Throws Errc::empty_descriptor.
  Embedding embed(std::string_view descriptor) const override;
  std::size_t dimension() const noexcept override { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Rounds each component to 9 significant digits so a textual dump re-reads bit-exactly.
Embedding quantize(const Embedding& e);

}  // namespace evoagent
