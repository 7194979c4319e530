#pragma once

#include "ceci/dataset.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ceci {

/// Grids are flattened row-major onto support points u_k = k / (S^2 - 1).
inline constexpr std::string_view kFlatteningConvention = "row-major-unit-interval-v1";
inline constexpr double kNormalizationTolerance = 1e-6;

/// 1-Wasserstein distance between two flattened grids. Throws
/// NotNormalized (negative entry or sum off by more than 1e-6) or
/// ShapeMismatch.
double wasserstein_grid(std::span<const double> p, std::span<const double> q);

/// Energy distance sqrt(2 E|X-Y| - E|X-X'| - E|Y-Y'|), evaluated through the
/// equivalent form sqrt(2 * integral (F - G)^2 du).
double energy_grid(std::span<const double> p, std::span<const double> q);

/// sqrt(sum (a - b)^2). Throws ShapeMismatch.
double frobenius_diff(std::span<const double> a, std::span<const double> b);

/// Sample mean, unbiased variance, adjusted Fisher-Pearson skewness (G1) and
/// excess kurtosis (G2). A field is absent when the sample is too small for
/// it, and skewness/kurtosis are absent when the variance is zero.
struct Moments {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> variance;
  std::optional<double> skewness;
  std::optional<double> kurtosis;
};

Moments four_moments(std::span<const double> samples);

/// Raw per-item distances. Wasserstein and energy hold one value per
/// (room, class present in truth); Frobenius one value per room.
struct MetricSamples {
  std::vector<double> wasserstein;
  std::vector<double> energy;
  std::vector<double> frobenius;

  void append(const MetricSamples& other);
};

/// Throws ShapeMismatch when shapes or room ids differ.
MetricSamples metric_samples(const HeatmapSet& pred, const HeatmapSet& truth);

struct MetricsReport {
  Moments wasserstein;
  Moments energy;
  Moments frobenius;
  std::string checkpoint_hash;
  std::string dataset_hash;
  std::string flattening{kFlatteningConvention};
};

MetricsReport summarize(const MetricSamples& samples);
MetricsReport evaluate(const HeatmapSet& pred, const HeatmapSet& truth);

nlohmann::json moments_to_json(const Moments& m);
Moments moments_from_json(const nlohmann::json& j);
/// {"wasserstein": {...}, "energy": {...}, "frobenius": {...},
///  "provenance": {"checkpoint_hash", "dataset_manifest_hash", "flattening"}}
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace ceci
