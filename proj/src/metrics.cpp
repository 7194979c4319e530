#include "ceci/metrics.hpp"

#include "ceci/error.hpp"

#include <cmath>

namespace ceci {

namespace {

void require_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::NotNormalized, std::string(name) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw Error(ErrorCode::NotNormalized, std::string(name) + " sums to " + std::to_string(sum));
  }
}

void require_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "distributions must have the same non-zero length");
  }
  require_distribution(p, "p");
  require_distribution(q, "q");
}

// Calls f(F_k - G_k) for k = 0 .. K-2, the CDF gap over [u_k, u_{k+1}).
template <typename F>
void for_each_cdf_gap(std::span<const double> p, std::span<const double> q, F&& f) {
  double fp = 0.0;
  double fq = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    fp += p[k];
    fq += q[k];
    f(fp - fq);
  }
}

}  // namespace

double wasserstein_grid(std::span<const double> p, std::span<const double> q) {
  require_pair(p, q);
  if (p.size() == 1) return 0.0;
  const double du = 1.0 / static_cast<double>(p.size() - 1);
  double total = 0.0;
  for_each_cdf_gap(p, q, [&](double d) { total += std::abs(d); });
  return total * du;
}

double energy_grid(std::span<const double> p, std::span<const double> q) {
  require_pair(p, q);
  if (p.size() == 1) return 0.0;
  const double du = 1.0 / static_cast<double>(p.size() - 1);
  double total = 0.0;
  for_each_cdf_gap(p, q, [&](double d) { total += d * d; });
  return std::sqrt(2.0 * total * du);
}

double frobenius_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "frobenius operands differ in size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return std::sqrt(total);
}

Moments four_moments(std::span<const double> x) {
  Moments m;
  m.n = x.size();
  if (x.empty()) return m;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  m.mean = mean;
  if (x.size() < 2) return m;

  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  m.variance = s2 / (n - 1.0);
  if (s2 == 0.0) return m;

  const double m2 = s2 / n;
  const double m3 = s3 / n;
  const double m4 = s4 / n;
  if (x.size() >= 3) {
    const double g1 = m3 / std::pow(m2, 1.5);
    m.skewness = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
  }
  if (x.size() >= 4) {
    const double g2 = m4 / (m2 * m2) - 3.0;
    m.kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
  }
  return m;
}

void MetricSamples::append(const MetricSamples& o) {
  wasserstein.insert(wasserstein.end(), o.wasserstein.begin(), o.wasserstein.end());
  energy.insert(energy.end(), o.energy.begin(), o.energy.end());
  frobenius.insert(frobenius.end(), o.frobenius.begin(), o.frobenius.end());
}

MetricSamples metric_samples(const HeatmapSet& pred, const HeatmapSet& truth) {
  if (pred.room_ids() != truth.room_ids() || pred.classes() != truth.classes() ||
      pred.grid_size() != truth.grid_size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and truth heatmap sets differ in rooms, classes or S");
  }
  MetricSamples s;
  for (std::size_t r = 0; r < truth.rooms(); ++r) {
    for (std::size_t c = 0; c < truth.classes(); ++c) {
      const auto t = truth.grid(r, c);
      double mass = 0.0;
      for (double v : t) mass += v;
      if (mass == 0.0) continue;
      const auto p = pred.grid(r, c);
      s.wasserstein.push_back(wasserstein_grid(p, t));
      s.energy.push_back(energy_grid(p, t));
    }
    s.frobenius.push_back(frobenius_diff(pred.room_block(r), truth.room_block(r)));
  }
  return s;
}

MetricsReport summarize(const MetricSamples& s) {
  MetricsReport r;
  r.wasserstein = four_moments(s.wasserstein);
  r.energy = four_moments(s.energy);
  r.frobenius = four_moments(s.frobenius);
  return r;
}

MetricsReport evaluate(const HeatmapSet& pred, const HeatmapSet& truth) {
  return summarize(metric_samples(pred, truth));
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json moments_to_json(const Moments& m) {
  return {{"mean", opt(m.mean)},
          {"variance", opt(m.variance)},
          {"skewness", opt(m.skewness)},
          {"kurtosis", opt(m.kurtosis)},
          {"n", m.n}};
}

Moments moments_from_json(const nlohmann::json& j) {
  Moments m;
  m.n = j.at("n").get<std::size_t>();
  m.mean = opt_from(j, "mean");
  m.variance = opt_from(j, "variance");
  m.skewness = opt_from(j, "skewness");
  m.kurtosis = opt_from(j, "kurtosis");
  return m;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  return {{"wasserstein", moments_to_json(r.wasserstein)},
          {"energy", moments_to_json(r.energy)},
          {"frobenius", moments_to_json(r.frobenius)},
          {"provenance",
           {{"checkpoint_hash", r.checkpoint_hash},
            {"dataset_manifest_hash", r.dataset_hash},
            {"flattening", r.flattening}}}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.wasserstein = moments_from_json(j.at("wasserstein"));
    r.energy = moments_from_json(j.at("energy"));
    r.frobenius = moments_from_json(j.at("frobenius"));
    const auto& p = j.at("provenance");
    r.checkpoint_hash = p.value("checkpoint_hash", "");
    r.dataset_hash = p.value("dataset_manifest_hash", "");
    r.flattening = p.value("flattening", std::string(kFlatteningConvention));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("metrics report: ") + e.what());
  }
}

}  // namespace ceci
