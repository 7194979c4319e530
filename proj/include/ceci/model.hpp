#pragma once

#include "ceci/dataset.hpp"
#include "ceci/metrics.hpp"
#include "ceci/nn.hpp"
#include "ceci/ontology.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ceci {

enum class Variant { base, base_ont };

/// "base" / "base-ont".
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

enum class GraphScope {
  /// Every node of the belief graph; non-room nodes carry zero features.
  full,
  /// Building and room nodes only.
  rooms_only,
};

std::string_view to_string(GraphScope s);
GraphScope scope_from_string(std::string_view s);

struct CeciConfig {
  std::size_t grid_size = 32;
  std::size_t hidden = 256;
  std::size_t num_layers = 5;
  double dropout = 0.2;
  double bn_momentum = 0.1;
  Variant variant = Variant::base;
  GraphScope scope = GraphScope::full;

  bool operator==(const CeciConfig&) const = default;
};

/// Network input for one or more belief graphs.
struct EncodedBatch {
  nn::SparseMatrix adjacency;
  nn::NodeFeatures features;           // room rows only
  std::vector<std::size_t> room_rows;  // output rows, in heatmap room order
  nn::Matrix target;                   // rooms x C*S*S; empty when not requested
};

class CeciModel {
 public:
  /// `affinity` is required for base_ont and rejected for base.
  CeciModel(const CeciConfig& config, std::shared_ptr<const ClassCatalog> catalog,
            std::optional<ClassAffinity> affinity, std::uint64_t seed);

  /// n*S^2 + n for base, 2*n*S^2 + n for base_ont.
  static std::size_t input_width(Variant v, std::size_t classes, std::size_t grid_size);

  const CeciConfig& config() const { return config_; }
  const ClassCatalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const ClassCatalog>& catalog_ptr() const { return catalog_; }
  const std::optional<ClassAffinity>& affinity() const { return affinity_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t input_width() const;
  std::size_t output_width() const;

  nn::GcnNetwork& network() { return network_; }
  const nn::GcnNetwork& network() const { return network_; }

  /// Throws ConfigMismatch when a sample's S or catalog differs from the model.
  void check_compatible(const BsgSample& s) const;

  /// Room feature row: [flatten(L'' room block) | counts row | P-mixed block].
  nn::Matrix room_features(const BsgSample& s) const;

  /// Encodes several samples as one disjoint graph (block-diagonal adjacency).
  EncodedBatch encode(std::span<const BsgSample* const> samples, bool with_target) const;
  EncodedBatch encode(const BsgSample& s, bool with_target = false) const;

  /// Raw eval-mode room outputs (rooms x C*S*S).
  nn::Matrix predict_raw(const BsgSample& s) const;

 private:
  CeciConfig config_;
  std::shared_ptr<const ClassCatalog> catalog_;
  std::optional<ClassAffinity> affinity_;
  std::uint64_t seed_ = 0;
  nn::GcnNetwork network_;
};

/// Clamps negatives to zero, then per (room, class) renormalizes grids whose
/// count is positive and zeroes the rest. A positive-count grid that clamps
/// to all zeros becomes uniform. Throws NonFinite.
HeatmapSet postprocess(const nn::Matrix& raw, const HeatmapSet& like, const ObjectCounts& counts);

/// Eval-mode forward plus postprocess().
HeatmapSet predict(const CeciModel& model, const BsgSample& s);

struct TrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch_size = 12;
  double lr = 1e-5;
  double lr_decay = 1e-8;
  std::uint64_t seed = 1;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::optional<std::size_t> best_epoch;  // epoch whose parameters were kept
  bool stopped_early = false;
  nn::AdamState optimizer;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the MSE between raw room outputs and target heatmaps.
/// With a validation set the parameters of the best validation epoch are
/// restored at the end. Throws EmptyDataset, ConfigMismatch or NonFinite.
TrainResult train(CeciModel& model, const std::vector<BsgSample>& train_set, const std::vector<BsgSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean eval-mode MSE over the raw room outputs of `samples`, weighted by
/// element count.
double evaluate_loss(const CeciModel& model, const std::vector<BsgSample>& samples);

/// Metrics over predict() for every sample, pooled into one population.
MetricsReport evaluate_model(const CeciModel& model, const std::vector<BsgSample>& test_set);

nlohmann::json config_to_json(const CeciConfig& c);
/// Missing keys keep the values of `defaults`.
CeciConfig config_from_json(const nlohmann::json& j, CeciConfig defaults = {});
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

// ---------------------------------------------------------------- checkpoint

struct CheckpointInfo {
  std::string tool_version;
  std::string catalog_hash;
  std::size_t grid_size = 0;
  std::uint64_t seed = 0;
  std::optional<TrainConfig> train_config;
};

/// Versioned JSON checkpoint; parameters are written as shortest round-trip
/// decimals. Adam moments are included when `optimizer` is given.
void save_checkpoint(const CeciModel& model, const std::filesystem::path& path,
                     const std::optional<TrainConfig>& train_config = std::nullopt,
                     const nn::AdamState* optimizer = nullptr);

struct LoadedCheckpoint {
  CeciModel model;
  CheckpointInfo info;
  std::optional<nn::AdamState> optimizer;
};

/// Throws MissingArtifact, ParseError or ConfigMismatch (catalog hash does
/// not match the stored labels).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ceci
