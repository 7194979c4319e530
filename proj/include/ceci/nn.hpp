#pragma once

#include "ceci/scene_graph.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ceci::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Throws NonFinite naming `where` if any entry is NaN or infinite.
void check_finite(const Matrix& m, std::string_view where);

/// D^-1/2 (A + I) D^-1/2 over the undirected version of an edge set.
struct NormalizedAdjacency {
  SparseMatrix matrix;
  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// Duplicate and self-loop edges are ignored (the self loop is always added).
NormalizedAdjacency normalized_adjacency(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges);
/// Node order follows g.nodes().
NormalizedAdjacency normalized_adjacency(const SceneGraph& g);
/// Disjoint union; node offsets follow the argument order.
NormalizedAdjacency block_diagonal(std::span<const NormalizedAdjacency* const> parts);

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 256;
  std::size_t output_dim = 0;
  std::size_t num_layers = 5;
  double dropout = 0.2;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  bool batch_norm = true;
  bool relu = true;

  bool operator==(const ModelConfig&) const = default;
};

/// Weights of one graph-convolution layer. The normalization vectors are
/// empty on the output layer and when batch norm is disabled.
struct LayerParams {
  Matrix weight;  // in x out
  RowVector bias;
  RowVector gamma;
  RowVector beta;
  RowVector running_mean;
  RowVector running_var;

  bool has_norm() const { return gamma.size() > 0; }
};

/// Node features where only the listed rows may be non-zero. Room nodes
/// carry features and every other node is zero, so the first layer only
/// multiplies the listed rows.
struct NodeFeatures {
  Matrix rows;                     // k x input_dim
  std::vector<std::size_t> index;  // k node indices, strictly increasing
  std::size_t num_nodes = 0;

  static NodeFeatures from_dense(const Matrix& dense);
  Matrix to_dense() const;
};

enum class Mode { train, eval };

struct LayerCache {
  Matrix input;       // H (hidden layers l > 0); empty for the first layer
  Matrix aggregated;  // A_R H for the output layer
  Matrix normalized;  // batch-norm x-hat
  RowVector inv_std;
  Matrix relu_mask;
  Matrix dropout_mask;  // already includes the 1 / (1 - p) scale
  Mode mode = Mode::eval;
};

/// Everything backward() needs. Holds a pointer to the forward input, which
/// must outlive the cache.
struct ForwardCache {
  const NodeFeatures* input = nullptr;
  SparseMatrix adjacency;
  SparseMatrix output_adjacency;  // rows of the adjacency selected for output
  std::vector<LayerCache> layers;
};

struct Gradients {
  std::vector<LayerParams> layers;  // only weight/bias/gamma/beta are filled
  /// Same order as GcnNetwork::parameters().
  std::vector<std::span<const double>> views() const;
};

/// Stack of graph-convolution layers: every hidden layer is
/// Dropout(ReLU(BatchNorm(A X W + b))); the output layer is A X W + b.
class GcnNetwork {
 public:
  GcnNetwork() = default;
  /// Glorot-uniform weights, zero biases, gamma = 1, beta = 0.
  GcnNetwork(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<LayerParams>& layers() { return layers_; }
  const std::vector<LayerParams>& layers() const { return layers_; }

  /// Output rows for `output_rows` (all nodes when empty). Train mode uses
  /// batch statistics, updates running statistics and draws dropout masks
  /// from `dropout_rng`.
  Matrix forward(const SparseMatrix& adjacency, const NodeFeatures& x, std::span<const std::size_t> output_rows,
                 Mode mode, std::mt19937_64* dropout_rng = nullptr, ForwardCache* cache = nullptr);
  /// Eval-mode forward; never modifies the network.
  Matrix infer(const SparseMatrix& adjacency, const NodeFeatures& x, std::span<const std::size_t> output_rows) const;

  /// Gradients of a loss with respect to every parameter, given the loss
  /// gradient with respect to the forward output.
  Gradients backward(const ForwardCache& cache, const Matrix& d_output) const;

  /// Trainable parameter blocks, in a fixed order: per layer weight, bias,
  /// then gamma and beta when present.
  std::vector<std::span<double>> parameters();
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

 private:
  Matrix run(const SparseMatrix& adjacency, const NodeFeatures& x, std::span<const std::size_t> output_rows,
             Mode mode, std::mt19937_64* dropout_rng, ForwardCache* cache,
             std::vector<LayerParams>* running_stats) const;

  ModelConfig config_;
  std::vector<LayerParams> layers_;
};

struct Loss {
  double value = 0.0;
  Matrix gradient;  // d value / d prediction
};

/// Mean over all entries of the squared difference. Throws ShapeMismatch.
double mse_loss(const Matrix& prediction, const Matrix& target);
Loss mse_loss_with_gradient(const Matrix& prediction, const Matrix& target);

struct AdamConfig {
  double learning_rate = 1e-5;
  /// Inverse-time decay: lr_t = lr / (1 + decay * t), t = updates already applied.
  double decay = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
};

double effective_learning_rate(const AdamConfig& config, std::int64_t completed_steps);

/// One bias-corrected Adam update of every parameter block in place.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config);

struct GradCheckConfig {
  std::size_t grid_size = 4;
  std::size_t classes = 3;
  std::size_t rooms = 3;
  std::size_t objects_per_room = 2;
  std::size_t hidden = 8;
  std::size_t num_layers = 5;
  bool batch_norm = true;
  bool relu = true;
  double step = 1e-5;
  /// Lower bound on the relative-error denominator, so parameters whose
  /// true gradient is zero (a bias feeding batch norm) compare absolutely.
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares backward() against central differences of the MSE loss on every
/// parameter entry. Dropout is forced off; batch norm runs in train mode.
GradCheckResult grad_check(GcnNetwork network, const SparseMatrix& adjacency, const NodeFeatures& x,
                           std::span<const std::size_t> output_rows, const Matrix& target, double step,
                           double denominator_floor);

/// Builds a random building/room/object graph with heatmap-like room
/// features and random targets, then runs the check above.
GradCheckResult grad_check(const GradCheckConfig& config, std::uint64_t seed);

}  // namespace ceci::nn
