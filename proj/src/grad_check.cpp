#include "ceci/error.hpp"
#include "ceci/nn.hpp"

#include <algorithm>
#include <cmath>

namespace ceci::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(GcnNetwork network, const SparseMatrix& adjacency, const NodeFeatures& x,
                           std::span<const std::size_t> output_rows, const Matrix& target, double step,
                           double denominator_floor) {
  auto config = network.config();
  if (config.dropout > 0.0) {
    // Rebuild with dropout off but keep the weights.
    auto layers = network.layers();
    config.dropout = 0.0;
    network = GcnNetwork(config, 0);
    network.layers() = std::move(layers);
  }
  auto output_at = [&](GcnNetwork& net) { return net.forward(adjacency, x, output_rows, Mode::train); };

  ForwardCache cache;
  const Matrix out = network.forward(adjacency, x, output_rows, Mode::train, nullptr, &cache);
  const Gradients grads = network.backward(cache, mse_loss_with_gradient(out, target).gradient);
  const auto analytic = grads.views();
  const auto names = network.parameter_names();

  GradCheckResult result;
  auto params = network.parameters();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& w = params[b][i];
      const double saved = w;
      w = saved + step;
      const Matrix up = output_at(network);
      w = saved - step;
      const Matrix down = output_at(network);
      w = saved;
      // L(up) - L(down) summed per entry as (u - d)(u + d - 2t), which avoids
      // subtracting two nearly equal totals.
      const double diff = ((up - down).array() * (up + down - 2.0 * target).array()).sum() /
                          static_cast<double>(target.size());
      const double numeric = diff / (2.0 * step);
      const double err = relative_error(analytic[b][i], numeric, denominator_floor);
      ++result.checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = err;
        result.worst_parameter = names[b] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const GradCheckConfig& c, std::uint64_t seed) {
  if (c.rooms == 0 || c.classes == 0 || c.grid_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "grad check needs at least one room, class and cell");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Building 0, rooms 1..R, then objects under each room.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> room_rows;
  std::size_t next = 1;
  for (std::size_t r = 0; r < c.rooms; ++r) {
    const std::size_t room = next++;
    room_rows.push_back(room);
    edges.emplace_back(0, room);
    for (std::size_t o = 0; o < c.objects_per_room; ++o) edges.emplace_back(room, next++);
  }
  const std::size_t num_nodes = next;
  const auto adj = normalized_adjacency(num_nodes, edges);

  const std::size_t cells = c.grid_size * c.grid_size;
  const std::size_t dim = c.classes * cells;
  // Room rows follow the model input: C heatmap grids, then C object counts.
  NodeFeatures x;
  x.num_nodes = num_nodes;
  x.index = room_rows;
  x.rows.resize(static_cast<Eigen::Index>(c.rooms), static_cast<Eigen::Index>(dim + c.classes));
  for (Eigen::Index i = 0; i < x.rows.size(); ++i) x.rows.data()[i] = unit(rng);
  x.rows.rightCols(static_cast<Eigen::Index>(c.classes)) =
      (x.rows.rightCols(static_cast<Eigen::Index>(c.classes)).array() * 3.0).floor() + 1.0;
  // Normalize every class grid, as a heatmap would be.
  for (Eigen::Index r = 0; r < x.rows.rows(); ++r) {
    for (std::size_t k = 0; k < c.classes; ++k) {
      auto seg = x.rows.row(r).segment(static_cast<Eigen::Index>(k * cells), static_cast<Eigen::Index>(cells));
      seg /= seg.sum();
    }
  }
  Matrix target(static_cast<Eigen::Index>(c.rooms), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = unit(rng) / static_cast<double>(cells);

  ModelConfig mc;
  mc.input_dim = dim + c.classes;
  mc.output_dim = dim;
  mc.hidden_dim = c.hidden;
  mc.num_layers = c.num_layers;
  mc.dropout = 0.0;
  mc.batch_norm = c.batch_norm;
  mc.relu = c.relu;
  GcnNetwork net(mc, rng());
  // Perturb the normalization parameters away from their trivial init so
  // every term of the backward pass is exercised.
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.1 * (unit(rng) - 0.5);
    if (l.has_norm()) {
      for (Eigen::Index i = 0; i < l.gamma.size(); ++i) l.gamma[i] = 0.5 + unit(rng);
      for (Eigen::Index i = 0; i < l.beta.size(); ++i) l.beta[i] = 0.2 * (unit(rng) - 0.5);
    }
  }
  return grad_check(std::move(net), adj.matrix, x, room_rows, target, c.step, c.denominator_floor);
}

}  // namespace ceci::nn
