#include "ceci/nn.hpp"

#include "ceci/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ceci::nn {

void check_finite(const Matrix& m, std::string_view where) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFinite, "non-finite value in " + std::string(where));
  }
}

NormalizedAdjacency normalized_adjacency(std::size_t num_nodes,
                                         std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::set<std::pair<std::size_t, std::size_t>> undirected;
  for (auto [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) {
      throw Error(ErrorCode::DanglingEdge, "edge endpoint outside node range");
    }
    if (a == b) continue;
    undirected.emplace(std::min(a, b), std::max(a, b));
  }
  std::vector<double> degree(num_nodes, 1.0);
  for (auto [a, b] : undirected) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(num_nodes + 2 * undirected.size());
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.emplace_back(k, k, 1.0 / degree[i]);
  }
  for (auto [a, b] : undirected) {
    const double w = 1.0 / std::sqrt(degree[a] * degree[b]);
    t.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b), w);
    t.emplace_back(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a), w);
  }
  NormalizedAdjacency out;
  const auto n = static_cast<Eigen::Index>(num_nodes);
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(t.begin(), t.end());
  out.matrix.makeCompressed();
  return out;
}

NormalizedAdjacency normalized_adjacency(const SceneGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(g.edges().size());
  for (const auto& e : g.edges()) edges.emplace_back(g.node_index(e.parent), g.node_index(e.child));
  return normalized_adjacency(g.nodes().size(), edges);
}

NormalizedAdjacency block_diagonal(std::span<const NormalizedAdjacency* const> parts) {
  Eigen::Index total = 0;
  Eigen::Index nnz = 0;
  for (const auto* p : parts) {
    total += p->matrix.rows();
    nnz += p->matrix.nonZeros();
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nnz));
  Eigen::Index offset = 0;
  for (const auto* p : parts) {
    for (Eigen::Index r = 0; r < p->matrix.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(p->matrix, r); it; ++it) {
        t.emplace_back(offset + it.row(), offset + it.col(), it.value());
      }
    }
    offset += p->matrix.rows();
  }
  NormalizedAdjacency out;
  out.matrix.resize(total, total);
  out.matrix.setFromTriplets(t.begin(), t.end());
  out.matrix.makeCompressed();
  return out;
}

NodeFeatures NodeFeatures::from_dense(const Matrix& dense) {
  NodeFeatures f;
  f.num_nodes = static_cast<std::size_t>(dense.rows());
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    if (!dense.row(r).isZero(0.0)) f.index.push_back(static_cast<std::size_t>(r));
  }
  f.rows.resize(static_cast<Eigen::Index>(f.index.size()), dense.cols());
  for (std::size_t k = 0; k < f.index.size(); ++k) {
    f.rows.row(static_cast<Eigen::Index>(k)) = dense.row(static_cast<Eigen::Index>(f.index[k]));
  }
  return f;
}

Matrix NodeFeatures::to_dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(num_nodes), rows.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    out.row(static_cast<Eigen::Index>(index[k])) = rows.row(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::vector<std::span<const double>> Gradients::views() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.has_norm()) {
      out.emplace_back(l.gamma.data(), static_cast<std::size_t>(l.gamma.size()));
      out.emplace_back(l.beta.data(), static_cast<std::size_t>(l.beta.size()));
    }
  }
  return out;
}

GcnNetwork::GcnNetwork(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.num_layers == 0 || config.input_dim == 0 || config.output_dim == 0 ||
      (config.num_layers > 1 && config.hidden_dim == 0)) {
    throw Error(ErrorCode::InvalidArgument, "network dimensions must be positive");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "dropout must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const bool last = l + 1 == config.num_layers;
    const auto in = static_cast<Eigen::Index>(l == 0 ? config.input_dim : config.hidden_dim);
    const auto out = static_cast<Eigen::Index>(last ? config.output_dim : config.hidden_dim);
    LayerParams p;
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    p.weight.resize(in, out);
    for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = u(rng);
    p.bias = RowVector::Zero(out);
    if (!last && config.batch_norm) {
      p.gamma = RowVector::Ones(out);
      p.beta = RowVector::Zero(out);
      p.running_mean = RowVector::Zero(out);
      p.running_var = RowVector::Ones(out);
    }
    layers_.push_back(std::move(p));
  }
}

namespace {

SparseMatrix select_rows(const SparseMatrix& a, std::span<const std::size_t> rows) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
      t.emplace_back(static_cast<Eigen::Index>(k), it.col(), it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

}  // namespace

Matrix GcnNetwork::forward(const SparseMatrix& adjacency, const NodeFeatures& x,
                           std::span<const std::size_t> output_rows, Mode mode, std::mt19937_64* dropout_rng,
                           ForwardCache* cache) {
  return run(adjacency, x, output_rows, mode, dropout_rng, cache, mode == Mode::train ? &layers_ : nullptr);
}

Matrix GcnNetwork::infer(const SparseMatrix& adjacency, const NodeFeatures& x,
                         std::span<const std::size_t> output_rows) const {
  return run(adjacency, x, output_rows, Mode::eval, nullptr, nullptr, nullptr);
}

Matrix GcnNetwork::run(const SparseMatrix& adjacency, const NodeFeatures& x, std::span<const std::size_t> output_rows,
                       Mode mode, std::mt19937_64* dropout_rng, ForwardCache* cache,
                       std::vector<LayerParams>* running_stats) const {
  const auto n = static_cast<Eigen::Index>(x.num_nodes);
  if (adjacency.rows() != n || adjacency.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "adjacency is " + std::to_string(adjacency.rows()) + "x" +
                                              std::to_string(adjacency.cols()) + " but there are " +
                                              std::to_string(n) + " nodes");
  }
  if (x.rows.cols() != static_cast<Eigen::Index>(config_.input_dim) ||
      x.rows.rows() != static_cast<Eigen::Index>(x.index.size())) {
    throw Error(ErrorCode::ShapeMismatch, "node features have " + std::to_string(x.rows.cols()) +
                                              " columns, expected " + std::to_string(config_.input_dim));
  }
  for (std::size_t k = 0; k < x.index.size(); ++k) {
    if (x.index[k] >= x.num_nodes || (k > 0 && x.index[k] <= x.index[k - 1])) {
      throw Error(ErrorCode::InvalidArgument, "feature row indices must be increasing and in range");
    }
  }
  std::vector<std::size_t> all_rows;
  if (output_rows.empty()) {
    all_rows.resize(x.num_nodes);
    for (std::size_t i = 0; i < x.num_nodes; ++i) all_rows[i] = i;
    output_rows = all_rows;
  }
  for (auto r : output_rows) {
    if (r >= x.num_nodes) throw Error(ErrorCode::OutOfBounds, "output row outside node range");
  }
  const bool train = mode == Mode::train;
  const bool use_dropout = train && config_.dropout > 0.0;
  if (use_dropout && dropout_rng == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "train-mode dropout needs a random generator");
  }
  if (cache) {
    cache->input = &x;
    cache->adjacency = adjacency;
    cache->layers.assign(layers_.size(), LayerCache{});
  }

  Matrix h;  // activations entering the current layer (l > 0)
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& p = layers_[l];
    const bool last = l + 1 == layers_.size();
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->mode = mode;

    if (last) {
      const SparseMatrix a_r = select_rows(adjacency, output_rows);
      Matrix ax = l == 0 ? Matrix(a_r * x.to_dense()) : Matrix(a_r * h);
      Matrix y = ax * p.weight;
      y.rowwise() += p.bias;
      check_finite(y, "network output");
      if (lc) {
        lc->aggregated = std::move(ax);
        cache->output_adjacency = a_r;
      }
      return y;
    }

    // Transform first so the sparse product runs on the narrower matrix.
    Matrix t;
    if (l == 0) {
      const Matrix xw = x.rows * p.weight;
      t = Matrix::Zero(n, p.weight.cols());
      for (std::size_t k = 0; k < x.index.size(); ++k) {
        t.row(static_cast<Eigen::Index>(x.index[k])) = xw.row(static_cast<Eigen::Index>(k));
      }
    } else {
      t = h * p.weight;
    }
    Matrix z = adjacency * t;
    z.rowwise() += p.bias;

    if (p.has_norm()) {
      RowVector mean;
      RowVector var;
      if (train) {
        mean = z.colwise().mean();
        var = (z.rowwise() - mean).array().square().colwise().mean();
        const double m = config_.bn_momentum;
        const double unbiased = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
        if (running_stats) {
          auto& q = (*running_stats)[l];
          q.running_mean = (1.0 - m) * q.running_mean + m * mean;
          q.running_var = (1.0 - m) * q.running_var + m * (var * unbiased);
        }
      } else {
        mean = p.running_mean;
        var = p.running_var;
      }
      const RowVector inv_std = (var.array() + config_.bn_epsilon).rsqrt().matrix();
      Matrix xhat = (z.rowwise() - mean).array().rowwise() * inv_std.array();
      z = (xhat.array().rowwise() * p.gamma.array()).rowwise() + p.beta.array();
      if (lc) {
        lc->normalized = std::move(xhat);
        lc->inv_std = inv_std;
      }
    }
    if (config_.relu) {
      Matrix mask = (z.array() > 0.0).cast<double>();
      z = z.cwiseProduct(mask);
      if (lc) lc->relu_mask = std::move(mask);
    }
    if (use_dropout) {
      const double keep = 1.0 - config_.dropout;
      std::bernoulli_distribution b(keep);
      Matrix mask(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = b(*dropout_rng) ? 1.0 / keep : 0.0;
      z = z.cwiseProduct(mask);
      if (lc) lc->dropout_mask = std::move(mask);
    }
    if (cache && l + 1 < layers_.size()) cache->layers[l + 1].input = z;
    h = std::move(z);
  }
  return h;  // unreachable: the last layer returns above
}

Gradients GcnNetwork::backward(const ForwardCache& cache, const Matrix& d_output) const {
  if (cache.layers.size() != layers_.size() || cache.input == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "forward cache does not belong to this network");
  }
  const NodeFeatures& x = *cache.input;
  Gradients g;
  g.layers.resize(layers_.size());

  const std::size_t last = layers_.size() - 1;
  const auto& pl = layers_[last];
  const auto& cl = cache.layers[last];
  if (d_output.rows() != cache.output_adjacency.rows() || d_output.cols() != pl.weight.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "output gradient shape does not match the forward output");
  }
  g.layers[last].weight = cl.aggregated.transpose() * d_output;
  g.layers[last].bias = d_output.colwise().sum();
  if (last == 0) return g;

  // dL/dH for the activations entering the output layer.
  Matrix dh = cache.output_adjacency.transpose() * Matrix(d_output * pl.weight.transpose());

  for (std::size_t l = last; l-- > 0;) {
    const auto& p = layers_[l];
    const auto& c = cache.layers[l];
    auto& gl = g.layers[l];
    Matrix dz = std::move(dh);
    if (c.dropout_mask.size() > 0) dz = dz.cwiseProduct(c.dropout_mask);
    if (c.relu_mask.size() > 0) dz = dz.cwiseProduct(c.relu_mask);
    if (p.has_norm()) {
      gl.gamma = dz.cwiseProduct(c.normalized).colwise().sum();
      gl.beta = dz.colwise().sum();
      const Matrix dxhat = dz.array().rowwise() * p.gamma.array();
      if (c.mode == Mode::train) {
        const double m = static_cast<double>(dz.rows());
        const RowVector sum_dxhat = dxhat.colwise().sum();
        const RowVector sum_dxhat_xhat = dxhat.cwiseProduct(c.normalized).colwise().sum();
        Matrix t = (dxhat * m).rowwise() - sum_dxhat;
        t -= Matrix(c.normalized.array().rowwise() * sum_dxhat_xhat.array());
        dz = (t.array().rowwise() * (c.inv_std.array() / m)).matrix();
      } else {
        dz = dxhat.array().rowwise() * c.inv_std.array();
      }
    }
    gl.bias = dz.colwise().sum();
    const Matrix ga = cache.adjacency.transpose() * dz;  // dL/d(XW)
    if (l == 0) {
      Matrix ga_rows(static_cast<Eigen::Index>(x.index.size()), ga.cols());
      for (std::size_t k = 0; k < x.index.size(); ++k) {
        ga_rows.row(static_cast<Eigen::Index>(k)) = ga.row(static_cast<Eigen::Index>(x.index[k]));
      }
      gl.weight = x.rows.transpose() * ga_rows;
    } else {
      gl.weight = c.input.transpose() * ga;
      dh = ga * p.weight.transpose();
    }
  }
  return g;
}

std::vector<std::span<double>> GcnNetwork::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.has_norm()) {
      out.emplace_back(l.gamma.data(), static_cast<std::size_t>(l.gamma.size()));
      out.emplace_back(l.beta.data(), static_cast<std::size_t>(l.beta.size()));
    }
  }
  return out;
}

std::vector<std::string> GcnNetwork::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto prefix = "layer" + std::to_string(i) + ".";
    out.push_back(prefix + "weight");
    out.push_back(prefix + "bias");
    if (layers_[i].has_norm()) {
      out.push_back(prefix + "gamma");
      out.push_back(prefix + "beta");
    }
  }
  return out;
}

std::size_t GcnNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size() + l.gamma.size() + l.beta.size());
  }
  return n;
}

double mse_loss(const Matrix& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and target shapes differ");
  }
  if (prediction.size() == 0) return 0.0;
  return (prediction - target).squaredNorm() / static_cast<double>(prediction.size());
}

Loss mse_loss_with_gradient(const Matrix& prediction, const Matrix& target) {
  Loss l;
  l.value = mse_loss(prediction, target);
  if (prediction.size() > 0) l.gradient = (prediction - target) * (2.0 / static_cast<double>(prediction.size()));
  else l.gradient = Matrix::Zero(prediction.rows(), prediction.cols());
  return l;
}

double effective_learning_rate(const AdamConfig& config, std::int64_t completed_steps) {
  return config.learning_rate / (1.0 + config.decay * static_cast<double>(completed_steps));
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter and gradient block counts differ");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size())));
      state.second_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter blocks");
  }
  const double lr = effective_learning_rate(config, state.step);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (g.size() != p.size() || static_cast<std::size_t>(m.size()) != p.size()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter block " + std::to_string(b) + " size mismatch");
    }
    Eigen::Map<Eigen::ArrayXd> pa(p.data(), static_cast<Eigen::Index>(p.size()));
    Eigen::Map<const Eigen::ArrayXd> ga(g.data(), static_cast<Eigen::Index>(g.size()));
    m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * ga;
    v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * ga.square();
    pa -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
  }
}

}  // namespace ceci::nn
