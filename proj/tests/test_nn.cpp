#include "ceci/nn.hpp"

#include "helpers.hpp"

#include <cmath>

using namespace testing;
using namespace ceci::nn;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense to_rows(const Matrix& m) {
  Dense d(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return d;
}

Dense matmul(const Dense& a, const Dense& b) {
  Dense c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Plain-loop D^-1/2 (A + I) D^-1/2 from an undirected edge list.
Dense dense_normalized_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Dense a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  for (auto [u, v] : edges) {
    a[u][v] = 1.0;
    a[v][u] = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
  return a;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

RowVector random_row(std::mt19937_64& rng, Eigen::Index c, double mean, double sd) {
  std::normal_distribution<double> nd(mean, sd);
  RowVector v(c);
  for (Eigen::Index i = 0; i < c; ++i) v(i) = nd(rng);
  return v;
}

void randomize(GcnNetwork& net, std::mt19937_64& rng) {
  for (auto& l : net.layers()) {
    l.weight = random_matrix(rng, l.weight.rows(), l.weight.cols(), 0.5);
    l.bias = random_row(rng, l.bias.size(), 0.0, 0.3);
    if (l.has_norm()) {
      l.gamma = random_row(rng, l.gamma.size(), 1.0, 0.2);
      l.beta = random_row(rng, l.beta.size(), 0.0, 0.2);
      l.running_mean = random_row(rng, l.gamma.size(), 0.0, 0.5);
      l.running_var = random_row(rng, l.gamma.size(), 1.0, 0.1).cwiseAbs();
    }
  }
}

NormalizedAdjacency path3() {
  const std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}, {1, 2}};
  return normalized_adjacency(3, e);
}

}  // namespace

TEST_SUITE("nn_core") {

TEST_CASE("normalized adjacency closed forms") {
  const auto one = normalized_adjacency(1, {});
  CHECK(Matrix(one.matrix)(0, 0) == 1.0);

  const std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}};
  const Matrix two(normalized_adjacency(2, e).matrix);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(two.data()[i] == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<std::pair<std::size_t, std::size_t>> dup = {{0, 1}, {1, 0}, {0, 1}, {1, 1}};
  CHECK(Matrix(normalized_adjacency(2, dup).matrix) == two);
  const std::vector<std::pair<std::size_t, std::size_t>> bad = {{0, 5}};
  CHECK_CODE(normalized_adjacency(2, bad), ErrorCode::DanglingEdge);
}

TEST_CASE("normalized adjacency matches the dense oracle on random graphs") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t k = 0; k < n * 2; ++k)
      if (rng() % 3 == 0) edges.push_back({rng() % n, rng() % n});
    const Matrix a(normalized_adjacency(n, edges).matrix);
    std::vector<std::pair<std::size_t, std::size_t>> no_loops;
    for (auto [u, v] : edges)
      if (u != v) no_loops.push_back({u, v});
    const auto oracle = dense_normalized_adjacency(n, no_loops);

    Eigen::VectorXd sqrt_deg(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d += (i == j || oracle[i][j] > 0.0) ? 1.0 : 0.0;
      sqrt_deg(static_cast<Eigen::Index>(i)) = std::sqrt(d);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        CHECK(v == doctest::Approx(oracle[i][j]).epsilon(1e-14));
        CHECK(v == a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      CHECK(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) > 0.0);
    }
    // sqrt(d~) is the eigenvector of eigenvalue 1, the spectral radius.
    CHECK(((a * sqrt_deg) - sqrt_deg).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("normalized adjacency of a scene graph and block diagonal") {
  const auto g = toy_graph();
  const auto a = normalized_adjacency(g);
  CHECK(a.size() == g.nodes().size());
  const Matrix d(a.matrix);
  const auto room2 = static_cast<Eigen::Index>(g.node_index(2));
  const auto obj10 = static_cast<Eigen::Index>(g.node_index(10));
  // room 2: building + 3 objects + self = 5; object 10: room + self = 2
  CHECK(d(room2, obj10) == doctest::Approx(1.0 / std::sqrt(10.0)));

  const auto p = path3();
  const NormalizedAdjacency* parts[] = {&p, &a};
  const Matrix bd(block_diagonal(parts).matrix);
  CHECK(bd.rows() == static_cast<Eigen::Index>(3 + g.nodes().size()));
  CHECK(bd.topLeftCorner(3, 3) == Matrix(p.matrix));
  CHECK(bd.bottomRightCorner(d.rows(), d.cols()) == d);
  CHECK(bd.topRightCorner(3, d.cols()).isZero(0.0));
}

TEST_CASE("forward: identity adjacency and zero weights give the bias") {
  ModelConfig cfg{4, 8, 3, 1, 0.0};
  GcnNetwork net(cfg, 1);
  net.layers()[0].weight.setZero();
  net.layers()[0].bias = RowVector::LinSpaced(3, 1.0, 3.0);
  const auto adj = normalized_adjacency(5, {});
  std::mt19937_64 rng(1);
  const auto x = NodeFeatures::from_dense(random_matrix(rng, 5, 4));
  const Matrix y = net.infer(adj.matrix, x, {});
  for (Eigen::Index r = 0; r < 5; ++r) CHECK(y.row(r) == net.layers()[0].bias);
}

TEST_CASE("forward matches a hand-coded dense oracle on a 3-node graph") {
  std::mt19937_64 rng(4);
  ModelConfig cfg{3, 4, 2, 3, 0.0};
  GcnNetwork net(cfg, 9);
  randomize(net, rng);
  const auto adj = path3();
  const Matrix dense_x = random_matrix(rng, 3, 3);
  const auto x = NodeFeatures::from_dense(dense_x);
  const auto A = dense_normalized_adjacency(3, {{0, 1}, {1, 2}});

  for (Mode mode : {Mode::eval, Mode::train}) {
    Dense h = to_rows(dense_x);
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& p = layers[l];
      Dense z = matmul(matmul(A, h), to_rows(p.weight));
      for (auto& row : z)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.bias(static_cast<Eigen::Index>(j));
      if (l + 1 == layers.size()) {
        h = z;
        break;
      }
      for (std::size_t j = 0; j < z[0].size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        double mean = p.running_mean(jj), var = p.running_var(jj);
        if (mode == Mode::train) {
          mean = (z[0][j] + z[1][j] + z[2][j]) / 3.0;
          var = 0.0;
          for (int i = 0; i < 3; ++i) var += (z[i][j] - mean) * (z[i][j] - mean) / 3.0;
        }
        for (int i = 0; i < 3; ++i) {
          const double bn = (z[i][j] - mean) / std::sqrt(var + 1e-5) * p.gamma(jj) + p.beta(jj);
          z[i][j] = bn > 0.0 ? bn : 0.0;
        }
      }
      h = z;
    }
    GcnNetwork copy = net;
    const Matrix y = copy.forward(adj.matrix, x, {}, mode);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(h[i][j]).epsilon(1e-12));
  }
}

TEST_CASE("forward: output row selection and shape errors") {
  std::mt19937_64 rng(5);
  ModelConfig cfg{3, 4, 2, 2, 0.0};
  GcnNetwork net(cfg, 2);
  randomize(net, rng);
  const auto adj = path3();
  const auto x = NodeFeatures::from_dense(random_matrix(rng, 3, 3));
  const Matrix all = net.infer(adj.matrix, x, {});
  const std::vector<std::size_t> rows = {2, 0};
  const Matrix some = net.infer(adj.matrix, x, rows);
  CHECK((some.row(0) - all.row(2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((some.row(1) - all.row(0)).cwiseAbs().maxCoeff() < 1e-14);

  const auto wrong = NodeFeatures::from_dense(random_matrix(rng, 3, 5));
  CHECK_CODE(net.infer(adj.matrix, wrong, {}), ErrorCode::ShapeMismatch);
  const auto four = NodeFeatures::from_dense(random_matrix(rng, 4, 3));
  CHECK_CODE(net.infer(adj.matrix, four, {}), ErrorCode::ShapeMismatch);
  const std::vector<std::size_t> outside = {7};
  CHECK_CODE(net.infer(adj.matrix, x, outside), ErrorCode::OutOfBounds);

  Matrix nan = random_matrix(rng, 3, 3);
  nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_CODE(net.infer(adj.matrix, NodeFeatures::from_dense(nan), {}), ErrorCode::NonFinite);
}

TEST_CASE("NodeFeatures dense round trip keeps only non-zero rows") {
  Matrix d = Matrix::Zero(5, 2);
  d(1, 0) = 1.0;
  d(4, 1) = -2.0;
  const auto f = NodeFeatures::from_dense(d);
  CHECK(f.index == std::vector<std::size_t>{1, 4});
  CHECK(f.to_dense() == d);
}

TEST_CASE("eval mode is pure and train mode matches eval without stochastic parts") {
  std::mt19937_64 rng(6);
  const auto adj = path3();
  const auto x = NodeFeatures::from_dense(random_matrix(rng, 3, 3));
  {
    ModelConfig cfg{3, 4, 2, 3, 0.0};
    cfg.batch_norm = false;
    GcnNetwork net(cfg, 3);
    randomize(net, rng);
    const Matrix e = net.infer(adj.matrix, x, {});
    CHECK(net.forward(adj.matrix, x, {}, Mode::train) == e);
  }
  {
    ModelConfig cfg{3, 4, 2, 3, 0.3};
    GcnNetwork net(cfg, 3);
    randomize(net, rng);
    const auto before = net.layers()[0].running_mean;
    const Matrix a = net.infer(adj.matrix, x, {});
    const Matrix b = net.forward(adj.matrix, x, {}, Mode::eval);
    CHECK(a == b);
    CHECK(net.layers()[0].running_mean == before);
    CHECK_CODE(net.forward(adj.matrix, x, {}, Mode::train), ErrorCode::InvalidArgument);
  }
}

TEST_CASE("batch norm: normalized activations and running statistics") {
  std::mt19937_64 rng(7);
  ModelConfig cfg{3, 5, 2, 2, 0.0};
  GcnNetwork net(cfg, 4);
  const std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  const auto adj = normalized_adjacency(6, e);
  const auto x = NodeFeatures::from_dense(random_matrix(rng, 6, 3));
  ForwardCache cache;
  net.forward(adj.matrix, x, {}, Mode::train, nullptr, &cache);
  const Matrix& xhat = cache.layers[0].normalized;
  for (Eigen::Index j = 0; j < xhat.cols(); ++j) {
    const double mean = xhat.col(j).mean();
    const double var = (xhat.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);  // eps = 1e-5 shrinks it slightly
  }

  // Recompute the pre-normalization batch statistics independently.
  const Matrix z = Matrix(Matrix(adj.matrix) * x.to_dense() * net.layers()[0].weight).rowwise() + net.layers()[0].bias;
  const RowVector mean = z.colwise().mean();
  const RowVector var_unbiased = (z.rowwise() - mean).array().square().colwise().sum() / 5.0;
  CHECK((net.layers()[0].running_mean - 0.1 * mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((net.layers()[0].running_var - (0.9 * RowVector::Ones(5) + 0.1 * var_unbiased)).cwiseAbs().maxCoeff() < 1e-12);
  for (const auto& l : net.layers())
    if (l.has_norm()) CHECK(l.running_var.minCoeff() >= 0.0);
}

TEST_CASE("dropout is inverted: the train-mode mean equals eval output") {
  std::mt19937_64 rng(8);
  ModelConfig cfg{3, 6, 2, 2, 0.5};
  cfg.batch_norm = false;
  GcnNetwork net(cfg, 5);
  randomize(net, rng);
  const auto adj = path3();
  const auto x = NodeFeatures::from_dense(random_matrix(rng, 3, 3));
  const Matrix eval = net.infer(adj.matrix, x, {});
  const int draws = 20000;
  Matrix sum = Matrix::Zero(eval.rows(), eval.cols());
  Matrix sq = Matrix::Zero(eval.rows(), eval.cols());
  std::mt19937_64 drop(99);
  for (int d = 0; d < draws; ++d) {
    const Matrix y = net.forward(adj.matrix, x, {}, Mode::train, &drop);
    sum += y;
    sq += y.cwiseProduct(y);
  }
  const Matrix mean = sum / draws;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double var = sq.data()[i] / draws - mean.data()[i] * mean.data()[i];
    const double se = std::sqrt(std::max(var, 0.0) / draws);
    CHECK(std::abs(mean.data()[i] - eval.data()[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("mse loss") {
  Matrix a(1, 2), b(1, 2);
  a << 0, 0;
  b << 2, 0;
  CHECK(mse_loss(a, b) == 2.0);
  CHECK(mse_loss(b, b) == 0.0);
  CHECK(mse_loss_with_gradient(b, b).gradient.isZero(0.0));
  CHECK_CODE(mse_loss(a, Matrix(2, 1)), ErrorCode::ShapeMismatch);

  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    const Matrix p = random_matrix(rng, 3, 7), q = random_matrix(rng, 3, 7);
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) s += (p.data()[i] - q.data()[i]) * (p.data()[i] - q.data()[i]);
    CHECK(mse_loss(p, q) == doctest::Approx(s / 21.0).epsilon(1e-14));
    const auto l = mse_loss_with_gradient(p, q);
    CHECK(((l.gradient - 2.0 * (p - q) / 21.0).cwiseAbs().maxCoeff()) < 1e-15);
  }
}

TEST_CASE("relu passes no gradient through negative pre-activations") {
  ModelConfig cfg{2, 3, 1, 2, 0.0};
  cfg.batch_norm = false;
  GcnNetwork net(cfg, 1);
  auto& l0 = net.layers()[0];
  l0.weight.setZero();
  l0.bias << -1.0, 0.5, -0.2;  // units 0 and 2 are negative on every node
  Matrix dx(2, 2);
  dx << 1, 2, 3, 4;
  const auto x = NodeFeatures::from_dense(dx);
  const std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}};
  const auto adj = normalized_adjacency(2, e);
  ForwardCache cache;
  const Matrix y = net.forward(adj.matrix, x, {}, Mode::train, nullptr, &cache);
  Matrix target = y.array() + 1.0;
  const auto grads = net.backward(cache, mse_loss_with_gradient(y, target).gradient);
  CHECK(grads.layers[0].weight.col(0).isZero(0.0));
  CHECK(grads.layers[0].weight.col(2).isZero(0.0));
  CHECK(grads.layers[0].bias(0) == 0.0);
  CHECK(grads.layers[0].bias(1) != 0.0);
}

TEST_CASE("gradient check per layer type and for the full model") {
  GradCheckConfig cfg;
  SUBCASE("linear only") {
    cfg.num_layers = 1;
    cfg.batch_norm = false;
    cfg.relu = false;
    const auto r = grad_check(cfg, 1);
    CHECK(r.max_relative_error < 1e-8);
    CHECK(r.checked > 0);
  }
  SUBCASE("stacked linear") {
    cfg.batch_norm = false;
    cfg.relu = false;
    CHECK(grad_check(cfg, 2).max_relative_error < 1e-4);
  }
  SUBCASE("relu only") {
    cfg.num_layers = 2;
    cfg.batch_norm = false;
    CHECK(grad_check(cfg, 3).max_relative_error < 1e-4);
  }
  SUBCASE("batch norm only") {
    cfg.num_layers = 2;
    cfg.relu = false;
    CHECK(grad_check(cfg, 4).max_relative_error < 1e-4);
  }
  SUBCASE("composed five-layer model") {
    const auto r = grad_check(cfg, 5);
    CHECK(r.max_relative_error < 1e-4);
    GcnNetwork probe(ModelConfig{cfg.classes * 17, cfg.hidden, cfg.classes * 16, 5}, 0);
    CHECK(r.checked == probe.parameter_count());
  }
}

TEST_CASE("relative error helper") {
  CHECK(relative_error(1.0, 1.0, 1e-6) == 0.0);
  CHECK(relative_error(2.0, 1.0, 1e-6) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 1e-9, 1e-6) == doctest::Approx(1e-3));
}

TEST_CASE("parameter layout") {
  ModelConfig cfg{4, 3, 2, 3};
  GcnNetwork net(cfg, 1);
  const auto names = net.parameter_names();
  CHECK(names.front() == "layer0.weight");
  CHECK(names.size() == 4 + 4 + 2);
  CHECK(net.parameter_count() == (4 * 3 + 3 * 3) + (3 * 3 + 3 * 3) + (3 * 2 + 2));
  CHECK(net.parameters().size() == names.size());

  // Glorot bound sqrt(6 / (fan_in + fan_out)).
  const double bound = std::sqrt(6.0 / 7.0);
  CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(net.layers()[0].bias.isZero(0.0));
  CHECK(net.layers()[0].gamma.isOnes(0.0));

  GcnNetwork same(cfg, 1), other(cfg, 2);
  CHECK(same.layers()[1].weight == net.layers()[1].weight);
  CHECK_FALSE(other.layers()[1].weight == net.layers()[1].weight);
}

TEST_CASE("adam closed forms") {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.decay = 0.0;
  std::vector<double> p = {1.0, -2.0};
  std::vector<double> g = {0.0, 0.0};
  std::span<double> ps[] = {p};
  std::span<const double> gs[] = {g};
  AdamState st;
  adam_step(ps, gs, st, cfg);
  CHECK(p == std::vector<double>{1.0, -2.0});
  CHECK(st.step == 1);

  std::vector<double> s = {0.0};
  std::vector<double> one = {1.0};
  std::span<double> ss[] = {s};
  std::span<const double> os[] = {one};
  AdamState st2;
  adam_step(ss, os, st2, cfg);
  CHECK(s[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));

  CHECK(effective_learning_rate(cfg, 0) == 0.01);
  CHECK(effective_learning_rate(cfg, 1000000) == 0.01);
  AdamConfig decayed;
  decayed.learning_rate = 1e-5;
  decayed.decay = 1e-8;
  CHECK(effective_learning_rate(decayed, 1000) == doctest::Approx(1e-5 / (1.0 + 1e-5)));
}

TEST_CASE("adam matches a scalar reference implementation") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.decay = 0.01;
  std::vector<double> p(5), ref(5), m(5, 0.0), v(5, 0.0);
  for (std::size_t i = 0; i < 5; ++i) ref[i] = p[i] = nd(rng);
  AdamState st;
  for (int t = 1; t <= 30; ++t) {
    std::vector<double> g(5);
    for (auto& x : g) x = nd(rng);
    std::span<double> ps[] = {p};
    std::span<const double> gs[] = {g};
    adam_step(ps, gs, st, cfg);
    const double lr = cfg.learning_rate / (1.0 + cfg.decay * (t - 1));
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

}  // TEST_SUITE
