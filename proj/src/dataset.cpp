#include "ceci/dataset.hpp"

#include "ceci/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ceci {

std::size_t masked_count(std::size_t object_count, double blind_fraction) {
  if (!(blind_fraction >= 0.0 && blind_fraction <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "blind fraction must lie in [0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::llround(blind_fraction * static_cast<double>(object_count)));
  return std::clamp<std::size_t>(k, 1, object_count);
}

BsgSample make_sample(const SceneGraph& g, double blind_fraction, std::size_t grid_size, std::uint64_t seed,
                      RasterMode mode) {
  if (g.kind() == GraphKind::belief) {
    throw Error(ErrorCode::WrongKind, "make_sample expects a ground-truth or augmented graph");
  }
  std::vector<NodeId> objects;
  for (const auto& n : g.nodes()) {
    if (n.layer == Layer::object) objects.push_back(n.id);
  }
  if (objects.empty()) {
    throw Error(ErrorCode::EmptyGraph, "graph has no object nodes to mask");
  }

  auto truth = rasterize(g, grid_size, mode);

  std::vector<NodeId> chosen;
  std::mt19937_64 rng(seed);
  std::sample(objects.begin(), objects.end(), std::back_inserter(chosen), masked_count(objects.size(), blind_fraction),
              rng);
  std::sort(chosen.begin(), chosen.end());

  std::vector<SceneNode> nodes = g.nodes();
  std::vector<MaskedInstance> masked;
  for (auto& n : nodes) {
    if (!std::binary_search(chosen.begin(), chosen.end(), n.id)) continue;
    masked.push_back({*g.parent_of(n.id), *n.class_index, n.id});
    n.layer = Layer::blind;
    n.position.reset();
    n.dimensions = {};
  }
  auto belief = SceneGraph::build(g.catalog_ptr(), std::move(nodes), g.edges(), GraphKind::belief);
  auto partial = rasterize(belief, grid_size, mode, &truth.heatmaps.frames());

  return BsgSample{std::move(belief), std::move(partial.heatmaps), std::move(partial.counts),
                   std::move(truth.heatmaps), std::move(masked), seed};
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadRatios, "split ratios must be non-negative and sum to 1");
  }
  const auto train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 1e-9));
  const std::size_t rest = n - std::min(train, n);
  const double held = ratios.val + ratios.test;
  if (rest == 0 || held <= 0.0) {
    return {n, 0, 0};
  }
  const double qv = static_cast<double>(rest) * ratios.val / held;
  const double qt = static_cast<double>(rest) * ratios.test / held;
  auto val = static_cast<std::size_t>(std::floor(qv + 1e-9));
  auto test = static_cast<std::size_t>(std::floor(qt + 1e-9));
  while (val + test < rest) {
    // Largest remainder; ties go to val.
    if (qv - static_cast<double>(val) >= qt - static_cast<double>(test)) {
      ++val;
    } else {
      ++test;
    }
  }
  return {train, val, test};
}

DatasetSplit split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  const auto sizes = split_sizes(n, ratios);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  auto first = order.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
  first += static_cast<std::ptrdiff_t>(sizes[0]);
  split.val.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
  first += static_cast<std::ptrdiff_t>(sizes[1]);
  split.test.assign(first, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace ceci
