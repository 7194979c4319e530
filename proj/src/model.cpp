#include "ceci/model.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ceci {

std::string_view to_string(Variant v) { return v == Variant::base ? "base" : "base-ont"; }

Variant variant_from_string(std::string_view s) {
  if (s == "base") return Variant::base;
  if (s == "base-ont" || s == "base_ont") return Variant::base_ont;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + std::string(s) + "' (expected base or base-ont)");
}

std::string_view to_string(GraphScope s) { return s == GraphScope::full ? "full" : "rooms-only"; }

GraphScope scope_from_string(std::string_view s) {
  if (s == "full") return GraphScope::full;
  if (s == "rooms-only" || s == "rooms_only") return GraphScope::rooms_only;
  throw Error(ErrorCode::InvalidArgument, "unknown graph scope '" + std::string(s) + "'");
}

std::size_t CeciModel::input_width(Variant v, std::size_t classes, std::size_t grid_size) {
  const std::size_t block = classes * grid_size * grid_size;
  return (v == Variant::base ? block : 2 * block) + classes;
}

namespace {

nn::ModelConfig network_config(const CeciConfig& c, std::size_t classes) {
  if (c.grid_size == 0) throw Error(ErrorCode::InvalidArgument, "grid size must be positive");
  nn::ModelConfig m;
  m.input_dim = CeciModel::input_width(c.variant, classes, c.grid_size);
  m.output_dim = classes * c.grid_size * c.grid_size;
  m.hidden_dim = c.hidden;
  m.num_layers = c.num_layers;
  m.dropout = c.dropout;
  m.bn_momentum = c.bn_momentum;
  return m;
}

}  // namespace

CeciModel::CeciModel(const CeciConfig& config, std::shared_ptr<const ClassCatalog> catalog,
                     std::optional<ClassAffinity> affinity, std::uint64_t seed)
    : config_(config), catalog_(std::move(catalog)), affinity_(std::move(affinity)), seed_(seed) {
  if (!catalog_ || catalog_->size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "model needs a non-empty class catalog");
  }
  const auto n = static_cast<Eigen::Index>(catalog_->size());
  if (config_.variant == Variant::base_ont) {
    if (!affinity_) throw Error(ErrorCode::InvalidArgument, "base-ont needs a class affinity matrix");
    if (affinity_->matrix.rows() != n || affinity_->matrix.cols() != n) {
      throw Error(ErrorCode::ShapeMismatch, "class affinity must be " + std::to_string(n) + "x" + std::to_string(n));
    }
  } else if (affinity_) {
    throw Error(ErrorCode::InvalidArgument, "base variant takes no class affinity");
  }
  network_ = nn::GcnNetwork(network_config(config_, catalog_->size()), seed);
}

std::size_t CeciModel::input_width() const {
  return input_width(config_.variant, catalog_->size(), config_.grid_size);
}

std::size_t CeciModel::output_width() const { return catalog_->size() * config_.grid_size * config_.grid_size; }

void CeciModel::check_compatible(const BsgSample& s) const {
  if (s.input.grid_size() != config_.grid_size || s.target.grid_size() != config_.grid_size) {
    throw Error(ErrorCode::ConfigMismatch, "sample grid size " + std::to_string(s.input.grid_size()) +
                                               " does not match model grid size " +
                                               std::to_string(config_.grid_size));
  }
  if (!(s.graph.catalog() == *catalog_) || s.input.classes() != catalog_->size()) {
    throw Error(ErrorCode::ConfigMismatch, "sample catalog hash " + s.graph.catalog().hash() +
                                               " does not match model catalog hash " + catalog_->hash());
  }
}

nn::Matrix CeciModel::room_features(const BsgSample& s) const {
  const auto classes = static_cast<Eigen::Index>(catalog_->size());
  const auto cells = static_cast<Eigen::Index>(config_.grid_size * config_.grid_size);
  const auto block = classes * cells;
  const auto rooms = static_cast<Eigen::Index>(s.input.rooms());
  nn::Matrix x(rooms, static_cast<Eigen::Index>(input_width()));
  using GridBlock = Eigen::Map<const nn::Matrix>;
  for (Eigen::Index r = 0; r < rooms; ++r) {
    const auto heat = s.input.room_block(static_cast<std::size_t>(r));
    const GridBlock l(heat.data(), classes, cells);
    x.row(r).segment(0, block) = Eigen::Map<const Eigen::RowVectorXd>(heat.data(), block);
    for (Eigen::Index c = 0; c < classes; ++c) {
      x(r, block + c) = s.counts.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
    if (config_.variant == Variant::base_ont) {
      const nn::Matrix mixed = affinity_->matrix * l;
      x.row(r).segment(block + classes, block) = Eigen::Map<const Eigen::RowVectorXd>(mixed.data(), block);
    }
  }
  return x;
}

EncodedBatch CeciModel::encode(std::span<const BsgSample* const> samples, bool with_target) const {
  EncodedBatch out;
  std::vector<nn::NormalizedAdjacency> parts;
  parts.reserve(samples.size());
  std::vector<std::pair<std::size_t, nn::Matrix>> feature_rows;  // (node row, features)
  std::size_t offset = 0;
  std::size_t total_rooms = 0;
  for (const auto* s : samples) total_rooms += s->input.rooms();
  if (with_target) out.target.resize(static_cast<Eigen::Index>(total_rooms), static_cast<Eigen::Index>(output_width()));

  std::size_t target_row = 0;
  for (const auto* s : samples) {
    check_compatible(*s);
    const auto& g = s->graph;
    // Local row of every node kept in the encoded graph.
    std::vector<std::optional<std::size_t>> local(g.nodes().size());
    std::size_t kept = 0;
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
      const auto layer = g.nodes()[i].layer;
      if (config_.scope == GraphScope::full || layer == Layer::building || layer == Layer::room) local[i] = kept++;
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : g.edges()) {
      const auto a = local[g.node_index(e.parent)];
      const auto b = local[g.node_index(e.child)];
      if (a && b) edges.emplace_back(*a, *b);
    }
    parts.push_back(nn::normalized_adjacency(kept, edges));

    const nn::Matrix x = room_features(*s);
    for (std::size_t r = 0; r < s->input.rooms(); ++r) {
      const std::size_t row = offset + *local[g.node_index(s->input.room_ids()[r])];
      out.room_rows.push_back(row);
      feature_rows.emplace_back(row, x.row(static_cast<Eigen::Index>(r)));
      if (with_target) {
        const auto t = s->target.room_block(r);
        out.target.row(static_cast<Eigen::Index>(target_row)) =
            Eigen::Map<const Eigen::RowVectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
      }
      ++target_row;
    }
    offset += kept;
  }

  std::vector<const nn::NormalizedAdjacency*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  out.adjacency = nn::block_diagonal(ptrs).matrix;

  std::sort(feature_rows.begin(), feature_rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out.features.num_nodes = offset;
  out.features.rows.resize(static_cast<Eigen::Index>(feature_rows.size()), static_cast<Eigen::Index>(input_width()));
  for (std::size_t k = 0; k < feature_rows.size(); ++k) {
    out.features.index.push_back(feature_rows[k].first);
    out.features.rows.row(static_cast<Eigen::Index>(k)) = feature_rows[k].second;
  }
  return out;
}

EncodedBatch CeciModel::encode(const BsgSample& s, bool with_target) const {
  const BsgSample* one[] = {&s};
  return encode(one, with_target);
}

nn::Matrix CeciModel::predict_raw(const BsgSample& s) const {
  const auto e = encode(s, false);
  return network_.infer(e.adjacency, e.features, e.room_rows);
}

HeatmapSet postprocess(const nn::Matrix& raw, const HeatmapSet& like, const ObjectCounts& counts) {
  nn::check_finite(raw, "raw prediction");
  const std::size_t cells = like.cells();
  if (raw.rows() != static_cast<Eigen::Index>(like.rooms()) ||
      raw.cols() != static_cast<Eigen::Index>(like.classes() * cells) || counts.rooms() != like.rooms() ||
      counts.classes() != like.classes()) {
    throw Error(ErrorCode::ShapeMismatch, "raw prediction does not match the heatmap layout");
  }
  HeatmapSet out(like.room_ids(), like.frames(), like.classes(), like.grid_size());
  for (std::size_t r = 0; r < like.rooms(); ++r) {
    for (std::size_t c = 0; c < like.classes(); ++c) {
      auto grid = out.grid(r, c);
      if (counts.at(r, c) <= 0) continue;  // stays zero
      double sum = 0.0;
      for (std::size_t k = 0; k < cells; ++k) {
        const double v = std::max(0.0, raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c * cells + k)));
        grid[k] = v;
        sum += v;
      }
      if (sum > 0.0) {
        for (auto& v : grid) v /= sum;
      } else {
        std::fill(grid.begin(), grid.end(), 1.0 / static_cast<double>(cells));
      }
    }
  }
  return out;
}

HeatmapSet predict(const CeciModel& model, const BsgSample& s) {
  return postprocess(model.predict_raw(s), s.input, s.counts);
}

double evaluate_loss(const CeciModel& model, const std::vector<BsgSample>& samples) {
  double total = 0.0;
  double elements = 0.0;
  for (const auto& s : samples) {
    const auto e = model.encode(s, true);
    const nn::Matrix out = model.network().infer(e.adjacency, e.features, e.room_rows);
    const auto n = static_cast<double>(out.size());
    total += nn::mse_loss(out, e.target) * n;
    elements += n;
  }
  return elements > 0.0 ? total / elements : 0.0;
}

TrainResult train(CeciModel& model, const std::vector<BsgSample>& train_set, const std::vector<BsgSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  if (!(config.lr > 0.0) || !(config.lr_decay >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be positive and decay non-negative");
  }
  for (const auto& s : train_set) model.check_compatible(s);
  for (const auto& s : val_set) model.check_compatible(s);

  nn::AdamConfig adam;
  adam.learning_rate = config.lr;
  adam.decay = config.lr_decay;

  TrainResult result;
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::optional<double> best_val;
  std::vector<nn::LayerParams> best_layers;
  auto& net = model.network();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    double elements = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const BsgSample*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&train_set[order[k]]);
      const auto e = model.encode(batch, true);

      nn::ForwardCache cache;
      nn::Matrix out;
      try {
        out = net.forward(e.adjacency, e.features, e.room_rows, nn::Mode::train, &dropout_rng, &cache);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NonFinite) throw;
        std::string ids;
        for (std::size_t k = start; k < end; ++k) ids += (ids.empty() ? "" : ",") + std::to_string(order[k]);
        throw Error(ErrorCode::NonFinite,
                    "epoch " + std::to_string(epoch) + ", batch of training samples [" + ids + "]: " + err.what());
      }
      const auto loss = nn::mse_loss_with_gradient(out, e.target);
      if (!std::isfinite(loss.value)) {
        throw Error(ErrorCode::NonFinite, "epoch " + std::to_string(epoch) + ": loss is not finite");
      }
      const auto grads = net.backward(cache, loss.gradient);
      const auto views = grads.views();
      const auto params = net.parameters();
      nn::adam_step(params, views, result.optimizer, adam);

      const auto n = static_cast<double>(out.size());
      loss_sum += loss.value * n;
      elements += n;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / elements;
    if (!val_set.empty()) {
      rec.val_loss = evaluate_loss(model, val_set);
      if (!best_val || *rec.val_loss < *best_val) {
        best_val = rec.val_loss;
        best_layers = net.layers();
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.patience > 0 && result.best_epoch && epoch - *result.best_epoch >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (!best_layers.empty()) net.layers() = std::move(best_layers);
  return result;
}

MetricsReport evaluate_model(const CeciModel& model, const std::vector<BsgSample>& test_set) {
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
  MetricSamples all;
  for (const auto& s : test_set) all.append(metric_samples(predict(model, s), s.target));
  return summarize(all);
}

nlohmann::json config_to_json(const CeciConfig& c) {
  return {{"S", c.grid_size},           {"hidden", c.hidden},
          {"num_layers", c.num_layers}, {"dropout", c.dropout},
          {"bn_momentum", c.bn_momentum}, {"variant", std::string(to_string(c.variant))},
          {"scope", std::string(to_string(c.scope))}};
}

CeciConfig config_from_json(const nlohmann::json& j, CeciConfig c) {
  try {
    c.grid_size = j.value("S", c.grid_size);
    c.hidden = j.value("hidden", c.hidden);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.dropout = j.value("dropout", c.dropout);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("scope")) c.scope = scope_from_string(j.at("scope").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model config: ") + e.what());
  }
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},
          {"lr_decay", c.lr_decay}, {"seed", c.seed},         {"patience", c.patience}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.seed = j.value("seed", c.seed);
    c.patience = j.value("patience", c.patience);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("train config: ") + e.what());
  }
  return c;
}

}  // namespace ceci
