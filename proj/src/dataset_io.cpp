#include "ceci/dataset.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace ceci {

using nlohmann::json;

json heatmaps_to_json(const HeatmapSet& h) {
  json frames = json::array();
  for (const auto& f : h.frames()) frames.push_back({f.min_x, f.min_y, f.max_x, f.max_y});
  return {{"S", h.grid_size()},
          {"classes", h.classes()},
          {"room_ids", h.room_ids()},
          {"frames", std::move(frames)},
          {"data", h.data()}};
}

HeatmapSet heatmaps_from_json(const json& j) {
  try {
    std::vector<RoomFrame> frames;
    for (const auto& f : j.at("frames")) {
      frames.push_back({f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>(), f.at(3).get<double>()});
    }
    HeatmapSet h(j.at("room_ids").get<std::vector<NodeId>>(), std::move(frames), j.at("classes").get<std::size_t>(),
                 j.at("S").get<std::size_t>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != h.data().size()) {
      throw Error(ErrorCode::ShapeMismatch, "heatmap data has " + std::to_string(data.size()) + " values, expected " +
                                                std::to_string(h.data().size()));
    }
    for (double v : data) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::OutOfRange, "heatmap values must be finite and non-negative");
      }
    }
    h.data() = std::move(data);
    return h;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("heatmap json: ") + e.what());
  }
}

json counts_to_json(const ObjectCounts& c) {
  json rows = json::array();
  for (std::size_t r = 0; r < c.rooms(); ++r) {
    auto row = c.row(r);
    rows.push_back(std::vector<int>(row.begin(), row.end()));
  }
  return rows;
}

ObjectCounts counts_from_json(const json& j) {
  const std::size_t rooms = j.size();
  const std::size_t classes = rooms ? j.at(0).size() : 0;
  ObjectCounts c(rooms, classes);
  for (std::size_t r = 0; r < rooms; ++r) {
    if (j.at(r).size() != classes) throw Error(ErrorCode::ShapeMismatch, "ragged counts table");
    for (std::size_t k = 0; k < classes; ++k) {
      c.at(r, k) = j.at(r).at(k).get<int>();
      if (c.at(r, k) < 0) throw Error(ErrorCode::NegativeCount, "negative object count");
    }
  }
  return c;
}

json sample_to_json(const BsgSample& s) {
  json masked = json::array();
  for (const auto& m : s.masked) {
    masked.push_back({{"room", m.room}, {"class", m.class_index}, {"instance", m.instance}});
  }
  return {{"format", "ceci-sample"},
          {"version", 1},
          {"S", s.target.grid_size()},
          {"catalog_hash", s.graph.catalog().hash()},
          {"seed", s.seed},
          {"tool_version", tool_version()},
          {"graph", graph_to_json(s.graph)},
          {"input", heatmaps_to_json(s.input)},
          {"target", heatmaps_to_json(s.target)},
          {"counts", counts_to_json(s.counts)},
          {"masked", std::move(masked)}};
}

BsgSample sample_from_json(const json& j, std::shared_ptr<const ClassCatalog> catalog) {
  try {
    if (j.value("format", "") != "ceci-sample") {
      throw Error(ErrorCode::UnreadableInput, "not a ceci sample document");
    }
    auto graph = graph_from_json(j.at("graph"), {catalog, nullptr}).graph;
    if (j.at("catalog_hash").get<std::string>() != graph.catalog().hash()) {
      throw Error(ErrorCode::ConfigMismatch, "sample catalog hash does not match its graph catalog");
    }
    BsgSample s{std::move(graph), heatmaps_from_json(j.at("input")), counts_from_json(j.at("counts")),
                heatmaps_from_json(j.at("target")), {}, j.at("seed").get<std::uint64_t>()};
    for (const auto& m : j.at("masked")) {
      s.masked.push_back({m.at("room").get<NodeId>(), m.at("class").get<std::size_t>(), m.at("instance").get<NodeId>()});
    }
    const std::size_t S = j.at("S").get<std::size_t>();
    if (s.input.grid_size() != S || s.target.grid_size() != S) {
      throw Error(ErrorCode::ConfigMismatch, "sample heatmaps disagree with the declared grid size");
    }
    if (s.input.rooms() != s.counts.rooms() || s.target.rooms() != s.counts.rooms() ||
        (s.counts.rooms() && s.counts.classes() != s.graph.catalog().size())) {
      throw Error(ErrorCode::ShapeMismatch, "sample heatmaps, counts and catalog disagree");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("sample json: ") + e.what());
  }
}

void save_sample(const BsgSample& s, const std::filesystem::path& path) {
  write_file_atomic(path, sample_to_json(s).dump() + "\n");
}

BsgSample load_sample(const std::filesystem::path& path, std::shared_ptr<const ClassCatalog> catalog) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + e.what());
  }
  return sample_from_json(doc, std::move(catalog));
}

json manifest_to_json(const Manifest& m) {
  return {{"format", "ceci-dataset"},
          {"version", 1},
          {"S", m.grid_size},
          {"catalog", m.catalog},
          {"catalog_hash", m.catalog_hash},
          {"seed", m.master_seed},
          {"tool_version", m.tool_version},
          {"removal_fraction", m.removal_fraction},
          {"blind_fraction", m.blind_fraction},
          {"skipped_objects", m.skipped_objects},
          {"num_samples", m.train.size() + m.val.size() + m.test.size()},
          {"splits", {{"train", m.train}, {"val", m.val}, {"test", m.test}}}};
}

Manifest manifest_from_json(const json& j) {
  try {
    if (j.value("format", "") != "ceci-dataset") {
      throw Error(ErrorCode::UnreadableInput, "not a ceci dataset manifest");
    }
    Manifest m;
    m.grid_size = j.at("S").get<std::size_t>();
    m.catalog = j.at("catalog").get<std::vector<std::string>>();
    m.catalog_hash = j.at("catalog_hash").get<std::string>();
    m.master_seed = j.at("seed").get<std::uint64_t>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.removal_fraction = j.at("removal_fraction").get<double>();
    m.blind_fraction = j.at("blind_fraction").get<double>();
    m.skipped_objects = j.value("skipped_objects", std::size_t{0});
    const auto& splits = j.at("splits");
    m.train = splits.at("train").get<std::vector<std::string>>();
    m.val = splits.at("val").get<std::vector<std::string>>();
    m.test = splits.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest json: ") + e.what());
  }
}

std::vector<BsgSample> generate_samples(const DatasetConfig& config, std::shared_ptr<const ClassCatalog> catalog,
                                        const std::vector<SceneTemplate>& templates, std::size_t* skipped_objects) {
  if (config.num_scenes == 0) {
    throw Error(ErrorCode::EmptyDataset, "at least one scene is required");
  }
  if (config.min_rooms == 0 || config.max_rooms < config.min_rooms) {
    throw Error(ErrorCode::InvalidArgument, "room count range must satisfy 1 <= min_rooms <= max_rooms");
  }
  split_sizes(config.num_scenes, config.ratios);  // validates ratios up front

  std::vector<std::optional<BsgSample>> slots(config.num_scenes);
  std::vector<std::size_t> skipped(config.num_scenes, 0);
  auto make_one = [&](std::size_t i) {
    const std::uint64_t scene_seed = derive_seed(config.seed, i);
    std::mt19937_64 rng(scene_seed);
    const auto n_rooms = std::uniform_int_distribution<std::size_t>(config.min_rooms, config.max_rooms)(rng);
    auto scene = generate_synthetic_scene(templates, catalog, n_rooms, derive_seed(scene_seed, 1));
    skipped[i] = scene.skipped_objects;
    auto augmented = augment(scene.graph, config.removal_fraction, derive_seed(scene_seed, 2));
    // An augmentation that strips every object leaves nothing to mask; fall
    // back to the unaugmented scene in that case.
    const SceneGraph& source = augmented.count(Layer::object) > 0 ? augmented : scene.graph;
    slots[i] = make_sample(source, config.blind_fraction, config.grid_size, derive_seed(scene_seed, 3), config.mode);
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(config.num_scenes)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < config.num_scenes; ++i) make_one(i);
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < config.num_scenes; i += jobs) {
          try {
            make_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<BsgSample> samples;
  samples.reserve(config.num_scenes);
  for (auto& s : slots) samples.push_back(std::move(*s));
  if (skipped_objects) {
    *skipped_objects = 0;
    for (auto k : skipped) *skipped_objects += k;
  }
  return samples;
}

namespace {

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "samples/%05zu.json", index);
  return buf;
}

}  // namespace

Manifest write_dataset(const std::filesystem::path& dir, const DatasetConfig& config,
                       std::shared_ptr<const ClassCatalog> catalog, const std::vector<BsgSample>& samples,
                       std::size_t skipped_objects) {
  if (samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no samples to write");
  }
  std::filesystem::create_directories(dir / "samples");
  Manifest m;
  m.grid_size = config.grid_size;
  m.catalog = catalog->labels();
  m.catalog_hash = catalog->hash();
  m.master_seed = config.seed;
  m.tool_version = std::string(tool_version());
  m.removal_fraction = config.removal_fraction;
  m.blind_fraction = config.blind_fraction;
  m.skipped_objects = skipped_objects;

  const auto split = split_dataset(samples.size(), config.ratios, derive_seed(config.seed, 0xD5));
  for (auto i : split.train) m.train.push_back(sample_name(i));
  for (auto i : split.val) m.val.push_back(sample_name(i));
  for (auto i : split.test) m.test.push_back(sample_name(i));

  for (std::size_t i = 0; i < samples.size(); ++i) save_sample(samples[i], dir / sample_name(i));
  write_file_atomic(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  return m;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json doc;
  try {
    doc = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.manifest = manifest_from_json(doc);
  ds.catalog = std::make_shared<const ClassCatalog>(ds.manifest.catalog);
  if (ds.catalog->hash() != ds.manifest.catalog_hash) {
    throw Error(ErrorCode::ConfigMismatch, "manifest catalog hash does not match its label list");
  }
  auto load_split = [&](const std::vector<std::string>& names, std::vector<BsgSample>& out) {
    for (const auto& name : names) {
      auto s = load_sample(dir / name, ds.catalog);
      if (s.target.grid_size() != ds.manifest.grid_size) {
        throw Error(ErrorCode::ConfigMismatch, name + ": grid size " + std::to_string(s.target.grid_size()) +
                                                   " != manifest " + std::to_string(ds.manifest.grid_size));
      }
      out.push_back(std::move(s));
    }
  };
  load_split(ds.manifest.train, ds.train);
  load_split(ds.manifest.val, ds.val);
  load_split(ds.manifest.test, ds.test);
  return ds;
}

}  // namespace ceci
