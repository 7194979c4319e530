#include "commands.hpp"

#include "ceci/error.hpp"
#include "ceci/layout.hpp"
#include "ceci/ontology.hpp"
#include "ceci/render.hpp"
#include "ceci/util.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>

#ifndef CECI_DEFAULT_ASSET_DIR
#define CECI_DEFAULT_ASSET_DIR "assets"
#endif

namespace ceci::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const fs::path& path, ErrorCode on_error = ErrorCode::ParseError) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(on_error, path.string() + ": " + e.what());
  }
}

RasterMode raster_mode_from_string(const std::string& s) {
  if (s == "soft") return RasterMode::soft;
  if (s == "center_cell" || s == "center-cell") return RasterMode::center_cell;
  throw Error(ErrorCode::InvalidArgument, "unknown raster mode '" + s + "'");
}

std::shared_ptr<const ClassCatalog> active_catalog(const RunConfig& c) {
  if (c.catalog) return std::make_shared<const ClassCatalog>(load_catalog(*c.catalog));
  return std::make_shared<const ClassCatalog>(ClassCatalog::default_catalog());
}

fs::path ontology_path(const RunConfig& c) {
  return c.ontology.value_or(fs::path(CECI_DEFAULT_ASSET_DIR) / "ontology_default.csv");
}

ClassAffinity affinity_for(const RunConfig& c, const ClassCatalog& catalog) {
  const auto o = select_classes(load_ontology(ontology_path(c)), catalog.labels());
  return class_affinity(o);
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw Error(ErrorCode::MissingArtifact, std::string("no ") + what + " given");
  return *p;
}

void write_json(const fs::path& path, const json& j, int indent = 1) {
  write_file_atomic(path, j.dump(indent) + "\n");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); }

}  // namespace

nlohmann::json stamp(std::size_t grid_size, const std::string& catalog_hash, std::uint64_t seed) {
  return {{"S", grid_size}, {"catalog_hash", catalog_hash}, {"seed", seed}, {"tool_version", tool_version()}};
}

void check_stamp(const nlohmann::json& j, std::size_t grid_size, const std::string& catalog_hash,
                 const std::string& what) {
  if (j.contains("S") && j.at("S").get<std::size_t>() != grid_size) {
    throw Error(ErrorCode::ConfigMismatch, what + " has S = " + j.at("S").dump() + ", expected " +
                                               std::to_string(grid_size));
  }
  if (j.contains("catalog_hash") && j.at("catalog_hash").get<std::string>() != catalog_hash) {
    throw Error(ErrorCode::ConfigMismatch, what + " was built for a different class catalog");
  }
}

RunConfig load_run_config(const fs::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": config must be a JSON object");
  static const std::set<std::string> known = {
      "dataset_dir", "ontology", "catalog",   "category_map", "llm_endpoint", "checkpoint",   "out",
      "seed",        "S",        "threshold", "log_every",    "save_optimizer", "render_scale", "dataset",
      "model",       "train"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::InvalidArgument, path.string() + ": unknown key '" + key + "'");
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  auto opt_path = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return resolve(j.at(key).get<std::string>());
  };

  RunConfig c;
  try {
    c.dataset_dir = opt_path("dataset_dir");
    c.ontology = opt_path("ontology");
    c.catalog = opt_path("catalog");
    c.category_map = opt_path("category_map");
    c.llm_endpoint = opt_path("llm_endpoint");
    if (j.contains("checkpoint")) {
      const auto& ck = j.at("checkpoint");
      if (ck.is_array()) {
        for (const auto& p : ck) c.checkpoints.push_back(resolve(p.get<std::string>()));
      } else {
        c.checkpoints.push_back(resolve(ck.get<std::string>()));
      }
    }
    if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>());
    c.seed = j.value("seed", c.seed);
    if (j.contains("S")) c.grid_size = j.at("S").get<std::size_t>();
    if (j.contains("threshold") && !j.at("threshold").is_null()) c.threshold = j.at("threshold").get<double>();
    c.log_every = j.value("log_every", c.log_every);
    c.save_optimizer = j.value("save_optimizer", c.save_optimizer);
    c.render_scale = j.value("render_scale", c.render_scale);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      auto& o = c.dataset;
      o.num_scenes = d.value("num_scenes", o.num_scenes);
      o.min_rooms = d.value("min_rooms", o.min_rooms);
      o.max_rooms = d.value("max_rooms", o.max_rooms);
      o.removal_fraction = d.value("removal_fraction", o.removal_fraction);
      o.blind_fraction = d.value("blind_fraction", o.blind_fraction);
      o.jobs = d.value("jobs", o.jobs);
      if (d.contains("raster_mode")) o.mode = raster_mode_from_string(d.at("raster_mode").get<std::string>());
      if (d.contains("split")) {
        const auto r = d.at("split").get<std::vector<double>>();
        if (r.size() != 3) throw Error(ErrorCode::BadRatios, "split needs three ratios");
        o.ratios = {r[0], r[1], r[2]};
      }
    }
    if (j.contains("model")) c.model = config_from_json(j.at("model"), c.model);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return c;
}

int cmd_generate(const RunConfig& c) {
  auto catalog = active_catalog(c);
  DatasetConfig d = c.dataset;
  d.seed = c.seed;
  d.grid_size = c.grid_size.value_or(d.grid_size);
  std::size_t skipped = 0;
  const auto samples = generate_samples(d, catalog, default_templates(*catalog), &skipped);
  const auto m = write_dataset(c.out, d, catalog, samples, skipped);
  std::cout << "wrote " << samples.size() << " samples (" << m.train.size() << " train, " << m.val.size()
            << " val, " << m.test.size() << " test) to " << c.out.string() << "\n";
  if (skipped) std::cout << skipped << " objects skipped after exhausting placement retries\n";
  return 0;
}

int cmd_train(const RunConfig& c) {
  const auto ds = load_dataset(require_path(c.dataset_dir, "dataset directory"));
  if (c.grid_size && *c.grid_size != ds.manifest.grid_size) {
    throw Error(ErrorCode::ConfigMismatch, "configured S = " + std::to_string(*c.grid_size) +
                                               " but the dataset has S = " + std::to_string(ds.manifest.grid_size));
  }
  CeciConfig mc = c.model;
  mc.grid_size = ds.manifest.grid_size;
  std::optional<ClassAffinity> affinity;
  if (mc.variant == Variant::base_ont) affinity = affinity_for(c, *ds.catalog);
  CeciModel model(mc, ds.catalog, affinity, c.seed);

  TrainConfig tc = c.train;
  tc.seed = c.seed;
  std::cerr << "training " << to_string(mc.variant) << " on " << ds.train.size() << " samples ("
            << ds.val.size() << " validation), " << tc.epochs << " epochs\n";
  const auto result = train(model, ds.train, ds.val, tc, [&](const EpochRecord& r) {
    if (c.log_every && (r.epoch % c.log_every == 0 || r.epoch == 1)) {
      std::cerr << "epoch " << r.epoch << " train " << fmt(r.train_loss) << " val " << fmt(r.val_loss) << "\n";
    }
  });

  fs::create_directories(c.out);
  const auto name = std::string(to_string(mc.variant));
  const auto ckpt = c.out / (name + ".ckpt.json");
  save_checkpoint(model, ckpt, tc, c.save_optimizer ? &result.optimizer : nullptr);

  json history = json::array();
  for (const auto& r : result.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss ? json(*r.val_loss) : json(nullptr)}});
  }
  json doc = stamp(mc.grid_size, ds.catalog->hash(), c.seed);
  doc["format"] = "ceci-history";
  doc["variant"] = name;
  doc["best_epoch"] = result.best_epoch ? json(*result.best_epoch) : json(nullptr);
  doc["stopped_early"] = result.stopped_early;
  doc["history"] = std::move(history);
  write_json(c.out / (name + ".history.json"), doc);
  std::cout << "wrote " << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& c) {
  const fs::path dir = require_path(c.dataset_dir, "dataset directory");
  const auto ds = load_dataset(dir);
  if (c.checkpoints.empty()) throw Error(ErrorCode::MissingArtifact, "no checkpoint given");
  const auto& population = !ds.test.empty() ? ds.test : ds.val;
  const std::string manifest_hash = sha256_hex(read_file(dir / "manifest.json"));
  fs::create_directories(c.out);

  std::cout << "variant      metric        mean         variance     skewness     kurtosis     n\n";
  for (const auto& path : c.checkpoints) {
    auto loaded = load_checkpoint(path);
    const auto& model = loaded.model;
    if (model.config().grid_size != ds.manifest.grid_size) {
      throw Error(ErrorCode::ConfigMismatch, path.string() + " has S = " + std::to_string(model.config().grid_size) +
                                                 ", dataset has S = " + std::to_string(ds.manifest.grid_size));
    }
    if (model.catalog().hash() != ds.manifest.catalog_hash) {
      throw Error(ErrorCode::ConfigMismatch, path.string() + " was trained on a different class catalog");
    }
    auto report = evaluate_model(model, population);
    report.checkpoint_hash = sha256_hex(read_file(path));
    report.dataset_hash = manifest_hash;

    const auto name = std::string(to_string(model.config().variant));
    json doc = report_to_json(report);
    doc.update(stamp(model.config().grid_size, model.catalog().hash(), model.seed()));
    doc["format"] = "ceci-metrics";
    doc["variant"] = name;
    doc["population"] = {{"wasserstein", "room x class present in truth"},
                         {"energy", "room x class present in truth"},
                         {"frobenius", "room"}};
    write_json(c.out / ("metrics_" + name + ".json"), doc);

    const std::pair<const char*, const Moments*> rows[] = {
        {"wasserstein", &report.wasserstein}, {"energy", &report.energy}, {"frobenius", &report.frobenius}};
    for (const auto& [metric, m] : rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%-12s %-13s %-12s %-12s %-12s %-12s %zu\n", name.c_str(), metric,
                    fmt(m->mean).c_str(), fmt(m->variance).c_str(), fmt(m->skewness).c_str(),
                    fmt(m->kurtosis).c_str(), m->n);
      std::cout << line;
    }
  }
  return 0;
}

int cmd_predict(const RunConfig& c, const fs::path& input) {
  if (c.checkpoints.empty()) throw Error(ErrorCode::MissingArtifact, "no checkpoint given");
  const auto loaded = load_checkpoint(c.checkpoints.front());
  const auto& model = loaded.model;
  const std::size_t S = model.config().grid_size;
  if (c.grid_size && *c.grid_size != S) {
    throw Error(ErrorCode::ConfigMismatch, "configured S = " + std::to_string(*c.grid_size) +
                                               " but the checkpoint has S = " + std::to_string(S));
  }
  const json doc = parse_json_file(input, ErrorCode::UnreadableInput);
  check_stamp(doc, S, model.catalog().hash(), input.string());

  std::optional<BsgSample> sample;
  if (doc.value("format", "") == "ceci-sample") {
    sample = sample_from_json(doc, model.catalog_ptr());
  } else {
    std::optional<CategoryMap> map;
    if (c.category_map) map = load_category_map(*c.category_map);
    auto loaded_graph = graph_from_json(doc, {model.catalog_ptr(), map ? &*map : nullptr});
    if (loaded_graph.dropped_nodes) {
      std::cerr << "dropped " << loaded_graph.dropped_nodes << " nodes with unmapped categories\n";
    }
    auto r = rasterize(loaded_graph.graph, S, c.dataset.mode);
    sample = BsgSample{std::move(loaded_graph.graph), r.heatmaps, r.counts, r.heatmaps, {}, 0};
  }
  const auto pred = predict(model, *sample);

  json out = stamp(S, model.catalog().hash(), model.seed());
  out["format"] = "ceci-prediction";
  out["version"] = 1;
  out["variant"] = std::string(to_string(model.config().variant));
  out["graph"] = graph_to_json(sample->graph);
  out["heatmaps"] = heatmaps_to_json(pred);
  out["counts"] = counts_to_json(sample->counts);
  fs::create_directories(c.out);
  write_json(c.out / "prediction.json", out, -1);
  std::cout << "wrote " << (c.out / "prediction.json").string() << "\n";
  return 0;
}

namespace {

struct Prediction {
  SceneGraph graph;
  HeatmapSet heatmaps;
  std::uint64_t seed = 0;
};

Prediction read_prediction(const json& doc, const std::string& what) {
  try {
    auto graph = graph_from_json(doc.at("graph")).graph;
    auto heatmaps = heatmaps_from_json(doc.at("heatmaps"));
    check_stamp(doc, heatmaps.grid_size(), graph.catalog().hash(), what);
    return {std::move(graph), std::move(heatmaps), doc.value("seed", std::uint64_t{0})};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, what + ": " + e.what());
  }
}

}  // namespace

int cmd_layout(const RunConfig& c, const fs::path& prediction) {
  const json doc = parse_json_file(prediction, ErrorCode::UnreadableInput);
  if (doc.value("format", "") != "ceci-prediction") {
    throw Error(ErrorCode::UnreadableInput, prediction.string() + " is not a prediction file");
  }
  const auto p = read_prediction(doc, prediction.string());
  const std::size_t S = p.heatmaps.grid_size();
  if (c.grid_size && *c.grid_size != S) {
    throw Error(ErrorCode::ConfigMismatch, "configured S = " + std::to_string(*c.grid_size) +
                                               " but the prediction has S = " + std::to_string(S));
  }
  const auto layouts = layout_rooms(p.heatmaps, p.graph, c.threshold);
  const auto completed = complete_graph(p.graph, layouts);

  json rooms = json::array();
  for (const auto& l : layouts) {
    for (const auto& pl : l.placements) {
      if (pl.insufficient_support) {
        std::cerr << "warning: room " << l.room_id << ": not enough support for "
                  << p.graph.catalog().labels()[pl.class_index] << "; placed on its most likely cell\n";
      }
    }
    rooms.push_back(layout_to_json(l.room_id, l.grid, l.placements));
  }
  json out = stamp(S, p.graph.catalog().hash(), p.seed);
  out["format"] = "ceci-layout";
  out["version"] = 1;
  out["threshold"] = c.threshold.value_or(default_threshold(S));
  out["rooms"] = std::move(rooms);
  out["completed_graph"] = graph_to_json(completed);
  fs::create_directories(c.out);
  write_json(c.out / "layout.json", out);
  std::cout << "wrote " << (c.out / "layout.json").string() << "\n";
  return 0;
}

int cmd_render(const RunConfig& c, const fs::path& input) {
  json doc;
  try {
    doc = json::parse(read_file(input));
  } catch (const Error& e) {
    throw Error(ErrorCode::UnreadableInput, e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, input.string() + ": " + e.what());
  }
  const std::string format = doc.is_object() ? doc.value("format", "") : "";
  std::vector<fs::path> written;
  try {
    if (format == "ceci-prediction") {
      const auto p = read_prediction(doc, input.string());
      written = render_heatmaps(p.heatmaps, p.graph.catalog(), c.out);
    } else if (format == "ceci-sample") {
      const auto s = sample_from_json(doc);
      for (auto& f : render_heatmaps(s.input, s.graph.catalog(), c.out / "input")) written.push_back(f);
      for (auto& f : render_heatmaps(s.target, s.graph.catalog(), c.out / "target")) written.push_back(f);
    } else if (format == "ceci-layout") {
      std::vector<RoomLayout> layouts;
      for (const auto& r : doc.at("rooms")) layouts.push_back(layout_from_json(r));
      written = render_layouts(layouts, c.out, c.render_scale);
    } else {
      throw Error(ErrorCode::UnreadableInput, input.string() + ": expected a prediction, sample or layout file");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, input.string() + ": " + e.what());
  }
  std::cout << "wrote " << written.size() << " images to " << c.out.string() << "\n";
  return 0;
}

int cmd_ontology_build(const RunConfig& c, const std::vector<std::string>& rooms,
                       const std::optional<fs::path>& cache_dir) {
  const auto endpoint = load_endpoint_config(require_path(c.llm_endpoint, "LLM endpoint config"));
  const auto catalog = active_catalog(c);
  fs::path cache;
  if (cache_dir) {
    cache = *cache_dir;
  } else if (const char* env = std::getenv("CECI_CACHE_DIR")) {
    cache = env;
  }
  const auto report = query_llm_ontology(endpoint, http_transport(endpoint),
                                         rooms.empty() ? default_room_concepts() : rooms, catalog->labels(), cache);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  fs::create_directories(c.out);
  save_ontology(report.ontology, c.out / "ontology.csv");
  std::cout << "wrote " << (c.out / "ontology.csv").string() << " (" << report.queries << " queries, "
            << report.cache_hits << " cache hits)\n";
  if (!report.incomplete_rooms.empty()) {
    std::cerr << report.incomplete_rooms.size() << " room concepts have no parsed answer; their rows are empty\n";
    return 3;
  }
  return 0;
}

int cmd_ontology_validate(const RunConfig& c) {
  const auto path = ontology_path(c);
  const auto o = load_ontology(path);
  const auto catalog = active_catalog(c);
  const auto selected = select_classes(o, catalog->labels());
  std::size_t ones = 0;
  std::vector<std::string> orphan;
  for (Eigen::Index k = 0; k < selected.biadjacency.cols(); ++k) {
    const double col = selected.biadjacency.col(k).sum();
    if (col == 0.0) orphan.push_back(selected.object_classes[static_cast<std::size_t>(k)]);
    ones += static_cast<std::size_t>((selected.biadjacency.col(k).array() > 0.0).count());
  }
  std::cout << path.string() << ": " << o.rooms() << " room concepts x " << o.classes() << " classes, " << ones
            << " located-in relations over the active catalog\n";
  for (const auto& name : orphan) std::cout << "warning: class '" << name << "' is not located in any room\n";
  return 0;
}

}  // namespace ceci::cli
