#include "ceci/scene_graph.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace ceci {

namespace {

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

bool edge_allowed(Layer parent, Layer child) {
  return (parent == Layer::building && child == Layer::room) ||
         (parent == Layer::room && (child == Layer::object || child == Layer::blind));
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

// ---------------------------------------------------------------- catalog

ClassCatalog::ClassCatalog(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "class catalog must not be empty");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) {
      throw Error(ErrorCode::InvalidArgument, "empty class label at index " + std::to_string(i));
    }
    if (!index_.emplace(labels_[i], i).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate class label '" + labels_[i] + "'");
    }
  }
}

ClassCatalog ClassCatalog::default_catalog() {
  return ClassCatalog({"chair",      "table",        "sofa",         "bed",        "cabinet",
                       "plant",      "lamp",         "window",       "door",       "tv",
                       "stove",      "refrigerator", "sink",         "toilet",     "bathtub",
                       "shower",     "mirror",       "picture",      "shelf",      "desk",
                       "counter",    "cushion",      "towel",        "curtain",    "fireplace",
                       "stool",      "dresser",      "nightstand",   "microwave",  "washing_machine",
                       "computer",   "bookcase",     "trash_can",    "coffee_table", "wardrobe"});
}

std::optional<std::size_t> ClassCatalog::index_of(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ClassCatalog::require_index(std::string_view label) const {
  auto idx = index_of(label);
  if (!idx) {
    throw Error(ErrorCode::UnknownClass, "class '" + std::string(label) + "' is not in the catalog");
  }
  return *idx;
}

std::string ClassCatalog::hash() const {
  std::string joined;
  for (const auto& l : labels_) {
    joined += l;
    joined += '\n';
  }
  return sha256_hex(joined);
}

ClassCatalog ClassCatalog::subset(const std::vector<std::string>& labels) const {
  for (const auto& l : labels) require_index(l);
  return ClassCatalog(labels);
}

ClassCatalog load_catalog(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + e.what());
  }
  const auto& arr = doc.is_object() ? doc.at("labels") : doc;
  return ClassCatalog(arr.get<std::vector<std::string>>());
}

void save_catalog(const ClassCatalog& catalog, const std::filesystem::path& path) {
  nlohmann::json doc = {{"labels", catalog.labels()}, {"hash", catalog.hash()}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

CategoryMap load_category_map(const std::filesystem::path& csv_path) {
  std::istringstream in(read_file(csv_path));
  CategoryMap map;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::ParseError, "category map line without comma: " + line);
    }
    map[trim(line.substr(0, comma))] = trim(line.substr(comma + 1));
  }
  return map;
}

// ---------------------------------------------------------------- enums

std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::building: return "building";
    case Layer::room: return "room";
    case Layer::object: return "object";
    case Layer::blind: return "blind";
  }
  return "?";
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::ground_truth: return "ground_truth";
    case GraphKind::augmented: return "augmented";
    case GraphKind::belief: return "belief";
  }
  return "?";
}

Layer layer_from_string(std::string_view s) {
  if (s == "building") return Layer::building;
  if (s == "room") return Layer::room;
  if (s == "object") return Layer::object;
  if (s == "blind") return Layer::blind;
  throw Error(ErrorCode::ParseError, "unknown layer '" + std::string(s) + "'");
}

GraphKind kind_from_string(std::string_view s) {
  if (s == "ground_truth") return GraphKind::ground_truth;
  if (s == "augmented") return GraphKind::augmented;
  if (s == "belief") return GraphKind::belief;
  throw Error(ErrorCode::ParseError, "unknown graph kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- graph

SceneGraph SceneGraph::build(std::shared_ptr<const ClassCatalog> catalog, std::vector<SceneNode> nodes,
                             std::vector<Edge> edges, GraphKind kind) {
  if (!catalog) {
    throw Error(ErrorCode::InvalidArgument, "scene graph requires a class catalog");
  }
  SceneGraph g;
  g.catalog_ = std::move(catalog);
  g.kind_ = kind;

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!g.index_.emplace(n.id, i).second) {
      throw Error(ErrorCode::DuplicateId, "node id " + std::to_string(n.id) + " appears twice");
    }
    const bool needs_class = n.layer == Layer::object || n.layer == Layer::blind;
    if (needs_class) {
      if (!n.class_index) {
        throw Error(ErrorCode::InvalidNode, "node " + std::to_string(n.id) + " has no class");
      }
      if (*n.class_index >= g.catalog_->size()) {
        throw Error(ErrorCode::UnknownClass,
                    "node " + std::to_string(n.id) + " class index " + std::to_string(*n.class_index));
      }
    }
    if (n.layer == Layer::object) {
      if (!n.position || !finite(*n.position)) {
        throw Error(ErrorCode::InvalidNode, "object " + std::to_string(n.id) + " needs a finite position");
      }
      if (!(n.dimensions.x > 0 && n.dimensions.y > 0 && n.dimensions.z > 0) || !finite(n.dimensions)) {
        throw Error(ErrorCode::InvalidNode,
                    "object " + std::to_string(n.id) + " needs strictly positive dimensions");
      }
    }
    if (n.layer == Layer::blind && kind != GraphKind::belief) {
      throw Error(ErrorCode::LayerViolation,
                  "blind node " + std::to_string(n.id) + " in a non-belief graph");
    }
  }

  for (const auto& e : edges) {
    auto p = g.index_.find(e.parent);
    auto c = g.index_.find(e.child);
    if (p == g.index_.end() || c == g.index_.end()) {
      throw Error(ErrorCode::DanglingEdge,
                  "edge " + std::to_string(e.parent) + "->" + std::to_string(e.child));
    }
    const Layer pl = nodes[p->second].layer;
    const Layer cl = nodes[c->second].layer;
    if (!edge_allowed(pl, cl)) {
      throw Error(ErrorCode::LayerViolation, "edge " + std::string(to_string(pl)) + "->" +
                                                 std::string(to_string(cl)) + " (" +
                                                 std::to_string(e.parent) + "->" +
                                                 std::to_string(e.child) + ")");
    }
    if (!g.parent_.emplace(e.child, e.parent).second) {
      throw Error(ErrorCode::MultipleParents, "node " + std::to_string(e.child) + " has two parents");
    }
  }

  for (const auto& n : nodes) {
    if (n.layer != Layer::building && !g.parent_.count(n.id)) {
      throw Error(ErrorCode::LayerViolation,
                  std::string(to_string(n.layer)) + " node " + std::to_string(n.id) + " has no parent");
    }
  }

  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  return g;
}

const SceneNode& SceneGraph::node(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no node with id " + std::to_string(id));
  }
  return nodes_[it->second];
}

std::size_t SceneGraph::node_index(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no node with id " + std::to_string(id));
  }
  return it->second;
}

std::optional<NodeId> SceneGraph::parent_of(NodeId id) const {
  auto it = parent_.find(id);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

std::size_t SceneGraph::count(Layer layer) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const SceneNode& n) { return n.layer == layer; }));
}

NodeId SceneGraph::max_id() const {
  NodeId m = 0;
  for (const auto& n : nodes_) m = std::max(m, n.id);
  return m;
}

// ---------------------------------------------------------------- operations

std::size_t augment_removal_count(std::size_t object_count, double removal_fraction) {
  if (!(removal_fraction > 0.0 && removal_fraction < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "removal fraction must lie in (0, 1)");
  }
  // The epsilon keeps products such as 0.1 * 30 = 3.0000000000000004 from
  // rounding up to 4.
  const double raw = removal_fraction * static_cast<double>(object_count);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(k, object_count);
}

SceneGraph augment(const SceneGraph& g, double removal_fraction, std::uint64_t seed) {
  if (g.kind() == GraphKind::belief) {
    throw Error(ErrorCode::WrongKind, "augment expects a ground-truth or augmented graph");
  }
  std::vector<NodeId> objects;
  for (const auto& n : g.nodes()) {
    if (n.layer == Layer::object) objects.push_back(n.id);
  }
  if (objects.empty()) {
    throw Error(ErrorCode::EmptyGraph, "graph has no object nodes to remove");
  }
  const std::size_t k = augment_removal_count(objects.size(), removal_fraction);

  std::vector<NodeId> removed;
  std::mt19937_64 rng(seed);
  std::sample(objects.begin(), objects.end(), std::back_inserter(removed), k, rng);
  std::sort(removed.begin(), removed.end());
  auto gone = [&](NodeId id) { return std::binary_search(removed.begin(), removed.end(), id); };

  std::vector<SceneNode> nodes;
  for (const auto& n : g.nodes()) {
    if (!gone(n.id)) nodes.push_back(n);
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    if (!gone(e.child)) edges.push_back(e);
  }
  return SceneGraph::build(g.catalog_ptr(), std::move(nodes), std::move(edges), GraphKind::augmented);
}

SceneGraph make_belief_graph(const SceneGraph& g, const std::vector<BlindSpec>& specs) {
  std::vector<SceneNode> nodes = g.nodes();
  std::vector<Edge> edges = g.edges();
  NodeId next = g.max_id() + 1;
  for (const auto& spec : specs) {
    if (!g.contains(spec.room) || g.node(spec.room).layer != Layer::room) {
      throw Error(ErrorCode::UnknownRoom, "room " + std::to_string(spec.room));
    }
    if (spec.class_index >= g.catalog().size()) {
      throw Error(ErrorCode::UnknownClass, "class index " + std::to_string(spec.class_index));
    }
    if (spec.count < 0) {
      throw Error(ErrorCode::NegativeCount, "blind count " + std::to_string(spec.count));
    }
    for (int i = 0; i < spec.count; ++i) {
      SceneNode blind;
      blind.id = next++;
      blind.layer = Layer::blind;
      blind.class_index = spec.class_index;
      nodes.push_back(blind);
      edges.push_back({spec.room, blind.id});
    }
  }
  return SceneGraph::build(g.catalog_ptr(), std::move(nodes), std::move(edges), GraphKind::belief);
}

std::vector<SceneNode> rooms_of(const SceneGraph& g) {
  std::vector<SceneNode> rooms;
  for (const auto& n : g.nodes()) {
    if (n.layer == Layer::room) rooms.push_back(n);
  }
  std::sort(rooms.begin(), rooms.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return rooms;
}

std::vector<SceneNode> children_of(const SceneGraph& g, NodeId room_id, std::optional<Layer> layer) {
  if (!g.contains(room_id) || g.node(room_id).layer != Layer::room) {
    throw Error(ErrorCode::UnknownRoom, "room " + std::to_string(room_id));
  }
  std::vector<SceneNode> out;
  for (const auto& e : g.edges()) {
    if (e.parent != room_id) continue;
    const auto& child = g.node(e.child);
    if (!layer || child.layer == *layer) out.push_back(child);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------- json

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::ParseError, "expected a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json graph_to_json(const SceneGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes()) {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["layer"] = to_string(n.layer);
    if (n.class_index) {
      jn["class"] = g.catalog().label(*n.class_index);
    } else if (n.layer == Layer::room) {
      jn["class"] = "room";
    } else {
      jn["class"] = nullptr;
    }
    jn["position"] = n.position ? vec_json(*n.position) : nlohmann::json(nullptr);
    jn["dimensions"] = vec_json(n.dimensions);
    nodes.push_back(std::move(jn));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({e.parent, e.child});
  return {{"catalog", g.catalog().labels()},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"kind", to_string(g.kind())}};
}

GraphLoadResult graph_from_json(const nlohmann::json& doc, const GraphLoadOptions& options) {
  try {
    std::shared_ptr<const ClassCatalog> catalog;
    if (doc.contains("catalog")) {
      auto own = std::make_shared<const ClassCatalog>(doc.at("catalog").get<std::vector<std::string>>());
      if (options.catalog && !(*options.catalog == *own)) {
        throw Error(ErrorCode::CatalogMismatch, "graph catalog differs from the active catalog");
      }
      catalog = options.catalog ? options.catalog : own;
    } else if (options.catalog) {
      catalog = options.catalog;
    } else {
      throw Error(ErrorCode::ParseError, "graph has no catalog and none was supplied");
    }

    const GraphKind kind = kind_from_string(doc.value("kind", "ground_truth"));
    std::vector<SceneNode> nodes;
    std::vector<NodeId> dropped;
    for (const auto& jn : doc.at("nodes")) {
      SceneNode n;
      n.id = jn.at("id").get<NodeId>();
      n.layer = layer_from_string(jn.at("layer").get<std::string>());
      if (n.layer == Layer::object || n.layer == Layer::blind) {
        const auto raw = jn.at("class").get<std::string>();
        auto idx = catalog->index_of(raw);
        if (!idx && options.category_map) {
          auto it = options.category_map->find(raw);
          if (it != options.category_map->end() && !it->second.empty()) idx = catalog->index_of(it->second);
          if (!idx) {
            dropped.push_back(n.id);
            continue;
          }
        }
        if (!idx) {
          throw Error(ErrorCode::UnknownClass, "node " + std::to_string(n.id) + " class '" + raw + "'");
        }
        n.class_index = *idx;
      }
      if (jn.contains("position") && !jn.at("position").is_null()) n.position = vec_from(jn.at("position"));
      if (jn.contains("dimensions") && !jn.at("dimensions").is_null()) n.dimensions = vec_from(jn.at("dimensions"));
      nodes.push_back(n);
    }
    std::sort(dropped.begin(), dropped.end());
    std::vector<Edge> edges;
    for (const auto& je : doc.at("edges")) {
      Edge e{je.at(0).get<NodeId>(), je.at(1).get<NodeId>()};
      if (std::binary_search(dropped.begin(), dropped.end(), e.child)) continue;
      edges.push_back(e);
    }
    return {SceneGraph::build(catalog, std::move(nodes), std::move(edges), kind), dropped.size()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scene graph json: ") + e.what());
  }
}

void save_graph(const SceneGraph& g, const std::filesystem::path& path) {
  write_file_atomic(path, graph_to_json(g).dump(1) + "\n");
}

GraphLoadResult load_graph(const std::filesystem::path& path, const GraphLoadOptions& options) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + e.what());
  }
  return graph_from_json(doc, options);
}

}  // namespace ceci
