#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ceci {

/// Ordered set of semantic object-class labels. A class index is the
/// position of its label and is stable across save/load.
class ClassCatalog {
 public:
  ClassCatalog() = default;
  explicit ClassCatalog(std::vector<std::string> labels);

  /// The 35-label catalog shipped with the project.
  static ClassCatalog default_catalog();

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;
  /// Throws UnknownClass when `label` is not in the catalog.
  std::size_t require_index(std::string_view label) const;

  /// SHA-256 over the newline-joined labels; order-sensitive.
  std::string hash() const;

  /// Catalog restricted to `labels`, in the given order.
  ClassCatalog subset(const std::vector<std::string>& labels) const;

  bool operator==(const ClassCatalog& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

ClassCatalog load_catalog(const std::filesystem::path& path);
void save_catalog(const ClassCatalog& catalog, const std::filesystem::path& path);

/// Maps raw dataset category names onto catalog labels. An empty target
/// label means the category is filtered out.
using CategoryMap = std::unordered_map<std::string, std::string>;
CategoryMap load_category_map(const std::filesystem::path& csv_path);

enum class Layer { building, room, object, blind };
enum class GraphKind { ground_truth, augmented, belief };

std::string_view to_string(Layer layer);
std::string_view to_string(GraphKind kind);
Layer layer_from_string(std::string_view s);
GraphKind kind_from_string(std::string_view s);

using NodeId = std::int64_t;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct SceneNode {
  NodeId id = 0;
  Layer layer = Layer::object;
  /// Required for object and blind nodes; rooms share one generic label.
  std::optional<std::size_t> class_index;
  /// Unset for blind nodes until the layout stage places them.
  std::optional<Vec3> position;
  /// Axis-aligned extents in meters. Zero on a room means "derive the frame
  /// from the children".
  Vec3 dimensions;

  bool operator==(const SceneNode&) const = default;
};

struct Edge {
  NodeId parent = 0;
  NodeId child = 0;
  bool operator==(const Edge&) const = default;
};

/// Layered building -> room -> {object, blind} forest. Immutable after
/// construction; every mutating operation returns a new graph.
class SceneGraph {
 public:
  /// Validates and builds. Throws DuplicateId, DanglingEdge, LayerViolation,
  /// MultipleParents, InvalidNode or UnknownClass.
  static SceneGraph build(std::shared_ptr<const ClassCatalog> catalog, std::vector<SceneNode> nodes,
                          std::vector<Edge> edges, GraphKind kind);

  const ClassCatalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const ClassCatalog>& catalog_ptr() const { return catalog_; }
  GraphKind kind() const { return kind_; }
  const std::vector<SceneNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool contains(NodeId id) const { return index_.count(id) != 0; }
  const SceneNode& node(NodeId id) const;
  /// Position of `id` in nodes(); the row order used by adjacency matrices.
  std::size_t node_index(NodeId id) const;
  std::optional<NodeId> parent_of(NodeId id) const;

  std::size_t count(Layer layer) const;
  NodeId max_id() const;

 private:
  SceneGraph() = default;

  std::shared_ptr<const ClassCatalog> catalog_;
  std::vector<SceneNode> nodes_;
  std::vector<Edge> edges_;
  GraphKind kind_ = GraphKind::ground_truth;
  std::unordered_map<NodeId, std::size_t> index_;
  std::unordered_map<NodeId, NodeId> parent_;
};

inline SceneGraph build_graph(std::shared_ptr<const ClassCatalog> catalog, std::vector<SceneNode> nodes,
                              std::vector<Edge> edges, GraphKind kind) {
  return SceneGraph::build(std::move(catalog), std::move(nodes), std::move(edges), kind);
}

/// Removes ceil(removal_fraction * |objects|) object nodes uniformly at
/// random without replacement. Rooms and buildings are kept.
SceneGraph augment(const SceneGraph& g, double removal_fraction, std::uint64_t seed);

/// Number of object nodes augment() removes from a graph with `object_count`
/// objects.
std::size_t augment_removal_count(std::size_t object_count, double removal_fraction);

struct BlindSpec {
  NodeId room = 0;
  std::size_t class_index = 0;
  int count = 0;
};

/// Appends `count` unplaced blind nodes per spec under the given room, with
/// fresh ids. The result has kind belief.
SceneGraph make_belief_graph(const SceneGraph& g, const std::vector<BlindSpec>& specs);

/// Room nodes sorted by id.
std::vector<SceneNode> rooms_of(const SceneGraph& g);

/// Direct children of `room_id`, optionally restricted to one layer, in id
/// order. Throws UnknownRoom.
std::vector<SceneNode> children_of(const SceneGraph& g, NodeId room_id,
                                   std::optional<Layer> layer = std::nullopt);

nlohmann::json graph_to_json(const SceneGraph& g);

struct GraphLoadOptions {
  /// Required when the document carries no "catalog" array; must match it
  /// when it does.
  std::shared_ptr<const ClassCatalog> catalog;
  /// Raw-category remapping. With a map, unresolvable object classes are
  /// dropped rather than rejected.
  const CategoryMap* category_map = nullptr;
};

struct GraphLoadResult {
  SceneGraph graph;
  std::size_t dropped_nodes = 0;
};

GraphLoadResult graph_from_json(const nlohmann::json& doc, const GraphLoadOptions& options = {});
void save_graph(const SceneGraph& g, const std::filesystem::path& path);
GraphLoadResult load_graph(const std::filesystem::path& path, const GraphLoadOptions& options = {});

}  // namespace ceci
