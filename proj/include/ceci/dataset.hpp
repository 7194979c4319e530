#pragma once

#include "ceci/scene_graph.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ceci {

/// Axis-aligned room rectangle in meters; mapped onto the full S x S grid.
struct RoomFrame {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool operator==(const RoomFrame&) const = default;
};

/// Rank-4 array [rooms x classes x S x S]. Cell (i, j) is row i (along y)
/// and column j (along x) of the room frame; storage is row-major.
class HeatmapSet {
 public:
  HeatmapSet() = default;
  HeatmapSet(std::vector<NodeId> room_ids, std::vector<RoomFrame> frames, std::size_t classes,
             std::size_t grid_size);

  std::size_t rooms() const { return room_ids_.size(); }
  std::size_t classes() const { return classes_; }
  std::size_t grid_size() const { return grid_size_; }
  std::size_t cells() const { return grid_size_ * grid_size_; }

  const std::vector<NodeId>& room_ids() const { return room_ids_; }
  const std::vector<RoomFrame>& frames() const { return frames_; }
  std::size_t room_index(NodeId room) const;

  double& at(std::size_t room, std::size_t cls, std::size_t i, std::size_t j);
  double at(std::size_t room, std::size_t cls, std::size_t i, std::size_t j) const;

  std::span<double> grid(std::size_t room, std::size_t cls);
  std::span<const double> grid(std::size_t room, std::size_t cls) const;
  /// The contiguous C x S x S block of one room.
  std::span<double> room_block(std::size_t room);
  std::span<const double> room_block(std::size_t room) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Each grid with positive mass is scaled to sum 1; the rest stay zero.
  void normalize();

  bool operator==(const HeatmapSet&) const = default;

 private:
  std::vector<NodeId> room_ids_;
  std::vector<RoomFrame> frames_;
  std::size_t classes_ = 0;
  std::size_t grid_size_ = 0;
  std::vector<double> data_;
};

/// Objects plus blind nodes per room and class.
class ObjectCounts {
 public:
  ObjectCounts() = default;
  ObjectCounts(std::size_t rooms, std::size_t classes)
      : rooms_(rooms), classes_(classes), data_(rooms * classes, 0) {}

  std::size_t rooms() const { return rooms_; }
  std::size_t classes() const { return classes_; }
  int& at(std::size_t room, std::size_t cls) { return data_.at(room * classes_ + cls); }
  int at(std::size_t room, std::size_t cls) const { return data_.at(room * classes_ + cls); }
  std::span<const int> row(std::size_t room) const { return {data_.data() + room * classes_, classes_}; }
  const std::vector<int>& data() const { return data_; }

  bool operator==(const ObjectCounts&) const = default;

 private:
  std::size_t rooms_ = 0;
  std::size_t classes_ = 0;
  std::vector<int> data_;
};

enum class RasterMode {
  /// Footprint spread over cells proportionally to overlap area.
  soft,
  /// Whole footprint area assigned to the cell holding the object center.
  center_cell,
};

/// Frame per room (rooms in id order): the stored room extent when the room
/// node has positive x/y dimensions, otherwise the AABB of its object
/// footprints. Throws DegenerateRoom on a zero-area frame.
std::vector<RoomFrame> compute_room_frames(const SceneGraph& g);

/// Unnormalized contribution of one object footprint to its room grid, as
/// (cell index, mass) pairs. Mass is in square meters and sums to the
/// clipped footprint area; a footprint entirely outside the frame is spread
/// uniformly over the room with its full area.
std::vector<std::pair<std::size_t, double>> footprint_cells(const SceneNode& object, const RoomFrame& frame,
                                                            std::size_t grid_size,
                                                            RasterMode mode = RasterMode::soft);

struct RasterResult {
  HeatmapSet heatmaps;
  ObjectCounts counts;
};

/// Location heatmaps and counts for every room. Blind nodes contribute to
/// counts but never to heatmaps. `frames` overrides compute_room_frames().
RasterResult rasterize(const SceneGraph& g, std::size_t grid_size, RasterMode mode = RasterMode::soft,
                       const std::vector<RoomFrame>* frames = nullptr);

/// Same as rasterize() but leaves the heatmaps unnormalized (occupied area
/// per cell).
RasterResult rasterize_raw(const SceneGraph& g, std::size_t grid_size, RasterMode mode = RasterMode::soft,
                           const std::vector<RoomFrame>* frames = nullptr);

struct MaskedInstance {
  NodeId room = 0;
  std::size_t class_index = 0;
  NodeId instance = 0;
  bool operator==(const MaskedInstance&) const = default;
};

/// One training example: a belief graph, its partial heatmaps L'', the
/// object counts O and the ground-truth heatmaps L.
struct BsgSample {
  SceneGraph graph;
  HeatmapSet input;
  ObjectCounts counts;
  HeatmapSet target;
  std::vector<MaskedInstance> masked;
  std::uint64_t seed = 0;
};

/// Number of instances make_sample() blinds out of `object_count`.
std::size_t masked_count(std::size_t object_count, double blind_fraction);

/// Rasterizes `g` as the target, turns a uniformly random subset of objects
/// into blind nodes (same ids, position unset) and re-rasterizes the
/// survivors on the target's frames.
BsgSample make_sample(const SceneGraph& g, double blind_fraction, std::size_t grid_size, std::uint64_t seed,
                      RasterMode mode = RasterMode::soft);

// ---------------------------------------------------------------- synthesis

enum class Anchor {
  wall,         // back against a random wall
  wall_middle,  // against a wall, kept away from the corners
  corner,       // snug in a random corner
  center,       // around the room center
  near_class,   // at a sampled distance from an already placed anchor object
};

struct PlacementRule {
  std::size_t class_index = 0;
  int min_count = 0;
  int max_count = 0;
  Anchor anchor = Anchor::wall;
  std::size_t anchor_class = 0;  // used by near_class
  double offset_mean = 0.0;      // meters
  double offset_stddev = 0.0;    // meters
  Vec3 size{0.5, 0.5, 0.5};      // nominal footprint (along wall, depth, height)
  bool on_top = false;           // stacked on the anchor (z above it)
};

struct SceneTemplate {
  std::string name;
  double min_width = 3.0;
  double max_width = 6.0;
  double min_depth = 3.0;
  double max_depth = 6.0;
  std::vector<PlacementRule> rules;
};

/// Built-in room archetypes, restricted to the classes present in
/// `catalog`. Rules whose class or anchor class is missing are dropped;
/// templates left without rules are omitted.
std::vector<SceneTemplate> default_templates(const ClassCatalog& catalog);

/// Throws UnknownClass when a rule references a class outside `catalog`.
void validate_template(const SceneTemplate& t, const ClassCatalog& catalog);

struct GeneratedScene {
  SceneGraph graph;
  /// Objects dropped after exhausting placement retries.
  std::size_t skipped_objects = 0;
  /// Template chosen for each room, in room id order.
  std::vector<std::string> room_templates;
};

GeneratedScene generate_synthetic_scene(const std::vector<SceneTemplate>& templates,
                                        std::shared_ptr<const ClassCatalog> catalog, std::size_t n_rooms,
                                        std::uint64_t seed);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Split sizes for `n` items: the training share is floored and the rest is
/// apportioned between val and test by largest remainder (ties to val).
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Disjoint, exhaustive partition of [0, n), deterministic in `seed`. Each
/// part is returned sorted.
DatasetSplit split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------- files

nlohmann::json heatmaps_to_json(const HeatmapSet& h);
HeatmapSet heatmaps_from_json(const nlohmann::json& j);
nlohmann::json counts_to_json(const ObjectCounts& c);
ObjectCounts counts_from_json(const nlohmann::json& j);

nlohmann::json sample_to_json(const BsgSample& s);
BsgSample sample_from_json(const nlohmann::json& j, std::shared_ptr<const ClassCatalog> catalog = nullptr);
void save_sample(const BsgSample& s, const std::filesystem::path& path);
BsgSample load_sample(const std::filesystem::path& path, std::shared_ptr<const ClassCatalog> catalog = nullptr);

struct DatasetConfig {
  std::size_t num_scenes = 100;
  std::size_t min_rooms = 2;
  std::size_t max_rooms = 5;
  std::size_t grid_size = 32;
  double removal_fraction = 0.25;
  double blind_fraction = 0.25;
  std::uint64_t seed = 1;
  SplitRatios ratios;
  RasterMode mode = RasterMode::soft;
  unsigned jobs = 1;
};

struct Manifest {
  std::size_t grid_size = 0;
  std::vector<std::string> catalog;
  std::string catalog_hash;
  std::uint64_t master_seed = 0;
  std::string tool_version;
  double removal_fraction = 0.0;
  double blind_fraction = 0.0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::size_t skipped_objects = 0;
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

/// Synthesize, augment, mask and split; returns the samples in index order.
/// Per-scene seeds come from derive_seed(master, index), so the result does
/// not depend on `jobs`.
std::vector<BsgSample> generate_samples(const DatasetConfig& config, std::shared_ptr<const ClassCatalog> catalog,
                                        const std::vector<SceneTemplate>& templates,
                                        std::size_t* skipped_objects = nullptr);

/// Writes samples/NNNNN.json plus manifest.json under `dir`.
Manifest write_dataset(const std::filesystem::path& dir, const DatasetConfig& config,
                       std::shared_ptr<const ClassCatalog> catalog, const std::vector<BsgSample>& samples,
                       std::size_t skipped_objects = 0);

struct Dataset {
  Manifest manifest;
  std::shared_ptr<const ClassCatalog> catalog;
  std::vector<BsgSample> train;
  std::vector<BsgSample> val;
  std::vector<BsgSample> test;
};

Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ceci
