#pragma once

#include "ceci/dataset.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ceci {

inline constexpr int kEmptyCell = -1;

/// S x S grid of class indices (kEmptyCell where nothing clears the
/// threshold), row-major, plus the room frame used for world coordinates.
struct LayoutGrid {
  std::size_t grid_size = 0;
  double threshold = 0.0;
  RoomFrame frame;
  std::vector<int> cells;

  int at(std::size_t i, std::size_t j) const { return cells.at(i * grid_size + j); }
  bool operator==(const LayoutGrid&) const = default;
};

/// 1 / S^2.
double default_threshold(std::size_t grid_size);

/// Per-cell argmax over the room's class grids (ties go to the lowest class
/// index); cells whose maximum is below `threshold` are empty. `room_block`
/// is C x S x S, row-major. Throws OutOfRange for a negative threshold.
LayoutGrid extract_layout(std::span<const double> room_block, std::size_t classes, std::size_t grid_size,
                          double threshold, const RoomFrame& frame = {});
LayoutGrid extract_layout(const HeatmapSet& h, std::size_t room, double threshold);

struct CellIndex {
  std::size_t i = 0;
  std::size_t j = 0;
  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

/// Center of cell (i, j) in world meters. Throws OutOfBounds.
std::pair<double, double> grid_to_world(const RoomFrame& frame, CellIndex cell, std::size_t grid_size);

struct BlindRequest {
  std::size_t class_index = 0;
  int count = 0;
};

struct Placement {
  std::size_t class_index = 0;
  CellIndex cell;
  double x = 0.0;
  double y = 0.0;
  /// Set when the class heatmap had fewer non-zero cells than instances and
  /// this instance was put on the global maximum instead.
  bool insufficient_support = false;

  bool operator==(const Placement&) const = default;
};

/// Greedy per class: instance k of class c takes the k-th most probable
/// non-zero cell of c's heatmap (ties in row-major order). Classes do not
/// exclude each other, and cells already holding observed objects are not
/// excluded. Results are ordered by class, then by rank. Requests for the
/// same class are merged. Throws NegativeCount or UnknownClass.
std::vector<Placement> place_blind_nodes(std::span<const double> room_block, std::size_t classes,
                                         std::size_t grid_size, const std::vector<BlindRequest>& blind,
                                         const RoomFrame& frame);
std::vector<Placement> place_blind_nodes(const HeatmapSet& h, std::size_t room, const std::vector<BlindRequest>& blind);

/// Run-length encoding [[value, run], ...] in row-major order.
nlohmann::json encode_cells(const std::vector<int>& cells);
std::vector<int> decode_cells(const nlohmann::json& runs, std::size_t expected_size);

/// {"room_id", "S", "threshold", "frame", "cells", "placements"}.
nlohmann::json layout_to_json(NodeId room_id, const LayoutGrid& layout, const std::vector<Placement>& placements);

struct RoomLayout {
  NodeId room_id = 0;
  LayoutGrid grid;
  std::vector<Placement> placements;
};

RoomLayout layout_from_json(const nlohmann::json& j);

/// Layout and placements for every room of a belief graph, using its blind
/// nodes as the requests. `threshold` defaults to 1 / S^2.
std::vector<RoomLayout> layout_rooms(const HeatmapSet& prediction, const SceneGraph& belief,
                                     std::optional<double> threshold = std::nullopt);

/// Copy of `belief` with every blind node that received a placement given a
/// position (x, y, floor height 0). Blind nodes of one class and room are
/// matched to placements in id order.
SceneGraph complete_graph(const SceneGraph& belief, const std::vector<RoomLayout>& layouts);

}  // namespace ceci
