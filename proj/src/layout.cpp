#include "ceci/layout.hpp"

#include "ceci/error.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ceci {

double default_threshold(std::size_t grid_size) {
  return 1.0 / static_cast<double>(grid_size * grid_size);
}

LayoutGrid extract_layout(std::span<const double> block, std::size_t classes, std::size_t grid_size,
                          double threshold, const RoomFrame& frame) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::OutOfRange, "layout threshold must be non-negative");
  const std::size_t cells = grid_size * grid_size;
  if (block.size() != classes * cells) {
    throw Error(ErrorCode::ShapeMismatch, "room block size does not match classes x S x S");
  }
  LayoutGrid out;
  out.grid_size = grid_size;
  out.threshold = threshold;
  out.frame = frame;
  out.cells.assign(cells, kEmptyCell);
  for (std::size_t k = 0; k < cells; ++k) {
    int best = kEmptyCell;
    double best_value = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = block[c * cells + k];
      if (best == kEmptyCell || v > best_value) {
        best = static_cast<int>(c);
        best_value = v;
      }
    }
    // An all-zero cell stays empty even at threshold 0.
    if (best != kEmptyCell && best_value >= threshold && best_value > 0.0) out.cells[k] = best;
  }
  return out;
}

LayoutGrid extract_layout(const HeatmapSet& h, std::size_t room, double threshold) {
  return extract_layout(h.room_block(room), h.classes(), h.grid_size(), threshold, h.frames().at(room));
}

std::pair<double, double> grid_to_world(const RoomFrame& frame, CellIndex cell, std::size_t grid_size) {
  if (cell.i >= grid_size || cell.j >= grid_size) {
    throw Error(ErrorCode::OutOfBounds, "cell (" + std::to_string(cell.i) + ", " + std::to_string(cell.j) +
                                            ") outside a " + std::to_string(grid_size) + "x" +
                                            std::to_string(grid_size) + " grid");
  }
  const double s = static_cast<double>(grid_size);
  return {frame.min_x + (static_cast<double>(cell.j) + 0.5) * frame.width() / s,
          frame.min_y + (static_cast<double>(cell.i) + 0.5) * frame.height() / s};
}

std::vector<Placement> place_blind_nodes(std::span<const double> block, std::size_t classes, std::size_t grid_size,
                                         const std::vector<BlindRequest>& blind, const RoomFrame& frame) {
  const std::size_t cells = grid_size * grid_size;
  if (block.size() != classes * cells) {
    throw Error(ErrorCode::ShapeMismatch, "room block size does not match classes x S x S");
  }
  std::map<std::size_t, int> wanted;
  for (const auto& b : blind) {
    if (b.count < 0) throw Error(ErrorCode::NegativeCount, "blind count must be non-negative");
    if (b.class_index >= classes) {
      throw Error(ErrorCode::UnknownClass, "class index " + std::to_string(b.class_index) + " out of range");
    }
    wanted[b.class_index] += b.count;
  }

  std::vector<Placement> out;
  for (const auto& [c, count] : wanted) {
    if (count == 0) continue;
    const auto grid = block.subspan(c * cells, cells);
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });
    std::size_t support = 0;
    while (support < cells && grid[order[support]] > 0.0) ++support;

    for (int k = 0; k < count; ++k) {
      Placement p;
      p.class_index = c;
      std::size_t cell = order[0];
      if (static_cast<std::size_t>(k) < support) {
        cell = order[static_cast<std::size_t>(k)];
      } else {
        p.insufficient_support = true;
      }
      p.cell = {cell / grid_size, cell % grid_size};
      std::tie(p.x, p.y) = grid_to_world(frame, p.cell, grid_size);
      out.push_back(p);
    }
  }
  return out;
}

std::vector<Placement> place_blind_nodes(const HeatmapSet& h, std::size_t room, const std::vector<BlindRequest>& blind) {
  return place_blind_nodes(h.room_block(room), h.classes(), h.grid_size(), blind, h.frames().at(room));
}

nlohmann::json encode_cells(const std::vector<int>& cells) {
  auto runs = nlohmann::json::array();
  for (std::size_t k = 0; k < cells.size();) {
    std::size_t e = k;
    while (e < cells.size() && cells[e] == cells[k]) ++e;
    runs.push_back({cells[k], e - k});
    k = e;
  }
  return runs;
}

std::vector<int> decode_cells(const nlohmann::json& runs, std::size_t expected_size) {
  std::vector<int> out;
  for (const auto& r : runs) {
    const int v = r.at(0).get<int>();
    const auto n = r.at(1).get<std::size_t>();
    if (out.size() + n > expected_size) break;
    out.insert(out.end(), n, v);
  }
  if (out.size() != expected_size) {
    throw Error(ErrorCode::ShapeMismatch, "run-length cells do not cover the grid exactly");
  }
  return out;
}

nlohmann::json layout_to_json(NodeId room_id, const LayoutGrid& layout, const std::vector<Placement>& placements) {
  auto pl = nlohmann::json::array();
  for (const auto& p : placements) {
    nlohmann::json e = {{"class", p.class_index}, {"cell", {p.cell.i, p.cell.j}}, {"xy", {p.x, p.y}}};
    if (p.insufficient_support) e["insufficient_support"] = true;
    pl.push_back(std::move(e));
  }
  return {{"room_id", room_id},
          {"S", layout.grid_size},
          {"threshold", layout.threshold},
          {"frame", {layout.frame.min_x, layout.frame.min_y, layout.frame.max_x, layout.frame.max_y}},
          {"cells", encode_cells(layout.cells)},
          {"placements", std::move(pl)}};
}

RoomLayout layout_from_json(const nlohmann::json& j) {
  try {
    RoomLayout r;
    r.room_id = j.at("room_id").get<NodeId>();
    r.grid.grid_size = j.at("S").get<std::size_t>();
    r.grid.threshold = j.at("threshold").get<double>();
    const auto f = j.at("frame").get<std::vector<double>>();
    if (f.size() != 4) throw Error(ErrorCode::ParseError, "layout frame must have 4 numbers");
    r.grid.frame = {f[0], f[1], f[2], f[3]};
    r.grid.cells = decode_cells(j.at("cells"), r.grid.grid_size * r.grid.grid_size);
    for (const auto& p : j.at("placements")) {
      Placement q;
      q.class_index = p.at("class").get<std::size_t>();
      q.cell = {p.at("cell").at(0).get<std::size_t>(), p.at("cell").at(1).get<std::size_t>()};
      q.x = p.at("xy").at(0).get<double>();
      q.y = p.at("xy").at(1).get<double>();
      q.insufficient_support = p.value("insufficient_support", false);
      r.placements.push_back(q);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layout: ") + e.what());
  }
}

std::vector<RoomLayout> layout_rooms(const HeatmapSet& prediction, const SceneGraph& belief,
                                     std::optional<double> threshold) {
  const double t = threshold.value_or(default_threshold(prediction.grid_size()));
  std::vector<RoomLayout> out;
  for (std::size_t r = 0; r < prediction.rooms(); ++r) {
    const NodeId room = prediction.room_ids()[r];
    std::map<std::size_t, int> counts;
    for (const auto& n : children_of(belief, room, Layer::blind)) ++counts[*n.class_index];
    std::vector<BlindRequest> requests;
    for (const auto& [c, k] : counts) requests.push_back({c, k});
    RoomLayout rl;
    rl.room_id = room;
    rl.grid = extract_layout(prediction, r, t);
    rl.placements = place_blind_nodes(prediction, r, requests);
    out.push_back(std::move(rl));
  }
  return out;
}

SceneGraph complete_graph(const SceneGraph& belief, const std::vector<RoomLayout>& layouts) {
  std::vector<SceneNode> nodes = belief.nodes();
  for (const auto& rl : layouts) {
    std::map<std::size_t, std::vector<const Placement*>> by_class;
    for (const auto& p : rl.placements) by_class[p.class_index].push_back(&p);
    std::map<std::size_t, std::size_t> used;
    for (const auto& n : children_of(belief, rl.room_id, Layer::blind)) {
      auto& list = by_class[*n.class_index];
      auto& k = used[*n.class_index];
      if (k >= list.size()) continue;
      const auto* p = list[k++];
      nodes[belief.node_index(n.id)].position = Vec3{p->x, p->y, 0.0};
    }
  }
  return SceneGraph::build(belief.catalog_ptr(), std::move(nodes), belief.edges(), belief.kind());
}

}  // namespace ceci
