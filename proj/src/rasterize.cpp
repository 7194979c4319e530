#include "ceci/dataset.hpp"

#include "ceci/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ceci {

HeatmapSet::HeatmapSet(std::vector<NodeId> room_ids, std::vector<RoomFrame> frames, std::size_t classes,
                       std::size_t grid_size)
    : room_ids_(std::move(room_ids)), frames_(std::move(frames)), classes_(classes), grid_size_(grid_size) {
  if (frames_.size() != room_ids_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one frame per room required");
  }
  if (grid_size_ == 0 || classes_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid size and class count must be positive");
  }
  data_.assign(room_ids_.size() * classes_ * grid_size_ * grid_size_, 0.0);
}

std::size_t HeatmapSet::room_index(NodeId room) const {
  auto it = std::find(room_ids_.begin(), room_ids_.end(), room);
  if (it == room_ids_.end()) {
    throw Error(ErrorCode::UnknownRoom, "room " + std::to_string(room) + " not in heatmap set");
  }
  return static_cast<std::size_t>(it - room_ids_.begin());
}

double& HeatmapSet::at(std::size_t room, std::size_t cls, std::size_t i, std::size_t j) {
  return data_.at(((room * classes_ + cls) * grid_size_ + i) * grid_size_ + j);
}

double HeatmapSet::at(std::size_t room, std::size_t cls, std::size_t i, std::size_t j) const {
  return data_.at(((room * classes_ + cls) * grid_size_ + i) * grid_size_ + j);
}

std::span<double> HeatmapSet::grid(std::size_t room, std::size_t cls) {
  return {data_.data() + (room * classes_ + cls) * cells(), cells()};
}

std::span<const double> HeatmapSet::grid(std::size_t room, std::size_t cls) const {
  return {data_.data() + (room * classes_ + cls) * cells(), cells()};
}

std::span<double> HeatmapSet::room_block(std::size_t room) {
  return {data_.data() + room * classes_ * cells(), classes_ * cells()};
}

std::span<const double> HeatmapSet::room_block(std::size_t room) const {
  return {data_.data() + room * classes_ * cells(), classes_ * cells()};
}

void HeatmapSet::normalize() {
  for (std::size_t r = 0; r < rooms(); ++r) {
    for (std::size_t c = 0; c < classes_; ++c) {
      auto g = grid(r, c);
      const double total = std::accumulate(g.begin(), g.end(), 0.0);
      if (total > 0.0) {
        for (auto& v : g) v /= total;
      }
    }
  }
}

std::vector<RoomFrame> compute_room_frames(const SceneGraph& g) {
  std::vector<RoomFrame> frames;
  for (const auto& room : rooms_of(g)) {
    RoomFrame f;
    if (room.position && room.dimensions.x > 0.0 && room.dimensions.y > 0.0) {
      f = {room.position->x - room.dimensions.x / 2, room.position->y - room.dimensions.y / 2,
           room.position->x + room.dimensions.x / 2, room.position->y + room.dimensions.y / 2};
    } else {
      constexpr double inf = std::numeric_limits<double>::infinity();
      f = {inf, inf, -inf, -inf};
      for (const auto& obj : children_of(g, room.id, Layer::object)) {
        f.min_x = std::min(f.min_x, obj.position->x - obj.dimensions.x / 2);
        f.min_y = std::min(f.min_y, obj.position->y - obj.dimensions.y / 2);
        f.max_x = std::max(f.max_x, obj.position->x + obj.dimensions.x / 2);
        f.max_y = std::max(f.max_y, obj.position->y + obj.dimensions.y / 2);
      }
    }
    if (!(f.width() > 0.0 && f.height() > 0.0) || !std::isfinite(f.width()) || !std::isfinite(f.height())) {
      throw Error(ErrorCode::DegenerateRoom, "room " + std::to_string(room.id) + " has a zero-area frame");
    }
    frames.push_back(f);
  }
  return frames;
}

std::vector<std::pair<std::size_t, double>> footprint_cells(const SceneNode& object, const RoomFrame& frame,
                                                            std::size_t grid_size, RasterMode mode) {
  const std::size_t S = grid_size;
  const double area = object.dimensions.x * object.dimensions.y;
  const double x0 = object.position->x - object.dimensions.x / 2;
  const double x1 = object.position->x + object.dimensions.x / 2;
  const double y0 = object.position->y - object.dimensions.y / 2;
  const double y1 = object.position->y + object.dimensions.y / 2;
  const double cx0 = std::max(x0, frame.min_x), cx1 = std::min(x1, frame.max_x);
  const double cy0 = std::max(y0, frame.min_y), cy1 = std::min(y1, frame.max_y);

  std::vector<std::pair<std::size_t, double>> out;
  if (!(cx1 > cx0 && cy1 > cy0)) {
    const double share = area / static_cast<double>(S * S);
    out.reserve(S * S);
    for (std::size_t k = 0; k < S * S; ++k) out.emplace_back(k, share);
    return out;
  }

  const double cw = frame.width() / static_cast<double>(S);
  const double ch = frame.height() / static_cast<double>(S);
  auto clamp_cell = [S](double v) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(S - 1)));
  };

  if (mode == RasterMode::center_cell) {
    const double cx = std::clamp(object.position->x, frame.min_x, frame.max_x);
    const double cy = std::clamp(object.position->y, frame.min_y, frame.max_y);
    const std::size_t j = clamp_cell(std::floor((cx - frame.min_x) / cw));
    const std::size_t i = clamp_cell(std::floor((cy - frame.min_y) / ch));
    out.emplace_back(i * S + j, area);
    return out;
  }

  // Footprint edges in cell units relative to the frame origin.
  const double lx0 = (cx0 - frame.min_x) / cw, lx1 = (cx1 - frame.min_x) / cw;
  const double ly0 = (cy0 - frame.min_y) / ch, ly1 = (cy1 - frame.min_y) / ch;
  const std::size_t j0 = clamp_cell(std::floor(lx0)), j1 = clamp_cell(std::ceil(lx1) - 1.0);
  const std::size_t i0 = clamp_cell(std::floor(ly0)), i1 = clamp_cell(std::ceil(ly1) - 1.0);
  for (std::size_t i = i0; i <= i1; ++i) {
    const double oy = std::min(ly1, static_cast<double>(i + 1)) - std::max(ly0, static_cast<double>(i));
    if (oy <= 0.0) continue;
    for (std::size_t j = j0; j <= j1; ++j) {
      const double ox = std::min(lx1, static_cast<double>(j + 1)) - std::max(lx0, static_cast<double>(j));
      if (ox <= 0.0) continue;
      out.emplace_back(i * S + j, ox * cw * oy * ch);
    }
  }
  return out;
}

RasterResult rasterize_raw(const SceneGraph& g, std::size_t grid_size, RasterMode mode,
                           const std::vector<RoomFrame>* frames) {
  if (grid_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid size must be positive");
  }
  const auto rooms = rooms_of(g);
  std::vector<RoomFrame> own;
  if (!frames) {
    own = compute_room_frames(g);
    frames = &own;
  } else if (frames->size() != rooms.size()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(rooms.size()) + " room frames");
  }
  std::vector<NodeId> ids;
  for (const auto& r : rooms) ids.push_back(r.id);

  const std::size_t C = g.catalog().size();
  RasterResult result{HeatmapSet(ids, *frames, C, grid_size), ObjectCounts(rooms.size(), C)};
  for (std::size_t r = 0; r < rooms.size(); ++r) {
    for (const auto& child : children_of(g, rooms[r].id)) {
      const std::size_t cls = *child.class_index;
      ++result.counts.at(r, cls);
      if (child.layer != Layer::object) continue;
      auto grid = result.heatmaps.grid(r, cls);
      for (const auto& [cell, mass] : footprint_cells(child, (*frames)[r], grid_size, mode)) {
        grid[cell] += mass;
      }
    }
  }
  return result;
}

RasterResult rasterize(const SceneGraph& g, std::size_t grid_size, RasterMode mode,
                       const std::vector<RoomFrame>* frames) {
  auto result = rasterize_raw(g, grid_size, mode, frames);
  result.heatmaps.normalize();
  return result;
}

}  // namespace ceci
