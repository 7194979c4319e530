#include "ceci/render.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <algorithm>
#include <cmath>

namespace ceci {

namespace {

constexpr std::array<Rgb, 35> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},   {245, 130, 48},
    {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212},
    {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
    {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
    {255, 255, 255}, {100, 149, 237}, {255, 99, 71},   {46, 139, 87},   {218, 165, 32},
    {147, 112, 219}, {64, 224, 208},  {199, 21, 133},  {154, 205, 50},  {205, 133, 63},
    {72, 61, 139},   {176, 196, 222}, {139, 69, 19},   {255, 160, 122}, {47, 79, 79},
}};

}  // namespace

std::string render_pgm(std::span<const double> grid, std::size_t grid_size) {
  if (grid.size() != grid_size * grid_size) {
    throw Error(ErrorCode::ShapeMismatch, "grid does not have S x S entries");
  }
  double mx = 0.0;
  for (double v : grid) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "heatmap has a non-finite value");
    mx = std::max(mx, v);
  }
  std::string out = "P5\n" + std::to_string(grid_size) + " " + std::to_string(grid_size) + "\n255\n";
  for (double v : grid) {
    const double scaled = mx > 0.0 ? std::round(255.0 * std::max(v, 0.0) / mx) : 0.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(scaled)));
  }
  return out;
}

Rgb class_color(int class_index) {
  if (class_index < 0) return {0, 0, 0};
  return kPalette[static_cast<std::size_t>(class_index) % kPalette.size()];
}

std::string render_ppm(const LayoutGrid& layout, std::size_t scale) {
  if (scale == 0) throw Error(ErrorCode::InvalidArgument, "render scale must be positive");
  const std::size_t s = layout.grid_size;
  if (layout.cells.size() != s * s) throw Error(ErrorCode::ShapeMismatch, "layout does not have S x S cells");
  const std::size_t side = s * scale;
  std::string out = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  out.reserve(out.size() + side * side * 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const auto c = class_color(layout.at(y / scale, x / scale));
      for (auto ch : c) out.push_back(static_cast<char>(ch));
    }
  }
  return out;
}

std::vector<std::filesystem::path> render_heatmaps(const HeatmapSet& h, const ClassCatalog& catalog,
                                                   const std::filesystem::path& out_dir) {
  if (catalog.size() != h.classes()) throw Error(ErrorCode::CatalogMismatch, "catalog size differs from heatmaps");
  std::vector<std::filesystem::path> written;
  for (std::size_t r = 0; r < h.rooms(); ++r) {
    for (std::size_t c = 0; c < h.classes(); ++c) {
      const auto grid = h.grid(r, c);
      if (std::all_of(grid.begin(), grid.end(), [](double v) { return v == 0.0; })) continue;
      auto path = out_dir / ("room" + std::to_string(h.room_ids()[r]) + "_" + catalog.labels()[c] + ".pgm");
      write_file_atomic(path, render_pgm(grid, h.grid_size()));
      written.push_back(std::move(path));
    }
  }
  return written;
}

std::vector<std::filesystem::path> render_layouts(const std::vector<RoomLayout>& layouts,
                                                  const std::filesystem::path& out_dir, std::size_t scale) {
  std::vector<std::filesystem::path> written;
  for (const auto& l : layouts) {
    auto path = out_dir / ("room" + std::to_string(l.room_id) + "_layout.ppm");
    write_file_atomic(path, render_ppm(l.grid, scale));
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace ceci
