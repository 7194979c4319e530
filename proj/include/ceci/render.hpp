#pragma once

#include "ceci/dataset.hpp"
#include "ceci/layout.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ceci {

/// Binary PGM (P5, maxval 255); pixel = round(255 * v / max(grid)). An
/// all-zero grid renders black. Row i of the grid is image row i.
std::string render_pgm(std::span<const double> grid, std::size_t grid_size);

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed color for class `index` (cycled beyond the table); empty is black.
Rgb class_color(int class_index);

/// Binary PPM (P6) of a layout, each cell drawn as a `scale` x `scale` block.
std::string render_ppm(const LayoutGrid& layout, std::size_t scale = 1);

/// Writes room<id>_<label>.pgm for every (room, class) grid with positive
/// mass. Returns the written paths.
std::vector<std::filesystem::path> render_heatmaps(const HeatmapSet& h, const ClassCatalog& catalog,
                                                   const std::filesystem::path& out_dir);

/// Writes room<id>_layout.ppm per layout.
std::vector<std::filesystem::path> render_layouts(const std::vector<RoomLayout>& layouts,
                                                  const std::filesystem::path& out_dir, std::size_t scale = 1);

}  // namespace ceci
