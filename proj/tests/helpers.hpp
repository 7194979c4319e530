#pragma once

#include "ceci/dataset.hpp"
#include "ceci/error.hpp"
#include "ceci/scene_graph.hpp"
#include "ceci/util.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

namespace testing {

using namespace ceci;

#define CHECK_CODE(expr, expected_code)                     \
  do {                                                      \
    bool thrown_ = false;                                   \
    try {                                                   \
      (void)(expr);                                         \
    } catch (const ::ceci::Error& e_) {                     \
      thrown_ = true;                                       \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what()); \
    }                                                       \
    CHECK_MESSAGE(thrown_, "no ceci::Error thrown");        \
  } while (0)

inline std::shared_ptr<const ClassCatalog> catalog_of(std::vector<std::string> labels) {
  return std::make_shared<const ClassCatalog>(std::move(labels));
}

inline std::shared_ptr<const ClassCatalog> toy_catalog() { return catalog_of({"chair", "table", "plant"}); }

inline SceneNode building(NodeId id) { return {id, Layer::building, std::nullopt, std::nullopt, {}}; }

inline SceneNode room(NodeId id, double cx = 0.0, double cy = 0.0, double w = 0.0, double h = 0.0) {
  SceneNode n{id, Layer::room, std::nullopt, std::nullopt, {}};
  if (w > 0.0) {
    n.position = Vec3{cx, cy, 0.0};
    n.dimensions = {w, h, 3.0};
  }
  return n;
}

inline SceneNode object(NodeId id, std::size_t cls, double x, double y, double dx = 0.5, double dy = 0.5) {
  return {id, Layer::object, cls, Vec3{x, y, 0.0}, {dx, dy, 0.5}};
}

inline SceneNode blind(NodeId id, std::size_t cls) { return {id, Layer::blind, cls, std::nullopt, {}}; }

/// Building 1; rooms 2 and 5 (4 m x 4 m, centered at (2,2) and (7,2));
/// objects 10..12 in room 2 and 13..14 in room 5.
inline SceneGraph toy_graph(std::shared_ptr<const ClassCatalog> cat = toy_catalog()) {
  std::vector<SceneNode> nodes = {building(1),
                                  room(2, 2.0, 2.0, 4.0, 4.0),
                                  room(5, 7.0, 2.0, 4.0, 4.0),
                                  object(10, 0, 0.5, 0.5),
                                  object(11, 1, 2.0, 2.0, 1.0, 1.0),
                                  object(12, 0, 3.5, 3.5),
                                  object(13, 2, 5.5, 0.5),
                                  object(14, 1, 7.0, 2.0, 1.0, 1.0)};
  std::vector<Edge> edges = {{1, 2}, {1, 5}, {2, 10}, {2, 11}, {2, 12}, {5, 13}, {5, 14}};
  return build_graph(std::move(cat), std::move(nodes), std::move(edges), GraphKind::ground_truth);
}

/// Random ground-truth scene: one building, `rooms` rooms, 1..max_objects
/// objects per room of random class.
inline SceneGraph random_graph(std::mt19937_64& rng, std::shared_ptr<const ClassCatalog> cat, std::size_t rooms,
                               std::size_t max_objects) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cls(0, cat->size() - 1);
  std::uniform_int_distribution<std::size_t> nobj(1, max_objects);
  std::vector<SceneNode> nodes = {building(1)};
  std::vector<Edge> edges;
  NodeId next = 2;
  for (std::size_t r = 0; r < rooms; ++r) {
    const double w = 2.0 + 4.0 * u(rng);
    const double h = 2.0 + 4.0 * u(rng);
    const double cx = 10.0 * static_cast<double>(r) + w / 2;
    const double cy = h / 2;
    const NodeId rid = next++;
    nodes.push_back(room(rid, cx, cy, w, h));
    edges.push_back({1, rid});
    const auto k = nobj(rng);
    for (std::size_t o = 0; o < k; ++o) {
      const double dx = 0.2 + 0.8 * u(rng);
      const double dy = 0.2 + 0.8 * u(rng);
      const double x = cx - w / 2 + dx / 2 + (w - dx) * u(rng);
      const double y = cy - h / 2 + dy / 2 + (h - dy) * u(rng);
      const NodeId oid = next++;
      nodes.push_back(object(oid, cls(rng), x, y, dx, dy));
      edges.push_back({rid, oid});
    }
  }
  return build_graph(std::move(cat), std::move(nodes), std::move(edges), GraphKind::ground_truth);
}

/// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("ceci_" + tag + "_" + std::to_string(rng() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path golden_dir() { return CECI_GOLDEN_DIR; }

/// Compares `actual` with the stored golden file. With CECI_UPDATE_GOLDEN
/// set, or when the file does not exist yet, the file is (re)written.
inline void check_golden(const std::string& name, const std::string& actual) {
  const auto path = golden_dir() / name;
  if (std::getenv("CECI_UPDATE_GOLDEN") || !std::filesystem::exists(path)) {
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, actual);
    MESSAGE("wrote golden file " << path.string());
    return;
  }
  const auto expected = read_file(path);
  CHECK_MESSAGE(expected == actual, "golden mismatch: " << name);
}

}  // namespace testing
