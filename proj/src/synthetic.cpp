#include "ceci/dataset.hpp"

#include "ceci/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ceci {

namespace {

struct RuleSpec {
  const char* cls;
  int min_count;
  int max_count;
  Anchor anchor;
  const char* anchor_cls;
  double offset_mean;
  double offset_stddev;
  Vec3 size;
  bool on_top;
};

struct TemplateSpec {
  const char* name;
  double min_width, max_width, min_depth, max_depth;
  std::vector<RuleSpec> rules;
};

// Sizes are (along wall, depth, height) in meters.
const std::vector<TemplateSpec>& builtin_templates() {
  static const std::vector<TemplateSpec> specs = {
      {"kitchen", 3.0, 5.5, 3.0, 5.0,
       {{"refrigerator", 1, 1, Anchor::corner, nullptr, 0, 0, {0.8, 0.7, 1.8}, false},
        {"stove", 1, 1, Anchor::wall_middle, nullptr, 0, 0, {0.7, 0.65, 0.9}, false},
        {"counter", 1, 2, Anchor::wall, nullptr, 0, 0, {1.5, 0.6, 0.9}, false},
        {"sink", 1, 1, Anchor::near_class, "counter", 0.0, 0.2, {0.6, 0.5, 0.3}, true},
        {"microwave", 0, 1, Anchor::near_class, "counter", 0.0, 0.3, {0.5, 0.4, 0.3}, true},
        {"cabinet", 1, 3, Anchor::wall, nullptr, 0, 0, {0.8, 0.4, 0.8}, false},
        {"table", 0, 1, Anchor::center, nullptr, 0, 0.3, {1.2, 0.8, 0.75}, false},
        {"chair", 0, 4, Anchor::near_class, "table", 0.7, 0.1, {0.45, 0.45, 0.9}, false},
        {"window", 0, 2, Anchor::wall, nullptr, 0, 0, {1.0, 0.1, 1.2}, false},
        {"trash_can", 0, 1, Anchor::corner, nullptr, 0, 0, {0.35, 0.35, 0.6}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.1, 2.0}, false}}},
      {"bedroom", 3.0, 5.5, 3.0, 5.0,
       {{"bed", 1, 1, Anchor::wall_middle, nullptr, 0, 0, {1.6, 2.0, 0.6}, false},
        {"nightstand", 1, 2, Anchor::near_class, "bed", 1.1, 0.15, {0.45, 0.4, 0.55}, false},
        {"lamp", 0, 2, Anchor::near_class, "nightstand", 0.0, 0.05, {0.25, 0.25, 0.4}, true},
        {"wardrobe", 0, 1, Anchor::wall, nullptr, 0, 0, {1.2, 0.6, 2.0}, false},
        {"dresser", 0, 1, Anchor::wall, nullptr, 0, 0, {1.0, 0.5, 0.9}, false},
        {"mirror", 0, 1, Anchor::near_class, "dresser", 0.0, 0.05, {0.6, 0.05, 0.8}, true},
        {"window", 1, 2, Anchor::wall, nullptr, 0, 0, {1.0, 0.1, 1.2}, false},
        {"curtain", 0, 2, Anchor::near_class, "window", 0.0, 0.1, {1.2, 0.1, 2.2}, false},
        {"plant", 0, 1, Anchor::near_class, "window", 0.6, 0.15, {0.4, 0.4, 0.8}, false},
        {"picture", 0, 2, Anchor::wall, nullptr, 0, 0, {0.6, 0.05, 0.5}, false},
        {"chair", 0, 1, Anchor::corner, nullptr, 0, 0, {0.5, 0.5, 0.9}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.1, 2.0}, false}}},
      {"bathroom", 2.0, 3.5, 2.0, 3.5,
       {{"toilet", 1, 1, Anchor::wall, nullptr, 0, 0, {0.4, 0.7, 0.8}, false},
        {"sink", 1, 1, Anchor::wall, nullptr, 0, 0, {0.6, 0.5, 0.9}, false},
        {"mirror", 0, 1, Anchor::near_class, "sink", 0.0, 0.05, {0.6, 0.05, 0.8}, true},
        {"bathtub", 0, 1, Anchor::wall, nullptr, 0, 0, {1.7, 0.75, 0.6}, false},
        {"shower", 0, 1, Anchor::corner, nullptr, 0, 0, {0.9, 0.9, 2.0}, false},
        {"towel", 0, 2, Anchor::wall, nullptr, 0, 0, {0.5, 0.1, 0.6}, false},
        {"cabinet", 0, 1, Anchor::wall, nullptr, 0, 0, {0.6, 0.3, 0.7}, false},
        {"trash_can", 0, 1, Anchor::near_class, "toilet", 0.6, 0.1, {0.3, 0.3, 0.4}, false},
        {"window", 0, 1, Anchor::wall, nullptr, 0, 0, {0.6, 0.1, 0.6}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.8, 0.1, 2.0}, false}}},
      {"living_room", 4.0, 7.0, 3.5, 6.0,
       {{"sofa", 1, 2, Anchor::wall, nullptr, 0, 0, {2.0, 0.9, 0.85}, false},
        {"coffee_table", 1, 1, Anchor::near_class, "sofa", 1.0, 0.15, {1.0, 0.6, 0.45}, false},
        {"tv", 1, 1, Anchor::wall_middle, nullptr, 0, 0, {1.2, 0.4, 0.7}, false},
        {"cushion", 0, 4, Anchor::near_class, "sofa", 0.4, 0.3, {0.4, 0.4, 0.15}, true},
        {"lamp", 0, 2, Anchor::corner, nullptr, 0, 0, {0.35, 0.35, 1.6}, false},
        {"window", 1, 3, Anchor::wall, nullptr, 0, 0, {1.2, 0.1, 1.4}, false},
        {"curtain", 0, 2, Anchor::near_class, "window", 0.0, 0.1, {1.4, 0.1, 2.2}, false},
        {"plant", 0, 2, Anchor::near_class, "window", 0.6, 0.15, {0.45, 0.45, 1.0}, false},
        {"bookcase", 0, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.35, 1.9}, false},
        {"fireplace", 0, 1, Anchor::wall_middle, nullptr, 0, 0, {1.4, 0.5, 1.1}, false},
        {"picture", 0, 3, Anchor::wall, nullptr, 0, 0, {0.7, 0.05, 0.5}, false},
        {"chair", 0, 2, Anchor::near_class, "coffee_table", 1.0, 0.15, {0.7, 0.7, 0.9}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.1, 2.0}, false}}},
      {"dining_room", 3.5, 6.0, 3.0, 5.0,
       {{"table", 1, 1, Anchor::center, nullptr, 0, 0.3, {1.8, 1.0, 0.75}, false},
        {"chair", 2, 6, Anchor::near_class, "table", 0.8, 0.1, {0.45, 0.45, 0.9}, false},
        {"cabinet", 0, 2, Anchor::wall, nullptr, 0, 0, {1.0, 0.45, 0.9}, false},
        {"lamp", 0, 1, Anchor::near_class, "table", 0.0, 0.1, {0.3, 0.3, 0.5}, true},
        {"window", 1, 2, Anchor::wall, nullptr, 0, 0, {1.2, 0.1, 1.4}, false},
        {"plant", 0, 1, Anchor::near_class, "window", 0.6, 0.15, {0.4, 0.4, 0.9}, false},
        {"picture", 0, 2, Anchor::wall, nullptr, 0, 0, {0.7, 0.05, 0.5}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.1, 2.0}, false}}},
      {"office", 3.0, 5.0, 3.0, 5.0,
       {{"desk", 1, 2, Anchor::wall, nullptr, 0, 0, {1.4, 0.7, 0.75}, false},
        {"chair", 1, 2, Anchor::near_class, "desk", 0.6, 0.1, {0.55, 0.55, 1.0}, false},
        {"computer", 1, 2, Anchor::near_class, "desk", 0.0, 0.15, {0.5, 0.3, 0.45}, true},
        {"lamp", 0, 1, Anchor::near_class, "desk", 0.4, 0.1, {0.2, 0.2, 0.45}, true},
        {"bookcase", 0, 2, Anchor::wall, nullptr, 0, 0, {0.9, 0.35, 1.9}, false},
        {"shelf", 0, 2, Anchor::wall, nullptr, 0, 0, {1.0, 0.3, 1.0}, false},
        {"window", 0, 2, Anchor::wall, nullptr, 0, 0, {1.0, 0.1, 1.2}, false},
        {"plant", 0, 1, Anchor::near_class, "window", 0.6, 0.15, {0.4, 0.4, 0.8}, false},
        {"trash_can", 0, 1, Anchor::near_class, "desk", 0.6, 0.1, {0.3, 0.3, 0.4}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.9, 0.1, 2.0}, false}}},
      {"laundry_room", 2.0, 3.5, 2.0, 3.5,
       {{"washing_machine", 1, 2, Anchor::wall, nullptr, 0, 0, {0.6, 0.6, 0.85}, false},
        {"sink", 0, 1, Anchor::wall, nullptr, 0, 0, {0.6, 0.5, 0.9}, false},
        {"cabinet", 0, 2, Anchor::wall, nullptr, 0, 0, {0.8, 0.4, 0.8}, false},
        {"shelf", 0, 1, Anchor::wall, nullptr, 0, 0, {1.0, 0.3, 1.0}, false},
        {"towel", 0, 2, Anchor::near_class, "washing_machine", 0.0, 0.1, {0.4, 0.3, 0.1}, true},
        {"trash_can", 0, 1, Anchor::corner, nullptr, 0, 0, {0.35, 0.35, 0.6}, false},
        {"door", 1, 1, Anchor::wall, nullptr, 0, 0, {0.8, 0.1, 2.0}, false}}},
  };
  return specs;
}

constexpr double kWallGap = 0.02;
constexpr double kRoomHeight = 2.7;
constexpr double kRoomSpacing = 0.2;
constexpr int kMaxRetries = 25;

struct Placed {
  std::size_t cls;
  Vec3 center;
  Vec3 dims;
};

}  // namespace

void validate_template(const SceneTemplate& t, const ClassCatalog& catalog) {
  for (const auto& r : t.rules) {
    if (r.class_index >= catalog.size() || (r.anchor == Anchor::near_class && r.anchor_class >= catalog.size())) {
      throw Error(ErrorCode::UnknownClass, "template '" + t.name + "' references a class outside the catalog");
    }
    if (r.min_count < 0 || r.max_count < r.min_count) {
      throw Error(ErrorCode::InvalidArgument, "template '" + t.name + "' has a bad count range");
    }
  }
}

std::vector<SceneTemplate> default_templates(const ClassCatalog& catalog) {
  std::vector<SceneTemplate> out;
  for (const auto& spec : builtin_templates()) {
    SceneTemplate t{spec.name, spec.min_width, spec.max_width, spec.min_depth, spec.max_depth, {}};
    for (const auto& r : spec.rules) {
      auto cls = catalog.index_of(r.cls);
      if (!cls) continue;
      PlacementRule rule{*cls, r.min_count, r.max_count, r.anchor, 0, r.offset_mean, r.offset_stddev, r.size,
                         r.on_top};
      if (r.anchor == Anchor::near_class) {
        auto anchor = catalog.index_of(r.anchor_cls);
        const bool anchor_kept = anchor && std::any_of(t.rules.begin(), t.rules.end(), [&](const auto& kept) {
                                   return kept.class_index == *anchor;
                                 });
        if (!anchor_kept) continue;
        rule.anchor_class = *anchor;
      }
      t.rules.push_back(rule);
    }
    if (!t.rules.empty()) out.push_back(std::move(t));
  }
  return out;
}

GeneratedScene generate_synthetic_scene(const std::vector<SceneTemplate>& templates,
                                        std::shared_ptr<const ClassCatalog> catalog, std::size_t n_rooms,
                                        std::uint64_t seed) {
  if (templates.empty()) {
    throw Error(ErrorCode::InvalidArgument, "at least one scene template is required");
  }
  for (const auto& t : templates) validate_template(t, *catalog);

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto normal = [&](double mean, double sd) {
    return sd > 0.0 ? std::normal_distribution<double>(mean, sd)(rng) : mean;
  };

  GeneratedScene scene{SceneGraph::build(catalog, {SceneNode{0, Layer::building, {}, Vec3{}, {}}}, {},
                                         GraphKind::ground_truth),
                       0,
                       {}};
  std::vector<SceneNode> nodes;
  std::vector<Edge> edges;
  NodeId next_id = static_cast<NodeId>(n_rooms) + 1;
  double origin_x = 0.0;
  double max_depth = 0.0;

  for (std::size_t r = 0; r < n_rooms; ++r) {
    const auto& t = templates[static_cast<std::size_t>(uniform_int(0, static_cast<int>(templates.size()) - 1))];
    scene.room_templates.push_back(t.name);
    const double W = uniform(t.min_width, t.max_width);
    const double D = uniform(t.min_depth, t.max_depth);
    const NodeId room_id = static_cast<NodeId>(r) + 1;
    nodes.push_back({room_id, Layer::room, {}, Vec3{origin_x + W / 2, D / 2, kRoomHeight / 2}, {W, D, kRoomHeight}});
    edges.push_back({0, room_id});
    max_depth = std::max(max_depth, D);

    std::vector<Placed> placed;
    for (const auto& rule : t.rules) {
      const int count = uniform_int(rule.min_count, rule.max_count);
      for (int k = 0; k < count; ++k) {
        std::vector<const Placed*> anchors;
        if (rule.anchor == Anchor::near_class) {
          for (const auto& p : placed) {
            if (p.cls == rule.anchor_class) anchors.push_back(&p);
          }
          if (anchors.empty()) {
            ++scene.skipped_objects;
            continue;
          }
        }
        bool ok = false;
        for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
          const double along = rule.size.x * uniform(0.9, 1.1);
          const double depth = rule.size.y * uniform(0.9, 1.1);
          const double height = rule.size.z * uniform(0.9, 1.1);
          Vec3 c{0, 0, height / 2};
          Vec3 dims{along, depth, height};
          switch (rule.anchor) {
            case Anchor::wall:
            case Anchor::wall_middle: {
              const int wall = uniform_int(0, 3);
              const bool horizontal = wall % 2 == 0;  // south / north walls run along x
              const double L = horizontal ? W : D;
              double lo = along / 2, hi = L - along / 2;
              if (rule.anchor == Anchor::wall_middle) {
                lo = std::max(lo, 0.3 * L);
                hi = std::min(hi, 0.7 * L);
              }
              if (hi < lo) continue;
              const double t_along = uniform(lo, hi);
              const double off = kWallGap + depth / 2;
              if (horizontal) {
                dims = {along, depth, height};
                c.x = t_along;
                c.y = wall == 0 ? off : D - off;
              } else {
                dims = {depth, along, height};
                c.y = t_along;
                c.x = wall == 3 ? off : W - off;
              }
              break;
            }
            case Anchor::corner: {
              const int corner = uniform_int(0, 3);
              c.x = (corner & 1) ? W - kWallGap - along / 2 : kWallGap + along / 2;
              c.y = (corner & 2) ? D - kWallGap - depth / 2 : kWallGap + depth / 2;
              break;
            }
            case Anchor::center: {
              if (uniform(0.0, 1.0) < 0.5) std::swap(dims.x, dims.y);
              c.x = W / 2 + normal(0.0, rule.offset_stddev);
              c.y = D / 2 + normal(0.0, rule.offset_stddev);
              break;
            }
            case Anchor::near_class: {
              const Placed& a = *anchors[static_cast<std::size_t>(uniform_int(0, static_cast<int>(anchors.size()) - 1))];
              const double dist = std::max(0.0, normal(rule.offset_mean, rule.offset_stddev));
              const double theta = uniform(0.0, 2.0 * std::numbers::pi);
              c.x = a.center.x + dist * std::cos(theta);
              c.y = a.center.y + dist * std::sin(theta);
              if (rule.on_top) c.z = a.center.z + a.dims.z / 2 + height / 2;
              break;
            }
          }
          if (c.x - dims.x / 2 < 0.0 || c.x + dims.x / 2 > W || c.y - dims.y / 2 < 0.0 || c.y + dims.y / 2 > D) {
            continue;
          }
          placed.push_back({rule.class_index, c, dims});
          ok = true;
        }
        if (!ok) ++scene.skipped_objects;
      }
    }

    for (const auto& p : placed) {
      const NodeId id = next_id++;
      nodes.push_back({id, Layer::object, p.cls, Vec3{origin_x + p.center.x, p.center.y, p.center.z}, p.dims});
      edges.push_back({room_id, id});
    }
    origin_x += W + kRoomSpacing;
  }

  const double total_width = std::max(0.0, origin_x - kRoomSpacing);
  nodes.insert(nodes.begin(), SceneNode{0, Layer::building, {}, Vec3{total_width / 2, max_depth / 2, kRoomHeight / 2},
                                        {total_width, max_depth, kRoomHeight}});
  scene.graph = SceneGraph::build(std::move(catalog), std::move(nodes), std::move(edges), GraphKind::ground_truth);
  return scene;
}

}  // namespace ceci
