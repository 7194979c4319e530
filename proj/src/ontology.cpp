#include "ceci/ontology.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ceci {

namespace {

std::string strip(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(strip(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void validate(const Ontology& o) {
  if (static_cast<std::size_t>(o.biadjacency.rows()) != o.rooms() ||
      static_cast<std::size_t>(o.biadjacency.cols()) != o.classes()) {
    throw Error(ErrorCode::ShapeMismatch, "biadjacency must be |rooms| x |classes|");
  }
  for (Eigen::Index i = 0; i < o.biadjacency.rows(); ++i) {
    for (Eigen::Index j = 0; j < o.biadjacency.cols(); ++j) {
      const double v = o.biadjacency(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "entry (" + o.room_concepts[static_cast<std::size_t>(i)] + ", " +
                                               o.object_classes[static_cast<std::size_t>(j)] +
                                               ") = " + std::to_string(v) + " is outside [0, 1]");
      }
    }
  }
}

Ontology parse_ontology_csv(const std::string& text, const ClassCatalog* catalog) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::ParseError, "ontology csv is empty");
  }

  Ontology o;
  o.object_classes.assign(rows[0].begin() + 1, rows[0].end());
  if (catalog && o.object_classes != catalog->labels()) {
    throw Error(ErrorCode::CatalogMismatch, "ontology header does not list the active catalog in order");
  }
  const std::size_t n = o.object_classes.size();
  o.biadjacency.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(n));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != n + 1) {
      throw Error(ErrorCode::ShapeMismatch, "ontology row " + std::to_string(r) + " has " +
                                                std::to_string(cells.size()) + " cells, expected " +
                                                std::to_string(n + 1));
    }
    o.room_concepts.push_back(cells[0]);
    for (std::size_t c = 0; c < n; ++c) {
      const auto& s = cells[c + 1];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::NonNumericCell, "cell (" + cells[0] + ", " + o.object_classes[c] + ") = '" + s + "'");
      }
      o.biadjacency(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = v;
    }
  }
  validate(o);
  return o;
}

Ontology load_ontology(const std::filesystem::path& path, const ClassCatalog* catalog) {
  return parse_ontology_csv(read_file(path), catalog);
}

std::string ontology_to_csv(const Ontology& o) {
  validate(o);
  std::string out = "room";
  for (const auto& c : o.object_classes) out += "," + c;
  out += "\n";
  char buf[64];
  for (std::size_t r = 0; r < o.rooms(); ++r) {
    out += o.room_concepts[r];
    for (std::size_t c = 0; c < o.classes(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf,
                                     o.biadjacency(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      out += ',';
      out.append(buf, ptr);
    }
    out += "\n";
  }
  return out;
}

void save_ontology(const Ontology& o, const std::filesystem::path& path) {
  write_file_atomic(path, ontology_to_csv(o));
}

Ontology select_classes(const Ontology& o, const std::vector<std::string>& classes) {
  Ontology out;
  out.room_concepts = o.room_concepts;
  out.object_classes = classes;
  out.biadjacency.resize(static_cast<Eigen::Index>(o.rooms()), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto it = std::find(o.object_classes.begin(), o.object_classes.end(), classes[c]);
    if (it == o.object_classes.end()) {
      throw Error(ErrorCode::CatalogMismatch, "ontology has no column for class '" + classes[c] + "'");
    }
    out.biadjacency.col(static_cast<Eigen::Index>(c)) =
        o.biadjacency.col(static_cast<Eigen::Index>(it - o.object_classes.begin()));
  }
  return out;
}

Eigen::MatrixXd cooccurrence(const Ontology& o) {
  validate(o);
  return o.biadjacency.transpose() * o.biadjacency;
}

ClassAffinity class_affinity(const Ontology& o) {
  Eigen::MatrixXd k = cooccurrence(o);
  k.diagonal().array() += kAffinityEpsilon;
  const Eigen::VectorXd row_sums = k.rowwise().sum();
  return {k.array().colwise() / row_sums.array()};
}

std::vector<std::string> default_room_concepts() {
  return {"bedroom",      "bathroom", "kitchen",  "living_room", "dining_room", "office",
          "laundry_room", "hallway",  "entryway", "closet",      "lounge",      "classroom"};
}

}  // namespace ceci
