#pragma once

#include "ceci/scene_graph.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ceci {

/// Bipartite "located-in" ontology between room concepts (rows) and object
/// classes (columns). Entries lie in [0, 1]; 0/1 is the canonical form.
struct Ontology {
  std::vector<std::string> room_concepts;
  std::vector<std::string> object_classes;
  Eigen::MatrixXd biadjacency;  // |rooms| x |classes|

  std::size_t rooms() const { return room_concepts.size(); }
  std::size_t classes() const { return object_classes.size(); }
};

/// Checks shape and range. Throws ShapeMismatch or OutOfRange.
void validate(const Ontology& o);

/// Reads the CSV form: header row "<corner>,class_1,...,class_n", then one
/// row per room concept. When `catalog` is given the header must list its
/// labels in order (CatalogMismatch otherwise).
Ontology load_ontology(const std::filesystem::path& path, const ClassCatalog* catalog = nullptr);
Ontology parse_ontology_csv(const std::string& text, const ClassCatalog* catalog = nullptr);
std::string ontology_to_csv(const Ontology& o);
void save_ontology(const Ontology& o, const std::filesystem::path& path);

/// Columns of `o` for `classes`, in that order. Throws CatalogMismatch when
/// a class is missing from the ontology.
Ontology select_classes(const Ontology& o, const std::vector<std::string>& classes);

/// Row-stochastic class-to-class affinity P = rownorm(Omega^T Omega + eps I).
struct ClassAffinity {
  Eigen::MatrixXd matrix;  // n x n
};

constexpr double kAffinityEpsilon = 1e-6;

/// Omega^T Omega: room-concept co-occurrence counts between classes.
Eigen::MatrixXd cooccurrence(const Ontology& o);
ClassAffinity class_affinity(const Ontology& o);

// ---------------------------------------------------------------- LLM

struct LlmEndpointConfig {
  std::string base_url = "http://localhost:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  double temperature = 0.0;
  /// Placeholders: {room} and {classes} (comma-separated catalog labels).
  std::string prompt_template =
      "You are building a spatial ontology for indoor robot navigation. "
      "From the following list of object classes, name every class that is commonly located in a {room}. "
      "Answer only with a JSON array of class names taken verbatim from the list.\n"
      "Classes: {classes}";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};
  std::string api_key;
};

LlmEndpointConfig load_endpoint_config(const std::filesystem::path& path);

/// Sends one prompt and returns the raw completion text. Throws
/// EndpointError.
using LlmTransport = std::function<std::string(const std::string& prompt)>;

/// OpenAI-style chat-completions transport over HTTP, with retries and
/// exponential backoff.
LlmTransport http_transport(const LlmEndpointConfig& config);

std::string render_prompt(const std::string& prompt_template, const std::string& room,
                          const std::vector<std::string>& classes);

struct ParsedResponse {
  std::vector<std::size_t> classes;    // indices into the class list, sorted, unique
  std::vector<std::string> unknown;    // names outside the closed-world class list
};

/// Accepts a JSON array of strings (optionally inside a fenced block) or a
/// comma / newline / bullet separated list. Matching ignores case and treats
/// spaces, hyphens and underscores alike. Throws ParseError when nothing
/// usable is found.
ParsedResponse parse_class_response(const std::string& response, const std::vector<std::string>& classes);

struct OntologyBuildReport {
  Ontology ontology;
  std::vector<std::string> warnings;
  std::vector<std::string> incomplete_rooms;  // rows whose response failed to parse
  std::size_t cache_hits = 0;
  std::size_t queries = 0;
};

/// One query per room concept; responses are cached under `cache_dir` as
/// <sha256(prompt)>.txt and reused without touching the transport.
OntologyBuildReport query_llm_ontology(const LlmEndpointConfig& config, const LlmTransport& transport,
                                       const std::vector<std::string>& room_concepts,
                                       const std::vector<std::string>& classes,
                                       const std::filesystem::path& cache_dir);

/// Room concepts of the shipped default ontology.
std::vector<std::string> default_room_concepts();

}  // namespace ceci
