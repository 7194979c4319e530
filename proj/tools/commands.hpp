#pragma once

#include "ceci/dataset.hpp"
#include "ceci/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ceci::cli {

/// Settings shared by every subcommand. Loaded from a JSON file; relative
/// paths resolve against the file's directory. Command-line flags override
/// file values.
struct RunConfig {
  std::optional<std::filesystem::path> dataset_dir;
  std::optional<std::filesystem::path> ontology;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> category_map;
  std::optional<std::filesystem::path> llm_endpoint;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  std::optional<std::size_t> grid_size;
  DatasetConfig dataset;
  CeciConfig model;
  TrainConfig train;
  std::optional<double> threshold;
  std::size_t log_every = 100;
  bool save_optimizer = false;
  std::size_t render_scale = 8;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Top-level {"S", "catalog_hash", "seed", "tool_version"} carried by every
/// artifact.
nlohmann::json stamp(std::size_t grid_size, const std::string& catalog_hash, std::uint64_t seed);
/// Throws ConfigMismatch if the top-level S or catalog hash of `j` differ.
void check_stamp(const nlohmann::json& j, std::size_t grid_size, const std::string& catalog_hash,
                 const std::string& what);

int cmd_generate(const RunConfig& c);
int cmd_train(const RunConfig& c);
int cmd_eval(const RunConfig& c);
int cmd_predict(const RunConfig& c, const std::filesystem::path& input);
int cmd_layout(const RunConfig& c, const std::filesystem::path& prediction);
int cmd_render(const RunConfig& c, const std::filesystem::path& input);
int cmd_ontology_build(const RunConfig& c, const std::vector<std::string>& rooms,
                       const std::optional<std::filesystem::path>& cache_dir);
int cmd_ontology_validate(const RunConfig& c);

}  // namespace ceci::cli
