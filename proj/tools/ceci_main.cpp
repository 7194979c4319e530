#include "commands.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#include <iostream>

#include <CLI11.hpp>

namespace {

namespace fs = std::filesystem;
using namespace ceci;

// Flag values; unset ones leave the config file (or defaults) alone.
struct Flags {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<double> threshold;
  std::optional<fs::path> out;
  std::optional<fs::path> dataset;
  std::optional<fs::path> ontology;
  std::optional<fs::path> catalog;
  std::optional<fs::path> endpoint;
  std::optional<fs::path> category_map;
  std::vector<fs::path> checkpoints;
  std::optional<std::size_t> grid_size;
  std::optional<std::size_t> scenes;
  std::optional<unsigned> jobs;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> lr_decay;
  std::optional<std::size_t> patience;
  std::optional<std::size_t> hidden;
  std::optional<double> dropout;
  std::optional<std::size_t> log_every;
  std::optional<std::size_t> scale;
  bool save_optimizer = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--variant", f.variant, "Model variant")->check(CLI::IsMember({"base", "base-ont"}));
  cmd->add_option("--threshold", f.threshold, "Layout threshold (default 1/S^2)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--catalog", f.catalog, "Class catalog JSON (default: built-in 35 classes)");
  cmd->add_option("-S,--grid-size", f.grid_size, "Grid size; must match existing artifacts");
}

cli::RunConfig resolve(const Flags& f) {
  cli::RunConfig c = f.config ? cli::load_run_config(*f.config) : cli::RunConfig{};
  if (f.seed) c.seed = *f.seed;
  if (f.variant) c.model.variant = variant_from_string(*f.variant);
  if (f.threshold) c.threshold = *f.threshold;
  if (f.out) c.out = *f.out;
  if (f.dataset) c.dataset_dir = *f.dataset;
  if (f.ontology) c.ontology = *f.ontology;
  if (f.catalog) c.catalog = *f.catalog;
  if (f.endpoint) c.llm_endpoint = *f.endpoint;
  if (f.category_map) c.category_map = *f.category_map;
  if (!f.checkpoints.empty()) c.checkpoints = f.checkpoints;
  if (f.grid_size) c.grid_size = *f.grid_size;
  if (f.scenes) c.dataset.num_scenes = *f.scenes;
  if (f.jobs) c.dataset.jobs = *f.jobs;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.lr) c.train.lr = *f.lr;
  if (f.lr_decay) c.train.lr_decay = *f.lr_decay;
  if (f.patience) c.train.patience = *f.patience;
  if (f.hidden) c.model.hidden = *f.hidden;
  if (f.dropout) c.model.dropout = *f.dropout;
  if (f.log_every) c.log_every = *f.log_every;
  if (f.scale) c.render_scale = *f.scale;
  if (f.save_optimizer) c.save_optimizer = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commonsense scene composition on belief scene graphs"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);
  Flags f;
  fs::path input;
  std::vector<std::string> rooms;
  std::optional<fs::path> cache_dir;

  auto* gen = app.add_subcommand("generate", "Synthesize scenes and write a dataset directory");
  add_common(gen, f);
  gen->add_option("--scenes", f.scenes, "Number of scenes");
  gen->add_option("--jobs", f.jobs, "Worker threads");

  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  add_common(tr, f);
  tr->add_option("--dataset", f.dataset, "Dataset directory");
  tr->add_option("--ontology", f.ontology, "Ontology CSV (base-ont)");
  tr->add_option("--epochs", f.epochs);
  tr->add_option("--batch-size", f.batch_size);
  tr->add_option("--lr", f.lr);
  tr->add_option("--lr-decay", f.lr_decay);
  tr->add_option("--patience", f.patience, "Early-stopping patience in epochs (0 = off)");
  tr->add_option("--hidden", f.hidden);
  tr->add_option("--dropout", f.dropout);
  tr->add_option("--log-every", f.log_every);
  tr->add_flag("--save-optimizer", f.save_optimizer, "Store Adam moments in the checkpoint");

  auto* ev = app.add_subcommand("eval", "Write metrics reports for one or more checkpoints");
  add_common(ev, f);
  ev->add_option("--dataset", f.dataset, "Dataset directory");
  ev->add_option("--checkpoint", f.checkpoints, "Checkpoint file (repeatable)")->allow_extra_args(false);

  auto* pr = app.add_subcommand("predict", "Predict heatmaps for a sample or belief graph file");
  add_common(pr, f);
  pr->add_option("--checkpoint", f.checkpoints, "Checkpoint file")->allow_extra_args(false);
  pr->add_option("--category-map", f.category_map, "CSV mapping raw categories to catalog labels");
  pr->add_option("input", input, "Sample or belief graph JSON")->required();

  auto* la = app.add_subcommand("layout", "Extract layouts and place blind nodes from a prediction");
  add_common(la, f);
  la->add_option("input", input, "Prediction JSON")->required();

  auto* re = app.add_subcommand("render", "Render heatmaps (PGM) or layouts (PPM)");
  add_common(re, f);
  re->add_option("--scale", f.scale, "Layout pixels per cell");
  re->add_option("input", input, "Prediction, sample or layout JSON")->required();

  auto* on = app.add_subcommand("ontology", "Build or validate the spatial ontology");
  on->require_subcommand(1);
  auto* ob = on->add_subcommand("build", "Query an LLM endpoint for located-in relations");
  add_common(ob, f);
  ob->add_option("--endpoint", f.endpoint, "Endpoint config JSON");
  ob->add_option("--rooms", rooms, "Room concepts (default: built-in list)");
  ob->add_option("--cache-dir", cache_dir, "Response cache (default: $CECI_CACHE_DIR)");
  auto* ov = on->add_subcommand("validate", "Check an ontology CSV against the catalog");
  add_common(ov, f);
  ov->add_option("--ontology", f.ontology, "Ontology CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto c = resolve(f);
    if (gen->parsed()) return cli::cmd_generate(c);
    if (tr->parsed()) return cli::cmd_train(c);
    if (ev->parsed()) return cli::cmd_eval(c);
    if (pr->parsed()) return cli::cmd_predict(c, input);
    if (la->parsed()) return cli::cmd_layout(c, input);
    if (re->parsed()) return cli::cmd_render(c, input);
    if (ob->parsed()) return cli::cmd_ontology_build(c, rooms, cache_dir);
    if (ov->parsed()) return cli::cmd_ontology_validate(c);
  } catch (const Error& e) {
    std::cerr << "ceci: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ceci: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
