#include "ceci/error.hpp"
#include "ceci/model.hpp"
#include "ceci/util.hpp"

#include <charconv>
#include <map>

namespace ceci {

namespace {

constexpr int kCheckpointVersion = 1;

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

// {"name": ..., "rows": r, "cols": c, "data": [...]}; "name" precedes "data"
// so the loader can route the numbers without building a DOM for them.
void append_block(std::string& out, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                  const double* data) {
  out += "{\"name\":\"" + name + "\",\"rows\":" + std::to_string(rows) + ",\"cols\":" + std::to_string(cols) +
         ",\"data\":[";
  const Eigen::Index n = rows * cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) out += ',';
    append_number(out, data[i]);
  }
  out += "]}";
}

template <typename M>
void append_matrix(std::string& out, const std::string& name, const M& m) {
  append_block(out, name, m.rows(), m.cols(), m.data());
}

struct BlockData {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<double> data;
};

}  // namespace

void save_checkpoint(const CeciModel& model, const std::filesystem::path& path,
                     const std::optional<TrainConfig>& train_config, const nn::AdamState* optimizer) {
  nlohmann::json header = {
      {"format", "ceci-checkpoint"},
      {"version", kCheckpointVersion},
      {"tool_version", std::string(tool_version())},
      {"catalog", model.catalog().labels()},
      {"catalog_hash", model.catalog().hash()},
      {"S", model.config().grid_size},
      {"seed", model.seed()},
      {"variant", std::string(to_string(model.config().variant))},
      {"config", config_to_json(model.config())},
      {"train_config", train_config ? train_config_to_json(*train_config) : nlohmann::json(nullptr)},
  };
  std::string out = header.dump(1);
  out.pop_back();  // closing brace; the parameter arrays follow
  while (!out.empty() && out.back() == '\n') out.pop_back();

  out += ",\n \"affinity\": ";
  if (model.affinity()) {
    // Stored row-major.
    const nn::Matrix p = model.affinity()->matrix;
    append_matrix(out, "affinity", p);
  } else {
    out += "null";
  }

  out += ",\n \"parameters\": [";
  const auto& layers = model.network().layers();
  bool first = true;
  auto sep = [&] {
    out += first ? "\n  " : ",\n  ";
    first = false;
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto prefix = "layer" + std::to_string(l) + ".";
    const auto& p = layers[l];
    sep();
    append_matrix(out, prefix + "weight", p.weight);
    sep();
    append_matrix(out, prefix + "bias", p.bias);
    if (p.has_norm()) {
      sep();
      append_matrix(out, prefix + "gamma", p.gamma);
      sep();
      append_matrix(out, prefix + "beta", p.beta);
      sep();
      append_matrix(out, prefix + "running_mean", p.running_mean);
      sep();
      append_matrix(out, prefix + "running_var", p.running_var);
    }
  }
  out += "\n ]";

  if (optimizer) {
    out += ",\n \"optimizer\": {\"step\": " + std::to_string(optimizer->step) + ", \"moments\": [";
    for (std::size_t b = 0; b < optimizer->first_moment.size(); ++b) {
      out += b ? ",\n  " : "\n  ";
      append_matrix(out, "m" + std::to_string(b), optimizer->first_moment[b]);
      out += ",\n  ";
      append_matrix(out, "v" + std::to_string(b), optimizer->second_moment[b]);
    }
    out += "\n ]}";
  }
  out += "\n}\n";
  write_file_atomic(path, out);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_file(path);

  // Numbers inside "data" arrays go straight into `blocks`, keyed by the
  // block name, and are dropped from the DOM.
  std::map<std::string, BlockData> blocks;
  std::string last_key;
  std::string current_name;
  bool expect_data = false;
  bool capturing = false;
  std::vector<double>* sink = nullptr;
  using nlohmann::json;
  json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::key:
        last_key = parsed.get<std::string>();
        expect_data = last_key == "data";
        return true;
      case json::parse_event_t::array_start:
        if (expect_data) {
          capturing = true;
          sink = &blocks[current_name].data;
          expect_data = false;
        }
        return true;
      case json::parse_event_t::array_end:
        capturing = false;
        return true;
      case json::parse_event_t::value:
        if (capturing) {
          sink->push_back(parsed.get<double>());
          return false;
        }
        if (last_key == "name" && parsed.is_string()) current_name = parsed.get<std::string>();
        return true;
      default:
        return true;
    }
  };

  json j;
  try {
    j = json::parse(text, cb);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }

  try {
    if (j.value("format", "") != "ceci-checkpoint") {
      throw Error(ErrorCode::ParseError, path.string() + " is not a checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::ParseError, "unsupported checkpoint version " + j.at("version").dump());
    }
    auto catalog = std::make_shared<const ClassCatalog>(j.at("catalog").get<std::vector<std::string>>());
    CheckpointInfo info;
    info.tool_version = j.at("tool_version").get<std::string>();
    info.catalog_hash = j.at("catalog_hash").get<std::string>();
    info.grid_size = j.at("S").get<std::size_t>();
    info.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("train_config").is_null()) info.train_config = train_config_from_json(j.at("train_config"));
    if (catalog->hash() != info.catalog_hash) {
      throw Error(ErrorCode::ConfigMismatch, "checkpoint catalog hash does not match its labels");
    }
    const CeciConfig config = config_from_json(j.at("config"));
    if (config.grid_size != info.grid_size) {
      throw Error(ErrorCode::ConfigMismatch, "checkpoint S disagrees with its model config");
    }

    auto fill_block = [&](const std::string& name, const json& meta) {
      auto it = blocks.find(name);
      if (it == blocks.end()) throw Error(ErrorCode::ParseError, "checkpoint block " + name + " has no data");
      it->second.rows = meta.at("rows").get<Eigen::Index>();
      it->second.cols = meta.at("cols").get<Eigen::Index>();
      if (static_cast<std::size_t>(it->second.rows * it->second.cols) != it->second.data.size()) {
        throw Error(ErrorCode::ParseError, "checkpoint block " + name + " has the wrong number of values");
      }
      return &it->second;
    };

    std::optional<ClassAffinity> affinity;
    if (!j.at("affinity").is_null()) {
      const auto* b = fill_block("affinity", j.at("affinity"));
      ClassAffinity a;
      a.matrix = Eigen::Map<const nn::Matrix>(b->data.data(), b->rows, b->cols);
      affinity = std::move(a);
    }

    CeciModel model(config, catalog, affinity, info.seed);
    std::map<std::string, const BlockData*> params;
    for (const auto& meta : j.at("parameters")) {
      const auto name = meta.at("name").get<std::string>();
      params[name] = fill_block(name, meta);
    }
    auto assign = [&](const std::string& name, auto& target) {
      auto it = params.find(name);
      if (it == params.end()) throw Error(ErrorCode::ParseError, "checkpoint lacks parameter " + name);
      const auto* b = it->second;
      if (b->rows != target.rows() || b->cols != target.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter " + name + " has shape " +
                                                  std::to_string(b->rows) + "x" + std::to_string(b->cols));
      }
      std::copy(b->data.begin(), b->data.end(), target.data());
    };
    auto& layers = model.network().layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto prefix = "layer" + std::to_string(l) + ".";
      auto& p = layers[l];
      assign(prefix + "weight", p.weight);
      assign(prefix + "bias", p.bias);
      if (p.has_norm()) {
        assign(prefix + "gamma", p.gamma);
        assign(prefix + "beta", p.beta);
        assign(prefix + "running_mean", p.running_mean);
        assign(prefix + "running_var", p.running_var);
      }
    }

    std::optional<nn::AdamState> optimizer;
    if (j.contains("optimizer")) {
      nn::AdamState st;
      st.step = j.at("optimizer").at("step").get<std::int64_t>();
      const auto& moments = j.at("optimizer").at("moments");
      for (std::size_t k = 0; k + 1 < moments.size(); k += 2) {
        const auto* m = fill_block(moments[k].at("name").get<std::string>(), moments[k]);
        const auto* v = fill_block(moments[k + 1].at("name").get<std::string>(), moments[k + 1]);
        st.first_moment.push_back(Eigen::Map<const Eigen::VectorXd>(m->data.data(), m->rows));
        st.second_moment.push_back(Eigen::Map<const Eigen::VectorXd>(v->data.data(), v->rows));
      }
      optimizer = std::move(st);
    }
    return {std::move(model), std::move(info), std::move(optimizer)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace ceci
