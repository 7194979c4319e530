// Eigen (via ontology.hpp) must come before httplib: <resolv.h> defines a
// `_res` macro that clashes with Eigen parameter names.
#include "ceci/ontology.hpp"

#include "ceci/error.hpp"
#include "ceci/util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <thread>

#include <json.hpp>

namespace ceci {

using nlohmann::json;

LlmEndpointConfig load_endpoint_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + e.what());
  }
  LlmEndpointConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.temperature = j.value("temperature", c.temperature);
  c.prompt_template = j.value("prompt_template", c.prompt_template);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.initial_backoff.count()));
  c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
  if (j.contains("api_key_env")) {
    if (const char* key = std::getenv(j.at("api_key_env").get<std::string>().c_str())) c.api_key = key;
  }
  return c;
}

LlmTransport http_transport(const LlmEndpointConfig& config) {
  return [config](const std::string& prompt) -> std::string {
    const json body = {{"model", config.model},
                       {"temperature", config.temperature},
                       {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    httplib::Headers headers;
    if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

    std::string last_error;
    auto backoff = config.initial_backoff;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(config.base_url);
      client.set_connection_timeout(config.timeout);
      client.set_read_timeout(config.timeout);
      auto res = client.Post(config.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error(ErrorCode::EndpointError, "HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      try {
        return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::EndpointError, std::string("malformed completion payload: ") + e.what());
      }
    }
    throw Error(ErrorCode::EndpointError,
                "gave up after " + std::to_string(config.max_retries + 1) + " attempts: " + last_error);
  };
}

std::string render_prompt(const std::string& prompt_template, const std::string& room,
                          const std::vector<std::string>& classes) {
  std::string joined;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i) joined += ", ";
    joined += classes[i];
  }
  std::string out = prompt_template;
  auto replace_all = [&out](const std::string& key, const std::string& value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace_all("{room}", room);
  replace_all("{classes}", joined);
  return out;
}

namespace {

std::string normalize_name(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if ((ch == ' ' || ch == '-' || ch == '_') && !out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::vector<std::string> tokenize(const std::string& response) {
  // Prefer a JSON array anywhere in the text.
  const auto open = response.find('[');
  const auto close = response.rfind(']');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    try {
      auto arr = json::parse(response.substr(open, close - open + 1));
      if (arr.is_array()) {
        std::vector<std::string> out;
        for (const auto& v : arr) {
          if (v.is_string()) out.push_back(v.get<std::string>());
        }
        return out;
      }
    } catch (const json::exception&) {
    }
  }
  std::vector<std::string> out;
  std::string token;
  auto flush = [&] {
    auto t = token;
    token.clear();
    // Strip list markers such as "-", "*", "1." and surrounding quotes.
    std::size_t b = 0;
    while (b < t.size() && (std::isspace(static_cast<unsigned char>(t[b])) || std::isdigit(static_cast<unsigned char>(t[b])) ||
                            t[b] == '-' || t[b] == '*' || t[b] == '.' || t[b] == ')' || t[b] == '"' || t[b] == '\'' ||
                            t[b] == '`')) {
      ++b;
    }
    t = t.substr(b);
    if (!normalize_name(t).empty()) out.push_back(t);
  };
  for (char ch : response) {
    if (ch == ',' || ch == '\n' || ch == ';') {
      flush();
    } else {
      token.push_back(ch);
    }
  }
  flush();
  return out;
}

}  // namespace

ParsedResponse parse_class_response(const std::string& response, const std::vector<std::string>& classes) {
  const auto tokens = tokenize(response);
  if (tokens.empty()) {
    throw Error(ErrorCode::ParseError, "no class names found in response");
  }
  std::vector<std::string> normalized;
  for (const auto& c : classes) normalized.push_back(normalize_name(c));

  std::set<std::size_t> found;
  ParsedResponse parsed;
  for (const auto& t : tokens) {
    const auto name = normalize_name(t);
    auto it = std::find(normalized.begin(), normalized.end(), name);
    if (it == normalized.end() && name.size() > 1 && name.back() == 's') {
      it = std::find(normalized.begin(), normalized.end(), name.substr(0, name.size() - 1));
    }
    if (it == normalized.end()) {
      parsed.unknown.push_back(t);
    } else {
      found.insert(static_cast<std::size_t>(it - normalized.begin()));
    }
  }
  parsed.classes.assign(found.begin(), found.end());
  return parsed;
}

OntologyBuildReport query_llm_ontology(const LlmEndpointConfig& config, const LlmTransport& transport,
                                       const std::vector<std::string>& room_concepts,
                                       const std::vector<std::string>& classes,
                                       const std::filesystem::path& cache_dir) {
  OntologyBuildReport report;
  report.ontology.room_concepts = room_concepts;
  report.ontology.object_classes = classes;
  report.ontology.biadjacency =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(room_concepts.size()), static_cast<Eigen::Index>(classes.size()));

  for (std::size_t r = 0; r < room_concepts.size(); ++r) {
    const auto prompt = render_prompt(config.prompt_template, room_concepts[r], classes);
    const auto cache_file = cache_dir.empty() ? std::filesystem::path{} : cache_dir / (sha256_hex(prompt) + ".txt");
    std::string response;
    if (!cache_file.empty() && std::filesystem::exists(cache_file)) {
      response = read_file(cache_file);
      ++report.cache_hits;
    } else {
      response = transport(prompt);
      ++report.queries;
      if (!cache_file.empty()) write_file_atomic(cache_file, response);
    }

    try {
      const auto parsed = parse_class_response(response, classes);
      for (auto c : parsed.classes) {
        report.ontology.biadjacency(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
      }
      for (const auto& u : parsed.unknown) {
        report.warnings.push_back(room_concepts[r] + ": ignoring unknown class '" + u + "'");
      }
    } catch (const Error& e) {
      report.incomplete_rooms.push_back(room_concepts[r]);
      report.warnings.push_back(room_concepts[r] + ": " + e.what() + " (raw response: " + response + ")");
    }
  }
  return report;
}

}  // namespace ceci
