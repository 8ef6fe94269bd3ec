#pragma once

// Toolkit configuration: one JSON document carrying every threshold, weight,
// template, and endpoint setting. Loading is strict about required keys so
// that results always travel with their full provenance; the `endpoint`
// section is optional and defaults apply.

#include <fstream>
#include <string>
#include <vector>

#include "drivelang/loss.hpp"
#include "drivelang/pipeline.hpp"
#include "drivelang/types.hpp"
#include "json.hpp"

namespace drivelang {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalParams {
  std::vector<double> pr_ks{0.5, 1.0, 2.0, 4.0};
  double map_dist_thresh{0.5};
  double f1_iou_thresh_3d{0.25};
  double vg2d_f1_iou_thresh{0.5};
};

struct LangParams {
  std::size_t bleu_max_n{4};
  double bleu_smoothing_epsilon{0.0};
  double rouge_beta{1.2};
  double cider_sigma{6.0};
  bool lowercase{true};
  bool strip_punctuation{true};
};

struct EndpointParams {
  std::string url;
  std::string model{"caption-model"};
  int max_in_flight{4};
  int max_attempts{3};
  int backoff_ms{250};
  int timeout_s{30};
  std::string api_key_env{"DRIVELANG_API_KEY"};
};

struct ToolkitConfig {
  PipelineConfig pipeline;  // also carries categories and image dimensions
  EvalParams eval;
  LangParams lang;
  LossWeights loss;
  EndpointParams endpoint;

  void validate() const {
    pipeline.validate();
    loss.validate();
    if (eval.pr_ks.empty()) throw ConfigError("eval.pr_ks must be nonempty");
    if (!(eval.map_dist_thresh > 0.0)) {
      throw ConfigError("eval.map_dist_thresh must be positive");
    }
    if (!(eval.f1_iou_thresh_3d > 0.0 && eval.f1_iou_thresh_3d < 1.0)) {
      throw ConfigError("eval.f1_iou_thresh_3d must lie in (0, 1)");
    }
    if (!(eval.vg2d_f1_iou_thresh > 0.0 && eval.vg2d_f1_iou_thresh < 1.0)) {
      throw ConfigError("eval.vg2d_f1_iou_thresh must lie in (0, 1)");
    }
    if (lang.bleu_max_n == 0) throw ConfigError("lang.bleu_max_n must be >= 1");
  }
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj,
                                         const std::string& key,
                                         const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing config key '" + (path.empty() ? key : path + "." + key) +
                      "'");
  }
  return *it;
}

inline double require_number(const nlohmann::json& obj, const std::string& key,
                             const std::string& path) {
  const auto& v = require_key(obj, key, path);
  if (!v.is_number()) {
    throw ConfigError("config key '" + path + "." + key + "' must be a number");
  }
  return v.get<double>();
}

inline std::string require_string(const nlohmann::json& obj, const std::string& key,
                                  const std::string& path) {
  const auto& v = require_key(obj, key, path);
  if (!v.is_string()) {
    throw ConfigError("config key '" + path + "." + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace detail

inline ToolkitConfig config_from_json(const nlohmann::json& j) {
  ToolkitConfig c;

  const auto& cats = detail::require_key(j, "categories", "");
  if (!cats.is_array() || cats.empty()) {
    throw ConfigError("config key 'categories' must be a nonempty array");
  }
  std::vector<std::string> names;
  for (const auto& n : cats) names.push_back(n.get<std::string>());
  c.pipeline.categories = CategorySet(names);
  c.pipeline.image_width = detail::require_number(j, "image_width", "");
  c.pipeline.image_height = detail::require_number(j, "image_height", "");

  const auto& p = detail::require_key(j, "pipeline", "");
  c.pipeline.dedup_iou_thresh =
      detail::require_number(p, "dedup_iou_thresh", "pipeline");
  c.pipeline.itm_thresh = detail::require_number(p, "itm_thresh", "pipeline");
  c.pipeline.seed =
      static_cast<std::uint64_t>(detail::require_number(p, "seed", "pipeline"));
  const auto& tpls = detail::require_key(p, "templates", "pipeline");
  if (!tpls.is_object()) {
    throw ConfigError("config key 'pipeline.templates' must be an object");
  }
  c.pipeline.templates.clear();
  for (TaskKind t : kAllTasks) {
    const std::string key(to_string(t));
    const auto& arr = detail::require_key(tpls, key, "pipeline.templates");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("config key 'pipeline.templates." + key +
                        "' must be a nonempty array");
    }
    std::vector<std::string> list;
    for (const auto& s : arr) list.push_back(s.get<std::string>());
    c.pipeline.templates[t] = std::move(list);
  }

  const auto& e = detail::require_key(j, "eval", "");
  const auto& ks = detail::require_key(e, "pr_ks", "eval");
  if (!ks.is_array() || ks.empty()) {
    throw ConfigError("config key 'eval.pr_ks' must be a nonempty array");
  }
  c.eval.pr_ks.clear();
  for (const auto& k : ks) c.eval.pr_ks.push_back(k.get<double>());
  c.eval.map_dist_thresh = detail::require_number(e, "map_dist_thresh", "eval");
  c.eval.f1_iou_thresh_3d = detail::require_number(e, "f1_iou_thresh_3d", "eval");
  c.eval.vg2d_f1_iou_thresh =
      detail::require_number(e, "vg2d_f1_iou_thresh", "eval");

  const auto& lang = detail::require_key(j, "lang", "");
  c.lang.bleu_max_n =
      static_cast<std::size_t>(detail::require_number(lang, "bleu_max_n", "lang"));
  c.lang.bleu_smoothing_epsilon =
      detail::require_number(lang, "bleu_smoothing_epsilon", "lang");
  c.lang.rouge_beta = detail::require_number(lang, "rouge_beta", "lang");
  c.lang.cider_sigma = detail::require_number(lang, "cider_sigma", "lang");
  c.lang.lowercase = detail::require_key(lang, "lowercase", "lang").get<bool>();
  c.lang.strip_punctuation =
      detail::require_key(lang, "strip_punctuation", "lang").get<bool>();

  const auto& loss = detail::require_key(j, "loss", "");
  c.loss.lambda = detail::require_number(loss, "lambda", "loss");
  c.loss.gamma = detail::require_number(loss, "gamma", "loss");
  c.loss.focal_alpha = detail::require_number(loss, "focal_alpha", "loss");
  c.loss.focal_gamma = detail::require_number(loss, "focal_gamma", "loss");

  if (auto it = j.find("endpoint"); it != j.end() && !it->is_null()) {
    const auto& ep = *it;
    if (ep.contains("url")) c.endpoint.url = ep["url"].get<std::string>();
    if (ep.contains("model")) c.endpoint.model = ep["model"].get<std::string>();
    if (ep.contains("max_in_flight")) {
      c.endpoint.max_in_flight = ep["max_in_flight"].get<int>();
    }
    if (ep.contains("max_attempts")) {
      c.endpoint.max_attempts = ep["max_attempts"].get<int>();
    }
    if (ep.contains("backoff_ms")) c.endpoint.backoff_ms = ep["backoff_ms"].get<int>();
    if (ep.contains("timeout_s")) c.endpoint.timeout_s = ep["timeout_s"].get<int>();
    if (ep.contains("api_key_env")) {
      c.endpoint.api_key_env = ep["api_key_env"].get<std::string>();
    }
  }

  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline nlohmann::ordered_json config_to_json(const ToolkitConfig& c) {
  nlohmann::ordered_json j;
  j["categories"] = c.pipeline.categories.names();
  j["image_width"] = c.pipeline.image_width;
  j["image_height"] = c.pipeline.image_height;
  nlohmann::ordered_json p;
  p["dedup_iou_thresh"] = c.pipeline.dedup_iou_thresh;
  p["itm_thresh"] = c.pipeline.itm_thresh;
  p["seed"] = c.pipeline.seed;
  nlohmann::ordered_json tpls;
  for (TaskKind t : kAllTasks) {
    tpls[std::string(to_string(t))] = c.pipeline.templates.at(t);
  }
  p["templates"] = tpls;
  j["pipeline"] = p;
  j["eval"] = {{"pr_ks", c.eval.pr_ks},
               {"map_dist_thresh", c.eval.map_dist_thresh},
               {"f1_iou_thresh_3d", c.eval.f1_iou_thresh_3d},
               {"vg2d_f1_iou_thresh", c.eval.vg2d_f1_iou_thresh}};
  j["lang"] = {{"bleu_max_n", c.lang.bleu_max_n},
               {"bleu_smoothing_epsilon", c.lang.bleu_smoothing_epsilon},
               {"rouge_beta", c.lang.rouge_beta},
               {"cider_sigma", c.lang.cider_sigma},
               {"lowercase", c.lang.lowercase},
               {"strip_punctuation", c.lang.strip_punctuation}};
  j["loss"] = {{"lambda", c.loss.lambda},
               {"gamma", c.loss.gamma},
               {"focal_alpha", c.loss.focal_alpha},
               {"focal_gamma", c.loss.focal_gamma}};
  j["endpoint"] = {{"url", c.endpoint.url},
                   {"model", c.endpoint.model},
                   {"max_in_flight", c.endpoint.max_in_flight},
                   {"max_attempts", c.endpoint.max_attempts},
                   {"backoff_ms", c.endpoint.backoff_ms},
                   {"timeout_s", c.endpoint.timeout_s},
                   {"api_key_env", c.endpoint.api_key_env}};
  return j;
}

inline ToolkitConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline void save_config(const ToolkitConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace drivelang
