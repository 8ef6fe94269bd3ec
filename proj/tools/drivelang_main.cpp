// drivelang: dataset construction and evaluation for language-based driving
// tasks. Subcommands: build, eval, stats, loss-check, prompts, ingest,
// init-config. Exit codes: 0 success, 1 runtime failure, 2 usage or config
// error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "drivelang/config.hpp"
#include "drivelang/endpoint.hpp"
#include "drivelang/eval.hpp"
#include "drivelang/hash.hpp"
#include "drivelang/loss.hpp"
#include "drivelang/pipeline.hpp"
#include "drivelang/records.hpp"
#include "drivelang/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

// Attaches the source path to line-level parse failures: "file:line: what".
template <typename Fn>
auto parse_with_context(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const drivelang::ParseError& e) {
    throw std::runtime_error(path + ":" + std::to_string(e.line()) + ": " +
                             e.message());
  }
}

struct BuildArgs {
  std::string frames_path;
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;  // <0: use the config seed
  bool offline_prompts = false;
};

int run_build_cmd(const BuildArgs& args) {
  drivelang::ToolkitConfig config = drivelang::load_config(args.config_path);
  if (args.seed >= 0) {
    config.pipeline.seed = static_cast<std::uint64_t>(args.seed);
  }
  const std::string frames_text = read_file(args.frames_path);
  const std::vector<drivelang::Frame> frames = parse_with_context(
      args.frames_path, [&] {
        return drivelang::parse_frames_string(frames_text,
                                              config.pipeline.categories);
      });

  const drivelang::BuildResult result =
      drivelang::run_build(frames, config.pipeline);

  fs::create_directories(args.out_dir);
  write_file((fs::path(args.out_dir) / "samples.jsonl").string(),
             drivelang::serialize_samples(result.samples));

  std::string prompts_text;
  for (const drivelang::CaptionPrompt& p : result.prompts) {
    drivelang::detail::LineWriter w;
    w.field_str("frame_id", p.frame_id);
    w.field_str("prompt", p.prompt);
    prompts_text += w.finish();
    prompts_text += '\n';
  }
  write_file((fs::path(args.out_dir) / "caption_prompts.jsonl").string(),
             prompts_text);
  if (args.offline_prompts) {
    drivelang::write_prompt_files(result.prompts,
                                  (fs::path(args.out_dir) / "prompts").string());
  }

  ordered_json manifest;
  manifest["config"] = drivelang::config_to_json(config);
  manifest["seed"] = config.pipeline.seed;
  manifest["inputs"] = {
      {"frames", args.frames_path},
      {"frames_fnv1a64", drivelang::to_hex(drivelang::fnv1a(frames_text))}};
  manifest["counts"] = {{"frames", result.stats.frames},
                        {"records_in", result.stats.records_in},
                        {"records_out", result.stats.records_out},
                        {"samples", result.samples.size()}};
  ordered_json per_task;
  for (drivelang::TaskKind t : drivelang::kAllTasks) {
    auto it = result.stats.samples_per_task.find(t);
    per_task[std::string(drivelang::to_string(t))] =
        it == result.stats.samples_per_task.end() ? 0 : it->second;
  }
  manifest["samples_per_task"] = per_task;
  manifest["drops"] = {{"dedup", result.stats.dedup_dropped},
                       {"itm", result.stats.itm_dropped}};
  write_file((fs::path(args.out_dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  std::cout << "build: " << result.stats.frames << " frames -> "
            << result.samples.size() << " samples ("
            << result.stats.dedup_dropped << " dedup drops, "
            << result.stats.itm_dropped << " itm drops)\n";
  return kExitOk;
}

int run_eval_cmd(const std::string& pred_path, const std::string& gt_path,
                 const std::string& config_path, const std::string& report_path) {
  const drivelang::ToolkitConfig config = drivelang::load_config(config_path);
  const std::vector<drivelang::TaskSample> samples = parse_with_context(
      gt_path, [&] { return drivelang::parse_samples_string(read_file(gt_path)); });
  const std::vector<drivelang::Prediction> predictions = parse_with_context(
      pred_path,
      [&] { return drivelang::parse_predictions_string(read_file(pred_path)); });
  const drivelang::EvalReport report =
      drivelang::evaluate(samples, predictions, config);
  write_file(report_path, drivelang::serialize_report(report, config));
  std::cout << "eval: " << report.n_samples << " samples, "
            << report.n_predictions << " predictions, "
            << report.n_missing_predictions << " missing\n";
  return kExitOk;
}

struct StatsArgs {
  std::string samples_path;
  std::string captions_path;
  std::string out_path;
  std::string csv_dir;
  std::size_t top_n = 50;
};

int run_stats_cmd(const StatsArgs& args) {
  ordered_json out;
  if (!args.csv_dir.empty()) fs::create_directories(args.csv_dir);

  if (!args.captions_path.empty()) {
    std::istringstream in(read_file(args.captions_path));
    std::vector<std::string> captions;
    const auto responses = parse_with_context(
        args.captions_path, [&] { return drivelang::parse_caption_responses(in); });
    for (const drivelang::CaptionResponse& r : responses) {
      if (r.error.empty()) captions.push_back(r.text);
    }
    const auto freq = drivelang::word_frequency(captions, args.top_n);
    ordered_json arr = ordered_json::array();
    std::string csv = "token,count\n";
    for (const auto& [token, count] : freq) {
      arr.push_back({token, count});
      csv += token + "," + std::to_string(count) + "\n";
    }
    out["word_frequency"] = arr;
    out["caption_count"] = captions.size();
    if (!args.csv_dir.empty()) {
      write_file((fs::path(args.csv_dir) / "word_frequency.csv").string(), csv);
    }
  }

  if (!args.samples_path.empty()) {
    const std::vector<drivelang::TaskSample> samples = parse_with_context(
        args.samples_path,
        [&] { return drivelang::parse_samples_string(read_file(args.samples_path)); });
    const auto tasks = drivelang::task_distribution(samples);
    ordered_json tj;
    std::string task_csv = "label,fraction\n";
    for (drivelang::TaskKind t : drivelang::kAllTasks) {
      auto it = tasks.find(t);
      if (it == tasks.end()) continue;
      const std::string name(drivelang::to_string(t));
      tj[name] = it->second;
      task_csv += name + "," + drivelang::format_float(it->second) + "\n";
    }
    out["task_distribution"] = tj;

    const drivelang::ViewDistribution views = drivelang::view_distribution(samples);
    ordered_json vj;
    std::string view_csv = "label,fraction\n";
    for (drivelang::View v : drivelang::kViewOrder) {
      auto it = views.fractions.find(v);
      if (it == views.fractions.end()) continue;
      const std::string name(drivelang::to_string(v));
      vj[name] = it->second;
      view_csv += name + "," + drivelang::format_float(it->second) + "\n";
    }
    out["view_distribution"] = vj;
    out["surround_samples"] = views.surround_count;
    out["view_samples"] = views.view_count;
    out["sample_count"] = samples.size();
    if (!args.csv_dir.empty()) {
      write_file((fs::path(args.csv_dir) / "task_distribution.csv").string(),
                 task_csv);
      write_file((fs::path(args.csv_dir) / "view_distribution.csv").string(),
                 view_csv);
    }
  }

  const std::string text = out.dump(2) + "\n";
  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << text;
  } else {
    write_file(args.out_path, text);
  }
  return kExitOk;
}

int run_loss_check_cmd(const std::string& instances_path) {
  std::istringstream in(read_file(instances_path));
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw drivelang::ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    std::vector<drivelang::ClassProbs> probs;
    for (const auto& row : j.at("probs")) {
      probs.push_back(row.get<std::vector<double>>());
    }
    std::vector<drivelang::BoxEncoding> boxes;
    for (const auto& row : j.at("boxes")) {
      drivelang::BoxEncoding e;
      const auto vals = row.get<std::vector<double>>();
      if (vals.size() != 8) {
        throw drivelang::ParseError(line_no, "box encodings must have 8 components");
      }
      std::copy(vals.begin(), vals.end(), e.v.begin());
      e.validate();
      boxes.push_back(e);
    }
    std::vector<drivelang::GtBox> gt;
    for (const auto& g : j.at("gt")) {
      drivelang::GtBox box;
      box.category = g.at("category").get<std::size_t>();
      const auto vals = g.at("box").get<std::vector<double>>();
      if (vals.size() != 8) {
        throw drivelang::ParseError(line_no, "gt box encodings must have 8 components");
      }
      std::copy(vals.begin(), vals.end(), box.box.v.begin());
      box.box.validate();
      gt.push_back(box);
    }
    drivelang::LossWeights weights;
    if (auto it = j.find("weights"); it != j.end()) {
      weights.lambda = it->value("lambda", weights.lambda);
      weights.gamma = it->value("gamma", weights.gamma);
      weights.focal_alpha = it->value("focal_alpha", weights.focal_alpha);
      weights.focal_gamma = it->value("focal_gamma", weights.focal_gamma);
    }

    const drivelang::LossResult r =
        drivelang::total_loss(probs, boxes, gt, weights);
    const double err = drivelang::gradient_check_max_rel_err(
        probs, boxes, gt, weights, r.matching);
    std::cout << "instance " << index << ": value=" << drivelang::format_float(r.value)
              << " cls=" << drivelang::format_float(r.cls_term)
              << " reg=" << drivelang::format_float(r.reg_term)
              << " grad_max_rel_err=" << std::scientific << err << std::defaultfloat
              << " matching=[";
    for (std::size_t i = 0; i < r.matching.pairs.size(); ++i) {
      if (i) std::cout << ",";
      std::cout << "(" << r.matching.pairs[i].first << ","
                << r.matching.pairs[i].second << ")";
    }
    std::cout << "]\n";
    ++index;
  }
  return kExitOk;
}

struct PromptsArgs {
  std::string prompts_path;
  std::string endpoint_url;
  std::string config_path;
  std::string out_path;
  bool offline = false;
};

int run_prompts_cmd(const PromptsArgs& args) {
  std::vector<drivelang::CaptionPrompt> prompts;
  {
    std::istringstream in(read_file(args.prompts_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw drivelang::ParseError(line_no,
                                    std::string("malformed JSON: ") + e.what());
      }
      drivelang::CaptionPrompt p;
      p.frame_id = j.at("frame_id").get<std::string>();
      p.prompt = j.at("prompt").get<std::string>();
      prompts.push_back(std::move(p));
    }
  }

  if (args.offline) {
    const auto paths = drivelang::write_prompt_files(
        prompts, args.out_path.empty() ? "prompts" : args.out_path);
    std::cout << "prompts: wrote " << paths.size() << " prompt files\n";
    return kExitOk;
  }

  drivelang::EndpointParams params;
  if (!args.config_path.empty()) {
    params = drivelang::load_config(args.config_path).endpoint;
  }
  if (!args.endpoint_url.empty()) params.url = args.endpoint_url;
  if (params.url.empty()) {
    throw drivelang::ConfigError("missing config key 'endpoint.url' (or --endpoint)");
  }

  const std::vector<drivelang::CaptionResponse> responses =
      drivelang::dispatch_prompts(prompts, params);
  std::string text;
  std::size_t failed = 0;
  for (const drivelang::CaptionResponse& r : responses) {
    if (!r.error.empty()) ++failed;
    text += drivelang::serialize_caption_response(r);
    text += '\n';
  }
  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << text;
  } else {
    write_file(args.out_path, text);
  }
  std::cout << "prompts: " << responses.size() - failed << " ok, " << failed
            << " failed\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

int run_ingest_cmd(const std::string& frames_path, const std::string& responses_path,
                   const std::string& out_path, const std::string& config_path) {
  drivelang::CategorySet categories;
  if (!config_path.empty()) {
    categories = drivelang::load_config(config_path).pipeline.categories;
  }
  std::vector<drivelang::Frame> frames = parse_with_context(frames_path, [&] {
    return drivelang::parse_frames_string(read_file(frames_path), categories);
  });
  std::istringstream in(read_file(responses_path));
  const std::vector<drivelang::CaptionResponse> responses = parse_with_context(
      responses_path, [&] { return drivelang::parse_caption_responses(in); });
  const drivelang::IngestReport report =
      drivelang::ingest_captions(frames, responses);
  write_file(out_path, drivelang::serialize_frames(frames));
  std::cout << "ingest: " << report.updated << " captions set, "
            << report.unknown_ids.size() << " unknown ids, "
            << report.failed_ids.size() << " failed responses\n";
  for (const std::string& id : report.unknown_ids) {
    std::cout << "  skipped unknown frame_id '" << id << "'\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataset construction and evaluation for language-based driving tasks"};
  app.require_subcommand(1);

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand("build", "run the dataset pipeline");
  build->add_option("--frames", build_args.frames_path, "frame records (jsonl)")
      ->required();
  build->add_option("--config", build_args.config_path, "toolkit config (json)")
      ->required();
  build->add_option("--out", build_args.out_dir, "output directory")->required();
  build->add_option("--seed", build_args.seed, "override the config seed");
  build->add_flag("--offline-prompts", build_args.offline_prompts,
                  "also write one caption prompt file per frame");

  std::string pred_path, gt_path, eval_config, report_path;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against samples");
  eval_cmd->add_option("--pred", pred_path, "prediction records (jsonl)")->required();
  eval_cmd->add_option("--gt", gt_path, "task samples (jsonl)")->required();
  eval_cmd->add_option("--config", eval_config, "toolkit config (json)")->required();
  eval_cmd->add_option("--report", report_path, "output report path")->required();

  StatsArgs stats_args;
  CLI::App* stats_cmd = app.add_subcommand("stats", "dataset statistics");
  stats_cmd->add_option("--samples", stats_args.samples_path, "task samples (jsonl)");
  stats_cmd->add_option("--captions", stats_args.captions_path,
                        "caption responses (jsonl)");
  stats_cmd->add_option("--out", stats_args.out_path, "report path ('-' for stdout)");
  stats_cmd->add_option("--top-n", stats_args.top_n, "word frequency cutoff");
  stats_cmd->add_option("--csv-dir", stats_args.csv_dir,
                        "directory for plot-ready csv files");

  std::string instances_path;
  CLI::App* loss_cmd = app.add_subcommand("loss-check", "loss reference and gradient check");
  loss_cmd->add_option("--instances", instances_path, "instance records (jsonl)")
      ->required();

  PromptsArgs prompts_args;
  CLI::App* prompts_cmd = app.add_subcommand("prompts", "send caption prompts to an endpoint");
  prompts_cmd->add_option("--prompts", prompts_args.prompts_path,
                          "caption prompts (jsonl)")
      ->required();
  prompts_cmd->add_option("--endpoint", prompts_args.endpoint_url,
                          "chat-completion endpoint url");
  prompts_cmd->add_option("--config", prompts_args.config_path,
                          "toolkit config carrying endpoint settings");
  prompts_cmd->add_option("--out", prompts_args.out_path,
                          "responses path (or directory in offline mode)");
  prompts_cmd->add_flag("--offline", prompts_args.offline,
                        "write prompt files instead of calling the endpoint");

  std::string ingest_frames, ingest_responses, ingest_out, ingest_config;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "attach caption responses to frames");
  ingest_cmd->add_option("--frames", ingest_frames, "frame records (jsonl)")->required();
  ingest_cmd->add_option("--responses", ingest_responses, "caption responses (jsonl)")
      ->required();
  ingest_cmd->add_option("--out", ingest_out, "updated frames output path")->required();
  ingest_cmd->add_option("--config", ingest_config, "toolkit config (json)");

  std::string init_out;
  CLI::App* init_cmd = app.add_subcommand("init-config", "write the default config");
  init_cmd->add_option("--out", init_out, "config output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (build->parsed()) return run_build_cmd(build_args);
    if (eval_cmd->parsed()) {
      return run_eval_cmd(pred_path, gt_path, eval_config, report_path);
    }
    if (stats_cmd->parsed()) {
      if (stats_args.samples_path.empty() && stats_args.captions_path.empty()) {
        std::cerr << "stats: at least one of --samples/--captions is required\n";
        return kExitUsage;
      }
      return run_stats_cmd(stats_args);
    }
    if (loss_cmd->parsed()) return run_loss_check_cmd(instances_path);
    if (prompts_cmd->parsed()) return run_prompts_cmd(prompts_args);
    if (ingest_cmd->parsed()) {
      return run_ingest_cmd(ingest_frames, ingest_responses, ingest_out, ingest_config);
    }
    if (init_cmd->parsed()) {
      drivelang::save_config(drivelang::ToolkitConfig{}, init_out);
      std::cout << "wrote " << init_out << "\n";
      return kExitOk;
    }
  } catch (const drivelang::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
