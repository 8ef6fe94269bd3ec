#pragma once

// Batch client for a chat-completion-style HTTP endpoint, used to send
// dense-caption prompts out for generation. Offline mode writes one prompt
// file per frame instead of performing network activity.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "drivelang/config.hpp"
#include "drivelang/pipeline.hpp"
#include "drivelang/records.hpp"
#include "httplib.h"
#include "json.hpp"

namespace drivelang {

namespace detail {

struct ParsedUrl {
  std::string host_port;  // scheme://host:port
  std::string path;
};

inline ParsedUrl parse_endpoint_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ValidationError("endpoint url must start with http://");
  }
  const std::size_t path_start = url.find('/', scheme + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.host_port = url;
    out.path = "/";
  } else {
    out.host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

inline CaptionResponse request_caption(const ParsedUrl& url,
                                       const EndpointParams& params,
                                       const std::string& api_key,
                                       const CaptionPrompt& prompt) {
  CaptionResponse response;
  response.frame_id = prompt.frame_id;
  const nlohmann::json payload = {
      {"model", params.model},
      {"messages", {{{"role", "user"}, {"content", prompt.prompt}}}}};
  const std::string body = payload.dump();

  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt < std::max(1, params.max_attempts); ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(
          static_cast<long>(params.backoff_ms) * (1L << (attempt - 1)));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(url.host_port);
    client.set_connection_timeout(params.timeout_s);
    client.set_read_timeout(params.timeout_s);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      const nlohmann::json j = nlohmann::json::parse(res->body);
      response.text = j.at("choices").at(0).at("message").at("content")
                          .get<std::string>();
      return response;
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  response.error = last_error;
  return response;
}

}  // namespace detail

// Posts every prompt to the configured endpoint, at most
// `max_in_flight` requests concurrently, retrying each with exponential
// backoff. Output order matches prompt order; failures become per-prompt
// error entries rather than aborting the run.
inline std::vector<CaptionResponse> dispatch_prompts(
    const std::vector<CaptionPrompt>& prompts, const EndpointParams& params) {
  if (params.url.empty()) {
    throw ValidationError("endpoint url is not configured");
  }
  const detail::ParsedUrl url = detail::parse_endpoint_url(params.url);
  std::string api_key;
  if (!params.api_key_env.empty()) {
    if (const char* v = std::getenv(params.api_key_env.c_str())) api_key = v;
  }
  std::vector<CaptionResponse> responses(prompts.size());
  const std::size_t window =
      static_cast<std::size_t>(std::max(1, params.max_in_flight));
  for (std::size_t base = 0; base < prompts.size(); base += window) {
    const std::size_t end = std::min(prompts.size(), base + window);
    std::vector<std::future<CaptionResponse>> batch;
    for (std::size_t i = base; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        return detail::request_caption(url, params, api_key, prompts[i]);
      }));
    }
    for (std::size_t i = base; i < end; ++i) {
      responses[i] = batch[i - base].get();
    }
  }
  return responses;
}

// Offline mode: one prompt file per frame under `dir`.
inline std::vector<std::string> write_prompt_files(
    const std::vector<CaptionPrompt>& prompts, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  paths.reserve(prompts.size());
  for (const CaptionPrompt& p : prompts) {
    std::string name = p.frame_id;
    for (char& c : name) {
      if (c == '/' || c == '\\') c = '_';
    }
    const fs::path path = fs::path(dir) / (name + ".txt");
    std::ofstream out(path);
    if (!out) {
      throw std::runtime_error("cannot write prompt file '" + path.string() + "'");
    }
    out << p.prompt;
    paths.push_back(path.string());
  }
  return paths;
}

}  // namespace drivelang
