#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "drivelang/endpoint.hpp"

using namespace drivelang;
namespace fs = std::filesystem;

namespace {

// Minimal chat-completion stand-in running on a loopback port.
class EchoServer {
 public:
  explicit EchoServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_{0};
  std::thread thread_;
};

std::string completion_body(const std::string& content) {
  nlohmann::json j = {
      {"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return j.dump();
}

EndpointParams fast_params(const std::string& url) {
  EndpointParams p;
  p.url = url;
  p.backoff_ms = 5;
  p.timeout_s = 5;
  p.max_in_flight = 3;
  return p;
}

}  // namespace

TEST_CASE("responses align one-to-one with prompts in order") {
  EchoServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    const std::string prompt = j["messages"][0]["content"].get<std::string>();
    res.set_content(completion_body("echo: " + prompt), "application/json");
  });
  std::vector<CaptionPrompt> prompts;
  for (int i = 0; i < 7; ++i) {
    prompts.push_back({"frame-" + std::to_string(i), "prompt " + std::to_string(i)});
  }
  const auto responses = dispatch_prompts(prompts, fast_params(server.url()));
  REQUIRE(responses.size() == prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(responses[i].frame_id == prompts[i].frame_id);
    CHECK(responses[i].error.empty());
    CHECK(responses[i].text == "echo: " + prompts[i].prompt);
  }
}

TEST_CASE("a failing frame is flagged while others succeed") {
  EchoServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    const std::string prompt = j["messages"][0]["content"].get<std::string>();
    if (prompt.find("poison") != std::string::npos) {
      res.status = 500;
      res.set_content("boom", "text/plain");
      return;
    }
    res.set_content(completion_body("ok"), "application/json");
  });
  const std::vector<CaptionPrompt> prompts = {
      {"f0", "fine"}, {"f1", "poison pill"}, {"f2", "fine too"}};
  const auto responses = dispatch_prompts(prompts, fast_params(server.url()));
  REQUIRE(responses.size() == 3);
  CHECK(responses[0].error.empty());
  CHECK(responses[1].error == "HTTP 500");
  CHECK(responses[1].text.empty());
  CHECK(responses[2].error.empty());
}

TEST_CASE("transient failures are retried with backoff") {
  std::atomic<int> calls{0};
  EchoServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) < 2) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    res.set_content(completion_body("finally"), "application/json");
  });
  EndpointParams params = fast_params(server.url());
  params.max_in_flight = 1;
  const auto responses = dispatch_prompts({{"f0", "please"}}, params);
  REQUIRE(responses.size() == 1);
  CHECK(responses[0].error.empty());
  CHECK(responses[0].text == "finally");
  CHECK(calls.load() == 3);
}

TEST_CASE("failures after the retry budget carry an error entry") {
  std::atomic<int> calls{0};
  EchoServer server([&](const httplib::Request&, httplib::Response& res) {
    calls.fetch_add(1);
    res.status = 503;
    res.set_content("busy", "text/plain");
  });
  EndpointParams params = fast_params(server.url());
  const auto responses = dispatch_prompts({{"f0", "please"}}, params);
  REQUIRE(responses.size() == 1);
  CHECK(responses[0].error == "HTTP 503");
  CHECK(calls.load() == 3);  // three attempts, then give up
}

TEST_CASE("api key env var travels as a bearer header") {
  std::string seen_auth;
  EchoServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (req.has_header("Authorization")) {
      seen_auth = req.get_header_value("Authorization");
    }
    res.set_content(completion_body("ok"), "application/json");
  });
  ::setenv("DRIVELANG_TEST_KEY", "secret-token", 1);
  EndpointParams params = fast_params(server.url());
  params.api_key_env = "DRIVELANG_TEST_KEY";
  dispatch_prompts({{"f0", "x"}}, params);
  CHECK(seen_auth == "Bearer secret-token");
  ::unsetenv("DRIVELANG_TEST_KEY");
}

TEST_CASE("offline mode writes one prompt file per frame") {
  const fs::path dir = fs::temp_directory_path() / "drivelang_prompt_files_test";
  fs::remove_all(dir);
  const std::vector<CaptionPrompt> prompts = {{"frame-0001", "hello"},
                                              {"frame-0002", "world"}};
  const auto paths = write_prompt_files(prompts, dir.string());
  REQUIRE(paths.size() == 2);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    std::ifstream in(paths[i]);
    REQUIRE(in.good());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(content == prompts[i].prompt);
  }
  fs::remove_all(dir);
}

TEST_CASE("misconfigured endpoints fail fast") {
  CHECK_THROWS_AS(dispatch_prompts({{"f", "p"}}, EndpointParams{}), ValidationError);
  EndpointParams bad;
  bad.url = "not-a-url";
  CHECK_THROWS_AS(dispatch_prompts({{"f", "p"}}, bad), ValidationError);
}
