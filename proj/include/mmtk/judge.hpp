#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmtk {

// External model used to regenerate answers or describe images. Implementations
// must not touch the records they are asked about.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string generate(const std::string& prompt, std::span<const std::string> image_refs) = 0;
  virtual bool deterministic() const { return false; }
};

// Wire format: request {"prompt": string, "images": [base64]} -> {"text": string}.
nlohmann::json judge_request_json(const std::string& prompt, std::span<const std::string> images_base64);
std::string judge_response_text(const nlohmann::json& response);

// Scripted responses, returned in order and cycling. A response equal to
// kFail throws TransportError instead.
class MockJudge : public JudgeClient {
 public:
  static constexpr const char* kFail = "\x01" "fail";

  explicit MockJudge(std::vector<std::string> responses) : responses_(std::move(responses)) {}

  std::string generate(const std::string& prompt, std::span<const std::string> image_refs) override;
  bool deterministic() const override { return true; }

  std::size_t calls() const { return calls_.load(); }
  const std::vector<std::string>& prompts() const { return prompts_; }

 private:
  std::vector<std::string> responses_;
  std::vector<std::string> prompts_;
  std::mutex mu_;
  std::atomic<std::size_t> calls_{0};
};

// Caps the number of calls forwarded to another client. Calls beyond the
// budget throw TransportError.
class BudgetedJudge : public JudgeClient {
 public:
  BudgetedJudge(JudgeClient& inner, std::size_t budget) : inner_(inner), remaining_(budget) {}

  std::string generate(const std::string& prompt, std::span<const std::string> image_refs) override;
  bool deterministic() const override { return inner_.deterministic(); }
  std::size_t remaining() const { return remaining_.load(); }

 private:
  JudgeClient& inner_;
  std::atomic<std::size_t> remaining_;
};

struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string api_key;
  int timeout_s = 120;

  // Reads <prefix>_URL and <prefix>_API_KEY; throws ConfigError when the URL is unset.
  static HttpEndpoint from_env(const std::string& prefix);
};

// POSTs the judge wire format as JSON. Image refs are files, sent base64-encoded.
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string generate(const std::string& prompt, std::span<const std::string> image_refs) override;

 private:
  HttpEndpoint endpoint_;
};

// POST a JSON body, return the parsed JSON response. Throws TransportError.
nlohmann::json http_post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

std::string base64_encode(std::string_view bytes);
std::string read_file_bytes(const std::string& path);

}  // namespace mmtk
