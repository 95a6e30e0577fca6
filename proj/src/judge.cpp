#include "mmtk/judge.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmtk/error.hpp"

#include <httplib.h>

namespace mmtk {

nlohmann::json judge_request_json(const std::string& prompt, std::span<const std::string> images_base64) {
  return {{"prompt", prompt}, {"images", std::vector<std::string>(images_base64.begin(), images_base64.end())}};
}

std::string judge_response_text(const nlohmann::json& response) {
  if (!response.is_object() || !response.contains("text") || !response["text"].is_string()) {
    throw TransportError("judge response lacks a string \"text\" field");
  }
  return response["text"].get<std::string>();
}

std::string MockJudge::generate(const std::string& prompt, std::span<const std::string>) {
  std::string reply;
  {
    std::lock_guard<std::mutex> lock(mu_);
    prompts_.push_back(prompt);
    reply = responses_.empty() ? std::string{} : responses_[calls_.load() % responses_.size()];
    ++calls_;
  }
  if (reply == kFail) throw TransportError("mock judge: scripted failure");
  return reply;
}

std::string BudgetedJudge::generate(const std::string& prompt, std::span<const std::string> image_refs) {
  std::size_t left = remaining_.load();
  do {
    if (left == 0) throw TransportError("judge call budget exhausted");
  } while (!remaining_.compare_exchange_weak(left, left - 1));
  return inner_.generate(prompt, image_refs);
}

HttpEndpoint HttpEndpoint::from_env(const std::string& prefix) {
  HttpEndpoint ep;
  const char* url = std::getenv((prefix + "_URL").c_str());
  if (!url || !*url) throw ConfigError(prefix + "_URL is not set");
  ep.url = url;
  if (const char* key = std::getenv((prefix + "_API_KEY").c_str())) ep.api_key = key;
  return ep;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

nlohmann::json http_post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
  const SplitUrl u = split_url(endpoint.url);
  httplib::Client client(u.origin);
  client.set_connection_timeout(endpoint.timeout_s, 0);
  client.set_read_timeout(endpoint.timeout_s, 0);
  client.set_write_timeout(endpoint.timeout_s, 0);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  auto res = client.Post(u.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("POST " + endpoint.url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + endpoint.url + " returned HTTP " + std::to_string(res->status));
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw TransportError("endpoint returned invalid JSON");
  return parsed;
}

std::string HttpJudgeClient::generate(const std::string& prompt, std::span<const std::string> image_refs) {
  std::vector<std::string> encoded;
  encoded.reserve(image_refs.size());
  for (const auto& ref : image_refs) encoded.push_back(base64_encode(read_file_bytes(ref)));
  return judge_response_text(http_post_json(endpoint_, judge_request_json(prompt, encoded)));
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < bytes.size()) {
    auto n = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FilesystemError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mmtk
