#include <cstdlib>
#include <thread>

// Project headers come first: httplib pulls in <resolv.h>, whose `_res` macro
// breaks Eigen's product kernels.
#include "seeground/agent.hpp"
#include "seeground/error.hpp"
#include "seeground/util.hpp"

#include "httplib.h"
#include "json.hpp"

namespace seeground {

using nlohmann::json;

void RemoteConfig::apply_environment() {
  if (const char* url = std::getenv("SEEGROUND_VLM_URL"); url && *url) base_url = url;
  if (const char* key = std::getenv("SEEGROUND_VLM_KEY"); key && *key) api_key = key;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)), in_flight_(std::max(1, cfg_.max_in_flight)) {
  if (cfg_.base_url.empty())
    throw Error(Errc::invalid_argument, "remote backend needs a base URL (set SEEGROUND_VLM_URL)");
  if (cfg_.max_in_flight < 1 || cfg_.max_in_flight > 1024)
    throw Error(Errc::invalid_argument, "max_in_flight must be in [1, 1024]");
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::invalid_argument, "base URL lacks a scheme: " + cfg_.base_url);
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  scheme_host_ = cfg_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string RemoteBackend::request_body(const AgentRequest& request) const {
  json user_content = json::array();
  user_content.push_back({{"type", "text"}, {"text", request.user_text}});
  if (request.image_png)
    user_content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(*request.image_png)}}}});
  json messages = json::array();
  if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
  messages.push_back({{"role", "user"}, {"content", user_content}});
  json body{{"model", cfg_.model}, {"messages", messages}, {"temperature", 0.0}};
  return body.dump();
}

std::string RemoteBackend::reply_text(std::string_view response_body) {
  json j;
  try {
    j = json::parse(response_body);
  } catch (const json::parse_error& e) {
    throw Error(Errc::transport, std::string("chat completion reply is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw Error(Errc::transport, "chat completion reply has no choices");
  const auto& content = j["choices"][0]["message"]["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content)
      if (part.value("type", "") == "text") out += part.value("text", "");
    return out;
  }
  throw Error(Errc::transport, "chat completion reply has no text content");
}

namespace {

struct SemaphoreGuard {
  std::counting_semaphore<1024>& sem;
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string RemoteBackend::complete(const AgentRequest& request) {
  const std::string body = request_body(request);
  const std::string path = path_prefix_ + "/chat/completions";
  SemaphoreGuard guard(in_flight_);

  std::string last_error;
  Errc last_code = Errc::transport;
  int retries = 0;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    retries = attempt;
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
    httplib::Client client(scheme_host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) ? Errc::timeout
                                                                                            : Errc::transport;
      last_error = httplib::to_string(err);
      continue;
    }
    if (res->status == 200) return reply_text(res->body);
    last_code = Errc::transport;
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable_status(res->status)) break;
  }
  throw Error(last_code, "chat completion failed after " + std::to_string(retries) +
                             " retries: " + last_error);
}

}  // namespace seeground
