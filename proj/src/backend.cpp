// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/backend.hpp"

#include <cstdlib>
#include <sstream>

#include "ctxsynth/prompt.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ctxsynth {

using nlohmann::json;
using nlohmann::ordered_json;

void BackendConfig::validate() const {
  if (endpoint.empty()) throw ValidationError("backend config: endpoint is empty");
  if (timeout_ms < 1) throw ValidationError("backend config: timeout_ms must be >= 1");
  if (max_retries < 0) throw ValidationError("backend config: max_retries must be >= 0");
  if (max_in_flight < 1) throw ValidationError("backend config: max_in_flight must be >= 1");
  if (backoff_initial_ms < 0) throw ValidationError("backend config: backoff_initial_ms < 0");
  if (!is_stub() && !endpoint.starts_with("http://") && !endpoint.starts_with("https://"))
    throw ValidationError("backend config: endpoint must be http(s):// or 'stub'");
}

BackendConfig backend_config_from_json(const std::string& text) {
  BackendConfig c;
  try {
    const auto j = json::parse(text);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.auth_token_env = j.value("auth_token_env", c.auth_token_env);
    c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string backend_config_to_json(const BackendConfig& c) {
  ordered_json j;
  j["endpoint"] = c.endpoint;
  j["timeout_ms"] = c.timeout_ms;
  j["max_retries"] = c.max_retries;
  j["max_in_flight"] = c.max_in_flight;
  j["auth_token_env"] = c.auth_token_env;
  j["backoff_initial_ms"] = c.backoff_initial_ms;
  return j.dump();
}

void GenerationParams::validate() const {
  if (!(guidance_scale > 0.0)) throw ValidationError("generation params: guidance_scale must be > 0");
  if (num_steps < 1) throw ValidationError("generation params: num_steps must be >= 1");
  if (width < 1 || height < 1) throw ValidationError("generation params: width/height must be >= 1");
}

CaptionResponse caption_image(Captioner& captioner, const CaptionRequest& request) {
  if (request.image.empty()) throw ValidationError("caption_image: empty image for " + request.image_id);
  if (request.prompt.empty()) throw ValidationError("caption_image: empty prompt");
  auto r = captioner.caption(request);
  if (trim(r.text).empty()) throw TransportError("empty caption for " + request.image_id);
  return r;
}

GeneratedImage generate_image(ImageGenerator& generator, const std::string& prompt,
                              const GenerationParams& params) {
  if (prompt.empty()) throw ValidationError("generate_image: empty prompt");
  params.validate();
  auto img = generator.generate(prompt, params);
  if (img.payload.empty()) throw TransportError("empty image payload");
  return img;
}

RetryPolicy retry_policy(const BackendConfig& config) {
  RetryPolicy p;
  p.max_retries = config.max_retries;
  p.initial_backoff = std::chrono::milliseconds(config.backoff_initial_ms);
  return p;
}

void bounded_for_each(std::size_t n, int max_in_flight, const std::function<void(std::size_t)>& fn) {
  if (max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(max_in_flight));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base;    // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) e.base = url.substr(path_start);
  while (!e.base.empty() && e.base.back() == '/') e.base.pop_back();
  return e;
}

json post_json(const BackendConfig& config, const std::string& route, const json& body) {
  const auto ep = split_endpoint(config.endpoint);
  httplib::Client cli(ep.origin);
  const auto secs = config.timeout_ms / 1000;
  const auto usecs = (config.timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config.auth_token_env.empty()) {
    if (const char* token = std::getenv(config.auth_token_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  auto res = cli.Post(ep.base + route, headers, body.dump(), "application/json");
  if (!res) throw TransportError(route + ": " + httplib::to_string(res.error()));
  if (res->status >= 500 || res->status == 429)
    throw TransportError(route + ": HTTP " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300)
    throw BackendStatusError(route + ": HTTP " + std::to_string(res->status), res->status);
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendStatusError(route + ": malformed response body", res->status);
  }
}

}  // namespace

HttpCaptioner::HttpCaptioner(BackendConfig config, std::string model_name)
    : config_(std::move(config)), model_name_(std::move(model_name)) {
  config_.validate();
}

CaptionResponse HttpCaptioner::caption(const CaptionRequest& request) {
  json body;
  body["image_b64"] = base64_encode(request.image);
  body["prompt"] = request.prompt;
  return with_retries(retry_policy(config_), [&] {
    const auto reply = post_json(config_, "/caption", body);
    if (!reply.contains("text") || !reply["text"].is_string())
      throw BackendStatusError("/caption: response has no 'text'", 200);
    return CaptionResponse{request.image_id, reply["text"].get<std::string>(), model_name_};
  });
}

HttpGenerator::HttpGenerator(BackendConfig config, std::string model_name)
    : config_(std::move(config)), model_name_(std::move(model_name)) {
  config_.validate();
}

GeneratedImage HttpGenerator::generate(const std::string& prompt, const GenerationParams& params) {
  json body;
  body["prompt"] = prompt;
  body["guidance_scale"] = params.guidance_scale;
  body["num_steps"] = params.num_steps;
  body["seed"] = params.seed;
  body["width"] = params.width;
  body["height"] = params.height;
  return with_retries(retry_policy(config_), [&] {
    const auto reply = post_json(config_, "/generate", body);
    if (!reply.contains("image_b64") || !reply["image_b64"].is_string())
      throw BackendStatusError("/generate: response has no 'image_b64'", 200);
    GeneratedImage img;
    try {
      img.payload = base64_decode(reply["image_b64"].get<std::string>());
    } catch (const ValidationError& e) {
      throw BackendStatusError(std::string("/generate: ") + e.what(), 200);
    }
    img.prompt = prompt;
    img.params = params;
    img.model_name = model_name_;
    return img;
  });
}

const std::vector<std::string>& StubCaptioner::background_vocabulary() {
  static const std::vector<std::string> v = {
      "clear blue sky", "cloudy sky",     "airport tarmac", "green field",
      "snowy branch",   "forest",         "city street",    "sandy beach",
      "mountain range", "indoor hangar",  "sunset horizon", "grassy lawn",
      "rocky shore",    "wooden fence",   "garden flowers", "overcast sky",
  };
  return v;
}

const std::vector<std::string>& StubCaptioner::pose_vocabulary() {
  static const std::vector<std::string> v = {
      "taking off", "landing",     "perched",     "side view",
      "front view", "flying left", "sitting",     "standing",
  };
  return v;
}

CaptionResponse StubCaptioner::caption(const CaptionRequest& request) {
  if (failing_.count(request.image_id))
    throw TransportError("stub captioner: injected failure for " + request.image_id);
  CaptionResponse r{request.image_id, "", name()};
  if (empty_.count(request.image_id)) return r;
  const bool pose = request.prompt.starts_with("describe the pose");
  const auto& vocab = pose ? pose_vocabulary() : background_vocabulary();
  const auto h = fnv1a64(request.image_id + '\x1f' + (pose ? "pose" : "background"));
  r.text = vocab[mix64(h) % vocab.size()];
  return r;
}

std::string StubGenerator::payload_digest(const std::string& prompt, std::uint64_t seed) {
  return sha256_hex(prompt + '\0' + std::to_string(seed));
}

std::string StubGenerator::embedded_digest(const std::string& payload) {
  constexpr std::string_view key = "digest=";
  const auto pos = payload.find(key);
  if (pos == std::string::npos) return {};
  const auto end = payload.find('\n', pos);
  return payload.substr(pos + key.size(), end - pos - key.size());
}

GeneratedImage StubGenerator::generate(const std::string& prompt, const GenerationParams& params) {
  struct InFlight {
    StubGenerator& g;
    explicit InFlight(StubGenerator& gen) : g(gen) {
      const int now = ++g.in_flight_;
      int prev = g.max_observed_.load();
      while (now > prev && !g.max_observed_.compare_exchange_weak(prev, now)) {
      }
    }
    ~InFlight() { --g.in_flight_; }
  } guard(*this);
  ++calls_;
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  for (const auto& f : failing_)
    if (prompt.find(f) != std::string::npos)
      throw TransportError("stub generator: injected failure");

  std::ostringstream p;
  p << "CTXSYNTH-STUB-IMAGE\n"
    << "digest=" << payload_digest(prompt, params.seed) << "\n"
    << "size=" << params.width << "x" << params.height << "\n"
    << "guidance_scale=" << params.guidance_scale << "\n"
    << "num_steps=" << params.num_steps << "\n";
  GeneratedImage img;
  img.payload = p.str();
  img.prompt = prompt;
  img.params = params;
  img.model_name = name();
  return img;
}

std::unique_ptr<Captioner> make_captioner(const BackendConfig& config) {
  config.validate();
  if (config.is_stub()) return std::make_unique<StubCaptioner>();
  return std::make_unique<HttpCaptioner>(config);
}

std::unique_ptr<ImageGenerator> make_generator(const BackendConfig& config) {
  config.validate();
  if (config.is_stub()) return std::make_unique<StubGenerator>();
  return std::make_unique<HttpGenerator>(config);
}

std::vector<GenerationResult> dispatch_generation(std::span<const GenerationRequest> requests,
                                                  const GenerationParams& base,
                                                  int max_in_flight, ImageGenerator& generator) {
  if (max_in_flight < 1) throw ValidationError("dispatch: max_in_flight must be >= 1");
  base.validate();
  std::vector<GenerationResult> results(requests.size());
  bounded_for_each(requests.size(), max_in_flight, [&](std::size_t i) {
    auto& r = results[i];
    r.index = i;
    auto params = base;
    params.seed = requests[i].seed;
    try {
      r.image = generate_image(generator, requests[i].prompt, params);
      r.ok = true;
      r.attempts = 1;
    } catch (const TransportError& e) {
      r.error = e.what();
      r.attempts = e.attempts();
    } catch (const ValidationError& e) {
      r.error = e.what();
    }
  });
  return results;
}

}  // namespace ctxsynth
