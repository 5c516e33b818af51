// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Clients for the external captioning model and text-to-image generator.
//
// Wire protocol (one POST route per backend kind, JSON bodies):
//   POST {endpoint}/caption   {image_b64, prompt}                  -> {text}
//   POST {endpoint}/generate  {prompt, guidance_scale, num_steps,
//                              seed, width, height}                -> {image_b64}
// A bearer token is read from the environment variable named in the config.
//
// The stub implementations are pure functions of their inputs and make the
// whole pipeline reproducible offline.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ctxsynth/util.hpp"

namespace ctxsynth {

struct BackendConfig {
  std::string endpoint = "stub";  // "stub" selects the offline stub backend
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_in_flight = 4;
  std::string auth_token_env;
  int backoff_initial_ms = 200;

  bool is_stub() const { return endpoint == "stub" || endpoint.starts_with("stub:"); }
  void validate() const;
};

BackendConfig backend_config_from_json(const std::string& text);
std::string backend_config_to_json(const BackendConfig& config);

struct GenerationParams {
  double guidance_scale = 2.0;
  int num_steps = 50;
  std::uint64_t seed = 0;
  int width = 512;
  int height = 512;

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

struct CaptionRequest {
  std::string image_id;
  std::string image;  // raw encoded image bytes
  std::string prompt;
};

struct CaptionResponse {
  std::string image_id;
  std::string text;
  std::string model_name;
};

struct GeneratedImage {
  std::string payload;  // encoded image bytes
  // Provenance echo.
  std::string prompt;
  GenerationParams params;
  std::string model_name;
};

/// A non-success HTTP status. Not retried.
class BackendStatusError : public TransportError {
 public:
  BackendStatusError(const std::string& what, int status, int attempts = 1)
      : TransportError(what, attempts), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string name() const = 0;
  virtual CaptionResponse caption(const CaptionRequest& request) = 0;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual std::string name() const = 0;
  virtual GeneratedImage generate(const std::string& prompt, const GenerationParams& params) = 0;
};

/// Checks the request, calls the backend and rejects an empty reply.
CaptionResponse caption_image(Captioner& captioner, const CaptionRequest& request);
GeneratedImage generate_image(ImageGenerator& generator, const std::string& prompt,
                              const GenerationParams& params = {});

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

/// Runs `fn` until it returns, retrying TransportError (but not
/// BackendStatusError) with exponential backoff. Throws TransportError
/// carrying the attempt count once retries are exhausted.
template <class F>
auto with_retries(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const BackendStatusError& e) {
      throw BackendStatusError(e.what(), e.status(), attempt);
    } catch (const TransportError& e) {
      if (attempt > policy.max_retries)
        throw TransportError("retry-exhausted after " + std::to_string(attempt) +
                                 " attempts: " + e.what(),
                             attempt);
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
  }
}

RetryPolicy retry_policy(const BackendConfig& config);

/// Runs fn(i) for i in [0, n) on at most `max_in_flight` worker threads.
/// The first exception escaping fn is rethrown after all workers finish.
void bounded_for_each(std::size_t n, int max_in_flight, const std::function<void(std::size_t)>& fn);

// HTTP clients.

class HttpCaptioner final : public Captioner {
 public:
  explicit HttpCaptioner(BackendConfig config, std::string model_name = "http-captioner");
  std::string name() const override { return model_name_; }
  CaptionResponse caption(const CaptionRequest& request) override;

 private:
  BackendConfig config_;
  std::string model_name_;
};

class HttpGenerator final : public ImageGenerator {
 public:
  explicit HttpGenerator(BackendConfig config, std::string model_name = "http-generator");
  std::string name() const override { return model_name_; }
  GeneratedImage generate(const std::string& prompt, const GenerationParams& params) override;

 private:
  BackendConfig config_;
  std::string model_name_;
};

// Stubs.

/// Picks attributes from a fixed vocabulary keyed by a stable hash of
/// (image_id, kind). The kind is read from the extraction prompt.
class StubCaptioner final : public Captioner {
 public:
  static constexpr std::size_t kBackgroundVocab = 16;
  static constexpr std::size_t kPoseVocab = 8;
  static const std::vector<std::string>& background_vocabulary();
  static const std::vector<std::string>& pose_vocabulary();

  StubCaptioner() = default;
  /// Requests for these image ids fail with a TransportError.
  explicit StubCaptioner(std::set<std::string> failing_ids) : failing_(std::move(failing_ids)) {}
  /// Requests for these image ids return an empty caption.
  void set_empty_ids(std::set<std::string> ids) { empty_ = std::move(ids); }

  std::string name() const override { return "stub-captioner"; }
  CaptionResponse caption(const CaptionRequest& request) override;

 private:
  std::set<std::string> failing_;
  std::set<std::string> empty_;
};

/// Emits a small text payload embedding sha256(prompt, seed).
class StubGenerator final : public ImageGenerator {
 public:
  StubGenerator() = default;
  /// Prompts containing any of these substrings fail.
  explicit StubGenerator(std::vector<std::string> failing_substrings,
                         std::chrono::milliseconds delay = std::chrono::milliseconds(0))
      : failing_(std::move(failing_substrings)), delay_(delay) {}

  std::string name() const override { return "stub-generator"; }
  GeneratedImage generate(const std::string& prompt, const GenerationParams& params) override;

  static std::string payload_digest(const std::string& prompt, std::uint64_t seed);
  /// Digest embedded in a stub payload, or empty when absent.
  static std::string embedded_digest(const std::string& payload);

  int max_in_flight_observed() const { return max_observed_.load(); }
  int calls() const { return calls_.load(); }

 private:
  std::vector<std::string> failing_;
  std::chrono::milliseconds delay_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_observed_{0};
  std::atomic<int> calls_{0};
};

std::unique_ptr<Captioner> make_captioner(const BackendConfig& config);
std::unique_ptr<ImageGenerator> make_generator(const BackendConfig& config);

struct GenerationRequest {
  std::string prompt;
  std::uint64_t seed = 0;
};

struct GenerationResult {
  std::size_t index = 0;
  bool ok = false;
  GeneratedImage image;
  std::string error;
  int attempts = 0;
};

/// Issues every request with at most `max_in_flight` outstanding. Results are
/// returned in request order; per-item failures are recorded, not thrown.
std::vector<GenerationResult> dispatch_generation(std::span<const GenerationRequest> requests,
                                                  const GenerationParams& base,
                                                  int max_in_flight, ImageGenerator& generator);

}  // namespace ctxsynth
