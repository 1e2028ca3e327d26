#pragma once

// Trial-conduct service: one append-only JSON-lines event log per trial
// under the data directory. On start-up every log is replayed against its
// recorded configuration and seed, which rebuilds the in-memory state
// exactly. Submissions to one trial are serialized by a per-trial mutex.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "combidose/io.hpp"
#include "combidose/stage1.hpp"
#include "combidose/stage2.hpp"

namespace combidose {

struct ServiceOptions {
  std::filesystem::path data_dir = "trials";
  std::string cors_origin = "*";
  std::chrono::seconds request_timeout{30};
};

struct ApiResponse {
  int status = 200;
  Json body;
};

struct Trial;

class TrialService {
 public:
  explicit TrialService(ServiceOptions options);
  ~TrialService();
  TrialService(const TrialService&) = delete;
  TrialService& operator=(const TrialService&) = delete;

  ApiResponse create_trial(const std::string& body, const std::string& idempotency_key = "");
  ApiResponse submit_stage1(const std::string& id, const std::string& body);
  ApiResponse finalize_stage1(const std::string& id);
  ApiResponse submit_stage2(const std::string& id, const std::string& body);
  ApiResponse get_state(const std::string& id) const;
  ApiResponse get_curves(const std::string& id) const;

  // Routes a request path below /v1 (e.g. "/v1/trials/abc/curves").
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::string& idempotency_key = "");

  const ServiceOptions& options() const { return options_; }
  std::vector<std::string> trial_ids() const;

 private:
  std::shared_ptr<Trial> find(const std::string& id) const;
  void replay(const std::filesystem::path& log);

  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Trial>> trials_;
  std::map<std::string, std::string> idempotency_;
};

// HTTP front end over a TrialService. Routes live under /v1; every response
// carries the CORS headers and OPTIONS preflights are answered with 204.
class HttpFrontend {
 public:
  explicit HttpFrontend(TrialService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  bool run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocks serving HTTP on host:port until the process is stopped.
int serve(TrialService& service, const std::string& host, int port, std::ostream& log);

}  // namespace combidose
