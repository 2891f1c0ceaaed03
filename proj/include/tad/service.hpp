#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "tad/accountability.hpp"
#include "tad/delegation.hpp"
#include "tad/executor.hpp"

namespace httplib {
class Server;
}

namespace tad {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string task_model_path;
  std::string signals_path;
  std::string policy_path;  // empty: default policy
  std::string log_path = "accountability.log";
  // Overrides the policy's retain_prompts default when set.
  std::optional<bool> retain_prompts;
  std::chrono::milliseconds request_timeout{10000};
  std::size_t max_sessions = 1000;  // concurrently open (unfinished) sessions
  std::chrono::seconds session_ttl{3600};
  // Executor: mock unless an endpoint is given.
  std::optional<EndpointConfig> executor_endpoint;
  int worker_threads = 8;
};

/// Response of one API call, independent of the transport.
struct ApiResponse {
  int status = 200;
  Json body;
  std::string content_type = "application/json";
  std::string raw;  // used instead of body when non-empty
};

/// HTTP front end for the delegation engine. Dispatch() holds all request
/// semantics; the HTTP listener only translates requests into Dispatch calls.
class DelegationService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  /// Loads and version-checks the artifacts; refuses (throws) on mismatch.
  explicit DelegationService(ServiceConfig config,
                             std::shared_ptr<const AgentExecutor> executor = {},
                             AccountabilityStore::Clock log_clock = {}, Clock clock = {});
  ~DelegationService();

  DelegationService(const DelegationService&) = delete;
  DelegationService& operator=(const DelegationService&) = delete;

  ApiResponse Dispatch(const std::string& method, const std::string& path,
                       const std::map<std::string, std::string>& query, const std::string& body);

  /// Binds and serves on a background thread. Throws kUnavailable when the
  /// address cannot be bound.
  void Start();
  int port() const { return bound_port_; }
  /// Graceful stop: unfinished sessions become REPAIRED with a handoff note
  /// and are logged, then the log is flushed.
  void Stop();

  /// Expires sessions idle longer than the TTL; returns how many.
  std::size_t ExpireSessions();

  DelegationEngine& engine() { return *engine_; }
  AccountabilityStore& store() { return *store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct SessionSlot {
    std::mutex mu;
    DelegationSession session;
    std::chrono::steady_clock::time_point touched;
  };

  std::shared_ptr<const EngineSnapshot> LoadSnapshot() const;
  std::shared_ptr<SessionSlot> FindSession(const std::string& id);
  std::size_t OpenSessionCount();
  ApiResponse Route(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query, const Json& body);
  ApiResponse SessionOp(const std::string& id, const std::string& op, const Json& body);
  void FinishUnfinished(const std::string& note, bool close);

  ServiceConfig config_;
  std::shared_ptr<const AgentExecutor> executor_;
  Clock clock_;
  std::unique_ptr<DelegationEngine> engine_;
  std::unique_ptr<AccountabilityStore> store_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;

  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  std::thread janitor_;
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  bool stopped_ = false;
  int bound_port_ = 0;
};

/// HTTP status for an error kind.
int HttpStatusFor(ErrorKind kind);
Json ErrorBody(const Error& e);

}  // namespace tad
