#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tad/accountability.hpp"
#include "tad/embedding.hpp"
#include "tad/executor.hpp"
#include "tad/signals.hpp"
#include "tad/task_model.hpp"

namespace tad {

enum class Safeguard { kClarifyOnce, kAudit, kCiteSources, kStepwisePlan };

std::string_view ToString(Safeguard s);
Safeguard SafeguardFromString(std::string_view s);

enum class SessionStatus { kTyped, kConfirmed, kExecuted, kRepaired, kClosed };

std::string_view ToString(SessionStatus s);

struct DelegationPolicy {
  // Unset: frozen at engine construction to DefaultTau(artifact).
  std::optional<double> tau;
  int min_support = 20;
  std::vector<Safeguard> safeguards = {Safeguard::kClarifyOnce, Safeguard::kAudit,
                                       Safeguard::kCiteSources, Safeguard::kStepwisePlan};
  std::set<int> sensitive_clusters;
  double noise_epsilon = 1.0;
  std::uint64_t noise_seed = 0;
  // Default prompt retention for sessions that do not choose.
  bool retain_prompts = false;

  bool operator==(const DelegationPolicy&) const = default;
};

Json ToJson(const DelegationPolicy& p);
DelegationPolicy PolicyFromJson(const Json& j);
DelegationPolicy LoadPolicy(const std::string& path);

/// 75th percentile (linear interpolation between order statistics) of the
/// artifact's tie rates; 0 when it has none.
double DefaultTau(const SignalArtifact& artifact);

/// Fills tau if unset and checks the invariants: tau in [0, 1],
/// min_support >= 1, epsilon > 0, and a nonempty safeguard set whenever some
/// cluster's tie rate exceeds tau.
DelegationPolicy ResolvePolicy(DelegationPolicy policy, const SignalArtifact& artifact);

struct RouteCandidate {
  std::string model;
  double rate = 0.0;
  std::int64_t support = 0;
};

/// Best candidate by (rate desc, support desc, model id asc), skipping
/// `exclude`. nullopt when nothing is left.
std::optional<RouteCandidate> SelectCandidate(const std::vector<RouteCandidate>& candidates,
                                              const std::string& exclude = {});

struct RoutingDecision {
  RouteCandidate primary;
  std::optional<RouteCandidate> runner_up;  // next best, shown in the cue
  bool runner_up_global = false;            // runner-up came from global rates
  std::optional<std::string> auditor;       // runner_up's model when high assurance
  bool global_fallback = false;             // no model met min_support in the cluster
  std::optional<TieCount> risk;             // absent: no tie evidence
  bool high_assurance = false;
  std::vector<Safeguard> safeguards;
};

/// Capability argmax with the risk gate for one confirmed cluster.
RoutingDecision RouteCluster(const SignalArtifact& artifact, const DelegationPolicy& policy,
                             int cluster);

struct CueRate {
  std::string model;
  double rate = 0.0;
  std::int64_t support = 0;
  std::string scope;  // "cluster" or "global"
  bool operator==(const CueRate&) const = default;
};

struct AwarenessCue {
  CueRate chosen;
  std::optional<CueRate> runner_up;
  std::optional<double> risk_value;
  std::int64_t risk_support = 0;
  double tau = 0.0;
  bool global_fallback = false;
  bool risk_missing = false;
  std::string strategy_text;
  std::string limitations_text;
  bool operator==(const AwarenessCue&) const = default;
};

struct Clarification {
  std::string question;
  std::optional<std::string> answer;
  bool operator==(const Clarification&) const = default;
};

struct ExecutionOutput {
  std::string role;  // "primary" or "auditor"
  std::string model;
  std::string text;
  bool operator==(const ExecutionOutput&) const = default;
};

struct DelegationSession {
  std::string session_id;
  std::string prompt_text;
  bool retain_prompt = false;
  TypeAssignment proposed;
  std::string proposed_label;
  std::optional<int> confirmed_cluster;
  bool overridden = false;
  std::string primary_model;
  std::optional<std::string> auditor_model;
  std::optional<double> risk_value;
  bool high_assurance = false;
  std::vector<Safeguard> active_safeguards;
  std::optional<AwarenessCue> awareness_cue;
  SessionStatus status = SessionStatus::kTyped;
  std::vector<SessionStatus> history;  // every status held, in order
  std::optional<Clarification> clarification;
  std::vector<ExecutionOutput> outputs;
  std::optional<std::string> audit_note;
  std::optional<std::string> repair_or_handoff_note;
  std::optional<std::uint64_t> log_entry_id;
  std::string task_model_version;

  bool operator==(const DelegationSession&) const = default;
};

Json ToJson(const DelegationSession& s);

/// Immutable artifacts a session is evaluated against.
struct EngineSnapshot {
  std::shared_ptr<const TaskTypeModel> model;
  std::shared_ptr<const SignalArtifact> signals;
  std::shared_ptr<const EmbeddingProvider> embedder;
  DelegationPolicy policy;  // resolved
  std::string model_version;
};

/// Checks compatibility, resolves the policy, and builds the embedder from
/// the task model's config when `embedder` is null.
std::shared_ptr<const EngineSnapshot> MakeSnapshot(std::shared_ptr<const TaskTypeModel> model,
                                                   std::shared_ptr<const SignalArtifact> signals,
                                                   DelegationPolicy policy,
                                                   std::shared_ptr<const EmbeddingProvider> embedder = {});

/// The delegation loop. Operations on one session must be serialized by the
/// caller; distinct sessions may run concurrently. Every operation checks its
/// precondition before mutating, so a rejected call leaves the session as it
/// was.
class DelegationEngine {
 public:
  explicit DelegationEngine(std::shared_ptr<const EngineSnapshot> snapshot);

  std::shared_ptr<const EngineSnapshot> snapshot() const;
  /// Atomically swaps artifacts; open sessions keep the version they started
  /// with and fail with kVersionMismatch on their next routing step.
  void Reload(std::shared_ptr<const EngineSnapshot> snapshot);

  /// Type and verify: proposal only, nothing routed. Empty prompts are
  /// rejected.
  DelegationSession Open(const std::string& prompt, std::optional<bool> retain_prompt = {});

  /// TYPED -> CONFIRMED on the given surviving cluster, then routes.
  /// Retired clusters fail with details {"surviving_target": j}.
  void Override(DelegationSession& s, int cluster, bool pose_clarification = true);

  /// TYPED -> CONFIRMED on the proposal, then routes.
  void Confirm(DelegationSession& s, bool pose_clarification = true);

  /// The single clarification question of a high-assurance session.
  std::string PoseClarification(DelegationSession& s);

  void AnswerClarification(DelegationSession& s, const std::string& answer);

  /// CONFIRMED -> EXECUTED. Executor failure records a handoff note and
  /// continues to REPAIRED.
  void Execute(DelegationSession& s, const AgentExecutor& executor);

  /// Minimized log entry for an EXECUTED or REPAIRED session.
  AccountabilityEntry AppendLog(DelegationSession& s, AccountabilityStore& store);

  /// EXECUTED or REPAIRED -> CLOSED.
  void Close(DelegationSession& s);

  /// Ends an unfinished session (shutdown, expiry): TYPED or CONFIRMED ->
  /// REPAIRED with `note`. Finished sessions are rejected.
  void Abort(DelegationSession& s, const std::string& note);

  /// Text sent to the executor: prompt plus the active safeguard instructions
  /// and any clarification answer.
  static std::string ExecutorPrompt(const DelegationSession& s);

 private:
  std::shared_ptr<const EngineSnapshot> SnapshotFor(const DelegationSession& s) const;
  void ConfirmCluster(DelegationSession& s, int cluster, bool overridden, bool pose);

  mutable std::mutex mu_;
  std::shared_ptr<const EngineSnapshot> snapshot_;
  std::atomic<std::uint64_t> next_session_{1};
};

/// Limitations disclosure shown with every cue.
std::string LimitationsText(bool global_fallback, bool risk_missing);

}  // namespace tad
