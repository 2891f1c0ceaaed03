#include "tad/delegation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tad {

std::string_view ToString(Safeguard s) {
  switch (s) {
    case Safeguard::kClarifyOnce: return "CLARIFY_ONCE";
    case Safeguard::kAudit: return "AUDIT";
    case Safeguard::kCiteSources: return "CITE_SOURCES";
    case Safeguard::kStepwisePlan: return "STEPWISE_PLAN";
  }
  return "AUDIT";
}

Safeguard SafeguardFromString(std::string_view s) {
  for (auto g : {Safeguard::kClarifyOnce, Safeguard::kAudit, Safeguard::kCiteSources,
                 Safeguard::kStepwisePlan}) {
    if (ToString(g) == s) return g;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown safeguard '" + std::string(s) + "'");
}

std::string_view ToString(SessionStatus s) {
  switch (s) {
    case SessionStatus::kTyped: return "TYPED";
    case SessionStatus::kConfirmed: return "CONFIRMED";
    case SessionStatus::kExecuted: return "EXECUTED";
    case SessionStatus::kRepaired: return "REPAIRED";
    case SessionStatus::kClosed: return "CLOSED";
  }
  return "TYPED";
}

namespace {

std::vector<std::string> SafeguardNames(const std::vector<Safeguard>& gs) {
  std::vector<std::string> out;
  for (auto g : gs) out.emplace_back(ToString(g));
  return out;
}

bool Has(const std::vector<Safeguard>& gs, Safeguard g) {
  return std::find(gs.begin(), gs.end(), g) != gs.end();
}

std::string Fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

Json OptionalJson(const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); }
Json OptionalJson(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

[[noreturn]] void IllegalState(const DelegationSession& s, const std::string& op) {
  throw Error(ErrorKind::kIllegalState,
              op + " is not allowed in status " + std::string(ToString(s.status)),
              {{"session_id", s.session_id}, {"status", ToString(s.status)}});
}

}  // namespace

Json ToJson(const DelegationPolicy& p) {
  return {{"tau", p.tau ? Json(*p.tau) : Json(nullptr)},
          {"min_support", p.min_support},
          {"safeguards", SafeguardNames(p.safeguards)},
          {"sensitive_clusters", p.sensitive_clusters},
          {"noise_epsilon", p.noise_epsilon},
          {"noise_seed", p.noise_seed},
          {"retain_prompts", p.retain_prompts}};
}

DelegationPolicy PolicyFromJson(const Json& j) {
  DelegationPolicy p;
  try {
    if (auto it = j.find("tau"); it != j.end() && !it->is_null()) p.tau = it->get<double>();
    p.min_support = j.value("min_support", p.min_support);
    if (auto it = j.find("safeguards"); it != j.end()) {
      p.safeguards.clear();
      for (const auto& s : *it) p.safeguards.push_back(SafeguardFromString(s.get<std::string>()));
    }
    if (auto it = j.find("sensitive_clusters"); it != j.end()) {
      p.sensitive_clusters = it->get<std::set<int>>();
    }
    p.noise_epsilon = j.value("noise_epsilon", p.noise_epsilon);
    p.noise_seed = j.value("noise_seed", p.noise_seed);
    p.retain_prompts = j.value("retain_prompts", p.retain_prompts);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("malformed policy: ") + e.what());
  }
  return p;
}

DelegationPolicy LoadPolicy(const std::string& path) {
  try {
    return PolicyFromJson(Json::parse(ReadFile(path)));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kInvalidArgument, "policy '" + path + "' is not JSON: " + e.what());
  }
}

double DefaultTau(const SignalArtifact& artifact) {
  std::vector<double> rates;
  for (const auto& [c, t] : artifact.tie) rates.push_back(t.rate());
  if (rates.empty()) return 0.0;
  std::sort(rates.begin(), rates.end());
  const double pos = 0.75 * static_cast<double>(rates.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= rates.size()) return rates[lo];
  return rates[lo] + frac * (rates[lo + 1] - rates[lo]);
}

DelegationPolicy ResolvePolicy(DelegationPolicy p, const SignalArtifact& artifact) {
  if (!p.tau) p.tau = DefaultTau(artifact);
  auto fail = [](const std::string& why) { throw Error(ErrorKind::kInvalidArgument, why); };
  if (!(*p.tau >= 0.0 && *p.tau <= 1.0)) fail("tau must lie in [0, 1]");
  if (p.min_support < 1) fail("min_support must be at least 1");
  if (!(p.noise_epsilon > 0.0)) fail("noise_epsilon must be positive");
  std::set<Safeguard> seen;
  for (auto g : p.safeguards) {
    if (!seen.insert(g).second) fail("safeguard " + std::string(ToString(g)) + " listed twice");
  }
  if (p.safeguards.empty()) {
    for (const auto& [c, t] : artifact.tie) {
      if (t.rate() > *p.tau) fail("safeguard set is empty but cluster " + std::to_string(c) +
                                  " exceeds tau");
    }
  }
  return p;
}

std::optional<RouteCandidate> SelectCandidate(const std::vector<RouteCandidate>& candidates,
                                              const std::string& exclude) {
  std::optional<RouteCandidate> best;
  for (const auto& c : candidates) {
    if (c.model == exclude) continue;
    if (!best || c.rate > best->rate ||
        (c.rate == best->rate &&
         (c.support > best->support || (c.support == best->support && c.model < best->model)))) {
      best = c;
    }
  }
  return best;
}

RoutingDecision RouteCluster(const SignalArtifact& artifact, const DelegationPolicy& policy,
                             int cluster) {
  const double tau = policy.tau.value_or(DefaultTau(artifact));
  std::vector<RouteCandidate> local;
  for (const auto& [key, count] : artifact.win) {
    if (key.second == cluster && count.support >= policy.min_support) {
      local.push_back({key.first, count.rate(), count.support});
    }
  }
  std::vector<RouteCandidate> global;
  for (const auto& [model, count] : artifact.global) {
    global.push_back({model, count.rate(), count.support});
  }
  RoutingDecision d;
  d.global_fallback = local.empty();
  const auto& pool = d.global_fallback ? global : local;
  auto primary = SelectCandidate(pool);
  if (!primary) {
    throw Error(ErrorKind::kIllegalState, "signal artifact has no win-rate evidence to route on");
  }
  d.primary = *primary;
  d.runner_up = SelectCandidate(pool, d.primary.model);
  if (!d.runner_up && !d.global_fallback) {
    d.runner_up = SelectCandidate(global, d.primary.model);
    d.runner_up_global = d.runner_up.has_value();
  } else {
    d.runner_up_global = d.global_fallback && d.runner_up.has_value();
  }
  d.risk = artifact.Tie(cluster);
  d.high_assurance = !d.risk || d.risk->rate() > tau;
  if (d.high_assurance) {
    if (!d.runner_up) {
      throw Error(ErrorKind::kIllegalState,
                  "high-assurance routing needs a second model but the artifact has only one");
    }
    d.auditor = d.runner_up->model;
    d.safeguards = policy.safeguards;
  }
  return d;
}

std::string LimitationsText(bool global_fallback, bool risk_missing) {
  std::string text =
      "These numbers summarize past pairwise preference votes on prompts of this task type; "
      "n is how many comparisons back each rate. They describe tendencies, not guarantees for "
      "this request, and the task type is an automatic guess you can override.";
  if (global_fallback) {
    text += " No model had enough comparisons in this task type, so overall win rates were used.";
  }
  if (risk_missing) {
    text += " There is no disagreement data for this task type, so it is treated as high risk.";
  }
  return text;
}

namespace {

std::string SafeguardPhrase(Safeguard g) {
  switch (g) {
    case Safeguard::kClarifyOnce: return "one clarifying question";
    case Safeguard::kAudit: return "auditor cross-check";
    case Safeguard::kCiteSources: return "cited sources";
    case Safeguard::kStepwisePlan: return "stepwise plan";
  }
  return "";
}

CueRate ToCue(const RouteCandidate& c, bool global) {
  return {c.model, c.rate, c.support, global ? "global" : "cluster"};
}

AwarenessCue BuildCue(const RoutingDecision& d, double tau, int min_support) {
  AwarenessCue cue;
  cue.chosen = ToCue(d.primary, d.global_fallback);
  if (d.runner_up) cue.runner_up = ToCue(*d.runner_up, d.runner_up_global);
  cue.tau = tau;
  cue.global_fallback = d.global_fallback;
  cue.risk_missing = !d.risk.has_value();
  if (d.risk) {
    cue.risk_value = d.risk->rate();
    cue.risk_support = d.risk->support;
  }
  auto rate = [](const CueRate& r) {
    return r.model + " (win rate " + Fixed(r.rate) + ", n=" + std::to_string(r.support) +
           (r.scope == "global" ? ", all task types)" : ")");
  };
  std::string text;
  if (d.high_assurance) {
    text = d.risk ? "High-assurance mode: tie rate " + Fixed(d.risk->rate()) + " (n=" +
                        std::to_string(d.risk->support) + ") is above the risk threshold " +
                        Fixed(tau) + ". "
                  : "High-assurance mode: no tie-rate evidence for this task type. ";
    text += "Primary: " + rate(cue.chosen) + "; auditor: " + rate(*cue.runner_up) + ".";
    if (!d.safeguards.empty()) {
      text += " Safeguards: ";
      for (std::size_t i = 0; i < d.safeguards.size(); ++i) {
        if (i) text += ", ";
        text += SafeguardPhrase(d.safeguards[i]);
      }
      text += ".";
    }
  } else {
    text = "Primary: " + rate(cue.chosen) + ". Tie rate " + Fixed(d.risk->rate()) + " (n=" +
           std::to_string(d.risk->support) + ") is at or below the risk threshold " + Fixed(tau) +
           ", so no auditor or extra safeguards.";
  }
  if (d.global_fallback) {
    text += " No model has " + std::to_string(min_support) +
            " or more comparisons in this task type; overall win rates were used.";
  }
  cue.strategy_text = std::move(text);
  cue.limitations_text = LimitationsText(cue.global_fallback, cue.risk_missing);
  return cue;
}

}  // namespace

Json ToJson(const DelegationSession& s) {
  Json cue = nullptr;
  if (s.awareness_cue) {
    const auto& c = *s.awareness_cue;
    auto rate = [](const CueRate& r) {
      return Json{{"model", r.model}, {"rate", r.rate}, {"support", r.support}, {"scope", r.scope}};
    };
    cue = {{"chosen_model_win_rate", rate(c.chosen)},
           {"runner_up_win_rate", c.runner_up ? rate(*c.runner_up) : Json(nullptr)},
           {"risk", {{"value", OptionalJson(c.risk_value)}, {"support", c.risk_support}}},
           {"tau", c.tau},
           {"global_fallback", c.global_fallback},
           {"risk_missing", c.risk_missing},
           {"strategy_text", c.strategy_text},
           {"limitations_text", c.limitations_text}};
  }
  Json history = Json::array();
  for (auto h : s.history) history.push_back(ToString(h));
  Json outputs = Json::array();
  for (const auto& o : s.outputs) {
    outputs.push_back({{"role", o.role}, {"model", o.model}, {"text", o.text}});
  }
  Json clar = nullptr;
  if (s.clarification) {
    clar = {{"question", s.clarification->question},
            {"answer", OptionalJson(s.clarification->answer)}};
  }
  return {{"session_id", s.session_id},
          {"prompt_text", s.prompt_text},
          {"retain_prompt", s.retain_prompt},
          {"proposed", ToJson(s.proposed)},
          {"proposed_label", s.proposed_label},
          {"confirmed_cluster", s.confirmed_cluster ? Json(*s.confirmed_cluster) : Json(nullptr)},
          {"overridden", s.overridden},
          {"primary_model", s.primary_model.empty() ? Json(nullptr) : Json(s.primary_model)},
          {"auditor_model", OptionalJson(s.auditor_model)},
          {"risk_value", OptionalJson(s.risk_value)},
          {"high_assurance", s.high_assurance},
          {"active_safeguards", SafeguardNames(s.active_safeguards)},
          {"awareness_cue", cue},
          {"status", ToString(s.status)},
          {"history", history},
          {"clarification", clar},
          {"clarification_available",
           s.status == SessionStatus::kConfirmed && s.high_assurance &&
               Has(s.active_safeguards, Safeguard::kClarifyOnce) &&
               (!s.clarification || !s.clarification->answer)},
          {"outputs", outputs},
          {"audit_note", OptionalJson(s.audit_note)},
          {"repair_or_handoff_note", OptionalJson(s.repair_or_handoff_note)},
          {"log_entry_id", s.log_entry_id ? Json(*s.log_entry_id) : Json(nullptr)},
          {"task_model_version", s.task_model_version}};
}

std::shared_ptr<const EngineSnapshot> MakeSnapshot(std::shared_ptr<const TaskTypeModel> model,
                                                   std::shared_ptr<const SignalArtifact> signals,
                                                   DelegationPolicy policy,
                                                   std::shared_ptr<const EmbeddingProvider> embedder) {
  if (!model || !signals) throw Error(ErrorKind::kInvalidArgument, "missing artifacts");
  auto snap = std::make_shared<EngineSnapshot>();
  snap->model_version = model->Version();
  if (signals->task_model_version != snap->model_version) {
    throw Error(ErrorKind::kVersionMismatch,
                "signal artifact was built for task model " + signals->task_model_version +
                    " but the loaded task model is " + snap->model_version,
                {{"task_model_version", snap->model_version},
                 {"signals_task_model_version", signals->task_model_version}});
  }
  for (const auto& [key, count] : signals->win) {
    if (key.second < 0 || key.second >= model->cluster_count()) {
      throw Error(ErrorKind::kVersionMismatch, "signal artifact names cluster " +
                                                   std::to_string(key.second) +
                                                   " outside the task model");
    }
  }
  snap->policy = ResolvePolicy(std::move(policy), *signals);
  snap->embedder = embedder ? std::move(embedder)
                            : std::shared_ptr<const EmbeddingProvider>(
                                  MakeEmbeddingProvider(model->embedder));
  snap->model = std::move(model);
  snap->signals = std::move(signals);
  return snap;
}

DelegationEngine::DelegationEngine(std::shared_ptr<const EngineSnapshot> snapshot)
    : snapshot_(std::move(snapshot)) {
  if (!snapshot_) throw Error(ErrorKind::kInvalidArgument, "engine needs a snapshot");
}

std::shared_ptr<const EngineSnapshot> DelegationEngine::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

void DelegationEngine::Reload(std::shared_ptr<const EngineSnapshot> snapshot) {
  if (!snapshot) throw Error(ErrorKind::kInvalidArgument, "engine needs a snapshot");
  std::lock_guard lock(mu_);
  snapshot_ = std::move(snapshot);
}

std::shared_ptr<const EngineSnapshot> DelegationEngine::SnapshotFor(
    const DelegationSession& s) const {
  auto snap = snapshot();
  if (snap->model_version != s.task_model_version) {
    throw Error(ErrorKind::kVersionMismatch,
                "session " + s.session_id + " was typed against task model " +
                    s.task_model_version + ", now serving " + snap->model_version);
  }
  return snap;
}

DelegationSession DelegationEngine::Open(const std::string& prompt,
                                         std::optional<bool> retain_prompt) {
  if (prompt.empty()) throw Error(ErrorKind::kInvalidArgument, "prompt must not be empty");
  auto snap = snapshot();
  DelegationSession s;
  s.proposed = Assign(*snap->model, prompt, *snap->embedder);
  char id[32];
  std::snprintf(id, sizeof(id), "s-%06llu",
                static_cast<unsigned long long>(next_session_.fetch_add(1)));
  s.session_id = id;
  s.prompt_text = prompt;
  s.retain_prompt = retain_prompt.value_or(snap->policy.retain_prompts);
  s.proposed_label = snap->model->labels.at(static_cast<std::size_t>(s.proposed.cluster));
  s.status = SessionStatus::kTyped;
  s.history = {SessionStatus::kTyped};
  s.task_model_version = snap->model_version;
  return s;
}

void DelegationEngine::Override(DelegationSession& s, int cluster, bool pose) {
  if (s.status != SessionStatus::kTyped) IllegalState(s, "override");
  auto snap = SnapshotFor(s);
  const auto& model = *snap->model;
  if (cluster < 0 || cluster >= model.cluster_count()) {
    throw Error(ErrorKind::kInvalidArgument, "unknown cluster " + std::to_string(cluster),
                {{"cluster", cluster}, {"cluster_count", model.cluster_count()}});
  }
  if (!model.IsSurviving(cluster)) {
    const int target = model.reassignment_map.at(cluster);
    throw Error(ErrorKind::kInvalidArgument,
                "cluster " + std::to_string(cluster) + " was merged into cluster " +
                    std::to_string(target),
                {{"cluster", cluster}, {"surviving_target", target}});
  }
  ConfirmCluster(s, cluster, cluster != s.proposed.cluster, pose);
}

void DelegationEngine::Confirm(DelegationSession& s, bool pose) {
  if (s.status != SessionStatus::kTyped) IllegalState(s, "confirm");
  ConfirmCluster(s, s.proposed.cluster, false, pose);
}

void DelegationEngine::ConfirmCluster(DelegationSession& s, int cluster, bool overridden,
                                      bool pose) {
  auto snap = SnapshotFor(s);
  const auto& policy = snap->policy;
  const RoutingDecision d = RouteCluster(*snap->signals, policy, cluster);
  s.confirmed_cluster = cluster;
  s.overridden = overridden;
  s.primary_model = d.primary.model;
  s.auditor_model = d.auditor;
  s.risk_value = d.risk ? std::optional<double>(d.risk->rate()) : std::nullopt;
  s.high_assurance = d.high_assurance;
  s.active_safeguards = d.safeguards;
  s.awareness_cue = BuildCue(d, *policy.tau, policy.min_support);
  s.status = SessionStatus::kConfirmed;
  s.history.push_back(SessionStatus::kConfirmed);
  if (pose && s.high_assurance && Has(s.active_safeguards, Safeguard::kClarifyOnce)) {
    PoseClarification(s);
  }
}

std::string DelegationEngine::PoseClarification(DelegationSession& s) {
  if (s.status != SessionStatus::kConfirmed) IllegalState(s, "clarification");
  if (!s.high_assurance || !Has(s.active_safeguards, Safeguard::kClarifyOnce)) {
    throw Error(ErrorKind::kIllegalState,
                "clarification is only posed in high-assurance mode with CLARIFY_ONCE",
                {{"session_id", s.session_id}});
  }
  if (s.clarification) {
    throw Error(ErrorKind::kIllegalState, "clarification budget exhausted",
                {{"session_id", s.session_id}});
  }
  auto snap = SnapshotFor(s);
  const int c = *s.confirmed_cluster;
  const auto& label = snap->model->labels.at(static_cast<std::size_t>(c));
  std::string question = "This request was typed as \"" + label + "\"";
  if (c == s.proposed.cluster) {
    question += " (confidence " + Fixed(s.proposed.confidence) + ")";
  } else {
    question += " (your choice)";
  }
  question +=
      ", where models often disagree. What must a good answer get right, and is there any "
      "detail of the request I should not assume?";
  s.clarification = Clarification{question, std::nullopt};
  return question;
}

void DelegationEngine::AnswerClarification(DelegationSession& s, const std::string& answer) {
  if (s.status != SessionStatus::kConfirmed) IllegalState(s, "clarify");
  if (!s.clarification) {
    throw Error(ErrorKind::kIllegalState, "no clarification question was posed",
                {{"session_id", s.session_id}});
  }
  if (s.clarification->answer) {
    throw Error(ErrorKind::kIllegalState, "clarification budget exhausted",
                {{"session_id", s.session_id}});
  }
  if (answer.empty()) throw Error(ErrorKind::kInvalidArgument, "answer must not be empty");
  s.clarification->answer = answer;
}

std::string DelegationEngine::ExecutorPrompt(const DelegationSession& s) {
  std::string p = s.prompt_text;
  std::string extra;
  if (s.clarification && s.clarification->answer) {
    extra += "\nClarification from the user: " + *s.clarification->answer;
  }
  if (Has(s.active_safeguards, Safeguard::kCiteSources)) {
    extra += "\nCite sources for factual claims.";
  }
  if (Has(s.active_safeguards, Safeguard::kStepwisePlan)) {
    extra += "\nStart with a short stepwise plan, then answer.";
  }
  if (!extra.empty()) p += "\n" + extra;
  return p;
}

void DelegationEngine::Execute(DelegationSession& s, const AgentExecutor& executor) {
  if (s.status != SessionStatus::kConfirmed) IllegalState(s, "execute");
  SnapshotFor(s);
  const std::string prompt = ExecutorPrompt(s);
  const bool audit = s.auditor_model && Has(s.active_safeguards, Safeguard::kAudit);

  std::vector<ExecutionOutput> outputs;
  std::optional<std::string> note;
  std::optional<std::string> audit_note;
  std::string primary_text;
  bool primary_ok = false;
  try {
    primary_text = executor.Run(s.primary_model, prompt);
    outputs.push_back({"primary", s.primary_model, primary_text});
    primary_ok = true;
  } catch (const std::exception& e) {
    note = "Primary model " + s.primary_model + " failed: " + e.what() + ".";
  }
  if (primary_ok && audit) {
    const std::string review = "Check the answer below for errors or unsupported claims.\n\n"
                               "Request:\n" + prompt + "\n\nAnswer from " + s.primary_model +
                               ":\n" + primary_text;
    try {
      const std::string text = executor.Run(*s.auditor_model, review);
      outputs.push_back({"auditor", *s.auditor_model, text});
      audit_note = "Audited by " + *s.auditor_model + ": " + text;
    } catch (const std::exception& e) {
      note = "Auditor " + *s.auditor_model + " failed: " + e.what() +
             ". The primary answer is delivered unverified.";
    }
  } else if (!primary_ok) {
    if (s.auditor_model) {
      try {
        const std::string text = executor.Run(*s.auditor_model, prompt);
        outputs.push_back({"auditor", *s.auditor_model, text});
        *note += " Handed off to backup model " + *s.auditor_model + ".";
      } catch (const std::exception& e) {
        *note += " Backup model " + *s.auditor_model + " also failed: " + e.what() +
                 ". Handed back to the user.";
      }
    } else {
      *note += " Handed back to the user; no backup model was assigned.";
    }
  }
  s.outputs = std::move(outputs);
  s.audit_note = std::move(audit_note);
  s.status = SessionStatus::kExecuted;
  s.history.push_back(SessionStatus::kExecuted);
  if (note) {
    s.repair_or_handoff_note = std::move(note);
    s.status = SessionStatus::kRepaired;
    s.history.push_back(SessionStatus::kRepaired);
  }
}

AccountabilityEntry DelegationEngine::AppendLog(DelegationSession& s, AccountabilityStore& store) {
  if (s.status != SessionStatus::kExecuted && s.status != SessionStatus::kRepaired) {
    IllegalState(s, "append_log");
  }
  if (s.log_entry_id) {
    throw Error(ErrorKind::kIllegalState, "session already logged",
                {{"session_id", s.session_id}, {"entry_id", *s.log_entry_id}});
  }
  AccountabilityEntry e;
  e.cluster = s.confirmed_cluster.value_or(s.proposed.cluster);
  e.overridden = s.overridden;
  e.primary_model = s.primary_model;
  e.auditor_model = s.auditor_model;
  e.risk_value = s.risk_value;
  e.safeguards = SafeguardNames(s.active_safeguards);
  e.status = std::string(ToString(s.status));
  e.repair_or_handoff_note = s.repair_or_handoff_note;
  if (s.retain_prompt) e.prompt_text = s.prompt_text;
  auto stored = store.Append(std::move(e));
  s.log_entry_id = stored.entry_id;
  return stored;
}

void DelegationEngine::Close(DelegationSession& s) {
  if (s.status != SessionStatus::kExecuted && s.status != SessionStatus::kRepaired) {
    IllegalState(s, "close");
  }
  s.status = SessionStatus::kClosed;
  s.history.push_back(SessionStatus::kClosed);
}

void DelegationEngine::Abort(DelegationSession& s, const std::string& note) {
  if (s.status != SessionStatus::kTyped && s.status != SessionStatus::kConfirmed) {
    IllegalState(s, "abort");
  }
  s.repair_or_handoff_note = note;
  s.status = SessionStatus::kRepaired;
  s.history.push_back(SessionStatus::kRepaired);
}

}  // namespace tad
