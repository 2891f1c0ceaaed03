#include "tad/service.hpp"

#include <charconv>
#include <sstream>

#include "httplib.h"

namespace tad {

int HttpStatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kParse: return 400;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kIllegalState:
    case ErrorKind::kVersionMismatch: return 409;
    case ErrorKind::kUnavailable: return 503;
    case ErrorKind::kCorrupted:
    case ErrorKind::kNumerical: return 500;
  }
  return 500;
}

Json ErrorBody(const Error& e) {
  return {{"error", {{"kind", ToString(e.kind())}, {"message", e.what()}, {"details", e.details()}}}};
}

namespace {

std::vector<std::string> SplitPath(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

template <typename T>
T ParseInteger(const std::string& text, const std::string& what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kInvalidArgument, what + " must be an integer, got '" + text + "'");
  }
  return value;
}

const Json& Field(const Json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) {
    throw Error(ErrorKind::kInvalidArgument, std::string("request body lacks '") + key + "'");
  }
  return *it;
}

bool Finished(SessionStatus s) {
  return s != SessionStatus::kTyped && s != SessionStatus::kConfirmed;
}

ApiResponse Ok(Json body, int status = 200) { return {status, std::move(body), "application/json", {}}; }

}  // namespace

DelegationService::DelegationService(ServiceConfig config,
                                     std::shared_ptr<const AgentExecutor> executor,
                                     AccountabilityStore::Clock log_clock, Clock clock)
    : config_(std::move(config)), executor_(std::move(executor)), clock_(std::move(clock)) {
  if (config_.request_timeout.count() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "request timeout must be positive");
  }
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
  if (!executor_) {
    if (config_.executor_endpoint) {
      executor_ = std::make_shared<HttpExecutor>(*config_.executor_endpoint);
    } else {
      executor_ = std::make_shared<MockExecutor>();
    }
  }
  engine_ = std::make_unique<DelegationEngine>(LoadSnapshot());
  store_ = std::make_unique<AccountabilityStore>(config_.log_path, std::move(log_clock));
}

DelegationService::~DelegationService() {
  try {
    Stop();
  } catch (...) {
  }
}

std::shared_ptr<const EngineSnapshot> DelegationService::LoadSnapshot() const {
  auto model = std::make_shared<const TaskTypeModel>(LoadTaskModel(config_.task_model_path));
  auto signals = std::make_shared<const SignalArtifact>(LoadSignalArtifact(config_.signals_path));
  DelegationPolicy policy;
  if (!config_.policy_path.empty()) policy = LoadPolicy(config_.policy_path);
  if (config_.retain_prompts) policy.retain_prompts = *config_.retain_prompts;
  return MakeSnapshot(std::move(model), std::move(signals), std::move(policy));
}

std::shared_ptr<DelegationService::SessionSlot> DelegationService::FindSession(
    const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw Error(ErrorKind::kNotFound, "unknown session '" + id + "'", {{"session_id", id}});
  }
  return it->second;
}

std::size_t DelegationService::OpenSessionCount() {
  std::vector<std::shared_ptr<SessionSlot>> slots;
  {
    std::lock_guard lock(sessions_mu_);
    for (auto& [id, slot] : sessions_) slots.push_back(slot);
  }
  std::size_t n = 0;
  for (auto& slot : slots) {
    std::lock_guard lock(slot->mu);
    if (!Finished(slot->session.status)) ++n;
  }
  return n;
}

ApiResponse DelegationService::Dispatch(const std::string& method, const std::string& path,
                                        const std::map<std::string, std::string>& query,
                                        const std::string& body) {
  try {
    Json parsed = Json::object();
    if (!body.empty()) {
      try {
        parsed = Json::parse(body);
      } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
      }
      if (!parsed.is_object()) {
        throw Error(ErrorKind::kInvalidArgument, "request body must be a JSON object");
      }
    }
    return Route(method, path, query, parsed);
  } catch (const Error& e) {
    return {HttpStatusFor(e.kind()), ErrorBody(e), "application/json", {}};
  } catch (const Json::exception& e) {
    return {400, ErrorBody(Error(ErrorKind::kInvalidArgument, e.what())), "application/json", {}};
  } catch (const std::exception& e) {
    return {500, ErrorBody(Error(ErrorKind::kNumerical, e.what())), "application/json", {}};
  }
}

ApiResponse DelegationService::Route(const std::string& method, const std::string& path,
                                     const std::map<std::string, std::string>& query,
                                     const Json& body) {
  const auto parts = SplitPath(path);
  auto not_found = [&]() -> ApiResponse {
    throw Error(ErrorKind::kNotFound, "no route for " + method + " " + path);
  };
  if (parts.size() < 2 || parts[0] != "v1") return not_found();
  const std::string& head = parts[1];

  if (head == "healthz" && parts.size() == 2 && method == "GET") {
    auto snap = engine_->snapshot();
    return Ok({{"status", "ok"},
               {"task_model_version", snap->model_version},
               {"signals_task_model_version", snap->signals->task_model_version},
               {"signals_created_at", snap->signals->created_at},
               {"tau", *snap->policy.tau},
               {"open_sessions", OpenSessionCount()},
               {"log_items", store_->size()}});
  }

  if (head == "policy" && parts.size() == 2 && method == "GET") {
    return Ok(ToJson(engine_->snapshot()->policy));
  }

  if (head == "sessions") {
    if (parts.size() == 2 && method == "POST") {
      ExpireSessions();
      const std::string prompt = Field(body, "prompt").get<std::string>();
      std::optional<bool> retain;
      if (auto it = body.find("retain_prompt"); it != body.end() && !it->is_null()) {
        retain = it->get<bool>();
      }
      if (OpenSessionCount() >= config_.max_sessions) {
        throw Error(ErrorKind::kUnavailable, "too many open sessions",
                    {{"max_sessions", config_.max_sessions}});
      }
      auto slot = std::make_shared<SessionSlot>();
      slot->session = engine_->Open(prompt, retain);
      slot->touched = clock_();
      Json out = ToJson(slot->session);
      {
        std::lock_guard lock(sessions_mu_);
        sessions_[slot->session.session_id] = slot;
      }
      return Ok(std::move(out), 201);
    }
    if (parts.size() == 3 && method == "GET") {
      auto slot = FindSession(parts[2]);
      std::lock_guard lock(slot->mu);
      slot->touched = clock_();
      return Ok(ToJson(slot->session));
    }
    if (parts.size() == 4 && method == "POST") return SessionOp(parts[2], parts[3], body);
    return not_found();
  }

  if (head == "clusters" && parts.size() == 2 && method == "GET") {
    auto snap = engine_->snapshot();
    const auto& model = *snap->model;
    Json clusters = Json::array();
    for (int c = 0; c < model.cluster_count(); ++c) {
      Json item = {{"cluster", c},
                   {"label", model.labels[static_cast<std::size_t>(c)]},
                   {"keywords", model.keywords[static_cast<std::size_t>(c)]},
                   {"surviving", model.IsSurviving(c)}};
      item["merged_into"] = model.IsSurviving(c) ? Json(nullptr) : Json(model.reassignment_map.at(c));
      if (auto t = snap->signals->Tie(c)) {
        item["tie"] = {{"rate", t->rate()}, {"ties", t->ties}, {"support", t->support}};
        item["high_risk"] = t->rate() > *snap->policy.tau;
      } else {
        item["tie"] = nullptr;
        item["high_risk"] = model.IsSurviving(c);
      }
      clusters.push_back(std::move(item));
    }
    return Ok({{"clusters", clusters},
               {"tau", *snap->policy.tau},
               {"task_model_version", snap->model_version}});
  }

  if (head == "profiles" && parts.size() == 2 && method == "GET") {
    auto snap = engine_->snapshot();
    auto it = query.find("cluster");
    if (it == query.end()) throw Error(ErrorKind::kInvalidArgument, "query parameter 'cluster' is required");
    const int c = ParseInteger<int>(it->second, "cluster");
    if (c < 0 || c >= snap->model->cluster_count()) {
      throw Error(ErrorKind::kNotFound, "unknown cluster " + it->second);
    }
    Json profiles = Json::array();
    for (const auto& [key, count] : snap->signals->win) {
      if (key.second != c) continue;
      profiles.push_back({{"model", key.first},
                          {"rate", count.rate()},
                          {"wins", count.wins},
                          {"support", count.support},
                          {"meets_min_support", count.support >= snap->policy.min_support}});
    }
    Json global = Json::array();
    for (const auto& [model, count] : snap->signals->global) {
      global.push_back({{"model", model}, {"rate", count.rate()}, {"wins", count.wins},
                        {"support", count.support}});
    }
    Json tie = nullptr;
    if (auto t = snap->signals->Tie(c)) {
      tie = {{"rate", t->rate()}, {"ties", t->ties}, {"support", t->support}};
    }
    return Ok({{"cluster", c},
               {"label", snap->model->labels[static_cast<std::size_t>(c)]},
               {"min_support", snap->policy.min_support},
               {"profiles", profiles},
               {"tie", tie},
               {"global", global}});
  }

  if (head == "log") {
    if (parts.size() == 2 && method == "GET") {
      std::uint64_t cursor = 0;
      std::size_t limit = 50;
      if (auto it = query.find("cursor"); it != query.end() && !it->second.empty()) {
        cursor = ParseInteger<std::uint64_t>(it->second, "cursor");
      }
      if (auto it = query.find("limit"); it != query.end() && !it->second.empty()) {
        limit = ParseInteger<std::size_t>(it->second, "limit");
        if (limit == 0 || limit > 1000) {
          throw Error(ErrorKind::kInvalidArgument, "limit must lie in [1, 1000]");
        }
      }
      const auto items = store_->List(cursor, limit + 1);
      Json out = Json::array();
      for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
        Json j = ToJson(items[i]);
        j["type"] = std::holds_alternative<Tombstone>(items[i]) ? "tombstone" : "entry";
        out.push_back(std::move(j));
      }
      Json next = items.size() > limit ? Json(ItemId(items[limit - 1])) : Json(nullptr);
      return Ok({{"items", out}, {"next_cursor", next}});
    }
    if (parts.size() == 3 && parts[2] == "frequencies" && method == "GET") {
      auto snap = engine_->snapshot();
      const auto& p = snap->policy;
      const auto exact = store_->ClusterCounts();
      const auto noisy = NoisyClusterCounts(exact, snap->model->cluster_count(),
                                            p.sensitive_clusters, p.noise_epsilon, p.noise_seed);
      Json counts = Json::array();
      for (const auto& [c, v] : noisy) {
        counts.push_back({{"cluster", c}, {"count", v}, {"noised", p.sensitive_clusters.count(c) > 0}});
      }
      return Ok({{"counts", counts}, {"epsilon", p.noise_epsilon}});
    }
    if (parts.size() == 3 && parts[2] == "export" && method == "GET") {
      ApiResponse r;
      r.content_type = "application/x-ndjson";
      r.raw = store_->ExportJsonl();
      if (r.raw.empty()) r.body = Json::object();
      return r;
    }
    if (parts.size() == 3) {
      const auto id = ParseInteger<std::uint64_t>(parts[2], "entry id");
      if (method == "GET") return Ok(ToJson(store_->Get(id)));
      if (method == "DELETE") return Ok({{"tombstone", ToJson(store_->Forget(id))}});
    }
    return not_found();
  }

  if (head == "admin" && parts.size() == 3 && parts[2] == "reload" && method == "POST") {
    engine_->Reload(LoadSnapshot());
    auto snap = engine_->snapshot();
    return Ok({{"task_model_version", snap->model_version}, {"tau", *snap->policy.tau}});
  }
  return not_found();
}

ApiResponse DelegationService::SessionOp(const std::string& id, const std::string& op,
                                         const Json& body) {
  auto slot = FindSession(id);
  std::lock_guard lock(slot->mu);
  slot->touched = clock_();
  auto& s = slot->session;
  if (op == "override") {
    const auto& c = Field(body, "cluster");
    if (!c.is_number_integer()) throw Error(ErrorKind::kInvalidArgument, "cluster must be an integer");
    engine_->Override(s, c.get<int>());
  } else if (op == "confirm") {
    engine_->Confirm(s);
  } else if (op == "clarify") {
    engine_->AnswerClarification(s, Field(body, "answer").get<std::string>());
  } else if (op == "execute") {
    engine_->Execute(s, *executor_);
    engine_->AppendLog(s, *store_);
    if (s.status == SessionStatus::kRepaired) {
      Json out = ErrorBody(Error(ErrorKind::kUnavailable, *s.repair_or_handoff_note));
      out["session"] = ToJson(s);
      return {503, std::move(out), "application/json", {}};
    }
  } else if (op == "close") {
    engine_->Close(s);
  } else {
    throw Error(ErrorKind::kNotFound, "unknown session operation '" + op + "'");
  }
  return Ok(ToJson(s));
}

void DelegationService::FinishUnfinished(const std::string& note, bool close) {
  std::vector<std::shared_ptr<SessionSlot>> slots;
  {
    std::lock_guard lock(sessions_mu_);
    for (auto& [id, slot] : sessions_) slots.push_back(slot);
  }
  for (auto& slot : slots) {
    std::lock_guard lock(slot->mu);
    auto& s = slot->session;
    if (Finished(s.status)) continue;
    engine_->Abort(s, note);
    engine_->AppendLog(s, *store_);
    if (close) engine_->Close(s);
  }
}

std::size_t DelegationService::ExpireSessions() {
  const auto now = clock_();
  std::vector<std::pair<std::string, std::shared_ptr<SessionSlot>>> slots;
  {
    std::lock_guard lock(sessions_mu_);
    for (auto& [id, slot] : sessions_) slots.emplace_back(id, slot);
  }
  std::vector<std::string> expired;
  for (auto& [id, slot] : slots) {
    std::lock_guard lock(slot->mu);
    if (now - slot->touched <= config_.session_ttl) continue;
    auto& s = slot->session;
    if (!Finished(s.status)) {
      engine_->Abort(s, "Session expired after " + std::to_string(config_.session_ttl.count()) +
                            " s without activity; nothing was executed.");
      engine_->AppendLog(s, *store_);
      engine_->Close(s);
    }
    expired.push_back(id);
  }
  std::lock_guard lock(sessions_mu_);
  for (const auto& id : expired) sessions_.erase(id);
  return expired.size();
}

void DelegationService::Start() {
  if (server_) throw Error(ErrorKind::kIllegalState, "service already started");
  server_ = std::make_unique<httplib::Server>();
  const int workers = std::max(1, config_.worker_threads);
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      config_.request_timeout - secs);
  server_->set_read_timeout(secs.count(), usecs.count());
  server_->set_write_timeout(secs.count(), usecs.count());

  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const ApiResponse r = Dispatch(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    if (!r.raw.empty() || r.content_type != "application/json") {
      res.set_content(r.raw, r.content_type);
    } else {
      res.set_content(r.body.dump(), "application/json");
    }
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
  server_->Delete(".*", handler);
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
    res.status = 204;
  });

  if (config_.port == 0) {
    bound_port_ = server_->bind_to_any_port(config_.host);
    if (bound_port_ <= 0) {
      throw Error(ErrorKind::kUnavailable, "cannot bind " + config_.host);
    }
  } else {
    if (!server_->bind_to_port(config_.host, config_.port)) {
      throw Error(ErrorKind::kUnavailable,
                  "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    bound_port_ = config_.port;
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  janitor_ = std::thread([this] {
    std::unique_lock lock(stop_mu_);
    const auto period = std::min<std::chrono::milliseconds>(
        std::chrono::seconds(1), std::chrono::duration_cast<std::chrono::milliseconds>(config_.session_ttl));
    while (!stopping_) {
      stop_cv_.wait_for(lock, period);
      if (stopping_) break;
      lock.unlock();
      try {
        ExpireSessions();
      } catch (...) {
      }
      lock.lock();
    }
  });
  server_->wait_until_ready();
}

void DelegationService::Stop() {
  {
    std::lock_guard lock(stop_mu_);
    if (stopped_) return;
    stopping_ = true;
    stopped_ = true;
  }
  stop_cv_.notify_all();
  if (server_) server_->stop();
  if (listener_.joinable()) listener_.join();
  if (janitor_.joinable()) janitor_.join();
  FinishUnfinished("Service shut down before this session finished; handed back to the user.",
                   false);
  store_->Flush();
}

}  // namespace tad
