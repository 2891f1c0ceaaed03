#include <gtest/gtest.h>

#include <thread>

#include "service_fixture.hpp"
#include "tad/service.hpp"

namespace {

using tad::Json;

tad::DelegationPolicy Tau(double tau) {
  tad::DelegationPolicy p;
  p.tau = tau;
  return p;
}

TEST(Service, RefusesMismatchedArtifacts) {
  auto files = sfix::Write("mismatch", dfix::StandardProfile());
  auto art = tad::LoadSignalArtifact(files.signals);
  art.task_model_version = "0";
  tad::SaveSignalArtifact(art, files.signals);
  try {
    tad::DelegationService svc(sfix::Config(files));
    FAIL();
  } catch (const tad::Error& e) {
    EXPECT_EQ(e.kind(), tad::ErrorKind::kVersionMismatch);
  }
}

TEST(Service, HealthAndClusters) {
  auto files = sfix::Write("health", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files));
  auto h = svc.Dispatch("GET", "/v1/healthz", {}, "");
  ASSERT_EQ(h.status, 200);
  EXPECT_EQ(h.body.at("task_model_version"), dfix::Model()->Version());
  EXPECT_EQ(h.body.at("tau"), 0.3);
  EXPECT_EQ(h.body.at("open_sessions"), 0);

  auto c = svc.Dispatch("GET", "/v1/clusters", {}, "");
  ASSERT_EQ(c.status, 200);
  const auto& cl = c.body.at("clusters");
  ASSERT_EQ(cl.size(), 5u);
  EXPECT_EQ(cl[2].at("high_risk"), true);   // 0.5 > 0.3
  EXPECT_EQ(cl[0].at("high_risk"), false);  // 0.1
  EXPECT_EQ(cl[3].at("tie"), nullptr);
  EXPECT_EQ(cl[3].at("high_risk"), true);
  EXPECT_EQ(cl[4].at("surviving"), false);
  EXPECT_EQ(cl[4].at("merged_into"), 1);

  auto p = svc.Dispatch("GET", "/v1/profiles", {{"cluster", "0"}}, "");
  ASSERT_EQ(p.status, 200);
  EXPECT_EQ(p.body.at("profiles").size(), 4u);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/profiles", {{"cluster", "9"}}, "").status, 404);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/profiles", {{"cluster", "x"}}, "").status, 400);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/nowhere", {}, "").status, 404);
}

TEST(Service, SessionFlow) {
  auto files = sfix::Write("flow", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files), {}, sfix::FixedClock());
  auto open = svc.Dispatch("POST", "/v1/sessions", {},
                           Json{{"prompt", dfix::CentroidPrompts()[2]}}.dump());
  ASSERT_EQ(open.status, 201);
  EXPECT_EQ(open.body.at("status"), "TYPED");
  EXPECT_EQ(open.body.at("primary_model"), nullptr);
  const std::string base = "/v1/sessions/" + open.body.at("session_id").get<std::string>();

  auto retired = svc.Dispatch("POST", base + "/override", {}, R"({"cluster": 4})");
  EXPECT_EQ(retired.status, 400);
  EXPECT_EQ(retired.body.at("error").at("details").at("surviving_target"), 1);

  auto conf = svc.Dispatch("POST", base + "/confirm", {}, "");
  ASSERT_EQ(conf.status, 200);
  EXPECT_EQ(conf.body.at("primary_model"), "m-b");
  EXPECT_EQ(conf.body.at("auditor_model"), "m-c");
  EXPECT_EQ(conf.body.at("clarification_available"), true);

  EXPECT_EQ(svc.Dispatch("POST", base + "/clarify", {}, R"({"answer": "brief"})").status, 200);
  auto ex = svc.Dispatch("POST", base + "/execute", {}, "");
  ASSERT_EQ(ex.status, 200);
  EXPECT_EQ(ex.body.at("status"), "EXECUTED");
  EXPECT_EQ(ex.body.at("outputs").size(), 2u);
  EXPECT_FALSE(ex.body.at("log_entry_id").is_null());

  auto again = svc.Dispatch("POST", base + "/confirm", {}, "");
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body.at("error").at("kind"), "illegal_state");
  EXPECT_EQ(svc.Dispatch("POST", base + "/close", {}, "").status, 200);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/sessions/s-999999", {}, "").status, 404);
  EXPECT_EQ(svc.Dispatch("POST", "/v1/sessions", {}, "{").status, 400);
  EXPECT_EQ(svc.Dispatch("POST", "/v1/sessions", {}, R"({"prompt": ""})").status, 400);
}

TEST(Service, ExecutorFailureIsServiceUnavailable) {
  auto files = sfix::Write("fail", dfix::StandardProfile(), Tau(0.3));
  auto exec = std::make_shared<tad::MockExecutor>(std::set<std::string>{"m-a"});
  tad::DelegationService svc(sfix::Config(files), exec, sfix::FixedClock());
  auto open = svc.Dispatch("POST", "/v1/sessions", {},
                           Json{{"prompt", dfix::CentroidPrompts()[0]}}.dump());
  const std::string base = "/v1/sessions/" + open.body.at("session_id").get<std::string>();
  svc.Dispatch("POST", base + "/confirm", {}, "");
  auto ex = svc.Dispatch("POST", base + "/execute", {}, "");
  EXPECT_EQ(ex.status, 503);
  EXPECT_EQ(ex.body.at("session").at("status"), "REPAIRED");
  EXPECT_FALSE(ex.body.at("session").at("repair_or_handoff_note").is_null());
}

TEST(Service, StopRepairsOpenSessions) {
  auto files = sfix::Write("stop", dfix::StandardProfile(), Tau(0.3));
  {
    tad::DelegationService svc(sfix::Config(files), {}, sfix::FixedClock());
    svc.Dispatch("POST", "/v1/sessions", {}, Json{{"prompt", dfix::CentroidPrompts()[0]}}.dump());
    auto b = svc.Dispatch("POST", "/v1/sessions", {}, Json{{"prompt", dfix::CentroidPrompts()[1]}}.dump());
    svc.Dispatch("POST", "/v1/sessions/" + b.body.at("session_id").get<std::string>() + "/confirm", {}, "");
    svc.Stop();
  }
  tad::AccountabilityStore reopened(files.log);
  const auto entries = reopened.Export();
  ASSERT_EQ(entries.size(), 2u);
  for (const auto& e : entries) {
    EXPECT_EQ(e.status, "REPAIRED");
    ASSERT_TRUE(e.repair_or_handoff_note.has_value());
    EXPECT_FALSE(e.repair_or_handoff_note->empty());
  }
}

TEST(Service, ExpiredSessionsAreRepaired) {
  auto files = sfix::Write("ttl", dfix::StandardProfile(), Tau(0.3));
  auto now = std::chrono::steady_clock::now();
  auto cfg = sfix::Config(files);
  cfg.session_ttl = std::chrono::seconds(10);
  tad::DelegationService svc(cfg, {}, sfix::FixedClock(), [&] { return now; });
  auto open = svc.Dispatch("POST", "/v1/sessions", {}, Json{{"prompt", "poetry"}}.dump());
  EXPECT_EQ(svc.ExpireSessions(), 0u);
  now += std::chrono::seconds(11);
  EXPECT_EQ(svc.ExpireSessions(), 1u);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/sessions/" + open.body.at("session_id").get<std::string>(), {}, "").status,
            404);
  ASSERT_EQ(svc.store().Export().size(), 1u);
  EXPECT_EQ(svc.store().Export()[0].status, "REPAIRED");
}

TEST(Service, MaxSessionsIsEnforced) {
  auto files = sfix::Write("max", dfix::StandardProfile(), Tau(0.3));
  auto cfg = sfix::Config(files);
  cfg.max_sessions = 2;
  tad::DelegationService svc(cfg);
  const std::string body = Json{{"prompt", "poetry"}}.dump();
  EXPECT_EQ(svc.Dispatch("POST", "/v1/sessions", {}, body).status, 201);
  EXPECT_EQ(svc.Dispatch("POST", "/v1/sessions", {}, body).status, 201);
  EXPECT_EQ(svc.Dispatch("POST", "/v1/sessions", {}, body).status, 503);
}

TEST(Service, ForgetThroughApi) {
  auto files = sfix::Write("forget", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files), {}, sfix::FixedClock());
  const std::string secret = "sorting algorithms quicksort mergesort confidentialword";
  auto open = svc.Dispatch("POST", "/v1/sessions", {},
                           Json{{"prompt", secret}, {"retain_prompt", true}}.dump());
  const std::string base = "/v1/sessions/" + open.body.at("session_id").get<std::string>();
  svc.Dispatch("POST", base + "/confirm", {}, "");
  auto ex = svc.Dispatch("POST", base + "/execute", {}, "");
  const auto id = ex.body.at("log_entry_id").get<std::uint64_t>();
  const std::string entry = "/v1/log/" + std::to_string(id);

  EXPECT_EQ(svc.Dispatch("GET", entry, {}, "").body.at("prompt_text"), secret);
  auto del = svc.Dispatch("DELETE", entry, {}, "");
  ASSERT_EQ(del.status, 200);
  EXPECT_EQ(del.body.at("tombstone").at("entry_id"), id);

  auto get = svc.Dispatch("GET", entry, {}, "");
  EXPECT_EQ(get.status, 404);
  EXPECT_EQ(get.body.dump().find("confidentialword"), std::string::npos);
  auto list = svc.Dispatch("GET", "/v1/log", {}, "");
  ASSERT_EQ(list.body.at("items").size(), 1u);
  EXPECT_EQ(list.body.at("items")[0].at("type"), "tombstone");
  EXPECT_EQ(svc.Dispatch("GET", "/v1/log/export", {}, "").raw.find("confidentialword"), std::string::npos);
  for (const auto& c : svc.Dispatch("GET", "/v1/log/frequencies", {}, "").body.at("counts")) {
    EXPECT_EQ(c.at("count"), 0);
  }
  EXPECT_EQ(svc.Dispatch("DELETE", entry, {}, "").status, 404);
}

TEST(Service, LogPaginates) {
  auto files = sfix::Write("page", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files), {}, sfix::FixedClock());
  for (int i = 0; i < 5; ++i) {
    auto open = svc.Dispatch("POST", "/v1/sessions", {}, Json{{"prompt", "poetry sonnet"}}.dump());
    const std::string base = "/v1/sessions/" + open.body.at("session_id").get<std::string>();
    svc.Dispatch("POST", base + "/confirm", {}, "");
    svc.Dispatch("POST", base + "/execute", {}, "");
  }
  auto first = svc.Dispatch("GET", "/v1/log", {{"limit", "2"}}, "");
  ASSERT_EQ(first.body.at("items").size(), 2u);
  EXPECT_EQ(first.body.at("next_cursor"), 2);
  auto last = svc.Dispatch("GET", "/v1/log", {{"limit", "3"}, {"cursor", "2"}}, "");
  EXPECT_EQ(last.body.at("items").size(), 3u);
  EXPECT_EQ(last.body.at("next_cursor"), nullptr);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/log", {{"limit", "0"}}, "").status, 400);
}

TEST(Service, ConcurrentFlowsOverHttp) {
  auto files = sfix::Write("concurrent", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files), {}, sfix::FixedClock());
  svc.Start();
  std::atomic<int> ok{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client http("127.0.0.1", svc.port());
      for (int i = 0; i < 10; ++i) {
        const auto prompt = dfix::CentroidPrompts()[(t + i) % 4];
        auto open = http.Post("/v1/sessions", Json{{"prompt", prompt}}.dump(), "application/json");
        if (!open || open->status != 201) continue;
        const auto base = "/v1/sessions/" + Json::parse(open->body).at("session_id").get<std::string>();
        http.Post((base + "/confirm").c_str(), "{}", "application/json");
        auto ex = http.Post((base + "/execute").c_str(), "{}", "application/json");
        if (ex && ex->status == 200 && Json::parse(ex->body).at("status") == "EXECUTED") ++ok;
      }
    });
  }
  for (auto& th : threads) th.join();
  svc.Stop();
  EXPECT_EQ(ok.load(), 40);
  EXPECT_EQ(svc.store().Export().size(), 40u);
}

TEST(Service, HttpMatchesEngine) {
  const auto st = sfix::RunHttpParity(20, 5, "parity_unit");
  EXPECT_EQ(st.flows, 20);
  EXPECT_EQ(st.mismatches, 0) << st.first_mismatch;
}

TEST(Service, ReloadRejectsMismatch) {
  auto files = sfix::Write("reload", dfix::StandardProfile(), Tau(0.3));
  tad::DelegationService svc(sfix::Config(files));
  EXPECT_EQ(svc.Dispatch("POST", "/v1/admin/reload", {}, "").status, 200);
  auto art = tad::LoadSignalArtifact(files.signals);
  art.task_model_version = "0";
  tad::SaveSignalArtifact(art, files.signals);
  EXPECT_EQ(svc.Dispatch("POST", "/v1/admin/reload", {}, "").status, 409);
  EXPECT_EQ(svc.Dispatch("GET", "/v1/healthz", {}, "").status, 200);
}

}  // namespace
