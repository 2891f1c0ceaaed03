#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tad/accountability.hpp"

namespace {

std::string Fresh(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("tad_acc_" + name);
  std::filesystem::remove(p);
  return p.string();
}

tad::AccountabilityEntry Draft(int cluster, const std::string& model = "m-a") {
  tad::AccountabilityEntry e;
  e.cluster = cluster;
  e.primary_model = model;
  e.status = "EXECUTED";
  e.safeguards = {};
  return e;
}

tad::AccountabilityStore::Clock Fixed() {
  return [] { return std::string("2026-01-01T00:00:00Z"); };
}

TEST(Store, AppendAssignsIncreasingIds) {
  tad::AccountabilityStore s(Fresh("ids"), Fixed());
  const auto a = s.Append(Draft(0));
  const auto b = s.Append(Draft(1));
  EXPECT_LT(a.entry_id, b.entry_id);
  EXPECT_EQ(s.Get(b.entry_id), b);
}

TEST(Store, ForgetThenRead) {
  tad::AccountabilityStore s(Fresh("forget"), Fixed());
  const auto a = s.Append(Draft(2, "secret-model"));
  s.Append(Draft(3));
  const auto t = s.Forget(a.entry_id);
  EXPECT_EQ(t.entry_id, a.entry_id);
  try {
    s.Get(a.entry_id);
    FAIL();
  } catch (const tad::Error& e) {
    EXPECT_EQ(e.kind(), tad::ErrorKind::kNotFound);
    EXPECT_EQ(e.details().at("tombstone").at("entry_id"), a.entry_id);
  }
  for (const auto& e : s.Export()) EXPECT_NE(e.entry_id, a.entry_id);
  EXPECT_EQ(s.ExportJsonl().find("secret-model"), std::string::npos);
  EXPECT_EQ(s.ClusterCounts().count(2), 0u);
  // Forgetting twice, or an unknown id, is an error.
  EXPECT_THROW(s.Forget(a.entry_id), tad::Error);
  EXPECT_THROW(s.Forget(999), tad::Error);
}

TEST(Store, ForgottenEntryLeavesNoBytes) {
  const auto path = Fresh("bytes");
  {
    tad::AccountabilityStore s(path, Fixed());
    s.Append(Draft(1, "needle-model-xyz"));
    s.Forget(1);
  }
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes.find("needle-model-xyz"), std::string::npos);
  tad::AccountabilityStore reopened(path, Fixed());
  EXPECT_THROW(reopened.Get(1), tad::Error);
  EXPECT_EQ(reopened.size(), 1u);  // the tombstone
}

TEST(Store, RestartReplayIsIdentical) {
  const auto path = Fresh("replay");
  std::string before;
  std::vector<tad::LogItem> items;
  {
    tad::AccountabilityStore s(path, Fixed());
    for (int i = 0; i < 10; ++i) {
      auto d = Draft(i % 3);
      if (i % 2) d.risk_value = 0.25 * i;
      if (i == 4) d.prompt_text = "retained text";
      s.Append(d);
    }
    s.Forget(3);
    items = s.List();
    before = s.ExportJsonl();
  }
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  tad::AccountabilityStore s(path, Fixed());
  EXPECT_EQ(s.List(), items);
  EXPECT_EQ(s.ExportJsonl(), before);
  s.Flush();
  std::ifstream again(path, std::ios::binary);
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>()), bytes);
  // Ids continue after the replayed maximum.
  EXPECT_EQ(s.Append(Draft(0)).entry_id, 11u);
}

TEST(Store, ListPaginates) {
  tad::AccountabilityStore s(Fresh("page"), Fixed());
  for (int i = 0; i < 7; ++i) s.Append(Draft(i));
  const auto first = s.List(0, 3);
  ASSERT_EQ(first.size(), 3u);
  const auto next = s.List(tad::ItemId(first.back()), 3);
  EXPECT_EQ(tad::ItemId(next.front()), 4u);
  EXPECT_EQ(s.List(6, 0).size(), 1u);
}

TEST(Store, TruncatedFileIsCorrupted) {
  const auto path = Fresh("trunc");
  {
    tad::AccountabilityStore s(path, Fixed());
    s.Append(Draft(0));
  }
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  try {
    tad::AccountabilityStore s(path, Fixed());
    FAIL();
  } catch (const tad::Error& e) {
    EXPECT_EQ(e.kind(), tad::ErrorKind::kCorrupted);
  }
}

TEST(Store, RecordEncodingRoundTrip) {
  tad::AccountabilityEntry e = Draft(5);
  e.entry_id = 9;
  e.auditor_model = "m-b";
  e.risk_value = 0.4;
  const std::string bytes = tad::EncodeLogRecord(e) + tad::EncodeLogRecord(tad::Tombstone{3, "t"});
  const auto items = tad::DecodeLogRecords(bytes);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(std::get<tad::AccountabilityEntry>(items[0]), e);
  EXPECT_EQ(std::get<tad::Tombstone>(items[1]).entry_id, 3u);
  // Length prefix is little-endian.
  const auto n = static_cast<unsigned char>(bytes[0]) | static_cast<unsigned char>(bytes[1]) << 8;
  EXPECT_EQ(bytes[4], '{');
  EXPECT_EQ(bytes[4 + n - 1], '}');
}

TEST(Noise, NoSensitiveClustersIsExact) {
  const std::map<int, std::int64_t> exact = {{0, 3}, {2, 7}};
  const auto out = tad::NoisyClusterCounts(exact, 4, {}, 1.0, 5);
  EXPECT_EQ(out, (std::map<int, std::int64_t>{{0, 3}, {1, 0}, {2, 7}, {3, 0}}));
}

TEST(Noise, SeededRedrawReproduces) {
  const std::map<int, std::int64_t> exact = {{0, 30}, {1, 12}, {2, 7}};
  const std::set<int> sensitive = {0, 2};
  const double eps = 0.5;
  const auto out = tad::NoisyClusterCounts(exact, 3, sensitive, eps, 77);
  EXPECT_EQ(out, tad::NoisyClusterCounts(exact, 3, sensitive, eps, 77));
  // Re-draw: difference of two geometric variables per sensitive cluster, in
  // ascending order, by inversion of 53-bit uniforms from the seeded engine.
  std::mt19937_64 rng(77);
  auto geo = [&] {
    const double u = 1.0 - static_cast<double>(rng() >> 11) / 9007199254740992.0;
    return static_cast<std::int64_t>(std::floor(std::log(u) / -eps));
  };
  std::int64_t g[4];
  for (auto& v : g) v = geo();
  const std::int64_t n0 = g[0] - g[1];
  const std::int64_t n2 = g[2] - g[3];
  EXPECT_EQ(out.at(0), std::max<std::int64_t>(0, 30 + n0));
  EXPECT_EQ(out.at(1), 12);
  EXPECT_EQ(out.at(2), std::max<std::int64_t>(0, 7 + n2));
}

TEST(Noise, EmptyStoreReleasesZeros) {
  const auto out = tad::NoisyClusterCounts({}, 3, {0, 1, 2}, 0.1, 1);
  for (const auto& [c, v] : out) EXPECT_EQ(v, 0);
}

TEST(Noise, TwoSidedGeometricMoments) {
  std::mt19937_64 rng(3);
  const double eps = 0.7, alpha = std::exp(-eps);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(tad::TwoSidedGeometric(eps, rng));
    sum += x;
    sq += x * x;
  }
  const double var = 2 * alpha / ((1 - alpha) * (1 - alpha));
  EXPECT_NEAR(sum / n, 0.0, 4 * std::sqrt(var / n));
  EXPECT_NEAR(sq / n, var, 0.05 * var);
}

}  // namespace
