#include "tad/accountability.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tad {

Json ToJson(const AccountabilityEntry& e) {
  Json j = {{"entry_id", e.entry_id},
            {"timestamp", e.timestamp},
            {"cluster", e.cluster},
            {"overridden", e.overridden},
            {"primary_model", e.primary_model},
            {"auditor_model", e.auditor_model ? Json(*e.auditor_model) : Json(nullptr)},
            {"risk_value", e.risk_value ? Json(*e.risk_value) : Json(nullptr)},
            {"safeguards", e.safeguards},
            {"status", e.status},
            {"repair_or_handoff_note",
             e.repair_or_handoff_note ? Json(*e.repair_or_handoff_note) : Json(nullptr)},
            {"prompt_retained", e.prompt_text.has_value()}};
  if (e.prompt_text) j["prompt_text"] = *e.prompt_text;
  return j;
}

namespace {

template <typename T>
std::optional<T> OptionalField(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

AccountabilityEntry EntryFromJson(const Json& j) {
  AccountabilityEntry e;
  e.entry_id = j.at("entry_id").get<std::uint64_t>();
  e.timestamp = j.at("timestamp").get<std::string>();
  e.cluster = j.at("cluster").get<int>();
  e.overridden = j.at("overridden").get<bool>();
  e.primary_model = j.at("primary_model").get<std::string>();
  e.auditor_model = OptionalField<std::string>(j, "auditor_model");
  e.risk_value = OptionalField<double>(j, "risk_value");
  e.safeguards = j.at("safeguards").get<std::vector<std::string>>();
  e.status = j.at("status").get<std::string>();
  e.repair_or_handoff_note = OptionalField<std::string>(j, "repair_or_handoff_note");
  e.prompt_text = OptionalField<std::string>(j, "prompt_text");
  return e;
}

Json ToJson(const Tombstone& t) {
  return {{"entry_id", t.entry_id}, {"deleted_at", t.deleted_at}, {"forgotten", true}};
}

std::uint64_t ItemId(const LogItem& item) {
  return std::visit([](const auto& v) { return v.entry_id; }, item);
}

Json ToJson(const LogItem& item) {
  return std::visit([](const auto& v) { return ToJson(v); }, item);
}

std::string EncodeLogRecord(const LogItem& item) {
  Json j;
  if (const auto* e = std::get_if<AccountabilityEntry>(&item)) {
    j = {{"type", "entry"}, {"entry", ToJson(*e)}};
  } else {
    const auto& t = std::get<Tombstone>(item);
    j = {{"type", "tombstone"}, {"entry_id", t.entry_id}, {"deleted_at", t.deleted_at}};
  }
  const std::string body = j.dump();
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
  out += body;
  return out;
}

std::vector<LogItem> DecodeLogRecords(std::string_view bytes) {
  std::vector<LogItem> items;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) {
      throw Error(ErrorKind::kCorrupted, "truncated log record header",
                  {{"offset", pos}});
    }
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) {
      n |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += 4;
    if (bytes.size() - pos < n) {
      throw Error(ErrorKind::kCorrupted, "truncated log record body", {{"offset", pos}});
    }
    try {
      const Json j = Json::parse(bytes.substr(pos, n));
      const auto type = j.at("type").get<std::string>();
      if (type == "entry") {
        items.emplace_back(EntryFromJson(j.at("entry")));
      } else if (type == "tombstone") {
        items.emplace_back(Tombstone{j.at("entry_id").get<std::uint64_t>(),
                                     j.at("deleted_at").get<std::string>()});
      } else {
        throw Error(ErrorKind::kCorrupted, "unknown log record type '" + type + "'");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kCorrupted, std::string("malformed log record: ") + e.what(),
                  {{"offset", pos}});
    }
    pos += n;
  }
  return items;
}

AccountabilityStore::AccountabilityStore(std::string path, Clock clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return ResolveCreatedAt(); };
  if (std::filesystem::exists(path_)) {
    items_ = DecodeLogRecords(ReadFile(path_));
    for (std::size_t i = 1; i < items_.size(); ++i) {
      if (ItemId(items_[i]) <= ItemId(items_[i - 1])) {
        throw Error(ErrorKind::kCorrupted, "log ids are not strictly increasing");
      }
    }
    if (!items_.empty()) next_id_ = ItemId(items_.back()) + 1;
  } else {
    std::ofstream touch(path_, std::ios::binary);
    if (!touch) throw Error(ErrorKind::kUnavailable, "cannot create log '" + path_ + "'");
  }
}

AccountabilityEntry AccountabilityStore::Append(AccountabilityEntry draft) {
  std::lock_guard lock(mu_);
  draft.entry_id = next_id_;
  draft.timestamp = clock_();
  const std::string record = EncodeLogRecord(draft);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::kUnavailable, "log store '" + path_ + "' is unavailable");
  out.write(record.data(), static_cast<std::streamsize>(record.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::kUnavailable, "write to log store '" + path_ + "' failed");
  ++next_id_;
  items_.emplace_back(draft);
  return draft;
}

namespace {

template <typename Items>
auto FindItem(Items& items, std::uint64_t id) {
  auto it = std::lower_bound(items.begin(), items.end(), id,
                             [](const LogItem& item, std::uint64_t v) { return ItemId(item) < v; });
  return it != items.end() && ItemId(*it) == id ? it : items.end();
}

}  // namespace

AccountabilityEntry AccountabilityStore::Get(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  auto it = FindItem(items_, id);
  if (it == items_.end()) {
    throw Error(ErrorKind::kNotFound, "no log entry " + std::to_string(id));
  }
  if (const auto* t = std::get_if<Tombstone>(&*it)) {
    throw Error(ErrorKind::kNotFound, "log entry " + std::to_string(id) + " was forgotten",
                {{"tombstone", ToJson(*t)}});
  }
  return std::get<AccountabilityEntry>(*it);
}

Tombstone AccountabilityStore::Forget(std::uint64_t id) {
  std::lock_guard lock(mu_);
  auto it = FindItem(items_, id);
  if (it == items_.end()) {
    throw Error(ErrorKind::kNotFound, "no log entry " + std::to_string(id));
  }
  if (const auto* t = std::get_if<Tombstone>(&*it)) {
    throw Error(ErrorKind::kNotFound, "log entry " + std::to_string(id) + " was already forgotten",
                {{"tombstone", ToJson(*t)}});
  }
  const LogItem previous = *it;
  Tombstone t{id, clock_()};
  *it = t;
  try {
    WriteAll();
  } catch (...) {
    *it = previous;
    throw;
  }
  return t;
}

void AccountabilityStore::WriteAll() const {
  std::string image;
  for (const auto& item : items_) image += EncodeLogRecord(item);
  WriteFileAtomic(path_, image);
}

std::vector<LogItem> AccountabilityStore::List(std::uint64_t cursor, std::size_t limit) const {
  std::lock_guard lock(mu_);
  std::vector<LogItem> out;
  auto it = std::upper_bound(items_.begin(), items_.end(), cursor,
                             [](std::uint64_t v, const LogItem& item) { return v < ItemId(item); });
  for (; it != items_.end() && (limit == 0 || out.size() < limit); ++it) out.push_back(*it);
  return out;
}

std::vector<AccountabilityEntry> AccountabilityStore::Export() const {
  std::lock_guard lock(mu_);
  std::vector<AccountabilityEntry> out;
  for (const auto& item : items_) {
    if (const auto* e = std::get_if<AccountabilityEntry>(&item)) out.push_back(*e);
  }
  return out;
}

std::string AccountabilityStore::ExportJsonl() const {
  std::string out;
  for (const auto& e : Export()) out += ToJson(e).dump() + "\n";
  return out;
}

std::map<int, std::int64_t> AccountabilityStore::ClusterCounts() const {
  std::map<int, std::int64_t> counts;
  for (const auto& e : Export()) ++counts[e.cluster];
  return counts;
}

std::size_t AccountabilityStore::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

void AccountabilityStore::Flush() {
  // Appends are flushed as they happen; this rewrites the image so a store
  // handed a damaged tail (external truncation) is made whole again.
  std::lock_guard lock(mu_);
  WriteAll();
}

std::int64_t TwoSidedGeometric(double epsilon, std::mt19937_64& rng) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "noise epsilon must be positive");
  const double log_alpha = -epsilon;
  auto geometric = [&] {
    const double u = 1.0 - UniformUnit(rng);  // (0, 1]
    return static_cast<std::int64_t>(std::floor(std::log(u) / log_alpha));
  };
  const std::int64_t a = geometric();
  const std::int64_t b = geometric();
  return a - b;
}

std::map<int, std::int64_t> NoisyClusterCounts(const std::map<int, std::int64_t>& exact,
                                               int cluster_count, const std::set<int>& sensitive,
                                               double epsilon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<int, std::int64_t> out;
  std::int64_t total = 0;
  for (const auto& [c, v] : exact) total += v;
  // An empty log has nothing to protect; release zeros rather than noise.
  const bool add_noise = total > 0;
  for (int c = 0; c < cluster_count; ++c) {
    auto it = exact.find(c);
    std::int64_t v = it == exact.end() ? 0 : it->second;
    if (add_noise && sensitive.count(c)) v = std::max<std::int64_t>(0, v + TwoSidedGeometric(epsilon, rng));
    out[c] = v;
  }
  return out;
}

}  // namespace tad
