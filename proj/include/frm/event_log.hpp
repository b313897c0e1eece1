#pragma once

// Append-only event stream. One JSON object per line with sorted keys, so the
// serialized form is a pure function of the records.

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace frm::sim {

struct Record {
  std::int64_t t = 0;
  std::string type;
  std::string sid;  // empty for fleet-level records
  nlohmann::json data = nlohmann::json::object();

  bool operator==(const Record&) const = default;
};

class EventLog {
 public:
  EventLog() = default;
  EventLog(std::string config_hash, std::uint64_t seed)
      : config_hash_(std::move(config_hash)), seed_(seed) {}

  // Throws std::logic_error if t goes backwards.
  void append(std::int64_t t, std::string type, std::string sid,
              nlohmann::json data = nlohmann::json::object());

  const std::vector<Record>& records() const { return records_; }
  const std::string& config_hash() const { return config_hash_; }
  std::uint64_t seed() const { return seed_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }

  std::string line(const Record& r) const;
  std::string serialize() const;  // newline-terminated lines
  std::string digest() const;     // FNV-1a of serialize()

 private:
  std::string config_hash_;
  std::uint64_t seed_ = 0;
  std::vector<Record> records_;
};

// Throws ParseError carrying the 1-based line number of the first bad line,
// including a missing trailing newline on the final record.
EventLog parse_log(std::string_view text);
EventLog read_log(std::istream& in);

}  // namespace frm::sim
