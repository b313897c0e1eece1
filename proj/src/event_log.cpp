#include "frm/event_log.hpp"

#include <iterator>
#include <optional>
#include <stdexcept>

#include "frm/error.hpp"
#include "frm/hash.hpp"

namespace frm::sim {

using nlohmann::json;

void EventLog::append(std::int64_t t, std::string type, std::string sid, json data) {
  if (!records_.empty() && t < records_.back().t) {
    throw std::logic_error("event log timestamp regression at " + std::to_string(t) + " (" + type +
                           ")");
  }
  records_.push_back({t, std::move(type), std::move(sid), std::move(data)});
}

std::string EventLog::line(const Record& r) const {
  json j = {{"t", r.t}, {"type", r.type}, {"seed", seed_}, {"cfg", config_hash_},
            {"data", r.data}};
  if (!r.sid.empty()) j["sid"] = r.sid;
  return j.dump();
}

std::string EventLog::serialize() const {
  std::string out;
  for (const auto& r : records_) {
    out += line(r);
    out += '\n';
  }
  return out;
}

std::string EventLog::digest() const { return hex64(fnv1a64(serialize())); }

EventLog parse_log(std::string_view text) {
  EventLog log;
  std::optional<std::string> cfg;
  std::optional<std::uint64_t> seed;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("truncated record (no newline)", line_no);
    const auto body = text.substr(pos, nl - pos);
    pos = nl + 1;
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    try {
      if (!j.is_object()) throw ParseError("record is not an object", line_no);
      for (const auto& [k, _] : j.items()) {
        if (k != "t" && k != "type" && k != "seed" && k != "cfg" && k != "data" && k != "sid")
          throw ParseError("unknown record field '" + k + "'", line_no);
      }
      const auto c = j.at("cfg").get<std::string>();
      const auto s = j.at("seed").get<std::uint64_t>();
      if (!cfg) {
        cfg = c;
        seed = s;
        log = EventLog(c, s);
      } else if (*cfg != c || *seed != s) {
        throw ParseError("record belongs to a different run", line_no);
      }
      if (!j.at("data").is_object()) throw ParseError("data must be an object", line_no);
      std::string sid = j.contains("sid") ? j["sid"].get<std::string>() : std::string();
      log.append(j.at("t").get<std::int64_t>(), j.at("type").get<std::string>(), std::move(sid),
                 j["data"]);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    } catch (const std::logic_error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return log;
}

EventLog read_log(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_log(text);
}

}  // namespace frm::sim
