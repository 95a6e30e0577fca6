#include "mmtk/record.hpp"

#include "mmtk/error.hpp"
#include "mmtk/transcript.hpp"

namespace mmtk {

namespace {

bool contains_protocol_token(std::string_view s) {
  return s.find(kThinkOpen) != std::string_view::npos || s.find(kThinkClose) != std::string_view::npos ||
         s.find(kNoThink) != std::string_view::npos;
}

const std::vector<std::string>& allowed_keys() {
  static const std::vector<std::string> keys{"id",    "images",      "conversations", "mode",
                                             "think", "final",       "annotations",   "meta"};
  return keys;
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Reason ? "reason" : "direct"; }
std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

void SampleRecord::validate() const {
  if (mode == Mode::Reason && !think) throw InputError("record " + id + ": reason mode requires think");
  if (mode == Mode::Direct && think) throw InputError("record " + id + ": direct mode must not carry think");
  if (final.empty()) throw InputError("record " + id + ": final answer is empty");
  if (final.find_first_of(" \t\r\n\f\v") == 0) throw InputError("record " + id + ": final starts with whitespace");
  if (contains_protocol_token(final) || (think && contains_protocol_token(*think))) {
    throw InputError("record " + id + ": protocol token inside think/final");
  }
}

std::string_view SampleRecord::last_user_text() const {
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->role == Role::User) return it->text;
  }
  return {};
}

SampleRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const auto& k : allowed_keys()) known = known || k == key;
    if (!known) throw InputError("unknown record field \"" + key + "\"");
  }
  try {
    SampleRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.images = j.at("images").get<std::vector<std::string>>();
    for (const auto& t : j.at("conversations")) {
      const auto role = t.at("role").get<std::string>();
      Turn turn;
      if (role == "user") {
        turn.role = Role::User;
      } else if (role == "assistant") {
        turn.role = Role::Assistant;
      } else {
        throw InputError("record " + rec.id + ": unknown role \"" + role + "\"");
      }
      turn.text = t.at("text").get<std::string>();
      rec.turns.push_back(std::move(turn));
    }
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "reason") {
      rec.mode = Mode::Reason;
    } else if (mode == "direct") {
      rec.mode = Mode::Direct;
    } else {
      throw InputError("record " + rec.id + ": unknown mode \"" + mode + "\"");
    }
    if (j.contains("think") && !j["think"].is_null()) rec.think = j["think"].get<std::string>();
    rec.final = j.at("final").get<std::string>();
    if (j.contains("annotations") && !j["annotations"].is_null()) {
      std::vector<Annotation> anns;
      for (const auto& a : j["annotations"]) {
        Annotation ann;
        const auto kind = a.at("kind").get<std::string>();
        std::size_t expected = 0;
        if (kind == "point") {
          ann.kind = AnnotationKind::Point;
          expected = 2;
        } else if (kind == "rect") {
          ann.kind = AnnotationKind::Rect;
          expected = 4;
        } else {
          throw InputError("record " + rec.id + ": unknown annotation kind \"" + kind + "\"");
        }
        ann.coords = a.at("coords").get<std::vector<double>>();
        if (ann.coords.size() != expected) {
          throw InputError("record " + rec.id + ": " + kind + " annotation needs " + std::to_string(expected) +
                           " coords");
        }
        ann.label = a.value("label", std::string{});
        anns.push_back(std::move(ann));
      }
      rec.annotations = std::move(anns);
    }
    if (j.contains("meta") && !j["meta"].is_null()) {
      if (!j["meta"].is_object()) throw InputError("record " + rec.id + ": meta must be an object");
      rec.meta = j["meta"];
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("record schema violation: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const SampleRecord& rec) {
  nlohmann::ordered_json j;
  j["id"] = rec.id;
  j["images"] = rec.images;
  auto convs = nlohmann::ordered_json::array();
  for (const Turn& t : rec.turns) {
    nlohmann::ordered_json tj;
    tj["role"] = std::string(to_string(t.role));
    tj["text"] = t.text;
    convs.push_back(tj);
  }
  j["conversations"] = convs;
  j["mode"] = std::string(to_string(rec.mode));
  if (rec.think) j["think"] = *rec.think;
  j["final"] = rec.final;
  if (rec.annotations) {
    auto anns = nlohmann::ordered_json::array();
    for (const Annotation& a : *rec.annotations) {
      nlohmann::ordered_json aj;
      aj["kind"] = a.kind == AnnotationKind::Point ? "point" : "rect";
      aj["coords"] = a.coords;
      aj["label"] = a.label;
      anns.push_back(aj);
    }
    j["annotations"] = anns;
  }
  if (!rec.meta.is_null()) j["meta"] = nlohmann::ordered_json::parse(rec.meta.dump());
  return j;
}

std::string to_jsonl_line(const SampleRecord& rec) { return to_json(rec).dump(); }

void add_provenance(SampleRecord& rec, std::string_view source_id, std::string_view transform,
                    std::optional<std::uint64_t> seed, const nlohmann::json& extra) {
  if (rec.meta.is_null()) rec.meta = nlohmann::json::object();
  nlohmann::json prov = nlohmann::json::object();
  prov["source_id"] = std::string(source_id);
  prov["transform"] = std::string(transform);
  if (seed) prov["seed"] = *seed;
  for (const auto& [k, v] : extra.items()) prov[k] = v;
  if (rec.meta.contains("provenance")) prov["previous"] = rec.meta["provenance"];
  rec.meta["provenance"] = prov;
}

bool JsonlReader::next(Line& line) {
  std::string buf;
  while (std::getline(in_, buf)) {
    const std::uint64_t start = offset_;
    offset_ += buf.size() + 1;
    ++line_no_;
    if (!buf.empty() && buf.back() == '\r') buf.pop_back();
    if (buf.find_first_not_of(" \t") == std::string::npos) continue;
    line.text = std::move(buf);
    line.number = line_no_;
    line.byte_offset = start;
    return true;
  }
  return false;
}

SampleRecord parse_record_line(const JsonlReader::Line& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line.text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based within the line.
    const std::uint64_t at = line.byte_offset + (e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("line " + std::to_string(line.number) + ", byte " + std::to_string(at) +
                         ": invalid JSON: " + e.what(),
                     at, line.number);
  }
  try {
    return record_from_json(j);
  } catch (const InputError& e) {
    throw ParseError("line " + std::to_string(line.number) + ", byte " + std::to_string(line.byte_offset) + ": " +
                         e.what(),
                     line.byte_offset, line.number);
  }
}

std::vector<SampleRecord> read_records(std::istream& in) {
  JsonlReader reader(in);
  JsonlReader::Line line;
  std::vector<SampleRecord> out;
  while (reader.next(line)) out.push_back(parse_record_line(line));
  return out;
}

void write_records(std::ostream& out, const std::vector<SampleRecord>& records) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

}  // namespace mmtk
