#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mmtk {

enum class Role { User, Assistant };
enum class Mode { Reason, Direct };
enum class AnnotationKind { Point, Rect };

struct Turn {
  Role role = Role::User;
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

// Coordinates are stored as read so that out-of-range values survive to lint.
// A point has 2 coords (x, y), a rect 4 (x, y, w, h).
struct Annotation {
  AnnotationKind kind = AnnotationKind::Point;
  std::vector<double> coords;
  std::string label;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct SampleRecord {
  std::string id;
  std::vector<std::string> images;
  std::vector<Turn> turns;
  Mode mode = Mode::Direct;
  std::optional<std::string> think;
  std::string final;
  std::optional<std::vector<Annotation>> annotations;
  nlohmann::json meta;  // null or object

  // Throws InputError when mode/think/final disagree or a protocol token
  // leaks into think/final.
  void validate() const;

  // Text of the last user turn, or empty.
  std::string_view last_user_text() const;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

std::string_view to_string(Mode m);
std::string_view to_string(Role r);

// JSONL schema. Unknown top-level keys are rejected.
SampleRecord record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SampleRecord& rec);

// One compact JSON line, no trailing newline.
std::string to_jsonl_line(const SampleRecord& rec);

// Adds {"source_id", "transform", "seed", ...extra} under meta.provenance.
void add_provenance(SampleRecord& rec, std::string_view source_id, std::string_view transform,
                    std::optional<std::uint64_t> seed, const nlohmann::json& extra = nlohmann::json::object());

// Streams JSONL one line at a time, tracking byte offsets for diagnostics.
class JsonlReader {
 public:
  explicit JsonlReader(std::istream& in) : in_(in) {}

  struct Line {
    std::string text;
    std::uint64_t number = 0;       // 1-based
    std::uint64_t byte_offset = 0;  // of the first byte of the line
  };

  // Skips blank lines. Returns false at end of stream.
  bool next(Line& line);

 private:
  std::istream& in_;
  std::uint64_t line_no_ = 0;
  std::uint64_t offset_ = 0;
};

// Parses one JSONL line into a record; ParseError carries the absolute byte
// offset of the failure.
SampleRecord parse_record_line(const JsonlReader::Line& line);

std::vector<SampleRecord> read_records(std::istream& in);
void write_records(std::ostream& out, const std::vector<SampleRecord>& records);

}  // namespace mmtk
