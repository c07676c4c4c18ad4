#pragma once

// Append-only change log. Every record is one line
//
//   <decimal byte length> <8 hex digit CRC-32> <JSON>\n
//
// where length and CRC cover the JSON text. The first record is the header;
// every later record is one change event. Evidence frames are PNG files named
// by the SHA-256 of their bytes.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twindelta/image_io.hpp"
#include "twindelta/scene.hpp"

namespace twindelta {

inline constexpr int kLogSchemaVersion = 1;

struct LogHeader {
  int schema_version = kLogSchemaVersion;
  std::string scene_id;
  std::string created_at;
  SceneState initial_state;

  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

/// In-memory log enforcing the append rules.
class ChangeLog {
 public:
  explicit ChangeLog(LogHeader header);

  const LogHeader& header() const noexcept { return header_; }
  const std::vector<ChangeEvent>& events() const noexcept { return events_; }

  /// Throws OutOfOrderEvent if frame_index precedes the latest event and
  /// UnknownObject if object_id is not in the initial state.
  void append(ChangeEvent event);
  /// The same checks without appending.
  void check(const ChangeEvent& event) const;

 private:
  LogHeader header_;
  std::vector<ChangeEvent> events_;
};

std::uint32_t crc32_of(std::string_view text);

/// One framed record, including the trailing newline.
std::string frame_record(const nlohmann::ordered_json& record);

nlohmann::ordered_json header_to_json(const LogHeader& header);
nlohmann::ordered_json event_to_json(const ChangeEvent& event);
nlohmann::ordered_json scene_state_to_json(const SceneState& state);
/// Throw CorruptLog on schema violations.
LogHeader header_from_json(const nlohmann::json& j);
ChangeEvent event_from_json(const nlohmann::json& j);
SceneState scene_state_from_json(const nlohmann::json& j);

/// Whole serialised log.
std::string serialize_log(const ChangeLog& log);

struct ParseOptions {
  /// Accept a final record cut short (no newline) by dropping it. A cut record
  /// is otherwise CorruptLog.
  bool allow_torn_tail = false;
};

struct ParsedLog {
  ChangeLog log;
  bool torn_tail = false;
  std::size_t valid_bytes = 0;  // length of the intact prefix
};

/// Throws CorruptLog on any framing, checksum, schema or ordering violation.
ParsedLog parse_log(std::string_view bytes, ParseOptions options = {});
ParsedLog read_log(const std::filesystem::path& path, ParseOptions options = {});

/// Durable appender: each append is a single write followed by fsync.
class ChangeLogWriter {
 public:
  /// Creates a new log; throws IoFailure if the file already exists.
  static ChangeLogWriter create(const std::filesystem::path& path, LogHeader header);
  /// Opens an existing, intact log for further appends.
  static ChangeLogWriter open(const std::filesystem::path& path);

  ChangeLogWriter(ChangeLogWriter&& other) noexcept;
  ChangeLogWriter& operator=(ChangeLogWriter&& other) noexcept;
  ~ChangeLogWriter();

  void append(const ChangeEvent& event);
  const ChangeLog& log() const noexcept { return log_; }

 private:
  ChangeLogWriter(int fd, ChangeLog log) : fd_(fd), log_(std::move(log)) {}
  void write_all(const std::string& bytes);

  int fd_ = -1;
  ChangeLog log_;
};

/// State after applying every event with frame_index <= as_of.
SceneState replay(const ChangeLog& log, FrameIndex as_of);
/// Applies the events in (state.as_of_frame, as_of] on top of state.
SceneState replay_from(const SceneState& state, std::span<const ChangeEvent> events,
                       FrameIndex as_of);

/// Content-addressed PNG store.
class EvidenceStore {
 public:
  explicit EvidenceStore(std::filesystem::path dir);

  /// Encodes the frame, writes <sha256>.png if absent, returns the hash.
  std::string put(const GrayFrame& frame);
  std::filesystem::path path_of(const std::string& hash) const;
  /// Throws CorruptLog when the file is missing or its hash differs.
  void verify(const std::string& hash) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Verifies every evidence reference of a log.
void verify_evidence(const ChangeLog& log, const EvidenceStore& store);

struct StorageFootprint {
  std::uint64_t event_bytes = 0;
  std::uint64_t evidence_bytes = 0;
  std::uint64_t hypothetical_full_video_bytes = 0;

  std::uint64_t total() const noexcept { return event_bytes + evidence_bytes; }
  double ratio() const noexcept;
};

/// Log file size plus distinct referenced evidence files, against
/// frame_bytes * total_frames of raw video.
StorageFootprint storage_footprint(const std::filesystem::path& log_path,
                                   const EvidenceStore& store, std::uint64_t frame_bytes,
                                   std::uint64_t total_frames);

/// ISO-8601 UTC with millisecond precision.
std::string iso8601_utc(std::chrono::system_clock::time_point t);

}  // namespace twindelta
