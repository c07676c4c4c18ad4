#include "twindelta/changelog.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <set>

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>
#include <zlib.h>

#include "twindelta/error.hpp"

namespace twindelta {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void corrupt(const std::string& msg) { throw Error(ErrorCode::CorruptLog, msg); }

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) corrupt(std::string("missing field ") + key);
  return *it;
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) corrupt(std::string("field ") + key + " must be a string");
  return v.get<std::string>();
}

double number_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) corrupt(std::string("field ") + key + " must be a number");
  return v.get<double>();
}

FrameIndex integer_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) corrupt(std::string("field ") + key + " must be an integer");
  return v.get<FrameIndex>();
}

ordered_json pose_to_json(const Pose& p) {
  return ordered_json{{"azimuth", p.azimuth()}, {"elevation", p.elevation()},
                      {"inplane", p.inplane()}};
}

Pose pose_from_json(const json& j) {
  if (!j.is_object()) corrupt("pose must be an object");
  try {
    return normalize_pose(number_field(j, "azimuth"), number_field(j, "elevation"),
                          number_field(j, "inplane"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptLog) throw;
    corrupt(std::string("invalid pose: ") + e.what());
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

ChangeLog::ChangeLog(LogHeader header) : header_(std::move(header)) {
  if (header_.schema_version != kLogSchemaVersion) {
    throw Error(ErrorCode::InvalidArgument,
                "unsupported schema version " + std::to_string(header_.schema_version));
  }
}

void ChangeLog::check(const ChangeEvent& event) const {
  if (!header_.initial_state.objects.contains(event.object_id)) {
    throw Error(ErrorCode::UnknownObject, "object '" + event.object_id + "' is not in the scene");
  }
  if (!events_.empty() && event.frame_index < events_.back().frame_index) {
    throw Error(ErrorCode::OutOfOrderEvent,
                "event at frame " + std::to_string(event.frame_index) + " precedes frame " +
                    std::to_string(events_.back().frame_index));
  }
  if (event.frame_index < 0) {
    throw Error(ErrorCode::OutOfOrderEvent, "event frame index must be non-negative");
  }
}

void ChangeLog::append(ChangeEvent event) {
  check(event);
  events_.push_back(std::move(event));
}

std::uint32_t crc32_of(std::string_view text) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string frame_record(const ordered_json& record) {
  const std::string body = record.dump();
  char crc[16];
  std::snprintf(crc, sizeof(crc), "%08x", crc32_of(body));
  return std::to_string(body.size()) + " " + crc + " " + body + "\n";
}

ordered_json scene_state_to_json(const SceneState& state) {
  ordered_json objects = ordered_json::object();
  for (const auto& [id, obj] : state.objects) {
    objects[id] = ordered_json{{"mesh_ref", obj.mesh_ref}, {"pose", pose_to_json(obj.pose)}};
  }
  return ordered_json{{"as_of_frame", state.as_of_frame}, {"objects", objects}};
}

SceneState scene_state_from_json(const json& j) {
  if (!j.is_object()) corrupt("scene state must be an object");
  SceneState s;
  s.as_of_frame = integer_field(j, "as_of_frame");
  const json& objects = field(j, "objects");
  if (!objects.is_object()) corrupt("objects must be an object");
  for (const auto& [id, obj] : objects.items()) {
    if (!obj.is_object()) corrupt("object entry must be an object");
    s.objects[id] = ObjectState{string_field(obj, "mesh_ref"), pose_from_json(field(obj, "pose"))};
  }
  return s;
}

ordered_json header_to_json(const LogHeader& h) {
  return ordered_json{{"type", "header"},
                      {"schema_version", h.schema_version},
                      {"scene_id", h.scene_id},
                      {"created_at", h.created_at},
                      {"initial_state", scene_state_to_json(h.initial_state)}};
}

LogHeader header_from_json(const json& j) {
  if (!j.is_object() || string_field(j, "type") != "header") corrupt("first record is not a header");
  LogHeader h;
  h.schema_version = static_cast<int>(integer_field(j, "schema_version"));
  if (h.schema_version != kLogSchemaVersion) {
    corrupt("unsupported schema version " + std::to_string(h.schema_version));
  }
  h.scene_id = string_field(j, "scene_id");
  h.created_at = string_field(j, "created_at");
  h.initial_state = scene_state_from_json(field(j, "initial_state"));
  return h;
}

ordered_json event_to_json(const ChangeEvent& e) {
  const auto& d = e.delta;
  return ordered_json{
      {"type", "event"},
      {"object_id", e.object_id},
      {"frame_index", e.frame_index},
      {"timestamp", e.timestamp},
      {"delta",
       ordered_json{{"d_azimuth", d.d_azimuth},
                    {"d_elevation", d.d_elevation},
                    {"d_inplane", d.d_inplane},
                    {"d_translation", {d.d_translation[0], d.d_translation[1], d.d_translation[2]}}}},
      {"evidence", e.evidence}};
}

ChangeEvent event_from_json(const json& j) {
  if (!j.is_object() || string_field(j, "type") != "event") corrupt("record is not an event");
  ChangeEvent e;
  e.object_id = string_field(j, "object_id");
  e.frame_index = integer_field(j, "frame_index");
  e.timestamp = string_field(j, "timestamp");
  e.evidence = string_field(j, "evidence");
  const json& d = field(j, "delta");
  if (!d.is_object()) corrupt("delta must be an object");
  e.delta.d_azimuth = number_field(d, "d_azimuth");
  e.delta.d_elevation = number_field(d, "d_elevation");
  e.delta.d_inplane = number_field(d, "d_inplane");
  const json& t = field(d, "d_translation");
  if (!t.is_array() || t.size() != 3) corrupt("d_translation must have three entries");
  for (std::size_t k = 0; k < 3; ++k) {
    if (!t[k].is_number()) corrupt("d_translation entries must be numbers");
    e.delta.d_translation[k] = t[k].get<double>();
    if (e.delta.d_translation[k] != 0.0) corrupt("d_translation must be zero");
  }
  return e;
}

std::string serialize_log(const ChangeLog& log) {
  std::string out = frame_record(header_to_json(log.header()));
  for (const auto& e : log.events()) out += frame_record(event_to_json(e));
  return out;
}

ParsedLog parse_log(std::string_view bytes, ParseOptions options) {
  std::optional<ChangeLog> log;
  bool torn = false;
  std::size_t pos = 0;
  std::size_t record = 0;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (!options.allow_torn_tail || !log) {
        corrupt("record " + std::to_string(record) + " is truncated");
      }
      torn = true;
      break;
    }
    const std::string_view line = bytes.substr(pos, nl - pos);
    const std::string where = "record " + std::to_string(record) + ": ";
    const std::size_t sp1 = line.find(' ');
    if (sp1 == std::string_view::npos || sp1 == 0) corrupt(where + "missing length");
    std::size_t len = 0;
    auto [lp, lec] = std::from_chars(line.data(), line.data() + sp1, len);
    if (lec != std::errc{} || lp != line.data() + sp1) corrupt(where + "bad length");
    if (line.size() < sp1 + 10 || line[sp1 + 9] != ' ') corrupt(where + "bad checksum field");
    std::uint32_t crc = 0;
    const char* cs = line.data() + sp1 + 1;
    auto [cp, cec] = std::from_chars(cs, cs + 8, crc, 16);
    if (cec != std::errc{} || cp != cs + 8) corrupt(where + "bad checksum field");
    const std::string_view body = line.substr(sp1 + 10);
    if (body.size() != len) corrupt(where + "length mismatch");
    if (crc32_of(body) != crc) corrupt(where + "checksum mismatch");
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) corrupt(where + "invalid JSON");
    if (!log) {
      log.emplace(header_from_json(j));
    } else {
      try {
        log->append(event_from_json(j));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptLog) throw;
        corrupt(where + e.what());
      }
    }
    pos = nl + 1;
    ++record;
  }
  if (!log) corrupt("log has no header");
  return ParsedLog{std::move(*log), torn, pos};
}

ParsedLog read_log(const fs::path& path, ParseOptions options) {
  const std::string text = read_text(path);
  return parse_log(text, options);
}

ChangeLogWriter ChangeLogWriter::create(const fs::path& path, LogHeader header) {
  ChangeLog log(std::move(header));
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::IoFailure,
                "cannot create log " + path.string() + ": " + std::strerror(errno));
  }
  ChangeLogWriter w(fd, std::move(log));
  w.write_all(frame_record(header_to_json(w.log_.header())));
  fsync_dir(path.parent_path());
  return w;
}

ChangeLogWriter ChangeLogWriter::open(const fs::path& path) {
  ParsedLog parsed = read_log(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) {
    throw Error(ErrorCode::IoFailure, "cannot open log " + path.string() + ": " + std::strerror(errno));
  }
  return ChangeLogWriter(fd, std::move(parsed.log));
}

ChangeLogWriter::ChangeLogWriter(ChangeLogWriter&& other) noexcept
    : fd_(other.fd_), log_(std::move(other.log_)) {
  other.fd_ = -1;
}

ChangeLogWriter& ChangeLogWriter::operator=(ChangeLogWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    log_ = std::move(other.log_);
    other.fd_ = -1;
  }
  return *this;
}

ChangeLogWriter::~ChangeLogWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void ChangeLogWriter::write_all(const std::string& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoFailure, std::string("log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw Error(ErrorCode::IoFailure, std::string("log fsync failed: ") + std::strerror(errno));
  }
}

void ChangeLogWriter::append(const ChangeEvent& event) {
  log_.check(event);
  write_all(frame_record(event_to_json(event)));
  log_.append(event);
}

SceneState replay_from(const SceneState& state, std::span<const ChangeEvent> events,
                       FrameIndex as_of) {
  if (as_of < state.as_of_frame) {
    throw Error(ErrorCode::InvalidArgument, "cannot replay backwards from frame " +
                                                std::to_string(state.as_of_frame));
  }
  SceneState out = state;
  for (const auto& e : events) {
    if (e.frame_index <= state.as_of_frame || e.frame_index > as_of) continue;
    auto it = out.objects.find(e.object_id);
    if (it == out.objects.end()) {
      throw Error(ErrorCode::UnknownObject, "object '" + e.object_id + "' is not in the scene");
    }
    it->second.pose = apply_delta(it->second.pose, e.delta);
  }
  out.as_of_frame = as_of;
  return out;
}

SceneState replay(const ChangeLog& log, FrameIndex as_of) {
  if (as_of < -1) throw Error(ErrorCode::InvalidArgument, "as_of must be >= -1");
  SceneState initial = log.header().initial_state;
  initial.as_of_frame = -1;
  return replay_from(initial, log.events(), as_of);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoFailure, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

EvidenceStore::EvidenceStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path EvidenceStore::path_of(const std::string& hash) const { return dir_ / (hash + ".png"); }

std::string EvidenceStore::put(const GrayFrame& frame) {
  const auto png = encode_png(quantize(frame));
  const std::string hash = sha256_hex(png);
  const fs::path target = path_of(hash);
  if (fs::exists(target)) return hash;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir_.string() + ": " + ec.message());
  const fs::path tmp = dir_ / (hash + ".png.tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot create " + tmp.string());
  std::size_t done = 0;
  while (done < png.size()) {
    const ssize_t n = ::write(fd, png.data() + done, png.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot publish " + target.string());
  fsync_dir(dir_);
  return hash;
}

void EvidenceStore::verify(const std::string& hash) const {
  const fs::path p = path_of(hash);
  if (!fs::exists(p)) corrupt("missing evidence " + hash);
  if (sha256_hex(read_file(p)) != hash) corrupt("evidence " + hash + " does not match its hash");
}

void verify_evidence(const ChangeLog& log, const EvidenceStore& store) {
  for (const auto& e : log.events()) store.verify(e.evidence);
}

double StorageFootprint::ratio() const noexcept {
  return hypothetical_full_video_bytes == 0
             ? 0.0
             : static_cast<double>(total()) / static_cast<double>(hypothetical_full_video_bytes);
}

StorageFootprint storage_footprint(const fs::path& log_path, const EvidenceStore& store,
                                   std::uint64_t frame_bytes, std::uint64_t total_frames) {
  StorageFootprint f;
  f.event_bytes = fs::file_size(log_path);
  const ParsedLog parsed = read_log(log_path);
  std::set<std::string> distinct;
  for (const auto& e : parsed.log.events()) distinct.insert(e.evidence);
  for (const auto& h : distinct) {
    const fs::path p = store.path_of(h);
    if (fs::exists(p)) f.evidence_bytes += fs::file_size(p);
  }
  f.hypothetical_full_video_bytes = frame_bytes * total_frames;
  return f;
}

std::string iso8601_utc(std::chrono::system_clock::time_point t) {
  using namespace std::chrono;
  const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000 - (ms % 1000 < 0 ? 1 : 0));
  const int millis = static_cast<int>(((ms % 1000) + 1000) % 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

}  // namespace twindelta
