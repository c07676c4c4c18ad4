#pragma once

// Client side of the model adapter protocol: one JSON object per line over the
// stdin/stdout of a spawned process, one request in flight at a time.

#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/types.h>

#include "twindelta/image_io.hpp"
#include "twindelta/scene.hpp"

namespace twindelta {

inline constexpr int kAdapterProtocolVersion = 1;

/// Encodes a frame as an 8-bit grayscale PNG wrapped for the wire.
nlohmann::json encode_wire_image(const GrayFrame& frame);
/// Accepts {"format":"png-base64","data":...}. Throws ProtocolError.
GrayFrame decode_wire_image(const nlohmann::json& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Parses a detect response. Throws BackendFailure for {"error":...} and
/// ProtocolError for anything else not matching the schema or for boxes that
/// do not fit a frame of the given size.
std::vector<Detection> parse_detect_response(const nlohmann::json& response, int frame_width,
                                             int frame_height);
/// Parses an estimate_pose response; angles must already be canonical.
Pose parse_pose_response(const nlohmann::json& response);

class AdapterClient {
 public:
  /// Spawns argv[0] with the given arguments and performs the hello handshake.
  /// Throws BackendFailure if the process cannot start, ProtocolError if the
  /// handshake is malformed or the protocol version differs.
  explicit AdapterClient(std::vector<std::string> argv);
  ~AdapterClient();
  AdapterClient(const AdapterClient&) = delete;
  AdapterClient& operator=(const AdapterClient&) = delete;

  /// Sends one request line and reads one response line. Throws ProtocolError
  /// on malformed JSON or a closed pipe.
  nlohmann::json request(const nlohmann::json& message);
  /// Sends a raw line (no trailing newline) and parses the reply.
  nlohmann::json request_line(const std::string& line);

  const std::vector<std::string>& capabilities() const noexcept { return capabilities_; }
  bool supports(const std::string& op) const;

  std::vector<Detection> detect(const GrayFrame& frame);
  Pose estimate_pose(const GrayFrame& crop, const std::string& mesh_ref);

 private:
  std::string read_line();
  void close();

  std::mutex mutex_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::vector<std::string> capabilities_;
};

}  // namespace twindelta
