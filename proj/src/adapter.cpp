#include "twindelta/adapter.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include <openssl/evp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "twindelta/error.hpp"

extern char** environ;

namespace twindelta {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxLine = 64u << 20;
constexpr int kReadTimeoutMs = 60'000;

[[noreturn]] void protocol(const std::string& msg) { throw Error(ErrorCode::ProtocolError, msg); }

void check_error_reply(const json& response) {
  if (!response.is_object()) protocol("response is not a JSON object");
  if (auto it = response.find("error"); it != response.end()) {
    if (!it->is_string()) protocol("error field must be a string");
    throw Error(ErrorCode::BackendFailure, "adapter: " + it->get<std::string>());
  }
}

double number_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) protocol(std::string("missing numeric field ") + key);
  const double v = it->get<double>();
  if (!std::isfinite(v)) protocol(std::string("non-finite field ") + key);
  return v;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) protocol("base64 length is not a multiple of 4");
  const auto valid = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/';
  };
  std::size_t pad = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) protocol("misplaced base64 padding");
      ++pad;
    } else if (!valid(c) || pad > 0) {
      protocol("invalid base64 character");
    }
  }
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) protocol("invalid base64 payload");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

json encode_wire_image(const GrayFrame& frame) {
  return json{{"format", "png-base64"}, {"data", base64_encode(encode_png(quantize(frame)))}};
}

GrayFrame decode_wire_image(const json& image) {
  if (!image.is_object()) protocol("image must be an object");
  auto fmt = image.find("format");
  auto data = image.find("data");
  if (fmt == image.end() || !fmt->is_string() || *fmt != "png-base64") {
    protocol("image format must be png-base64");
  }
  if (data == image.end() || !data->is_string()) protocol("image data must be a string");
  const auto bytes = base64_decode(data->get<std::string>());
  try {
    return dequantize(decode_png(bytes));
  } catch (const Error& e) {
    protocol(std::string("image payload: ") + e.what());
  }
}

std::vector<Detection> parse_detect_response(const json& response, int frame_width,
                                             int frame_height) {
  check_error_reply(response);
  auto it = response.find("detections");
  if (it == response.end() || !it->is_array()) protocol("detections must be an array");
  std::vector<Detection> out;
  for (const auto& d : *it) {
    if (!d.is_object()) protocol("detection must be an object");
    auto label = d.find("label");
    auto bbox = d.find("bbox");
    if (label == d.end() || !label->is_string()) protocol("detection label must be a string");
    if (bbox == d.end() || !bbox->is_array() || bbox->size() != 4) {
      protocol("detection bbox must be [x_min, y_min, x_max, y_max]");
    }
    double c[4];
    for (std::size_t k = 0; k < 4; ++k) {
      if (!(*bbox)[k].is_number()) protocol("bbox entries must be numbers");
      c[k] = (*bbox)[k].get<double>();
    }
    Detection det{label->get<std::string>(), BoundingBox{c[0], c[1], c[2], c[3]},
                  number_field(d, "confidence")};
    if (!det.bbox.well_formed() || !det.bbox.within(frame_width, frame_height)) {
      protocol("detection bbox does not fit the frame");
    }
    if (det.confidence < 0.0 || det.confidence > 1.0) protocol("confidence outside [0,1]");
    out.push_back(std::move(det));
  }
  return out;
}

Pose parse_pose_response(const json& response) {
  check_error_reply(response);
  const double az = number_field(response, "azimuth");
  const double el = number_field(response, "elevation");
  const double ip = number_field(response, "inplane");
  if (az < 0.0 || az >= 360.0 || el < -90.0 || el > 90.0 || ip < -180.0 || ip >= 180.0) {
    protocol("pose angles outside canonical ranges");
  }
  return normalize_pose(az, el, ip);
}

AdapterClient::AdapterClient(std::vector<std::string> argv) {
  if (argv.empty()) throw Error(ErrorCode::InvalidArgument, "adapter command is empty");
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorCode::BackendFailure, std::string("socketpair: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);
  const int rc = posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    pid_ = -1;
    throw Error(ErrorCode::BackendFailure,
                "cannot start adapter '" + argv[0] + "': " + std::strerror(rc));
  }
  to_child_ = sv[0];
  from_child_ = sv[0];

  try {
    const json hello = request(json{{"op", "hello"}});
    check_error_reply(hello);
    auto proto = hello.find("protocol");
    if (proto == hello.end() || !proto->is_number_integer()) protocol("handshake lacks protocol");
    if (proto->get<int>() != kAdapterProtocolVersion) {
      protocol("unsupported protocol version " + proto->dump());
    }
    auto caps = hello.find("capabilities");
    if (caps == hello.end() || !caps->is_array()) protocol("handshake lacks capabilities");
    for (const auto& c : *caps) {
      if (!c.is_string()) protocol("capabilities must be strings");
      capabilities_.push_back(c.get<std::string>());
    }
  } catch (...) {
    close();
    throw;
  }
}

AdapterClient::~AdapterClient() { close(); }

void AdapterClient::close() {
  if (to_child_ >= 0) {
    ::shutdown(to_child_, SHUT_RDWR);
    ::close(to_child_);
  }
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
  }
}

bool AdapterClient::supports(const std::string& op) const {
  return std::find(capabilities_.begin(), capabilities_.end(), op) != capabilities_.end();
}

std::string AdapterClient::read_line() {
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (buffer_.size() > kMaxLine) protocol("adapter response line too long");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, kReadTimeoutMs);
    if (ready == 0) throw Error(ErrorCode::BackendFailure, "adapter timed out");
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::BackendFailure, std::string("poll: ") + std::strerror(errno));
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) protocol("adapter closed its output");
      throw Error(ErrorCode::BackendFailure, std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) protocol("adapter closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

json AdapterClient::request(const json& message) { return request_line(message.dump()); }

json AdapterClient::request_line(const std::string& text) {
  if (text.find('\n') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "request must be a single line");
  }
  std::lock_guard lock(mutex_);
  if (to_child_ < 0) throw Error(ErrorCode::BackendFailure, "adapter is not running");
  const std::string line = text + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      protocol(std::string("adapter input closed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  const std::string reply = read_line();
  json parsed = json::parse(reply, nullptr, false);
  if (parsed.is_discarded()) protocol("malformed JSON from adapter: " + reply.substr(0, 80));
  return parsed;
}

std::vector<Detection> AdapterClient::detect(const GrayFrame& frame) {
  if (!supports("detect")) protocol("adapter does not offer detect");
  return parse_detect_response(request(json{{"op", "detect"}, {"image", encode_wire_image(frame)}}),
                               frame.width(), frame.height());
}

Pose AdapterClient::estimate_pose(const GrayFrame& crop, const std::string& mesh_ref) {
  if (!supports("estimate_pose")) protocol("adapter does not offer estimate_pose");
  return parse_pose_response(request(json{
      {"op", "estimate_pose"}, {"image", encode_wire_image(crop)}, {"mesh_ref", mesh_ref}}));
}

}  // namespace twindelta
