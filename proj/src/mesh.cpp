#include "twindelta/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

#include "twindelta/error.hpp"
#include "twindelta/image_io.hpp"
#include "twindelta/pose.hpp"

namespace twindelta {

namespace {

[[noreturn]] void stl_fail(const std::string& msg) {
  throw Error(ErrorCode::MalformedStl, msg);
}

[[noreturn]] void obj_fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::MalformedObj, "line " + std::to_string(line) + ": " + msg);
}

class VertexPool {
 public:
  explicit VertexPool(TriangleMesh& mesh) : mesh_(mesh) {}

  int add(const Eigen::Vector3d& v) {
    const std::array<double, 3> key{v.x(), v.y(), v.z()};
    auto [it, inserted] = index_.try_emplace(key, static_cast<int>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(v);
    return it->second;
  }

 private:
  TriangleMesh& mesh_;
  std::map<std::array<double, 3>, int> index_;
};

bool degenerate(const std::array<int, 3>& f) {
  return f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
}

float read_f32(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

TriangleMesh parse_binary_stl(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 84) stl_fail("binary STL shorter than its 84-byte header");
  const std::uint8_t* p = bytes.data() + 80;
  const std::uint32_t count = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                              (static_cast<std::uint32_t>(p[2]) << 16) |
                              (static_cast<std::uint32_t>(p[3]) << 24);
  const std::uint64_t expected = 84ULL + 50ULL * count;
  if (bytes.size() != expected) {
    stl_fail("binary STL declares " + std::to_string(count) + " facets but has " +
             std::to_string(bytes.size()) + " bytes");
  }
  TriangleMesh mesh;
  VertexPool pool(mesh);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t* rec = bytes.data() + 84 + 50ULL * i + 12;
    std::array<int, 3> face{};
    for (int k = 0; k < 3; ++k) {
      const std::uint8_t* v = rec + 12 * k;
      const Eigen::Vector3d pos(read_f32(v), read_f32(v + 4), read_f32(v + 8));
      if (!pos.allFinite()) stl_fail("non-finite vertex in facet " + std::to_string(i));
      face[static_cast<std::size_t>(k)] = pool.add(pos);
    }
    if (degenerate(face)) stl_fail("degenerate facet " + std::to_string(i));
    mesh.faces.push_back(face);
  }
  return mesh;
}

TriangleMesh parse_ascii_stl(std::string_view text) {
  std::istringstream in{std::string(text)};
  TriangleMesh mesh;
  VertexPool pool(mesh);
  std::string word;
  auto expect = [&](const char* kw) {
    if (!(in >> word) || word != kw) {
      stl_fail(std::string("expected '") + kw + "' but found '" + word + "'");
    }
  };
  auto number = [&]() {
    std::string tok;
    if (!(in >> tok)) stl_fail("unexpected end of file");
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      stl_fail("bad number '" + tok + "'");
    }
    return v;
  };
  expect("solid");
  std::string rest;
  std::getline(in, rest);
  const auto first = rest.find_first_not_of(" \t\r");
  if (first != std::string::npos) mesh.name = rest.substr(first, rest.find_last_not_of(" \t\r") - first + 1);
  while (true) {
    if (!(in >> word)) stl_fail("missing endsolid");
    if (word == "endsolid") break;
    if (word != "facet") stl_fail("expected 'facet' but found '" + word + "'");
    expect("normal");
    for (int k = 0; k < 3; ++k) number();
    expect("outer");
    expect("loop");
    std::array<int, 3> face{};
    for (int k = 0; k < 3; ++k) {
      expect("vertex");
      const double x = number();
      const double y = number();
      const double z = number();
      face[static_cast<std::size_t>(k)] = pool.add(Eigen::Vector3d(x, y, z));
    }
    expect("endloop");
    expect("endfacet");
    if (degenerate(face)) stl_fail("degenerate facet " + std::to_string(mesh.faces.size()));
    mesh.faces.push_back(face);
  }
  return mesh;
}

}  // namespace

TriangleMesh parse_stl(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 84) {
    const std::uint8_t* p = bytes.data() + 80;
    const std::uint64_t count = static_cast<std::uint64_t>(p[0]) | (static_cast<std::uint64_t>(p[1]) << 8) |
                                (static_cast<std::uint64_t>(p[2]) << 16) |
                                (static_cast<std::uint64_t>(p[3]) << 24);
    if (bytes.size() == 84 + 50 * count) return parse_binary_stl(bytes);
  }
  std::size_t pos = 0;
  while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  if (bytes.size() - pos >= 5 && std::memcmp(bytes.data() + pos, "solid", 5) == 0) {
    return parse_ascii_stl(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return parse_binary_stl(bytes);
}

TriangleMesh parse_obj(std::string_view text) {
  TriangleMesh mesh;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string kind;
    if (!(in >> kind)) {
      if (end == text.size()) break;
      continue;
    }
    if (kind == "v") {
      double c[3];
      for (double& x : c) {
        std::string tok;
        if (!(in >> tok)) obj_fail(line_no, "vertex needs three coordinates");
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(x)) {
          obj_fail(line_no, "bad coordinate '" + tok + "'");
        }
      }
      mesh.vertices.emplace_back(c[0], c[1], c[2]);
    } else if (kind == "f") {
      std::vector<int> idx;
      std::string tok;
      while (in >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long v = 0;
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc{} || ptr != head.data() + head.size() || v == 0) {
          obj_fail(line_no, "bad face index '" + tok + "'");
        }
        const long long n = static_cast<long long>(mesh.vertices.size());
        const long long resolved = v > 0 ? v - 1 : n + v;
        if (resolved < 0 || resolved >= n) {
          obj_fail(line_no, "face index " + std::to_string(v) + " out of range");
        }
        idx.push_back(static_cast<int>(resolved));
      }
      if (idx.size() < 3) obj_fail(line_no, "face needs at least three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        const std::array<int, 3> face{idx[0], idx[k], idx[k + 1]};
        if (degenerate(face)) obj_fail(line_no, "degenerate face");
        mesh.faces.push_back(face);
      }
    } else if (kind == "o") {
      std::string name;
      std::getline(in >> std::ws, name);
      while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
      mesh.name = name;
    }
    if (end == text.size()) break;
  }
  return mesh;
}

std::string write_obj(const TriangleMesh& mesh) {
  std::string out;
  char buf[128];
  if (!mesh.name.empty()) out += "o " + mesh.name + "\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".stl") return parse_stl(read_file(path));
  if (ext == ".obj") return parse_obj(read_text(path));
  throw Error(ErrorCode::IoFailure, "unsupported mesh format " + path.string());
}

Eigen::Vector3d bbox_center(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return Eigen::Vector3d::Zero();
  Eigen::Vector3d lo = mesh.vertices.front();
  Eigen::Vector3d hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (lo + hi) / 2.0;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const RotationMatrix& rotation,
                            const Eigen::Vector3d& pivot) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = rotation.matrix() * (v - pivot) + pivot;
  return out;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const RotationMatrix& rotation) {
  return transform_mesh(mesh, rotation, bbox_center(mesh));
}

}  // namespace twindelta
