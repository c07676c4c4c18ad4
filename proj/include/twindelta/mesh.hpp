#pragma once

// Triangle meshes: STL (binary and ASCII) and OBJ readers, an OBJ writer, and
// rigid rotation about a pivot.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace twindelta {

class RotationMatrix;

struct TriangleMesh {
  std::string name;
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;  // zero-based, non-degenerate

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

/// Binary or ASCII STL. Vertices with bit-identical coordinates are merged.
/// Throws MalformedStl.
TriangleMesh parse_stl(std::span<const std::uint8_t> bytes);

/// v/f records only; faces are fan-triangulated and texture/normal indices
/// dropped. Negative indices count back from the latest vertex. Throws MalformedObj.
TriangleMesh parse_obj(std::string_view text);

/// OBJ text with 9 significant digits per coordinate.
std::string write_obj(const TriangleMesh& mesh);

/// Dispatches on extension (.stl, .obj). Throws IoFailure for anything else.
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Centre of the axis-aligned bounding box. Empty meshes give the origin.
Eigen::Vector3d bbox_center(const TriangleMesh& mesh);

/// v' = R (v - pivot) + pivot; faces unchanged.
TriangleMesh transform_mesh(const TriangleMesh& mesh, const RotationMatrix& rotation,
                            const Eigen::Vector3d& pivot);
TriangleMesh transform_mesh(const TriangleMesh& mesh, const RotationMatrix& rotation);

}  // namespace twindelta
