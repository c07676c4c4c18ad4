#pragma once

// Command-line front end: simulate, watch, reconstruct, eval and dmd.
//
// Exit codes: 0 success, 1 usage, 2 input/IO, 3 backend/protocol,
// 4 internal invariant violation.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twindelta/error.hpp"
#include "twindelta/harness.hpp"
#include "twindelta/image_io.hpp"
#include "twindelta/mesh.hpp"
#include "twindelta/motion.hpp"
#include "twindelta/scene.hpp"

namespace twindelta::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitBackend = 3,
  kExitInternal = 4,
};

int exit_code_for(ErrorCode code) noexcept;

struct ManifestObject {
  std::string object_id;
  std::string label;
  std::filesystem::path mesh;  // resolved against the manifest directory
  Pose pose;
};

/// Scene description for watch. Relative paths are resolved against the
/// directory holding the manifest file.
///
///   {
///     "scene_id": "baseline",
///     "input": {"kind": "frame_dir", "path": "frames", "pattern": "frame_%06d",
///               "width": 64, "height": 64, "fps": 30},
///     "objects": {"cube": {"label": "cube", "mesh": "meshes/cube.obj",
///                          "pose": {"azimuth": 30, "elevation": 15, "inplane": 0}}},
///     "pipeline": {"window_len": 30, ...}
///   }
///
/// A raw stream uses {"kind": "raw_stream", "path": "video.raw", ...}; width
/// and height are then required.
struct Manifest {
  std::string scene_id;
  std::string input_kind;  // frame_dir | raw_stream
  std::filesystem::path input_path;
  std::string frame_prefix = "frame_";
  int width = 0;
  int height = 0;
  double fps = 30.0;
  std::vector<ManifestObject> objects;
  nlohmann::json pipeline = nlohmann::json::object();
};

/// Throws InvalidConfig for schema violations and IoFailure for missing paths.
Manifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const Manifest& manifest, const std::filesystem::path& base);
std::unique_ptr<FrameSource> open_source(const Manifest& manifest);

/// Applies the keys of a "pipeline" object onto cfg. Throws InvalidConfig.
void apply_pipeline_json(const nlohmann::json& j, motion::PipelineConfig& cfg);
nlohmann::json pipeline_to_json(const motion::PipelineConfig& cfg);

nlohmann::json truth_to_json(const harness::GroundTruth& truth);
/// Occupancy masks are not part of the JSON and come back empty.
harness::GroundTruth truth_from_json(const nlohmann::json& j);

/// Axis-aligned cube with the given edge length centred on the origin.
TriangleMesh cube_mesh(double edge = 1.0);

int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace twindelta::cli
