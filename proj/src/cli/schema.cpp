#include <fstream>

#include "twindelta/cli.hpp"
#include "twindelta/error.hpp"

namespace twindelta::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

json parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) invalid(path.string() + " is not valid JSON");
  return j;
}

template <class T>
T get_as(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) invalid(std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    invalid(std::string("key '") + key + "' has the wrong type");
  }
}

Pose pose_from(const json& j) {
  if (!j.is_object()) invalid("pose must be an object");
  try {
    return normalize_pose(get_as<double>(j, "azimuth"), get_as<double>(j, "elevation"),
                          get_as<double>(j, "inplane"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    invalid(std::string("invalid pose: ") + e.what());
  }
}

json pose_json(const Pose& p) {
  return json{{"azimuth", p.azimuth()}, {"elevation", p.elevation()}, {"inplane", p.inplane()}};
}

BoundingBox bbox_from(const json& j) {
  if (!j.is_array() || j.size() != 4) invalid("bbox must be [x_min, y_min, x_max, y_max]");
  try {
    return BoundingBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>()};
  } catch (const json::exception&) {
    invalid("bbox entries must be numbers");
  }
}

json bbox_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    case ErrorCode::IoFailure:
    case ErrorCode::CorruptLog:
    case ErrorCode::InvalidFrame:
    case ErrorCode::EmptyImage:
    case ErrorCode::MalformedStl:
    case ErrorCode::MalformedObj:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::TooFewFrames:
      return kExitInput;
    case ErrorCode::ProtocolError:
    case ErrorCode::BackendFailure:
      return kExitBackend;
    default:
      return kExitInternal;
  }
}

Manifest load_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) invalid("manifest must be a JSON object");
  const fs::path base = path.parent_path();
  Manifest m;
  m.scene_id = j.value("scene_id", path.stem().string());

  const json& input = j.contains("input") ? j.at("input") : json();
  if (!input.is_object()) invalid("manifest needs an 'input' object");
  m.input_kind = get_as<std::string>(input, "kind");
  m.input_path = base / get_as<std::string>(input, "path");
  m.width = input.value("width", 0);
  m.height = input.value("height", 0);
  m.fps = input.value("fps", 30.0);
  if (!(m.fps > 0.0)) invalid("fps must be positive");
  if (m.input_kind == "frame_dir") {
    const std::string pattern = input.value("pattern", std::string("frame_%06d"));
    const auto pct = pattern.find('%');
    if (pct == std::string::npos || pattern.back() != 'd') {
      invalid("pattern must look like PREFIX%06d");
    }
    m.frame_prefix = pattern.substr(0, pct);
    if (!fs::is_directory(m.input_path)) {
      throw Error(ErrorCode::IoFailure, "frame directory not found: " + m.input_path.string());
    }
  } else if (m.input_kind == "raw_stream") {
    if (m.width <= 0 || m.height <= 0) invalid("raw_stream needs positive width and height");
    if (!fs::is_regular_file(m.input_path)) {
      throw Error(ErrorCode::IoFailure, "raw stream not found: " + m.input_path.string());
    }
  } else {
    invalid("input kind must be frame_dir or raw_stream");
  }

  const json& objects = j.contains("objects") ? j.at("objects") : json();
  if (!objects.is_object()) invalid("manifest needs an 'objects' map");
  for (const auto& [id, obj] : objects.items()) {
    if (!obj.is_object()) invalid("object '" + id + "' must be an object");
    ManifestObject mo;
    mo.object_id = id;
    mo.label = obj.value("label", id);
    mo.mesh = base / get_as<std::string>(obj, "mesh");
    if (!fs::is_regular_file(mo.mesh)) {
      throw Error(ErrorCode::IoFailure, "mesh not found: " + mo.mesh.string());
    }
    mo.pose = pose_from(obj.contains("pose") ? obj.at("pose") : json());
    m.objects.push_back(std::move(mo));
  }
  if (j.contains("pipeline")) {
    m.pipeline = j.at("pipeline");
    if (!m.pipeline.is_object()) invalid("'pipeline' must be an object");
  }
  return m;
}

json manifest_to_json(const Manifest& m, const fs::path& base) {
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  json objects = json::object();
  for (const auto& o : m.objects) {
    objects[o.object_id] = json{{"label", o.label}, {"mesh", rel(o.mesh)}, {"pose", pose_json(o.pose)}};
  }
  json input{{"kind", m.input_kind}, {"path", rel(m.input_path)}, {"fps", m.fps}};
  if (m.input_kind == "frame_dir") input["pattern"] = m.frame_prefix + "%06d";
  if (m.width > 0) input["width"] = m.width;
  if (m.height > 0) input["height"] = m.height;
  json out{{"scene_id", m.scene_id}, {"input", input}, {"objects", objects}};
  if (!m.pipeline.empty()) out["pipeline"] = m.pipeline;
  return out;
}

std::unique_ptr<FrameSource> open_source(const Manifest& m) {
  if (m.input_kind == "raw_stream") {
    return std::make_unique<RawStreamSource>(m.input_path, m.width, m.height);
  }
  return std::make_unique<FrameDirectorySource>(m.input_path, m.frame_prefix);
}

void apply_pipeline_json(const json& j, motion::PipelineConfig& cfg) {
  if (!j.is_object()) invalid("pipeline config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "rescale_factor") cfg.rescale_factor = value.get<double>();
      else if (key == "window_len") cfg.window_len = value.get<int>();
      else if (key == "window_stride") cfg.window_stride = value.get<int>();
      else if (key == "motion_pixel_fraction") cfg.motion_pixel_fraction = value.get<double>();
      else if (key == "mask_threshold") cfg.mask_threshold = value.get<double>();
      else if (key == "quiescent_windows_to_close") cfg.quiescent_windows_to_close = value.get<int>();
      else if (key == "energy_threshold") cfg.energy_threshold = value.get<double>();
      else if (key == "mode_epsilon") cfg.mode_epsilon = value.get<double>();
      else if (key == "background_step") {
        if (value.is_null()) cfg.background_step.reset();
        else cfg.background_step = value.get<int>();
      } else if (key == "lighting_guard") cfg.lighting_guard = value.get<bool>();
      else if (key == "lighting_jump") cfg.lighting_jump = value.get<double>();
      else invalid("unknown pipeline key '" + key + "'");
    } catch (const json::exception&) {
      invalid("pipeline key '" + key + "' has the wrong type");
    }
  }
}

json pipeline_to_json(const motion::PipelineConfig& cfg) {
  return json{{"rescale_factor", cfg.rescale_factor},
              {"window_len", cfg.window_len},
              {"window_stride", cfg.window_stride},
              {"motion_pixel_fraction", cfg.motion_pixel_fraction},
              {"mask_threshold", cfg.mask_threshold},
              {"quiescent_windows_to_close", cfg.quiescent_windows_to_close},
              {"energy_threshold", cfg.energy_threshold},
              {"mode_epsilon", cfg.mode_epsilon},
              {"background_step", cfg.background_step ? json(*cfg.background_step) : json(nullptr)},
              {"lighting_guard", cfg.lighting_guard},
              {"lighting_jump", cfg.lighting_jump}};
}

json truth_to_json(const harness::GroundTruth& truth) {
  json intervals = json::array();
  for (const auto& [a, b] : truth.intervals) intervals.push_back({a, b});
  json frames = json::array();
  for (const auto& f : truth.frames) {
    json objects = json::array();
    for (const auto& o : f.objects) {
      json entry{{"object_id", o.object_id}, {"label", o.label}, {"pose", pose_json(o.pose)}};
      entry["bbox"] = o.bbox.well_formed() ? bbox_json(o.bbox) : json(nullptr);
      objects.push_back(std::move(entry));
    }
    frames.push_back(json{{"index", f.index}, {"objects", std::move(objects)}});
  }
  return json{{"width", truth.width},
              {"height", truth.height},
              {"intervals", intervals},
              {"frames", frames}};
}

harness::GroundTruth truth_from_json(const json& j) {
  if (!j.is_object()) invalid("truth must be a JSON object");
  harness::GroundTruth t;
  t.width = get_as<int>(j, "width");
  t.height = get_as<int>(j, "height");
  for (const auto& iv : j.value("intervals", json::array())) {
    if (!iv.is_array() || iv.size() != 2) invalid("interval must be [t1, t2]");
    t.intervals.emplace_back(iv[0].get<FrameIndex>(), iv[1].get<FrameIndex>());
  }
  const json& frames = j.contains("frames") ? j.at("frames") : json();
  if (!frames.is_array()) invalid("truth needs a 'frames' array");
  for (const auto& f : frames) {
    harness::FrameTruth ft;
    ft.index = get_as<FrameIndex>(f, "index");
    for (const auto& o : f.contains("objects") ? f.at("objects") : json::array()) {
      harness::ObjectTruth ot;
      ot.object_id = get_as<std::string>(o, "object_id");
      ot.label = o.value("label", ot.object_id);
      if (o.contains("bbox") && !o.at("bbox").is_null()) ot.bbox = bbox_from(o.at("bbox"));
      ot.pose = pose_from(o.contains("pose") ? o.at("pose") : json());
      ft.objects.push_back(std::move(ot));
    }
    t.frames.push_back(std::move(ft));
  }
  return t;
}

TriangleMesh cube_mesh(double edge) {
  const double h = edge / 2.0;
  TriangleMesh m;
  m.name = "cube";
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h);
  }
  // Two outward-facing triangles per side.
  m.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return m;
}

}  // namespace twindelta::cli
