#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "twindelta/adapter.hpp"
#include "twindelta/changelog.hpp"
#include "twindelta/cli.hpp"
#include "twindelta/detection.hpp"
#include "twindelta/dmd.hpp"
#include "twindelta/pose.hpp"

namespace twindelta::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Problems with the contents of an input file that are not library errors.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

json read_json(const fs::path& path) {
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw InputError(path.string() + " is not valid JSON");
  return j;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

json delta_json(const PoseDelta& d) {
  return json{{"d_azimuth", d.d_azimuth}, {"d_elevation", d.d_elevation}, {"d_inplane", d.d_inplane}};
}

json pose_json(const Pose& p) {
  return json{{"azimuth", p.azimuth()}, {"elevation", p.elevation()}, {"inplane", p.inplane()}};
}

/// Pipeline flags shared by watch and dmd; unset flags leave cfg untouched.
struct PipelineFlags {
  double rescale = 0;
  int window = 0;
  int stride = 0;
  double motion_fraction = 0;
  double mask_threshold = 0;
  int quiescent = 0;
  double energy = 0;
  int background_step = 0;
  bool lighting_guard = false;
  CLI::Option* o_rescale = nullptr;
  CLI::Option* o_window = nullptr;
  CLI::Option* o_stride = nullptr;
  CLI::Option* o_motion = nullptr;
  CLI::Option* o_mask = nullptr;
  CLI::Option* o_quiescent = nullptr;
  CLI::Option* o_energy = nullptr;
  CLI::Option* o_bgstep = nullptr;
  CLI::Option* o_guard = nullptr;

  void add(CLI::App& app, bool segmentation) {
    o_rescale = app.add_option("--rescale", rescale, "Downscale factor in (0,1]");
    o_window = app.add_option("--window", window, "Frames per DMD window");
    o_stride = app.add_option("--stride", stride, "Frames between window evaluations");
    o_mask = app.add_option("--mask-threshold", mask_threshold, "Foreground residual threshold");
    o_energy = app.add_option("--energy", energy, "Singular value energy kept by DMD");
    o_bgstep = app.add_option("--background-step", background_step,
                              "Snapshot index used for the background (default: window midpoint)");
    if (segmentation) {
      o_motion = app.add_option("--motion-fraction", motion_fraction,
                                "Foreground pixel fraction that counts as motion");
      o_quiescent = app.add_option("--quiescent", quiescent,
                                   "Quiet windows needed to close an interval");
      o_guard = app.add_flag("--lighting-guard", lighting_guard,
                             "Ignore windows that look like a global lighting change");
    }
  }

  void apply(motion::PipelineConfig& cfg) const {
    if (o_rescale->count()) cfg.rescale_factor = rescale;
    if (o_window->count()) cfg.window_len = window;
    if (o_stride->count()) cfg.window_stride = stride;
    if (o_mask->count()) cfg.mask_threshold = mask_threshold;
    if (o_energy->count()) cfg.energy_threshold = energy;
    if (o_bgstep->count()) cfg.background_step = background_step;
    if (o_motion && o_motion->count()) cfg.motion_pixel_fraction = motion_fraction;
    if (o_quiescent && o_quiescent->count()) cfg.quiescent_windows_to_close = quiescent;
    if (o_guard && o_guard->count()) cfg.lighting_guard = lighting_guard;
  }
};

// simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string preset = "baseline";
  std::uint64_t seed = 1;
  fs::path out;
  int length = 0;
  double noise = 0;
  std::string format = "pgm";
  CLI::Option* o_length = nullptr;
  CLI::Option* o_noise = nullptr;
};

int cmd_simulate(const SimulateArgs& a) {
  harness::ScenarioConfig cfg = harness::preset(a.preset, a.seed);
  if (a.o_length->count()) cfg.length = a.length;
  if (a.o_noise->count()) cfg.noise_sigma = a.noise;
  cfg.validate();
  const harness::Scenario sc = harness::generate(cfg);

  ensure_dir(a.out / "frames");
  ensure_dir(a.out / "truth_masks");
  ensure_dir(a.out / "meshes");
  const std::string ext = "." + a.format;
  for (const auto& f : sc.frames) save_frame(a.out / "frames" / frame_file_name(f.index(), ext), f);
  for (const auto& ft : sc.truth.frames) {
    write_file(a.out / "truth_masks" / frame_file_name(ft.index, ".pgm", "mask_"),
               encode_pgm(mask_image(ft.occupancy)));
  }

  Manifest m;
  m.scene_id = a.preset;
  m.input_kind = "frame_dir";
  m.input_path = a.out / "frames";
  m.width = cfg.width;
  m.height = cfg.height;
  for (const auto& obj : cfg.objects) {
    const fs::path mesh_path = a.out / "meshes" / (obj.object_id + ".obj");
    TriangleMesh mesh = cube_mesh();
    mesh.name = obj.object_id;
    write_text(mesh_path, write_obj(mesh));
    const auto* t0 = sc.truth.find(0, obj.object_id);
    m.objects.push_back({obj.object_id, obj.label.empty() ? obj.object_id : obj.label, mesh_path,
                         t0 ? t0->pose : obj.base_pose});
  }
  write_json(a.out / "manifest.json", manifest_to_json(m, a.out));

  json truth = truth_to_json(sc.truth);
  truth["preset"] = a.preset;
  truth["seed"] = a.seed;
  write_json(a.out / "truth.json", truth);
  write_json(a.out / "effective_config.json",
             json{{"command", "simulate"},
                  {"preset", a.preset},
                  {"seed", a.seed},
                  {"width", cfg.width},
                  {"height", cfg.height},
                  {"length", cfg.length},
                  {"noise_sigma", cfg.noise_sigma},
                  {"format", a.format}});
  std::cout << "wrote " << sc.frames.size() << " frames to " << (a.out / "frames").string() << "\n";
  return kExitOk;
}

// watch ----------------------------------------------------------------------

struct WatchArgs {
  fs::path manifest;
  fs::path out;
  std::string backend;
  double pose_noise = 0;
  double jitter = 0;
  double dropout = 0;
  std::uint64_t seed = 1;
  double min_delta = 0;
  double epoch = 0;
  bool force = false;
  PipelineFlags pipeline;
};

std::string timestamp_for(double epoch_seconds, FrameIndex frame, double fps) {
  const double seconds = epoch_seconds + static_cast<double>(frame) / fps;
  const auto ms = static_cast<long long>(std::llround(seconds * 1000.0));
  return iso8601_utc(std::chrono::system_clock::time_point(std::chrono::milliseconds(ms)));
}

int cmd_watch(const WatchArgs& a) {
  const Manifest m = load_manifest(a.manifest);
  motion::PipelineConfig cfg;
  apply_pipeline_json(m.pipeline, cfg);
  a.pipeline.apply(cfg);
  cfg.validate();

  std::unique_ptr<Detector> detector;
  std::unique_ptr<PoseEstimator> estimator;
  json backend_desc;
  const auto colon = a.backend.find(':');
  const std::string kind = a.backend.substr(0, colon);
  const std::string target = colon == std::string::npos ? "" : a.backend.substr(colon + 1);
  if (kind == "oracle" && !target.empty()) {
    auto truth = std::make_shared<harness::GroundTruth>(truth_from_json(read_json(target)));
    detector = std::make_unique<OracleDetector>(
        [truth](const GrayFrame& frame) {
          std::vector<LabeledBox> boxes;
          for (const auto& ft : truth->frames) {
            if (ft.index != frame.index()) continue;
            for (const auto& o : ft.objects) {
              if (o.bbox.well_formed()) boxes.push_back({o.label, o.bbox});
            }
          }
          return boxes;
        },
        a.jitter, a.dropout, a.seed);
    estimator = std::make_unique<OraclePoseEstimator>(
        [truth](const PoseQuery& q) {
          const auto* t = truth->find(q.frame_index, q.object_id);
          if (!t) {
            throw Error(ErrorCode::BackendFailure, "oracle has no pose for '" + q.object_id +
                                                       "' at frame " + std::to_string(q.frame_index));
          }
          return t->pose;
        },
        a.pose_noise, a.seed);
    backend_desc = json{{"kind", "oracle"}, {"truth", target}, {"pose_noise_deg", a.pose_noise},
                        {"jitter_px", a.jitter}, {"dropout", a.dropout}, {"seed", a.seed}};
  } else if (kind == "adapter" && !target.empty()) {
    auto client = std::make_shared<AdapterClient>(split_words(target));
    detector = std::make_unique<AdapterDetector>(client);
    estimator = std::make_unique<AdapterPoseEstimator>(client);
    backend_desc = json{{"kind", "adapter"}, {"command", target}};
  } else {
    throw Error(ErrorCode::InvalidConfig, "backend must be oracle:TRUTH.json or adapter:COMMAND");
  }

  ensure_dir(a.out);
  const fs::path log_path = a.out / "events.log";
  if (fs::exists(log_path)) {
    if (!a.force) {
      throw Error(ErrorCode::IoFailure, log_path.string() + " exists; pass --force to replace it");
    }
    fs::remove(log_path);
    fs::remove_all(a.out / "evidence");
  }

  LogHeader header;
  header.scene_id = m.scene_id;
  header.created_at = timestamp_for(a.epoch, 0, m.fps);
  std::map<std::string, TriangleMesh> meshes;
  for (const auto& o : m.objects) {
    header.initial_state.objects[o.object_id] = ObjectState{fs::absolute(o.mesh).string(), o.pose};
    meshes[o.object_id] = load_mesh(o.mesh);
  }
  ChangeLogWriter writer = ChangeLogWriter::create(log_path, header);
  EvidenceStore store(a.out / "evidence");
  std::map<std::string, Pose> current;
  for (const auto& [id, st] : header.initial_state.objects) current[id] = st.pose;

  json intervals = json::array();
  std::size_t event_count = 0;
  auto handle = [&](const motion::MotionInterval& iv) {
    const auto detections = detector->detect(iv.last_frame);
    json rep{{"t1", iv.t1}, {"t2", iv.t2}, {"score_trace", iv.score_trace}};
    json det_json = json::array();
    for (const auto& d : detections) {
      det_json.push_back(json{{"label", d.label},
                              {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                              {"confidence", d.confidence}});
    }
    rep["detections"] = det_json;
    json objects = json::array();
    std::vector<bool> used(detections.size(), false);
    std::string evidence;
    for (const auto& obj : m.objects) {
      std::size_t best = detections.size();
      for (std::size_t i = 0; i < detections.size(); ++i) {
        if (used[i] || detections[i].label != obj.label) continue;
        if (best == detections.size() || detections[i].confidence > detections[best].confidence) {
          best = i;
        }
      }
      if (best == detections.size()) continue;
      used[best] = true;
      const GrayFrame patch = crop(iv.last_frame, detections[best].bbox);
      PoseQuery q{&patch, &meshes.at(obj.object_id), fs::absolute(obj.mesh).string(),
                  obj.object_id, iv.t2};
      const Pose estimated = estimator->estimate(q);
      const PoseDelta delta = pose_delta(current.at(obj.object_id), estimated);
      json entry{{"object_id", obj.object_id}, {"estimated_pose", pose_json(estimated)},
                 {"delta", delta_json(delta)}};
      if (delta.is_zero(a.min_delta)) {
        entry["logged"] = false;
        objects.push_back(std::move(entry));
        continue;
      }
      if (evidence.empty()) evidence = store.put(iv.last_frame);
      writer.append(ChangeEvent{obj.object_id, iv.t2, timestamp_for(a.epoch, iv.t2, m.fps), delta,
                                evidence});
      ++event_count;
      current[obj.object_id] = apply_delta(current.at(obj.object_id), delta);
      entry["logged"] = true;
      entry["evidence"] = evidence;
      objects.push_back(std::move(entry));
    }
    rep["objects"] = objects;
    intervals.push_back(std::move(rep));
  };

  motion::MotionSegmenter segmenter(cfg);
  auto source = open_source(m);
  std::uint64_t frames = 0;
  int width = 0, height = 0;
  while (auto frame = source->next()) {
    ++frames;
    width = frame->width();
    height = frame->height();
    for (const auto& iv : segmenter.push(*frame)) handle(iv);
  }
  for (const auto& iv : segmenter.finish()) handle(iv);

  write_json(a.out / "intervals.json", intervals);
  {
    std::string csv = "end,score,motion,lighting_suspect\n";
    char line[128];
    for (const auto& w : segmenter.windows()) {
      std::snprintf(line, sizeof(line), "%lld,%.9g,%d,%d\n", static_cast<long long>(w.end), w.score,
                    w.motion ? 1 : 0, w.lighting_suspect ? 1 : 0);
      csv += line;
    }
    write_text(a.out / "windows.csv", csv);
  }
  const StorageFootprint fp = storage_footprint(
      log_path, store, static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height), frames);
  write_json(a.out / "footprint.json",
             json{{"event_bytes", fp.event_bytes},
                  {"evidence_bytes", fp.evidence_bytes},
                  {"hypothetical_full_video_bytes", fp.hypothetical_full_video_bytes},
                  {"ratio", fp.ratio()}});

  std::ostringstream report;
  report << "scene " << m.scene_id << ": " << frames << " frames, " << intervals.size()
         << " motion interval(s), " << event_count << " event(s)\n";
  for (const auto& iv : intervals) {
    report << "interval [" << iv["t1"] << ", " << iv["t2"] << "] scores";
    for (const auto& s : iv["score_trace"]) report << " " << s.get<double>();
    report << "\n";
    for (const auto& o : iv["objects"]) {
      const auto& d = o["delta"];
      report << "  " << o["object_id"].get<std::string>() << ": d_azimuth "
             << d["d_azimuth"].get<double>() << ", d_elevation " << d["d_elevation"].get<double>()
             << ", d_inplane " << d["d_inplane"].get<double>()
             << (o["logged"].get<bool>() ? "" : " (below threshold, not logged)") << "\n";
    }
  }
  report << "storage: " << fp.total() << " of " << fp.hypothetical_full_video_bytes
         << " bytes for the full video (" << 100.0 * fp.ratio() << "%)\n";
  write_text(a.out / "report.txt", report.str());

  write_json(a.out / "effective_config.json",
             json{{"command", "watch"},
                  {"manifest", fs::absolute(a.manifest).string()},
                  {"pipeline", pipeline_to_json(cfg)},
                  {"backend", backend_desc},
                  {"min_delta_deg", a.min_delta},
                  {"epoch_seconds", a.epoch}});
  std::cout << report.str();
  return kExitOk;
}

// reconstruct ----------------------------------------------------------------

struct ReconstructArgs {
  fs::path log;
  std::string at = "end";
  fs::path emit_meshes;
  fs::path out;
  fs::path mesh_root;
  bool allow_torn_tail = false;
  bool skip_evidence = false;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const ParsedLog parsed = read_log(a.log, ParseOptions{a.allow_torn_tail});
  const ChangeLog& log = parsed.log;
  FrameIndex at = -1;
  if (a.at == "end") {
    at = log.events().empty() ? -1 : log.events().back().frame_index;
  } else {
    std::size_t used = 0;
    try {
      at = std::stoll(a.at, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.at.size() || a.at.empty()) {
      throw Error(ErrorCode::InvalidArgument, "--at must be a frame index or 'end'");
    }
  }
  const fs::path evidence_dir = a.log.parent_path() / "evidence";
  if (!a.skip_evidence && !log.events().empty()) verify_evidence(log, EvidenceStore(evidence_dir));
  const SceneState state = replay(log, at);

  json out = scene_state_to_json(state);
  out["torn_tail"] = parsed.torn_tail;
  if (a.out.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    write_json(a.out, out);
  }

  if (!a.emit_meshes.empty()) {
    ensure_dir(a.emit_meshes);
    const fs::path root = a.mesh_root.empty() ? a.log.parent_path() : a.mesh_root;
    for (const auto& [id, obj] : state.objects) {
      fs::path mesh_path = obj.mesh_ref;
      if (mesh_path.is_relative()) mesh_path = root / mesh_path;
      const TriangleMesh mesh = load_mesh(mesh_path);
      const Pose& initial = log.header().initial_state.objects.at(id).pose;
      const RotationMatrix r = pose_to_rotation(obj.pose) * pose_to_rotation(initial).transpose();
      write_text(a.emit_meshes / (id + ".obj"), write_obj(transform_mesh(mesh, r)));
    }
    write_json(a.emit_meshes / "effective_config.json",
               json{{"command", "reconstruct"},
                    {"log", fs::absolute(a.log).string()},
                    {"at", at},
                    {"allow_torn_tail", a.allow_torn_tail},
                    {"verify_evidence", !a.skip_evidence}});
  }
  return kExitOk;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  fs::path predictions;
  fs::path truth;
  double iou = 0.5;
  fs::path out;
};

BoundingBox bbox_of(const json& j) {
  if (!j.is_array() || j.size() != 4) throw InputError("bbox must have four numbers");
  for (const auto& v : j) {
    if (!v.is_number()) throw InputError("bbox must have four numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

std::string image_id_of(const json& j) {
  const auto it = j.find("image_id");
  if (it == j.end()) throw InputError("entry lacks image_id");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw InputError("image_id must be a string or integer");
}

std::vector<ImageGroundTruth> load_eval_truth(const json& j) {
  std::vector<ImageGroundTruth> out;
  if (j.is_object() && j.contains("frames")) {
    for (const auto& f : truth_from_json(j).frames) {
      ImageGroundTruth g{std::to_string(f.index), {}};
      for (const auto& o : f.objects) {
        if (o.bbox.well_formed()) g.boxes.push_back({o.label, o.bbox});
      }
      out.push_back(std::move(g));
    }
    return out;
  }
  if (!j.is_array()) throw InputError("truth must be an array of images or a simulate truth file");
  for (const auto& img : j) {
    ImageGroundTruth g{image_id_of(img), {}};
    for (const auto& b : img.value("boxes", json::array())) {
      if (!b.contains("label") || !b.at("label").is_string()) throw InputError("box lacks label");
      g.boxes.push_back({b.at("label").get<std::string>(), bbox_of(b.value("bbox", json()))});
    }
    out.push_back(std::move(g));
  }
  return out;
}

int cmd_eval(const EvalArgs& a) {
  const auto truth = load_eval_truth(read_json(a.truth));
  const json pj = read_json(a.predictions);
  if (!pj.is_array()) throw InputError("predictions must be an array of images");
  std::map<std::string, ImagePredictions> by_id;
  for (const auto& img : pj) {
    ImagePredictions p{image_id_of(img), {}};
    for (const auto& d : img.value("detections", json::array())) {
      if (!d.contains("label") || !d.at("label").is_string()) {
        throw InputError("detection lacks label");
      }
      if (!d.contains("confidence") || !d.at("confidence").is_number()) {
        throw InputError("detection lacks confidence");
      }
      p.detections.push_back(Detection{d.at("label").get<std::string>(),
                                       bbox_of(d.value("bbox", json())),
                                       d.at("confidence").get<double>()});
    }
    if (!by_id.emplace(p.image_id, p).second) throw InputError("duplicate image " + p.image_id);
  }
  std::vector<ImagePredictions> preds;
  for (const auto& g : truth) {
    auto it = by_id.find(g.image_id);
    preds.push_back(it == by_id.end() ? ImagePredictions{g.image_id, {}} : it->second);
    if (it != by_id.end()) by_id.erase(it);
  }
  if (!by_id.empty()) throw InputError("predictions for unknown image " + by_id.begin()->first);

  const EvalReport report = evaluate_map(preds, truth, a.iou);
  ensure_dir(a.out);
  json classes = json::object();
  std::string csv = "label,rank,recall,precision\n";
  char line[256];
  for (const auto& [label, c] : report.classes) {
    classes[label] = json{{"ap", c.ap ? json(*c.ap) : json(nullptr)},
                          {"ground_truth", c.ground_truth},
                          {"predictions", c.predictions},
                          {"true_positives", c.true_positives}};
    for (std::size_t i = 0; i < c.curve.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s,%zu,%.9g,%.9g\n", label.c_str(), i + 1,
                    c.curve[i].recall, c.curve[i].precision);
      csv += line;
    }
  }
  write_json(a.out / "eval_report.json",
             json{{"iou_threshold", a.iou},
                  {"map", report.map ? json(*report.map) : json(nullptr)},
                  {"classes", classes},
                  {"excluded_classes", report.excluded}});
  write_text(a.out / "pr_curves.csv", csv);
  write_json(a.out / "effective_config.json",
             json{{"command", "eval"},
                  {"predictions", fs::absolute(a.predictions).string()},
                  {"truth", fs::absolute(a.truth).string()},
                  {"iou_threshold", a.iou}});
  if (report.map) {
    std::cout << "mAP@" << a.iou << " = " << *report.map << "\n";
  } else {
    std::cout << "mAP undefined: no ground-truth boxes\n";
  }
  return kExitOk;
}

// dmd ------------------------------------------------------------------------

struct DmdArgs {
  fs::path frames;
  fs::path out;
  std::string prefix = "frame_";
  PipelineFlags pipeline;
};

int cmd_dmd(const DmdArgs& a) {
  motion::PipelineConfig cfg;
  a.pipeline.apply(cfg);
  cfg.validate();
  for (const char* sub : {"background", "foreground", "mask"}) ensure_dir(a.out / sub);

  FrameDirectorySource source(a.frames, a.prefix);
  std::vector<GrayFrame> window;
  std::string csv = "end,score,rank\n";
  std::size_t seen = 0;
  std::size_t emitted = 0;
  FrameIndex last_end = -1;
  auto emit = [&]() {
    const auto analysis = motion::analyze_window(window, cfg);
    const FrameIndex end = window.back().index();
    last_end = end;
    std::vector<double> fg(analysis.residual.size());
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = std::min(1.0, std::abs(analysis.residual[i]));
    const GrayFrame fg_frame(window.back().width(), window.back().height(), std::move(fg), end);
    save_frame(a.out / "background" / frame_file_name(end, ".pgm", "background_"),
               analysis.background);
    save_frame(a.out / "foreground" / frame_file_name(end, ".pgm", "foreground_"), fg_frame);
    write_file(a.out / "mask" / frame_file_name(end, ".pgm", "mask_"),
               encode_pgm(mask_image(analysis.mask)));
    char line[96];
    std::snprintf(line, sizeof(line), "%lld,%.9g,%d\n", static_cast<long long>(end), analysis.score,
                  analysis.rank);
    csv += line;
    ++emitted;
  };
  const auto len = static_cast<std::size_t>(cfg.window_len);
  const auto stride = static_cast<std::size_t>(cfg.window_stride);
  std::optional<GrayFrame> first;
  while (auto frame = source.next()) {
    if (!first) first = *frame;
    if (!frame->same_shape(*first)) {
      throw Error(ErrorCode::DimensionMismatch, "frame size changed mid-stream");
    }
    window.push_back(motion::downscale(*frame, cfg.rescale_factor));
    if (window.size() > len) window.erase(window.begin());
    ++seen;
    if (seen >= len && (seen - len) % stride == 0) emit();
  }
  if (seen >= len && window.back().index() != last_end) emit();
  if (seen < len) {
    throw Error(ErrorCode::TooFewFrames, "need at least " + std::to_string(len) + " frames, found " +
                                             std::to_string(seen));
  }
  write_text(a.out / "scores.csv", csv);
  write_json(a.out / "effective_config.json",
             json{{"command", "dmd"},
                  {"frames", fs::absolute(a.frames).string()},
                  {"pipeline", pipeline_to_json(cfg)}});
  std::cout << "analysed " << emitted << " window(s) over " << seen << " frames\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Geometric change detection for digital twins", "twindelta"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "twindelta 1.0");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic scenario with ground truth");
  simulate->add_option("--preset", sim.preset, "Scenario preset")
      ->check(CLI::IsMember(harness::preset_names()));
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  sim.o_length = simulate->add_option("--length", sim.length, "Override the frame count");
  sim.o_noise = simulate->add_option("--noise", sim.noise, "Override per-pixel noise sigma");
  simulate->add_option("--format", sim.format, "Frame file format")
      ->check(CLI::IsMember({"pgm", "png"}));

  WatchArgs watch;
  auto* w = app.add_subcommand("watch", "Detect motion, estimate pose changes and log them");
  w->add_option("--manifest", watch.manifest, "Scene manifest JSON")->required();
  w->add_option("--out", watch.out, "Output directory")->required();
  w->add_option("--backend", watch.backend, "oracle:TRUTH.json or adapter:COMMAND")->required();
  w->add_option("--pose-noise", watch.pose_noise, "Oracle pose noise sigma in degrees");
  w->add_option("--jitter", watch.jitter, "Oracle detector box jitter in pixels");
  w->add_option("--dropout", watch.dropout, "Oracle detector miss probability");
  w->add_option("--seed", watch.seed, "Oracle noise seed");
  w->add_option("--min-delta", watch.min_delta,
                "Skip events whose every angle change is at most this many degrees");
  w->add_option("--epoch", watch.epoch, "Stream start time in Unix seconds for timestamps");
  w->add_flag("--force", watch.force, "Replace an existing log in the output directory");
  watch.pipeline.add(*w, true);

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Replay the log to a scene state");
  r->add_option("--log", rec.log, "Event log")->required();
  r->add_option("--at", rec.at, "Frame index, -1 for the initial state, or 'end'");
  r->add_option("--emit-meshes", rec.emit_meshes, "Write one rotated OBJ per object here");
  r->add_option("--out", rec.out, "Write the state JSON here instead of stdout");
  r->add_option("--mesh-root", rec.mesh_root, "Directory for relative mesh references");
  r->add_flag("--allow-torn-tail", rec.allow_torn_tail, "Ignore a truncated final record");
  r->add_flag("--skip-evidence", rec.skip_evidence, "Do not verify evidence hashes");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score detections against ground truth (mAP)");
  e->add_option("--predictions", ev.predictions, "Predictions JSON")->required();
  e->add_option("--truth", ev.truth, "Ground truth JSON")->required();
  e->add_option("--iou", ev.iou, "IoU threshold for a match")->check(CLI::Range(0.0, 1.0));
  e->add_option("--out", ev.out, "Output directory")->required();

  DmdArgs dm;
  auto* d = app.add_subcommand("dmd", "Write DMD background, foreground and masks per window");
  d->add_option("--frames", dm.frames, "Frame directory")->required();
  d->add_option("--prefix", dm.prefix, "Frame file name prefix");
  d->add_option("--out", dm.out, "Output directory")->required();
  dm.pipeline.add(*d, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int rc = app.exit(pe);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*w) return cmd_watch(watch);
    if (*r) return cmd_reconstruct(rec);
    if (*e) return cmd_eval(ev);
    if (*d) return cmd_dmd(dm);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err.code());
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace twindelta::cli
