// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "twindelta/changelog.hpp"
#include "twindelta/cli.hpp"
#include "twindelta/detection.hpp"
#include "twindelta/dmd.hpp"
#include "twindelta/error.hpp"
#include "twindelta/harness.hpp"
#include "twindelta/mesh.hpp"
#include "twindelta/motion.hpp"
#include "twindelta/pose.hpp"

using namespace twindelta;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "twindelta");
  std::ostringstream sink;
  auto* saved = std::cout.rdbuf(sink.rdbuf());
  const int rc = cli::run(args);
  std::cout.rdbuf(saved);
  return rc;
}

std::vector<GrayFrame> rescaled(std::span<const GrayFrame> frames, double factor) {
  std::vector<GrayFrame> out;
  for (const auto& f : frames) out.push_back(motion::downscale(f, factor));
  return out;
}

// Mask of the window ending at `last` (inclusive) against block-majority truth.
struct MaskCheck {
  Mask mask;
  Mask truth;
};
MaskCheck window_mask(const harness::Scenario& sc, FrameIndex last,
                      const motion::PipelineConfig& cfg) {
  const std::span<const GrayFrame> all(sc.frames);
  const auto first = static_cast<std::size_t>(last + 1 - cfg.window_len);
  const auto window = rescaled(all.subspan(first, static_cast<std::size_t>(cfg.window_len)),
                               cfg.rescale_factor);
  const auto analysis = motion::analyze_window(window, cfg);
  const int block = static_cast<int>(std::lround(1.0 / cfg.rescale_factor));
  return {analysis.mask,
          testing::block_majority(sc.truth.frames[static_cast<std::size_t>(last)].occupancy,
                                  block)};
}

Outcome dmd_exactness() {
  std::mt19937_64 rng(20240601);
  double worst_eig = 0, worst_rec = 0;
  const int systems = 200;
  for (int s = 0; s < systems; ++s) {
    const int n = std::uniform_int_distribution<int>(2, 10)(rng);
    const int rho = std::uniform_int_distribution<int>(1, n)(rng);
    const auto sys = testing::random_linear_system(rng, n, rho, 20);
    const auto model =
        dmd::compute_dmd(dmd::SnapshotMatrices::from_sequence(sys.snapshots), dmd::FixedRank{rho});
    worst_eig = std::max(worst_eig,
                         testing::eigenvalue_match_error(sys.nonzero_eigenvalues, model.eigenvalues));
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd want = sys.snapshots.col(k);
      worst_rec = std::max(worst_rec, (dmd::reconstruct(model, k) - want).norm() / want.norm());
    }
  }
  return {worst_eig <= 1e-8 && worst_rec <= 1e-8,
          fmt("%d systems, max eigenvalue error %.2e, max relative reconstruction error %.2e",
              systems, worst_eig, worst_rec)};
}

Outcome static_null() {
  std::vector<GrayFrame> frames;
  for (int i = 0; i < 60; ++i) frames.push_back(GrayFrame::filled(64, 64, 0.35, i));
  const motion::PipelineConfig cfg;
  std::vector<motion::WindowRecord> windows;
  const auto intervals = motion::segment_stream(frames, cfg, &windows);
  std::size_t mask_pixels = 0;
  const auto small = rescaled(frames, cfg.rescale_factor);
  for (std::size_t end = cfg.window_len; end <= small.size(); end += cfg.window_stride) {
    const std::span<const GrayFrame> w(small.data() + end - cfg.window_len,
                                       static_cast<std::size_t>(cfg.window_len));
    mask_pixels += motion::analyze_window(w, cfg).mask.count();
  }

  const fs::path dir = testing::temp_dir("accept_static");
  fs::create_directories(dir / "frames");
  for (const auto& f : frames) save_frame(dir / "frames" / frame_file_name(f.index(), ".pgm"), f);
  write_text(dir / "cube.obj", write_obj(cli::cube_mesh(1.0)));
  write_text(dir / "manifest.json",
             json{{"scene_id", "constant"},
                  {"input", {{"kind", "frame_dir"}, {"path", "frames"}, {"fps", 30}}},
                  {"objects",
                   {{"cube",
                     {{"label", "cube"},
                      {"mesh", "cube.obj"},
                      {"pose", {{"azimuth", 0}, {"elevation", 0}, {"inplane", 0}}}}}}}}
                 .dump());
  write_text(dir / "truth.json",
             json{{"width", 64}, {"height", 64}, {"intervals", json::array()},
                  {"frames", json::array()}}
                 .dump());
  const int rc = run_cli({"watch", "--manifest", (dir / "manifest.json").string(), "--out",
                      (dir / "run").string(), "--backend", "oracle:" + (dir / "truth.json").string()});
  std::size_t events = 999;
  if (rc == 0) events = read_log(dir / "run" / "events.log").log.events().size();
  fs::remove_all(dir);
  return {intervals.empty() && mask_pixels == 0 && rc == 0 && events == 0,
          fmt("%zu intervals, %zu windows, %zu mask pixels, watch exit %d, %zu events",
              intervals.size(), windows.size(), mask_pixels, rc, events)};
}

Outcome baseline() {
  const auto sc = harness::generate(harness::preset("baseline", 1));
  const motion::PipelineConfig cfg;
  const auto intervals = motion::segment_stream(sc.frames, cfg);
  const auto check = window_mask(sc, 40, cfg);
  const double iou = mask_iou(check.mask, check.truth);
  const bool one = intervals.size() == 1;
  const bool endpoints = one && std::abs(intervals[0].t1 - 20) <= cfg.window_len &&
                         std::abs(intervals[0].t2 - 40) <= cfg.window_len;
  return {one && endpoints && iou >= 0.5,
          fmt("%zu interval(s)%s, mask IoU at frame 40 = %.3f", intervals.size(),
              one ? fmt(" [%lld,%lld]", static_cast<long long>(intervals[0].t1),
                        static_cast<long long>(intervals[0].t2))
                        .c_str()
                  : "",
              iou)};
}

Outcome disturbances() {
  const motion::PipelineConfig cfg;
  const auto dyn = harness::generate(harness::preset("dynamic_background", 1));
  const auto dcheck = window_mask(dyn, 40, cfg);
  const Mask region = testing::block_majority(dyn.truth.background_motion, 4);
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < region.bits.size(); ++i)
    overlap += (region.bits[i] && dcheck.mask.bits[i]) ? 1 : 0;

  const auto mono = harness::generate(harness::preset("monochrome", 1));
  const auto mcheck = window_mask(mono, 40, cfg);
  const double mono_iou = mask_iou(mcheck.mask, mcheck.truth);
  return {overlap > 0 && mono_iou < 0.2,
          fmt("dynamic background: %zu texture pixels in mask; monochrome IoU = %.3f", overlap,
              mono_iou)};
}

Outcome map_harness() {
  std::mt19937_64 rng(7);
  const std::vector<std::string> labels = {"cube", "disk", "ell"};
  int equal = 0;
  const int instances = 100;
  for (int i = 0; i < instances; ++i) {
    const auto inst = testing::random_tiny_instance(rng, 3, 4, labels);
    const auto report = evaluate_map(inst.predictions, inst.ground_truth, 0.5);
    const double bf = testing::brute_force_map(inst.predictions, inst.ground_truth, 0.5);
    const bool same = report.map ? *report.map == bf : std::isnan(bf);
    equal += same ? 1 : 0;
  }

  const auto sc = harness::generate(harness::preset("baseline", 1));
  const auto lookup = [&](const GrayFrame& f) {
    std::vector<LabeledBox> out;
    for (const auto& o : sc.truth.frames[static_cast<std::size_t>(f.index())].objects)
      out.push_back({o.label, o.bbox});
    return out;
  };
  OracleDetector det(lookup, 0.0, 0.0, 1);
  std::vector<ImagePredictions> preds;
  std::vector<ImageGroundTruth> gt;
  for (const auto& f : sc.frames) {
    preds.push_back({std::to_string(f.index()), det.detect(f)});
    gt.push_back({std::to_string(f.index()), lookup(f)});
  }
  const double oracle_map = evaluate_map(preds, gt).map.value_or(-1);
  return {equal == instances && oracle_map == 1.0,
          fmt("%d/%d instances equal brute force; zero-jitter oracle mAP = %.6f (published 0.936 "
              "not reproducible without the trained network)",
              equal, instances, oracle_map)};
}

Outcome pose_math() {
  std::mt19937_64 rng(11);
  double codec_worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto kind = static_cast<AngleKind>(std::uniform_int_distribution<int>(0, 2)(rng));
    const AngleRange r = angle_range(kind);
    const double a = std::uniform_real_distribution<double>(r.min, r.max)(rng);
    const int bins = std::uniform_int_distribution<int>(4, 360)(rng);
    const double back = decode_angle(encode_angle(a, bins, kind), bins, kind);
    const double gap = kind == AngleKind::Elevation ? std::abs(back - a)
                                                    : std::abs(wrap_delta(back - a));
    codec_worst = std::max(codec_worst, gap);
  }

  double rot_worst = 0;
  std::uniform_real_distribution<double> az(0, 360), el(-89.9, 89.9), ip(-180, 180);
  for (int i = 0; i < 10000; ++i) {
    const Pose p = normalize_pose(az(rng), el(rng), ip(rng));
    rot_worst = std::max(rot_worst, pose_distance(p, rotation_to_pose(pose_to_rotation(p))));
  }

  bool hand = percentage_error(90, 81) == 10.0 && percentage_error(90, 90) == 0.0;
  try {
    percentage_error(0, 3);
    hand = false;
  } catch (const Error& e) {
    hand = hand && e.code() == ErrorCode::ZeroRealDelta;
  }

  const int trials = 1000;
  int below = 0;
  Pose before, after;
  OraclePoseEstimator est(
      [&](const PoseQuery& q) { return q.frame_index % 2 == 0 ? before : after; }, 5.0, 99);
  for (int t = 0; t < trials; ++t) {
    const int axis = t % 3;
    double real = 0, measured = 0;
    const PoseQuery q0{nullptr, nullptr, "", "obj", 2 * t};
    const PoseQuery q1{nullptr, nullptr, "", "obj", 2 * t + 1};
    if (axis == 0) {
      before = normalize_pose(az(rng), std::uniform_real_distribution<double>(-60, 60)(rng), ip(rng));
      after = normalize_pose(before.azimuth() + 90, before.elevation(), before.inplane());
      real = pose_delta(before, after).d_azimuth;
      measured = pose_delta(est.estimate(q0), est.estimate(q1)).d_azimuth;
    } else if (axis == 1) {
      before = normalize_pose(az(rng), -45, ip(rng));
      after = normalize_pose(before.azimuth(), 45, before.inplane());
      real = pose_delta(before, after).d_elevation;
      measured = pose_delta(est.estimate(q0), est.estimate(q1)).d_elevation;
    } else {
      before = normalize_pose(az(rng), std::uniform_real_distribution<double>(-60, 60)(rng), ip(rng));
      after = normalize_pose(before.azimuth(), before.elevation(), before.inplane() + 90);
      real = pose_delta(before, after).d_inplane;
      measured = pose_delta(est.estimate(q0), est.estimate(q1)).d_inplane;
    }
    below += percentage_error(real, measured) < 20.0 ? 1 : 0;
  }
  const double share = static_cast<double>(below) / trials;
  return {codec_worst <= 1e-9 && rot_worst <= 1e-8 && hand && share >= 0.95,
          fmt("codec max error %.2e, rotation round trip max %.2e, hand cases %s, oracle "
              "sigma=5 on 90 deg: %.1f%% of %d trials below 20%% error (published <20%% not "
              "reproducible without the trained estimator)",
              codec_worst, rot_worst, hand ? "exact" : "WRONG", 100.0 * share, trials)};
}

Outcome end_to_end() {
  const fs::path dir = testing::temp_dir("accept_e2e");
  const fs::path sim = dir / "sim";
  int rc = run_cli({"simulate", "--preset", "baseline", "--seed", "1", "--out", sim.string()});
  if (rc != 0) return {false, fmt("simulate exit %d", rc)};
  rc = run_cli({"watch", "--manifest", (sim / "manifest.json").string(), "--out",
            (dir / "run").string(), "--backend", "oracle:" + (sim / "truth.json").string()});
  if (rc != 0) return {false, fmt("watch exit %d", rc)};
  rc = run_cli({"reconstruct", "--log", (dir / "run" / "events.log").string(), "--at", "end", "--out",
            (dir / "state.json").string()});
  if (rc != 0) return {false, fmt("reconstruct exit %d", rc)};

  const SceneState state = scene_state_from_json(json::parse(read_text(dir / "state.json")));
  const auto truth = cli::truth_from_json(json::parse(read_text(sim / "truth.json")));
  const auto* final_truth = truth.find(static_cast<FrameIndex>(truth.frames.size()) - 1, "cube");
  const Pose got = state.objects.at("cube").pose;
  const double dist = pose_distance(got, final_truth->pose);
  const json fp = json::parse(read_text(dir / "run" / "footprint.json"));
  const double ratio = fp.at("ratio").get<double>();
  const std::size_t events = read_log(dir / "run" / "events.log").log.events().size();
  fs::remove_all(dir);
  return {dist == 0.0 && ratio < 0.05,
          fmt("%zu event(s); replayed pose (%.6g, %.6g, %.6g) vs truth (%.6g, %.6g, %.6g), "
              "distance %.3g; storage %.2f%% of full video",
              events, got.azimuth(), got.elevation(), got.inplane(), final_truth->pose.azimuth(),
              final_truth->pose.elevation(), final_truth->pose.inplane(), dist, 100.0 * ratio)};
}

Outcome log_robustness() {
  LogHeader header;
  header.scene_id = "robust";
  header.created_at = "1970-01-01T00:00:00.000Z";
  header.initial_state.as_of_frame = 0;
  header.initial_state.objects["cube"] = {"meshes/cube.obj", normalize_pose(30, 15, 0)};
  header.initial_state.objects["disk"] = {"meshes/disk.obj", normalize_pose(300, -20, 170)};
  ChangeLog log(header);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-90, 90);
  FrameIndex f = 0;
  for (int i = 0; i < 40; ++i) {
    f += std::uniform_int_distribution<int>(0, 20)(rng);
    log.append(ChangeEvent{i % 2 ? "cube" : "disk", f, "1970-01-01T00:00:01.000Z",
                           PoseDelta{d(rng), d(rng) / 8, d(rng)},
                           std::string(64, static_cast<char>('a' + i % 6))});
  }
  const std::string bytes = serialize_log(log);
  std::vector<SceneState> prefix_end_states;
  for (std::size_t k = 0; k <= log.events().size(); ++k) {
    ChangeLog p(header);
    for (std::size_t j = 0; j < k; ++j) p.append(log.events()[j]);
    prefix_end_states.push_back(replay(p, f));
  }

  std::size_t valid = 0, corrupt = 0, wrong = 0;
  for (std::size_t cut = 0; cut <= bytes.size(); ++cut) {
    try {
      const ParsedLog parsed = parse_log(std::string_view(bytes.data(), cut));
      const std::size_t k = parsed.log.events().size();
      const bool prefix_ok = parsed.valid_bytes == cut &&
                             serialize_log(parsed.log) == bytes.substr(0, cut) &&
                             replay(parsed.log, f) == prefix_end_states[k];
      if (prefix_ok) {
        ++valid;
      } else {
        ++wrong;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CorruptLog) {
        ++corrupt;
      } else {
        ++wrong;
      }
    }
  }
  return {wrong == 0 && valid == log.events().size() + 1,
          fmt("%zu offsets: %zu valid prefixes, %zu detected CorruptLog, %zu silent wrong states",
              bytes.size() + 1, valid, corrupt, wrong)};
}

Outcome mesh_io() {
  const TriangleMesh bin = parse_stl(testing::cube_stl_binary());
  const std::string ascii_text = testing::cube_stl_ascii();
  const TriangleMesh ascii = parse_stl(
      std::span(reinterpret_cast<const std::uint8_t*>(ascii_text.data()), ascii_text.size()));
  const bool topology = bin.vertices.size() == 8 && bin.faces.size() == 12 &&
                        ascii.vertices.size() == 8 && ascii.faces.size() == 12;
  TriangleMesh named = bin;
  named.name = "cube";
  const bool round_trip = parse_obj(write_obj(named)) == named;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> az(0, 360), el(-90, 90), ip(-180, 180), c(-3, 3);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    TriangleMesh m = bin;
    for (auto& v : m.vertices) v += Eigen::Vector3d(c(rng), c(rng), c(rng)) * 0.3;
    const TriangleMesh moved =
        transform_mesh(m, pose_to_rotation(normalize_pose(az(rng), el(rng), ip(rng))));
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
      for (std::size_t j = i + 1; j < m.vertices.size(); ++j)
        worst = std::max(worst, std::abs((moved.vertices[i] - moved.vertices[j]).norm() -
                                         (m.vertices[i] - m.vertices[j]).norm()));
  }
  return {topology && round_trip && worst <= 1e-9,
          fmt("cube STL %zu vertices / %zu faces (ascii %zu / %zu), OBJ round trip %s, max "
              "distance change %.2e over 1000 rotations",
              bin.vertices.size(), bin.faces.size(), ascii.vertices.size(), ascii.faces.size(),
              round_trip ? "identical" : "DIFFERENT", worst)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"dmd_exactness", 10, dmd_exactness},
      {"static_scene_null", 1, static_null},
      {"baseline_scenario", 5, baseline},
      {"disturbance_behavior", 10, disturbances},
      {"map_harness", 5, map_harness},
      {"pose_math", 10, pose_math},
      {"end_to_end_replay", 10, end_to_end},
      {"log_robustness", 30, log_robustness},
      {"mesh_io", 5, mesh_io},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s %s (%.2fs, limit %.0fs%s): %s\n", pass ? "PASS" : "FAIL", c.name.c_str(), secs,
                c.limit_s, in_time ? "" : ", TOO SLOW", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
