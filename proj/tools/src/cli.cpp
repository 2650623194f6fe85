#include "stereoref_tools/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "stereoref/align_service.hpp"
#include "stereoref/dataset_io.hpp"
#include "stereoref/errors.hpp"
#include "stereoref/mesh.hpp"
#include "stereoref/metrics.hpp"
#include "stereoref/png_io.hpp"
#include "stereoref/pose_io.hpp"
#include "stereoref/reference.hpp"
#include "stereoref/report.hpp"
#include "stereoref/se3.hpp"
#include "stereoref/version.hpp"

namespace stereoref::cli {

namespace {

namespace fs = std::filesystem;

// Thrown for failures that already carry their exit code.
struct Exit {
  int code;
  std::string message;
};

void write_text(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw FileError(FileError::Kind::io, parent.string(), "cannot create directory: " + ec.message());
  }
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string fmt(double v, const char* spec = "%.6f") {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// --- init-pose ---------------------------------------------------------------

struct InitPoseArgs {
  std::string markers;
  std::string out;
};

int init_pose(const InitPoseArgs& a, std::ostream& out) {
  const RigidTransform pose = initial_pose_from_markers(read_markers(a.markers));
  write_pose(a.out, pose);
  out << "wrote " << a.out << '\n';
  return kOk;
}

// --- gen-reference -----------------------------------------------------------

struct SceneArgs {
  std::string mesh;
  std::string calib;
  std::string calib_id;
  int width = 0;
  int height = 0;
  double near = 1.0;
  double far = 1000.0;
  double margin = 1.0;
};

struct GenReferenceArgs {
  SceneArgs scene;
  std::string pose;
  std::string out;
  std::string id;
  std::string left;
  std::string right;
};

ReferenceConfig reference_config(const SceneArgs& s) {
  ReferenceConfig cfg;
  cfg.render.z_near = s.near;
  cfg.render.z_far = s.far;
  cfg.margin = s.margin;
  cfg.render.validate();
  if (!(cfg.margin > 0)) throw InvalidArgument("--margin must be positive");
  return cfg;
}

struct Scene {
  TriangleMesh mesh;
  Calibration calib;
  RectifiedRig rig;
};

Scene load_scene(const SceneArgs& s) {
  TriangleMesh mesh = read_mesh(s.mesh);
  const Calibration calib = load_calibration(s.calib, s.calib_id);
  if ((calib.width == 0 && s.width == 0) || (calib.height == 0 && s.height == 0))
    throw InvalidArgument("calibration has no image size; pass --width and --height");
  if ((s.width != 0 && calib.width != 0 && s.width != calib.width) ||
      (s.height != 0 && calib.height != 0 && s.height != calib.height))
    throw DataInconsistency("--width/--height disagree with the calibration image size");
  const RectifiedRig rig = rig_from_calibration(calib, s.width, s.height);
  return {std::move(mesh), calib, rig};
}

int gen_reference(const GenReferenceArgs& a, std::ostream& out) {
  validate_record_id(a.id);
  const ReferenceConfig cfg = reference_config(a.scene);
  const Scene scene = load_scene(a.scene);
  const RigidTransform pose = read_pose(a.pose);
  ReferenceBundle ref = generate_reference(scene.mesh, scene.rig, pose, cfg);

  DatasetRecord r;
  r.id = a.id;
  if (!a.left.empty() || !a.right.empty()) {
    if (a.left.empty() || a.right.empty()) throw InvalidArgument("pass both --left and --right or neither");
    r.left = read_png_rgb(a.left);
    r.right = read_png_rgb(a.right);
    if (r.left.width() != scene.rig.width() || r.left.height() != scene.rig.height() || !r.left.same_shape(r.right))
      throw DataInconsistency("rectified image size differs from the calibration");
  }
  r.depth_left = std::move(ref.depth_left);
  r.depth_right = std::move(ref.depth_right);
  r.disparity = std::move(ref.disparity);
  r.mask = std::move(ref.mask);
  r.p1 = scene.calib.p1;
  r.p2 = scene.calib.p2;
  r.q = build_matrices(scene.rig).q;
  write_record(a.out, r);

  const auto counts = label_counts(r.mask);
  out << "record " << a.id << " written to " << a.out << '\n';
  const char* names[] = {"valid", "occluded_left", "occluded_right", "non_overlap", "outside_model"};
  for (int i = 0; i < kMaskLabelCount; ++i) out << "  " << names[i] << ": " << counts[i] << '\n';
  return kOk;
}

// --- average-poses -----------------------------------------------------------

struct AveragePosesArgs {
  std::vector<std::string> poses;
  std::string center = "0,0,0";
  std::vector<std::string> probes;
  double threshold = 20.0;
  double bad = 3.0;
  std::string out;
  std::string flags_out;
  SceneArgs scene;
  std::string id;
};

int average_poses(const AveragePosesArgs& a, std::ostream& out) {
  AlignmentSet set;
  set.center = parse_vec3(a.center);
  for (const std::string& p : a.poses) set.transforms.push_back(read_pose(p));
  std::vector<double> worst(a.poses.size(), 0.0);

  if (!a.probes.empty()) {
    if (a.scene.mesh.empty() || a.scene.calib.empty() || a.id.empty())
      throw InvalidArgument("outlier rejection with --probes needs --mesh, --calib and --id");
    validate_record_id(a.id);
    const ReferenceConfig cfg = reference_config(a.scene);
    const Scene scene = load_scene(a.scene);
    std::vector<DisparityMap> probes;
    for (const std::string& dir : a.probes) {
      probes.push_back(read_estimate(dir, a.id));
      if (probes.back().width() != scene.rig.width() || probes.back().height() != scene.rig.height())
        throw DataInconsistency("probe " + estimate_path(dir, a.id) + " size differs from the calibration");
    }
    std::vector<DisparityMap> candidates;
    std::vector<MaskMap> masks;
    for (const RigidTransform& t : set.transforms) {
      ReferenceBundle ref = generate_reference(scene.mesh, scene.rig, t, cfg);
      candidates.push_back(std::move(ref.disparity));
      masks.push_back(std::move(ref.mask));
    }
    EvalConfig eval;
    eval.bad_threshold = a.bad;
    set.inliers = reject_outlier_alignments(candidates, probes, masks, a.threshold, eval);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      double best = 100.0;
      for (const DisparityMap& probe : probes) best = std::min(best, bad_pixel_percent(probe, candidates[i], masks[i], eval));
      worst[i] = best;
    }
  }
  if (!set.inliers.empty() && std::none_of(set.inliers.begin(), set.inliers.end(), [](bool b) { return b; }))
    throw DataInconsistency("every alignment was rejected as an outlier");

  const RigidTransform mean = average_transforms(set);
  write_pose(a.out, mean);

  std::ostringstream flags;
  for (std::size_t i = 0; i < a.poses.size(); ++i) {
    const bool inlier = set.inliers.empty() || set.inliers[i];
    flags << a.poses[i] << ' ' << (inlier ? "inlier" : "outlier");
    if (!a.probes.empty()) flags << " best_bad=" << fmt(worst[i], "%.4f");
    flags << '\n';
  }
  if (!a.flags_out.empty()) write_text(a.flags_out, flags.str());
  out << flags.str() << "mean pose written to " << a.out << '\n';
  return kOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string ref;
  std::vector<std::string> est;
  std::string include_occluded = "both";
  std::string report;
  std::string error_images;
  double bad = 3.0;
  double clip = 10.0;
  std::string depth_error = "z";
  int threads = 0;
};

std::pair<std::string, std::string> method_and_dir(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq != std::string::npos && eq > 0) return {spec.substr(0, eq), spec.substr(eq + 1)};
  fs::path p(spec);
  if (p.filename().empty()) p = p.parent_path();
  return {p.filename().string(), spec};
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
  return s;
}

int evaluate(const EvaluateArgs& a, std::ostream& out) {
  EvalConfig cfg;
  cfg.bad_threshold = a.bad;
  cfg.clip = a.clip;
  if (a.depth_error == "z") cfg.depth_error = DepthErrorKind::z_only;
  else if (a.depth_error == "euclidean") cfg.depth_error = DepthErrorKind::euclidean;
  else throw InvalidArgument("--depth-error must be z or euclidean");
  cfg.validate();
  const bool with_included = a.include_occluded == "both";

  const ChannelLayout layout = layout_for(a.ref);
  const std::vector<std::string> ids = list_record_ids(a.ref, layout);
  if (ids.empty()) throw DataInconsistency("reference dataset " + a.ref + " holds no records");

  std::vector<std::pair<std::string, std::string>> methods;
  for (const std::string& spec : a.est) methods.push_back(method_and_dir(spec));
  std::map<std::string, int> seen;
  for (const auto& m : methods)
    if (++seen[m.first] > 1) throw InvalidArgument("method name " + m.first + " given twice");

  // Every method must cover exactly the reference ids.
  std::string mismatch;
  for (const auto& [name, dir] : methods) {
    const std::vector<std::string> have = list_estimate_ids(dir);
    std::vector<std::string> missing, extra;
    std::set_difference(ids.begin(), ids.end(), have.begin(), have.end(), std::back_inserter(missing));
    std::set_difference(have.begin(), have.end(), ids.begin(), ids.end(), std::back_inserter(extra));
    if (!missing.empty()) mismatch += name + ": missing ids " + join(missing) + "\n";
    if (!extra.empty()) mismatch += name + ": ids not in the reference " + join(extra) + "\n";
  }
  if (!mismatch.empty()) throw Exit{kDataInconsistency, "id mismatch between reference and estimates\n" + mismatch};

  struct Loaded {
    RectifiedRig rig;
    DisparityMap disparity;
    MaskMap mask;
    std::vector<std::string> warnings;
  };
  auto load = [&](const std::string& id) {
    ReadResult rr = read_record(a.ref, id, layout);
    const RectifiedRig rig = RectifiedRig::from_projections(rr.record.p1, rr.record.p2, rr.record.disparity.width(),
                                                            rr.record.disparity.height());
    return Loaded{rig, std::move(rr.record.disparity), std::move(rr.record.mask), std::move(rr.warnings)};
  };

  // Work on ids in parallel; results land in id order.
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(a.threads > 0 ? a.threads : hw, ids.size());
  std::vector<std::vector<ImageScore>> scores(methods.size(), std::vector<ImageScore>(ids.size()));
  std::vector<std::vector<std::string>> warnings(ids.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        const Loaded ref = load(ids[i]);
        warnings[i] = ref.warnings;
        for (std::size_t m = 0; m < methods.size(); ++m) {
          const std::string path = estimate_path(methods[m].second, ids[i]);
          const DisparityMap est = read_estimate(methods[m].second, ids[i]);
          if (!est.same_shape(ref.disparity))
            throw FileError(FileError::Kind::dimension_mismatch, path, "estimate size differs from the reference");
          scores[m][i] = score_image(ids[i], ref.rig, est, ref.disparity, ref.mask, cfg);
          if (!a.error_images.empty()) {
            const fs::path dir = fs::path(a.error_images) / methods[m].first;
            fs::create_directories(dir);
            write_png((dir / (ids[i] + ".png")).string(), signed_error_image(est, ref.disparity, ref.mask, cfg));
          }
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!failure) failure = std::current_exception();
        next = ids.size();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<MethodReport> reports;
  for (std::size_t m = 0; m < methods.size(); ++m) reports.push_back({methods[m].first, aggregate(scores[m])});

  std::ostringstream csv, table;
  write_report_csv(csv, reports, with_included);
  write_report_table(table, reports, cfg.bad_threshold, with_included);
  if (!a.report.empty()) {
    write_text((fs::path(a.report) / "scores.csv").string(), csv.str());
    write_text((fs::path(a.report) / "table.txt").string(), table.str());
  }
  for (const auto& w : warnings)
    for (const auto& line : w) out << "warning: " << line << '\n';
  out << table.str();
  return kOk;
}

// --- range-stats -------------------------------------------------------------

struct RangeStatsArgs {
  std::string ref;
  std::string out;
};

int range_stats_cmd(const RangeStatsArgs& a, std::ostream& out) {
  const ChannelLayout layout = layout_for(a.ref);
  const std::vector<std::string> ids = list_record_ids(a.ref, layout);
  if (ids.empty()) throw DataInconsistency("reference dataset " + a.ref + " holds no records");
  std::ostringstream csv;
  csv << "id,count,depth_min,depth_max,depth_mean,depth_p01,depth_p99,disp_min,disp_max,disp_mean,disp_p01,disp_p99\n";
  for (const std::string& id : ids) {
    const ReadResult rr = read_record(a.ref, id, layout);
    const RangeStats z = range_stats(rr.record.depth_left, rr.record.mask);
    const RangeStats d = range_stats(rr.record.disparity, rr.record.mask);
    csv << id << ',' << z.count;
    for (const RangeStats* s : {&z, &d})
      csv << ',' << fmt(s->min) << ',' << fmt(s->max) << ',' << fmt(s->mean) << ',' << fmt(s->p01) << ','
          << fmt(s->p99);
    csv << '\n';
  }
  if (!a.out.empty()) write_text(a.out, csv.str());
  out << csv.str();
  return kOk;
}

// --- serve -------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data = ".";
  double dz_bound = kDefaultDzBound;
  double near = 1.0;
  double far = 1000.0;
  double margin = 1.0;
};

int serve(const ServeArgs& a, std::ostream& out) {
  ServiceConfig cfg;
  cfg.data_dir = a.data;
  cfg.dz_bound = a.dz_bound;
  cfg.reference.render.z_near = a.near;
  cfg.reference.render.z_far = a.far;
  cfg.reference.margin = a.margin;
  std::error_code ec;
  if (!fs::is_directory(a.data, ec)) throw Exit{kEnvironment, "data directory " + a.data + " does not exist"};
  AlignService service(cfg);
  int port = 0;
  try {
    port = service.bind(a.host, a.port);
  } catch (const InvalidArgument& e) {
    throw Exit{kEnvironment, e.what()};
  } catch (const Error& e) {
    throw Exit{kEnvironment, e.what()};
  }
  out << "listening on http://" << a.host << ':' << port << std::endl;

  // SIGINT/SIGTERM are taken by a watcher thread so the server stops cleanly.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread server([&] { service.run(); });
  service.wait_until_ready();
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
  server.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
  out << "stopped" << std::endl;
  return kOk;
}

void add_scene_options(CLI::App* cmd, SceneArgs& s, bool required) {
  cmd->add_option("--mesh", s.mesh, "Surface model (.ply or .stl)")->required(required)->check(CLI::ExistingFile);
  cmd->add_option("--calib", s.calib, "Calibration JSON with P1, P2, Q")->required(required)->check(CLI::ExistingFile);
  cmd->add_option("--calib-id", s.calib_id, "Entry of a calibration file keyed by record id");
  cmd->add_option("--width", s.width, "Image width when the calibration does not record it")->check(CLI::PositiveNumber);
  cmd->add_option("--height", s.height, "Image height when the calibration does not record it")->check(CLI::PositiveNumber);
  cmd->add_option("--near", s.near, "Near clipping plane, mm")->capture_default_str();
  cmd->add_option("--far", s.far, "Far clipping plane, mm")->capture_default_str();
  cmd->add_option("--margin", s.margin, "Occlusion depth margin, mm")->capture_default_str();
}

}  // namespace

int report_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const Exit& e) {
    err << "error: " << e.message;
    if (e.message.empty() || e.message.back() != '\n') err << '\n';
    return e.code;
  } catch (const FileError& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case FileError::Kind::io:
        return kEnvironment;
      case FileError::Kind::dimension_mismatch:
        return kDataInconsistency;
      default:
        return kInvalidInput;
    }
  } catch (const DataInconsistency& e) {
    err << "error: " << e.what() << '\n';
    return kDataInconsistency;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironment;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironment;
  } catch (...) {
    err << "error: unknown failure\n";
    return kEnvironment;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo reference generation and disparity evaluation", "stereoref"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  InitPoseArgs ip;
  auto* c_ip = app.add_subcommand("init-pose", "Initial camera pose from three marked model points");
  c_ip->add_option("--markers", ip.markers, "Marker file: lines `left|right|target x y z`")->required()->check(CLI::ExistingFile);
  c_ip->add_option("--out", ip.out, "Output pose file")->required();

  GenReferenceArgs gr;
  auto* c_gr = app.add_subcommand("gen-reference", "Render depth, disparity and mask for one record");
  add_scene_options(c_gr, gr.scene, true);
  c_gr->add_option("--pose", gr.pose, "Pose file (model to left camera)")->required()->check(CLI::ExistingFile);
  c_gr->add_option("--out", gr.out, "Dataset directory")->required();
  c_gr->add_option("--id", gr.id, "Three-digit record id")->required();
  c_gr->add_option("--left", gr.left, "Rectified left image to store with the record")->check(CLI::ExistingFile);
  c_gr->add_option("--right", gr.right, "Rectified right image to store with the record")->check(CLI::ExistingFile);

  AveragePosesArgs ap;
  auto* c_ap = app.add_subcommand("average-poses", "Reject outlier alignments and average the rest");
  c_ap->add_option("--poses", ap.poses, "Pose files")->required()->check(CLI::ExistingFile);
  c_ap->add_option("--center", ap.center, "Centre of rotation x,y,z in model mm")->capture_default_str();
  c_ap->add_option("--probes", ap.probes, "Directories of probe disparity maps")->check(CLI::ExistingDirectory);
  c_ap->add_option("--threshold", ap.threshold, "Outlier threshold, Bad percentage")->capture_default_str();
  c_ap->add_option("--bad", ap.bad, "Bad pixel threshold, px")->capture_default_str();
  c_ap->add_option("--out", ap.out, "Output mean pose file")->required();
  c_ap->add_option("--flags", ap.flags_out, "Write per-pose inlier flags to this file");
  c_ap->add_option("--id", ap.id, "Record id of the probe maps");
  add_scene_options(c_ap, ap.scene, false);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score disparity estimates against a reference dataset");
  c_ev->add_option("--ref", ev.ref, "Reference dataset directory")->required()->check(CLI::ExistingDirectory);
  c_ev->add_option("--est", ev.est, "Estimates as [name=]dir, repeatable")->required();
  c_ev->add_option("--include-occluded", ev.include_occluded, "Report both variants or only the excluded one")
      ->check(CLI::IsMember({"both", "only-excl"}))
      ->capture_default_str();
  c_ev->add_option("--report", ev.report, "Directory for scores.csv and table.txt");
  c_ev->add_option("--error-images", ev.error_images, "Directory for signed error images");
  c_ev->add_option("--bad", ev.bad, "Bad pixel threshold, px")->capture_default_str();
  c_ev->add_option("--clip", ev.clip, "Error image range, px")->capture_default_str();
  c_ev->add_option("--depth-error", ev.depth_error, "z or euclidean")
      ->check(CLI::IsMember({"z", "euclidean"}))
      ->capture_default_str();
  c_ev->add_option("--threads", ev.threads, "Worker threads, 0 for all cores")->capture_default_str();

  RangeStatsArgs rs;
  auto* c_rs = app.add_subcommand("range-stats", "Depth and disparity ranges per record");
  c_rs->add_option("--ref", rs.ref, "Reference dataset directory")->required()->check(CLI::ExistingDirectory);
  c_rs->add_option("--out", rs.out, "CSV output file");

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "Run the alignment HTTP service");
  c_sv->add_option("--host", sv.host, "Listen address")->capture_default_str();
  c_sv->add_option("--port", sv.port, "Listen port, 0 for any")->capture_default_str();
  c_sv->add_option("--data", sv.data, "Data directory")->capture_default_str();
  c_sv->add_option("--dz-bound", sv.dz_bound, "Axial adjustment bound, mm")->capture_default_str();
  c_sv->add_option("--near", sv.near, "Near clipping plane, mm")->capture_default_str();
  c_sv->add_option("--far", sv.far, "Far clipping plane, mm")->capture_default_str();
  c_sv->add_option("--margin", sv.margin, "Occlusion depth margin, mm")->capture_default_str();

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (c_ip->parsed()) return init_pose(ip, out);
    if (c_gr->parsed()) return gen_reference(gr, out);
    if (c_ap->parsed()) return average_poses(ap, out);
    if (c_ev->parsed()) return evaluate(ev, out);
    if (c_rs->parsed()) return range_stats_cmd(rs, out);
    if (c_sv->parsed()) {
      if (sv.port < 0 || sv.port > 65535) throw Exit{kEnvironment, "port must be in [0, 65535]"};
      return serve(sv, out);
    }
  } catch (...) {
    return report_current_exception(err);
  }
  return kInvalidInput;
}

}  // namespace stereoref::cli
