#include "stereoref/align_service.hpp"

#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>

#include <httplib.h>
#include <json.hpp>

#include "stereoref/dataset_io.hpp"
#include "stereoref/errors.hpp"
#include "stereoref/mesh.hpp"
#include "stereoref/png_io.hpp"
#include "stereoref/pose_io.hpp"
#include "stereoref/session.hpp"
#include "stereoref/version.hpp"

namespace stereoref {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Request-level failure carrying its HTTP status.
struct HttpError {
  int status;
  std::string message;
};

json pose_json(const RigidTransform& pose) {
  const Mat4 m = pose.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json stats_json(const std::optional<RangeStats>& s) {
  if (!s) return nullptr;
  return {{"min", s->min}, {"max", s->max}, {"mean", s->mean}, {"p01", s->p01}, {"p99", s->p99}, {"count", s->count}};
}

json session_json(const AlignmentSession& s, const PoseSnapshot& snap) {
  return {{"id", s.id()},
          {"pose", pose_json(snap.pose)},
          {"dz", snap.dz},
          {"dz_bound", s.dz_bound()},
          {"revision", snap.revision},
          {"commits", snap.commits},
          {"camera_center", vec_json(snap.pose.camera_center())},
          {"width", s.rig().width()},
          {"height", s.rig().height()}};
}

json commit_json(const CommitEntry& e) {
  return {{"index", e.index},
          {"pose", pose_json(e.pose)},
          {"dz", e.dz},
          {"operator", e.operator_label},
          {"timestamp", e.timestamp}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req, int status_on_error) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{status_on_error, "request body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{status_on_error, std::string("invalid JSON: ") + e.what()};
  }
}

double number_field(const json& body, const char* key, int status) {
  if (!body.contains(key)) return 0.0;
  const json& v = body[key];
  if (!v.is_number()) throw HttpError{status, std::string(key) + " must be a number"};
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw HttpError{status, std::string(key) + " must be finite"};
  return d;
}

std::string string_field(const json& body, const char* key, bool required) {
  if (!body.contains(key)) {
    if (required) throw HttpError{422, std::string("missing field ") + key};
    return "";
  }
  if (!body[key].is_string()) throw HttpError{422, std::string(key) + " must be a string"};
  return body[key].get<std::string>();
}

template <class M>
M matrix_field(const json& j, const char* what) {
  M m;
  if (!j.is_array() || j.size() != static_cast<std::size_t>(m.rows()))
    throw HttpError{422, std::string(what) + " must be a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " array"};
  for (int r = 0; r < m.rows(); ++r) {
    if (!j[r].is_array() || j[r].size() != static_cast<std::size_t>(m.cols()))
      throw HttpError{422, std::string(what) + " has a malformed row"};
    for (int c = 0; c < m.cols(); ++c) {
      if (!j[r][c].is_number()) throw HttpError{422, std::string(what) + " entries must be numbers"};
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Vec3 vec_field(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw HttpError{422, std::string(what) + " must be [x, y, z]"};
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string query(const httplib::Request& req, const char* key, const std::string& fallback) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

}  // namespace

struct AlignService::Impl {
  ServiceConfig config;
  SessionStore store;
  httplib::Server server;
  std::mutex persist_mu;
  bool bound = false;

  std::string resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(config.data_dir) / p).string();
  }

  std::shared_ptr<AlignmentSession> session_or_404(const httplib::Request& req) {
    auto s = store.find(req.matches[1]);
    if (!s) throw HttpError{404, "unknown session " + std::string(req.matches[1])};
    return s;
  }

  // Runs a handler and maps exceptions onto status codes.
  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.message);
      } catch (const BoundViolation& e) {
        send_error(res, 409, e.what());
      } catch (const FileError& e) {
        send_error(res, 422, e.what());
      } catch (const InvalidArgument& e) {
        send_error(res, 422, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req, 422);
    TriangleMesh mesh = read_mesh(resolve(string_field(body, "mesh", true)));
    const Calibration calib =
        load_calibration(resolve(string_field(body, "calibration", true)), string_field(body, "calibration_id", false));
    ColorImage left = read_png_rgb(resolve(string_field(body, "left", true)));
    ColorImage right = read_png_rgb(resolve(string_field(body, "right", true)));
    if (!left.same_shape(right)) throw HttpError{422, "left and right images differ in size"};
    const RectifiedRig rig = rig_from_calibration(calib, left.width(), left.height());

    const int sources = static_cast<int>(body.contains("markers")) + static_cast<int>(body.contains("pose")) +
                        static_cast<int>(body.contains("pose_matrix"));
    if (sources != 1) throw HttpError{422, "give exactly one of markers, pose or pose_matrix"};
    RigidTransform initial;
    if (body.contains("markers")) {
      const json& m = body["markers"];
      MarkerTriple triple;
      if (m.is_string()) {
        triple = read_markers(resolve(m.get<std::string>()));
      } else if (m.is_object() && m.contains("left") && m.contains("right") && m.contains("target")) {
        triple = {vec_field(m["left"], "markers.left"), vec_field(m["right"], "markers.right"),
                  vec_field(m["target"], "markers.target")};
      } else {
        throw HttpError{422, "markers must be a file path or {left, right, target}"};
      }
      initial = initial_pose_from_markers(triple);
    } else if (body.contains("pose")) {
      if (!body["pose"].is_string()) throw HttpError{422, "pose must be a file path"};
      initial = read_pose(resolve(body["pose"].get<std::string>()));
    } else {
      initial = RigidTransform::from_matrix(matrix_field<Mat4>(body["pose_matrix"], "pose_matrix"));
    }

    auto session = store.create(std::move(mesh), rig, std::move(left), std::move(right), initial, config.dz_bound);
    res.set_header("Location", "/sessions/" + session->id());
    send_json(res, 201, session_json(*session, session->snapshot()));
  }

  void delta(const httplib::Request& req, httplib::Response& res) {
    auto s = session_or_404(req);
    const json body = parse_body(req, 400);
    PoseDelta d{number_field(body, "rx", 400), number_field(body, "ry", 400), number_field(body, "rz", 400),
                number_field(body, "dz", 400)};
    const PoseSnapshot snap = s->apply_delta(d);
    send_json(res, 200, session_json(*s, snap));
  }

  void render(const httplib::Request& req, httplib::Response& res) {
    auto s = session_or_404(req);
    RenderConfig cfg = config.reference.render;
    const std::string mode = query(req, "mode", "solid");
    if (mode == "solid") cfg.mode = RenderMode::solid;
    else if (mode == "wireframe") cfg.mode = RenderMode::wireframe;
    else if (mode == "points") cfg.mode = RenderMode::points;
    else throw HttpError{400, "mode must be solid, wireframe or points"};
    const std::string alpha = query(req, "alpha", "1");
    try {
      std::size_t used = 0;
      cfg.alpha = std::stod(alpha, &used);
      if (used != alpha.size()) throw std::invalid_argument(alpha);
    } catch (const std::exception&) {
      throw HttpError{400, "alpha must be a number"};
    }
    if (!(cfg.alpha >= 0 && cfg.alpha <= 1)) throw HttpError{400, "alpha must be in [0, 1]"};
    const std::string swap = query(req, "swap", "false");
    if (swap != "true" && swap != "false" && swap != "1" && swap != "0") throw HttpError{400, "swap must be true or false"};
    const bool swapped = swap == "true" || swap == "1";
    const std::string eye = query(req, "eye", "left");
    ColorImage image;
    if (eye == "left") image = s->render(Eye::left, cfg);
    else if (eye == "right") image = s->render(Eye::right, cfg);
    else if (eye == "pair") image = s->render_pair(cfg, swapped);
    else throw HttpError{400, "eye must be left, right or pair"};
    const std::vector<std::uint8_t> png = encode_png(image);
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void commit(const httplib::Request& req, httplib::Response& res) {
    auto s = session_or_404(req);
    const json body = parse_body(req, 400);
    if (body.contains("operator") && !body["operator"].is_string()) throw HttpError{400, "operator must be a string"};
    const CommitEntry e = s->commit(body.value("operator", std::string()));
    json out = commit_json(e);
    out["pose_file"] = persist(*s, e);
    send_json(res, 201, out);
  }

  // Writes <data_dir>/sessions/<id>/pose_NNN.txt and refreshes commits.json.
  std::string persist(const AlignmentSession& s, const CommitEntry& e) {
    std::lock_guard lock(persist_mu);
    const fs::path dir = fs::path(config.data_dir) / "sessions" / s.id();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    char name[32];
    std::snprintf(name, sizeof name, "pose_%03zu.txt", e.index);
    const std::string pose_path = (dir / name).string();
    write_pose(pose_path, e.pose);
    json list = json::array();
    for (const CommitEntry& c : s.commits()) list.push_back(commit_json(c));
    const std::string text = json{{"session", s.id()}, {"commits", list}}.dump(2) + "\n";
    write_file((dir / "commits.json").string(), std::vector<std::uint8_t>(text.begin(), text.end()));
    return pose_path;
  }

  void commits(const httplib::Request& req, httplib::Response& res) {
    auto s = session_or_404(req);
    json list = json::array();
    for (const CommitEntry& c : s->commits()) list.push_back(commit_json(c));
    send_json(res, 200, {{"session", s->id()}, {"commits", list}});
  }

  void preview(const httplib::Request& req, httplib::Response& res) {
    auto s = session_or_404(req);
    const PreviewStats p = s->preview(config.reference);
    json percent = {{"valid", p.percent(MaskLabel::valid)},
                    {"occluded", p.occluded_percent()},
                    {"occluded_left", p.percent(MaskLabel::occluded_left)},
                    {"occluded_right", p.percent(MaskLabel::occluded_right)},
                    {"non_overlap", p.percent(MaskLabel::non_overlap)},
                    {"outside_model", p.percent(MaskLabel::outside_model)}};
    send_json(res, 200,
              {{"session", s->id()},
               {"pixels", p.pixels},
               {"depth", stats_json(p.depth)},
               {"disparity", stats_json(p.disparity)},
               {"percent", percent}});
  }

  void install_routes() {
    const std::string sid = "/sessions/([A-Za-z0-9_-]+)";
    server.Get("/healthz", wrap([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"version", version()}});
    }));
    server.Post("/sessions", wrap([this](const auto& q, auto& r) { create(q, r); }));
    server.Get(sid, wrap([this](const httplib::Request& q, httplib::Response& r) {
      auto s = session_or_404(q);
      send_json(r, 200, session_json(*s, s->snapshot()));
    }));
    server.Post(sid + "/delta", wrap([this](const auto& q, auto& r) { delta(q, r); }));
    server.Get(sid + "/render", wrap([this](const auto& q, auto& r) { render(q, r); }));
    server.Post(sid + "/commit", wrap([this](const auto& q, auto& r) { commit(q, r); }));
    server.Get(sid + "/commits", wrap([this](const auto& q, auto& r) { commits(q, r); }));
    server.Get(sid + "/preview", wrap([this](const auto& q, auto& r) { preview(q, r); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
    });
  }
};

AlignService::AlignService(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  config.reference.render.validate();
  if (!(config.dz_bound > 0)) throw InvalidArgument("service: dz bound must be positive");
  impl_->config = std::move(config);
  // The library default adds SO_REUSEPORT, which lets a second server share
  // an occupied port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  impl_->install_routes();
}

AlignService::~AlignService() { stop(); }

int AlignService::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw InvalidArgument("port must be in [0, 65535]");
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return bound;
}

void AlignService::run() {
  if (!impl_->bound) throw Error("AlignService::run called before bind");
  impl_->server.listen_after_bind();
}

void AlignService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void AlignService::wait_until_ready() const { impl_->server.wait_until_ready(); }

SessionStore& AlignService::sessions() { return impl_->store; }

}  // namespace stereoref
