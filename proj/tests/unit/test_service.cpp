#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include "scenes.hpp"
#include "stereoref/align_service.hpp"
#include "stereoref/errors.hpp"
#include "stereoref/png_io.hpp"
#include "stereoref/pose_io.hpp"
#include "stereoref/session.hpp"

// After Eigen: <resolv.h> from httplib defines a _res macro.
#include <httplib.h>
#include <json.hpp>

namespace stereoref {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ColorImage noise_image(int w, int h, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> c(0, 255);
  ColorImage img(w, h);
  for (Rgb8& p : img.pixels()) p = {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng))};
  return img;
}

Mat4 pose_of(const json& j) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

// Plane scene on disk, a running service on a free port and a client.
class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    rig_ = std::make_unique<RectifiedRig>(testing::plane_rig());
    TriangleMesh plane = testing::rectangle(-400, 400, -400, 400, 100, 4, 4);
    plane.colors.assign(plane.vertices.size(), Vec3(0.9, 0.6, 0.3));
    write_ply(dir_.path() / "plane.ply", plane);
    testing::write_calibration(dir_.str("calibration.json"), *rig_, "001");
    left_ = noise_image(640, 512, 1);
    right_ = noise_image(640, 512, 2);
    write_png(dir_.str("left.png"), left_);
    write_png(dir_.str("right.png"), right_);

    ServiceConfig cfg;
    cfg.data_dir = dir_.str();
    service_ = std::make_unique<AlignService>(cfg);
    port_ = service_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->run(); });
    service_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    service_->stop();
    thread_.join();
  }

  json scene_request() const {
    return {{"mesh", "plane.ply"},
            {"calibration", "calibration.json"},
            {"left", "left.png"},
            {"right", dir_.str("right.png")},
            {"markers", {{"left", {0, 0, 0}}, {"right", {1, 0, 0}}, {"target", {0, 0, 100}}}}};
  }

  std::string create_session() {
    auto res = client_->Post("/sessions", scene_request().dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["id"].get<std::string>();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  ColorImage get_png(const std::string& path, int expect_status = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, expect_status) << path << " " << res->body;
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    return decode_png_rgb(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
  }

  testing::TempDir dir_{"svc"};
  std::unique_ptr<RectifiedRig> rig_;
  ColorImage left_, right_;
  std::unique_ptr<AlignService> service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServiceTest, Health) {
  auto res = client_->Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
}

TEST_F(ServiceTest, CreateAndGet) {
  auto res = post("/sessions", scene_request());
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201) << res->body;
  const json s = json::parse(res->body);
  EXPECT_EQ(res->get_header_value("Location"), "/sessions/" + s["id"].get<std::string>());
  EXPECT_LE((pose_of(s["pose"]) - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(s["width"], 640);
  EXPECT_EQ(s["revision"], 0);
  auto got = client_->Get("/sessions/" + s["id"].get<std::string>());
  ASSERT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body), s);
}

TEST_F(ServiceTest, CreateFromPoseFileAndMatrix) {
  const RigidTransform p(testing::axis_angle(Vec3::UnitY(), 0.1), Vec3(1, 2, 3));
  write_pose(dir_.str("init.txt"), p);
  json req = scene_request();
  req.erase("markers");
  req["pose"] = "init.txt";
  auto res = post("/sessions", req);
  ASSERT_EQ(res->status, 201) << res->body;
  EXPECT_EQ(pose_of(json::parse(res->body)["pose"]), p.matrix());
  req.erase("pose");
  json m = json::array();
  for (int r = 0; r < 4; ++r) m.push_back({p.matrix()(r, 0), p.matrix()(r, 1), p.matrix()(r, 2), p.matrix()(r, 3)});
  req["pose_matrix"] = m;
  res = post("/sessions", req);
  ASSERT_EQ(res->status, 201) << res->body;
}

TEST_F(ServiceTest, CreateErrors) {
  json req = scene_request();
  req["mesh"] = "missing.ply";
  EXPECT_EQ(post("/sessions", req)->status, 422);
  req = scene_request();
  req["pose"] = "x.txt";
  EXPECT_EQ(post("/sessions", req)->status, 422);  // two pose sources
  req = scene_request();
  req["markers"]["target"] = {1, 0, 0};  // collinear
  EXPECT_EQ(post("/sessions", req)->status, 422);
  EXPECT_EQ(client_->Post("/sessions", "{nope", "application/json")->status, 422);
  EXPECT_EQ(service_->sessions().size(), 0u);
}

TEST_F(ServiceTest, UnknownSessionIs404) {
  EXPECT_EQ(client_->Get("/sessions/s9999")->status, 404);
  EXPECT_EQ(post("/sessions/s9999/delta", {{"rz", 0.1}})->status, 404);
  EXPECT_EQ(client_->Get("/sessions/s9999/render")->status, 404);
  EXPECT_EQ(post("/sessions/s9999/commit", json::object())->status, 404);
  EXPECT_EQ(client_->Get("/sessions/s9999/preview")->status, 404);
  EXPECT_EQ(client_->Get("/nothing")->status, 404);
}

TEST_F(ServiceTest, DeltaAndBound) {
  const std::string id = create_session();
  auto res = post("/sessions/" + id + "/delta", {{"dz", 5}});
  ASSERT_EQ(res->status, 200);
  json s = json::parse(res->body);
  EXPECT_EQ(s["revision"], 1);
  EXPECT_DOUBLE_EQ(s["dz"].get<double>(), 5);
  EXPECT_NEAR(s["camera_center"][2].get<double>(), 5, 1e-12);
  EXPECT_NEAR(s["pose"][2][3].get<double>(), -5, 1e-12);

  res = post("/sessions/" + id + "/delta", {{"dz", 15.5}});
  EXPECT_EQ(res->status, 409);
  s = json::parse(client_->Get("/sessions/" + id)->body);
  EXPECT_EQ(s["revision"], 1);
  EXPECT_DOUBLE_EQ(s["dz"].get<double>(), 5);

  EXPECT_EQ(post("/sessions/" + id + "/delta", {{"dz", -20}})->status, 200);  // cumulative -15
  EXPECT_EQ(post("/sessions/" + id + "/delta", {{"rx", "a"}})->status, 400);
  EXPECT_EQ(client_->Post("/sessions/" + id + "/delta", "[1,2", "application/json")->status, 400);
}

TEST_F(ServiceTest, InverseDeltaSequenceRestoresPose) {
  const std::string id = create_session();
  const Mat4 initial = pose_of(json::parse(client_->Get("/sessions/" + id)->body)["pose"]);
  const ColorImage before = get_png("/sessions/" + id + "/render?eye=left&alpha=0.5");
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> step(-0.05, 0.05), dz(-2, 2);
  std::uniform_int_distribution<int> axis(0, 3);
  std::vector<json> deltas;
  for (int i = 0; i < 10; ++i) {
    const char* keys[] = {"rx", "ry", "rz", "dz"};
    const int a = axis(rng);
    deltas.push_back({{keys[a], a == 3 ? dz(rng) : step(rng)}});
  }
  for (const json& d : deltas) ASSERT_EQ(post("/sessions/" + id + "/delta", d)->status, 200);
  for (auto it = deltas.rbegin(); it != deltas.rend(); ++it) {
    json inv = *it;
    for (auto& [k, v] : inv.items()) v = -v.get<double>();
    ASSERT_EQ(post("/sessions/" + id + "/delta", inv)->status, 200);
  }
  const json s = json::parse(client_->Get("/sessions/" + id)->body);
  EXPECT_EQ(s["revision"], 20);
  EXPECT_LE((pose_of(s["pose"]) - initial).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(s["dz"].get<double>(), 0, 1e-9);
  EXPECT_EQ(get_png("/sessions/" + id + "/render?eye=left&alpha=0.5"), before);
}

TEST_F(ServiceTest, RenderParameters) {
  const std::string id = create_session();
  EXPECT_EQ(get_png("/sessions/" + id + "/render?eye=left&alpha=0"), left_);
  EXPECT_EQ(get_png("/sessions/" + id + "/render?eye=right&alpha=0&mode=wireframe"), right_);

  const ColorImage solid = get_png("/sessions/" + id + "/render?eye=left&mode=solid&alpha=1");
  for (const Rgb8& p : solid.pixels()) ASSERT_EQ(p, (Rgb8{230, 153, 77}));

  const ColorImage pair = get_png("/sessions/" + id + "/render?eye=pair&alpha=0");
  const ColorImage swapped = get_png("/sessions/" + id + "/render?eye=pair&alpha=0&swap=true");
  ASSERT_EQ(pair.width(), 1280);
  for (int y = 0; y < 512; y += 17)
    for (int x = 0; x < 640; x += 13) {
      ASSERT_EQ(pair(x, y), left_(x, y));
      ASSERT_EQ(pair(x + 640, y), right_(x, y));
      ASSERT_EQ(swapped(x, y), right_(x, y));
      ASSERT_EQ(swapped(x + 640, y), left_(x, y));
    }
  for (const char* bad : {"eye=centre", "mode=phong", "alpha=2", "alpha=x", "swap=maybe"})
    EXPECT_EQ(client_->Get("/sessions/" + id + "/render?" + std::string(bad))->status, 400) << bad;
}

TEST_F(ServiceTest, CommitPersistsPose) {
  const std::string id = create_session();
  ASSERT_EQ(post("/sessions/" + id + "/delta", {{"ry", 0.02}})->status, 200);
  auto res = post("/sessions/" + id + "/commit", {{"operator", "op1"}});
  ASSERT_EQ(res->status, 201) << res->body;
  const json c = json::parse(res->body);
  EXPECT_EQ(c["index"], 1);
  EXPECT_EQ(c["operator"], "op1");
  EXPECT_EQ(c["timestamp"].get<std::string>().back(), 'Z');
  const RigidTransform saved = read_pose(c["pose_file"].get<std::string>());
  EXPECT_EQ(saved.matrix(), pose_of(c["pose"]));
  EXPECT_TRUE(fs::exists(dir_.path() / "sessions" / id / "commits.json"));

  const json list = json::parse(client_->Get("/sessions/" + id + "/commits")->body);
  ASSERT_EQ(list["commits"].size(), 1u);
  EXPECT_EQ(json::parse(client_->Get("/sessions/" + id)->body)["commits"], 1);
  ASSERT_EQ(post("/sessions/" + id + "/commit", json::object())->status, 201);
  EXPECT_EQ(json::parse(client_->Get("/sessions/" + id + "/commits")->body)["commits"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_.path() / "sessions" / id / "pose_002.txt"));
}

TEST_F(ServiceTest, Preview) {
  const std::string id = create_session();
  auto res = client_->Get("/sessions/" + id + "/preview");
  ASSERT_EQ(res->status, 200) << res->body;
  const json p = json::parse(res->body);
  EXPECT_EQ(p["pixels"], 640 * 512);
  EXPECT_NEAR(p["percent"]["non_overlap"].get<double>(), 100.0 * 25 / 640, 1e-12);
  EXPECT_NEAR(p["percent"]["valid"].get<double>(), 100.0 * 615 / 640, 1e-12);
  EXPECT_EQ(p["percent"]["occluded"].get<double>(), 0.0);
  EXPECT_NEAR(p["disparity"]["min"].get<double>(), 25, 1e-6);
  EXPECT_NEAR(p["disparity"]["max"].get<double>(), 25, 1e-6);
  EXPECT_NEAR(p["depth"]["mean"].get<double>(), 100, 1e-6);

  // Pointing away from the plane leaves nothing to measure.
  ASSERT_EQ(post("/sessions/" + id + "/delta", {{"rx", 3.14159}})->status, 200);
  const json empty = json::parse(client_->Get("/sessions/" + id + "/preview")->body);
  EXPECT_TRUE(empty["depth"].is_null());
  EXPECT_EQ(empty["percent"]["outside_model"].get<double>(), 100.0);
}

// Rolls about the optical axis commute, so any interleaving of concurrent
// roll deltas must land on the same final pose; each acknowledgment carries a
// distinct revision.
TEST_F(ServiceTest, ConcurrentDeltasAreSerialised) {
  const std::string id = create_session();
  constexpr int kThreads = 8, kEach = 15;
  std::vector<std::thread> workers;
  std::mutex seen_mu;
  std::vector<int> revisions;
  std::atomic<int> failures{0}, renders{0};
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port_);
      for (int i = 0; i < kEach; ++i) {
        auto r = c.Post("/sessions/" + id + "/delta", json{{"rz", 0.01 * (t + 1)}}.dump(), "application/json");
        if (!r || r->status != 200) {
          ++failures;
          continue;
        }
        std::lock_guard lock(seen_mu);
        revisions.push_back(json::parse(r->body)["revision"].get<int>());
      }
      if (t % 2 == 0) {
        auto r = c.Get("/sessions/" + id + "/render?eye=left&alpha=0.3");
        if (r && r->status == 200) ++renders;
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(renders.load(), kThreads / 2);
  std::sort(revisions.begin(), revisions.end());
  ASSERT_EQ(revisions.size(), static_cast<std::size_t>(kThreads * kEach));
  for (int i = 0; i < kThreads * kEach; ++i) EXPECT_EQ(revisions[i], i + 1);

  double total = 0;
  for (int t = 0; t < kThreads; ++t) total += kEach * 0.01 * (t + 1);
  const Mat4 expected = RigidTransform(testing::axis_angle(Vec3::UnitZ(), -total), Vec3::Zero()).matrix();
  const json s = json::parse(client_->Get("/sessions/" + id)->body);
  EXPECT_LE((pose_of(s["pose"]) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AlignService, BindFailures) {
  AlignService a({});
  const int port = a.bind("127.0.0.1", 0);
  AlignService b({});
  EXPECT_THROW(b.bind("127.0.0.1", port), Error);
  EXPECT_THROW(b.bind("127.0.0.1", 70000), InvalidArgument);
  ServiceConfig bad;
  bad.dz_bound = 0;
  EXPECT_THROW(AlignService{bad}, InvalidArgument);
}

TEST(Session, DirectUse) {
  const RectifiedRig rig = testing::make_rig(100, 16, 8, 16, 5, 32, 16);
  AlignmentSession s("x", testing::rectangle(-100, 100, -100, 100, 50), rig, ColorImage(32, 16), ColorImage(32, 16),
                     {}, 5.0);
  EXPECT_THROW(s.apply_delta({0, 0, 0, 6}), BoundViolation);
  s.apply_delta({0, 0, 0, 4});
  EXPECT_THROW(s.apply_delta({0, 0, 0, 2}), BoundViolation);
  EXPECT_EQ(s.snapshot().revision, 1u);
  EXPECT_DOUBLE_EQ(s.snapshot().dz, 4);
  const CommitEntry e = s.commit("me");
  EXPECT_EQ(e.index, 1u);
  EXPECT_EQ(s.commits().size(), 1u);
  EXPECT_THROW(AlignmentSession("y", {}, rig, ColorImage(3, 3), ColorImage(3, 3), {}), InvalidArgument);
  EXPECT_THROW(side_by_side(ColorImage(2, 2), ColorImage(2, 3)), InvalidArgument);
}

}  // namespace
}  // namespace stereoref
