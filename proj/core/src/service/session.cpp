#include "stereoref/session.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace

double PreviewStats::percent(MaskLabel label) const {
  if (pixels == 0) return 0;
  return 100.0 * static_cast<double>(counts[static_cast<std::size_t>(label)]) / static_cast<double>(pixels);
}

double PreviewStats::occluded_percent() const {
  return percent(MaskLabel::occluded_left) + percent(MaskLabel::occluded_right);
}

AlignmentSession::AlignmentSession(std::string id, TriangleMesh mesh, RectifiedRig rig, ColorImage left,
                                   ColorImage right, RigidTransform initial_pose, double dz_bound)
    : id_(std::move(id)),
      mesh_(std::move(mesh)),
      rig_(rig),
      left_(std::move(left)),
      right_(std::move(right)),
      initial_(initial_pose),
      dz_bound_(dz_bound),
      pose_(initial_pose) {
  if (!(dz_bound > 0)) throw InvalidArgument("session: dz bound must be positive");
  for (const ColorImage* img : {&left_, &right_})
    if (img->width() != rig_.width() || img->height() != rig_.height())
      throw InvalidArgument("session: stereo image size differs from the calibration");
}

PoseSnapshot AlignmentSession::snapshot() const {
  std::lock_guard lock(mu_);
  return {pose_, dz_, revision_, commits_.size()};
}

PoseSnapshot AlignmentSession::apply_delta(const PoseDelta& delta) {
  for (double v : {delta.rx, delta.ry, delta.rz, delta.dz})
    if (!std::isfinite(v)) throw InvalidArgument("delta components must be finite");
  std::lock_guard lock(mu_);
  const double dz = dz_ + delta.dz;
  if (std::abs(dz) > dz_bound_) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "accumulated dz %.6g mm would leave [-%g, %g] mm", dz, dz_bound_, dz_bound_);
    throw BoundViolation(buf);
  }
  pose_ = constrained_adjust(pose_, delta, dz_bound_);
  dz_ = dz;
  ++revision_;
  return {pose_, dz_, revision_, commits_.size()};
}

CommitEntry AlignmentSession::commit(const std::string& operator_label) {
  std::lock_guard lock(mu_);
  CommitEntry e;
  e.index = commits_.size() + 1;
  e.pose = pose_;
  e.dz = dz_;
  e.operator_label = operator_label;
  e.timestamp = utc_timestamp();
  commits_.push_back(e);
  return e;
}

std::vector<CommitEntry> AlignmentSession::commits() const {
  std::lock_guard lock(mu_);
  return commits_;
}

ColorImage AlignmentSession::render(Eye eye, const RenderConfig& config) const {
  const RigidTransform pose = snapshot().pose;
  return render_overlay(mesh_, rig_, eye, pose, config, background(eye));
}

ColorImage AlignmentSession::render_pair(const RenderConfig& config, bool swap) const {
  const RigidTransform pose = snapshot().pose;
  ColorImage l = render_overlay(mesh_, rig_, Eye::left, pose, config, left_);
  ColorImage r = render_overlay(mesh_, rig_, Eye::right, pose, config, right_);
  return swap ? side_by_side(r, l) : side_by_side(l, r);
}

PreviewStats AlignmentSession::preview(const ReferenceConfig& config) const {
  const RigidTransform pose = snapshot().pose;
  const ReferenceBundle ref = generate_reference(mesh_, rig_, pose, config);
  PreviewStats s;
  s.counts = label_counts(ref.mask);
  s.pixels = ref.mask.size();
  if (s.counts[static_cast<std::size_t>(MaskLabel::valid)] > 0) {
    s.depth = range_stats(ref.depth_left, ref.mask);
    s.disparity = range_stats(ref.disparity, ref.mask);
  }
  return s;
}

ColorImage side_by_side(const ColorImage& a, const ColorImage& b) {
  if (a.height() != b.height()) throw InvalidArgument("side_by_side: image heights differ");
  ColorImage out(a.width() + b.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) out(x, y) = a(x, y);
    for (int x = 0; x < b.width(); ++x) out(a.width() + x, y) = b(x, y);
  }
  return out;
}

std::shared_ptr<AlignmentSession> SessionStore::create(TriangleMesh mesh, RectifiedRig rig, ColorImage left,
                                                       ColorImage right, RigidTransform initial_pose,
                                                       double dz_bound) {
  std::lock_guard lock(mu_);
  char id[16];
  std::snprintf(id, sizeof id, "s%04zu", next_);
  auto session = std::make_shared<AlignmentSession>(id, std::move(mesh), rig, std::move(left), std::move(right),
                                                    initial_pose, dz_bound);
  ++next_;
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<AlignmentSession> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace stereoref
