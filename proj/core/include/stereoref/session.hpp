#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stereoref/mesh.hpp"
#include "stereoref/raster.hpp"
#include "stereoref/reference.hpp"
#include "stereoref/render.hpp"
#include "stereoref/rig.hpp"
#include "stereoref/se3.hpp"

namespace stereoref {

struct CommitEntry {
  std::size_t index = 0;  // 1-based position in the history
  RigidTransform pose;
  double dz = 0;          // accumulated axial offset at commit time, mm
  std::string operator_label;
  std::string timestamp;  // UTC, ISO 8601
};

struct PoseSnapshot {
  RigidTransform pose;
  double dz = 0;
  std::size_t revision = 0;  // number of applied deltas
  std::size_t commits = 0;
};

struct PreviewStats {
  std::optional<RangeStats> depth;      // left depth over valid pixels
  std::optional<RangeStats> disparity;
  std::array<std::size_t, kMaskLabelCount> counts{};
  std::size_t pixels = 0;

  double percent(MaskLabel label) const;
  double occluded_percent() const;
};

// Interactive alignment state for one scene. The scene (mesh, rig, stereo
// pair) is immutable; the pose changes only through apply_delta. All methods
// are safe to call concurrently: mutations are serialised and readers work on
// a snapshot taken under the lock.
class AlignmentSession {
 public:
  AlignmentSession(std::string id, TriangleMesh mesh, RectifiedRig rig, ColorImage left, ColorImage right,
                   RigidTransform initial_pose, double dz_bound = kDefaultDzBound);

  const std::string& id() const { return id_; }
  const RectifiedRig& rig() const { return rig_; }
  const TriangleMesh& mesh() const { return mesh_; }
  const ColorImage& background(Eye eye) const { return eye == Eye::left ? left_ : right_; }
  double dz_bound() const { return dz_bound_; }
  const RigidTransform& initial_pose() const { return initial_; }

  PoseSnapshot snapshot() const;

  // constrained_adjust of the current pose. Throws BoundViolation, leaving the
  // state unchanged, when the accumulated dz would leave [-bound, bound].
  PoseSnapshot apply_delta(const PoseDelta& delta);

  CommitEntry commit(const std::string& operator_label);
  std::vector<CommitEntry> commits() const;

  ColorImage render(Eye eye, const RenderConfig& config) const;
  // Side-by-side [left | right], or [right | left] when swapped.
  ColorImage render_pair(const RenderConfig& config, bool swap) const;

  PreviewStats preview(const ReferenceConfig& config = {}) const;

 private:
  std::string id_;
  TriangleMesh mesh_;
  RectifiedRig rig_;
  ColorImage left_;
  ColorImage right_;
  RigidTransform initial_;
  double dz_bound_;

  mutable std::mutex mu_;
  RigidTransform pose_;
  double dz_ = 0;
  std::size_t revision_ = 0;
  std::vector<CommitEntry> commits_;
};

// Places two images of equal height next to each other.
ColorImage side_by_side(const ColorImage& a, const ColorImage& b);

// Thread-safe registry of sessions with sequential ids ("s0001", ...).
class SessionStore {
 public:
  std::shared_ptr<AlignmentSession> create(TriangleMesh mesh, RectifiedRig rig, ColorImage left, ColorImage right,
                                           RigidTransform initial_pose, double dz_bound = kDefaultDzBound);
  std::shared_ptr<AlignmentSession> find(const std::string& id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::size_t next_ = 1;
  std::map<std::string, std::shared_ptr<AlignmentSession>> sessions_;
};

}  // namespace stereoref
