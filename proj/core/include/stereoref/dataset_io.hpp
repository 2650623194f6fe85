#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stereoref/png_io.hpp"
#include "stereoref/raster.hpp"
#include "stereoref/rig.hpp"

namespace stereoref {

// Fixed-point scale of the 16-bit map encoding: stored = round(value * 256),
// with 0 reserved for invalid pixels.
inline constexpr double kQuantization = 256.0;
inline constexpr double kMaxEncodable = 255.99;

// Raised by encode_q16 for a value outside [0, 255.99].
class EncodeRangeError : public InvalidArgument {
 public:
  EncodeRangeError(int x, int y, double value);
  int x() const { return x_; }
  int y() const { return y_; }
  double value() const { return value_; }

 private:
  int x_;
  int y_;
  double value_;
};

// Values that would round to 0 are stored as 1 so they stay valid. The
// round-trip error is at most 1/512 for values >= 1/512 and at most 1/256
// below that.
Gray16Image encode_q16(const Raster<double>& map);
Raster<double> decode_q16(const Gray16Image& raster);

// Mask palette indices equal the MaskLabel values:
//   0 valid (black), 1 occluded_left (green), 2 occluded_right (red),
//   3 non_overlap (yellow), 4 outside_model (blue).
const std::vector<Rgb8>& mask_palette();
IndexedImage encode_mask(const MaskMap& mask);
// Throws InvalidArgument for an index outside the palette.
MaskMap decode_mask(const IndexedImage& image);

// Directory names of the record channels relative to the dataset root.
struct ChannelLayout {
  std::string left = "Left_rectified";
  std::string right = "Right_rectified";
  std::string depth_left = "DepthL";
  std::string depth_right = "DepthR";
  std::string disparity = "Disparity";
  std::string mask = "Mask";
  std::string calibration = "calibration.json";
};

// Manifest file name looked up in a dataset root by layout_for().
inline constexpr const char* kLayoutManifest = "layout.manifest";

// Parses a remapping manifest of `key = value` lines. Keys are the
// ChannelLayout field names; '#' starts a comment; values may be quoted.
// Unspecified keys keep their defaults.
ChannelLayout load_layout(const std::string& path);
// load_layout(<dir>/layout.manifest) if present, otherwise the defaults.
ChannelLayout layout_for(const std::string& dir);

struct Calibration {
  Mat34 p1 = Mat34::Zero();
  Mat34 p2 = Mat34::Zero();
  Mat4 q = Mat4::Zero();
  int width = 0;  // 0 when the file does not record the image size
  int height = 0;
};

// Reads one entry of a calibration file. The file is either keyed by record
// id or a single object holding "P1", "P2", "Q". Throws FileError.
Calibration load_calibration(const std::string& path, const std::string& id = "");

// Rig from P1/P2. width/height fall back to the given values when the
// calibration does not carry them.
RectifiedRig rig_from_calibration(const Calibration& calib, int width = 0, int height = 0);

struct DatasetRecord {
  std::string id;  // three digits, zero padded
  ColorImage left;   // optional: empty images are neither written nor required
  ColorImage right;
  DepthMap depth_left;
  DepthMap depth_right;
  DisparityMap disparity;
  MaskMap mask;
  Mat34 p1 = Mat34::Zero();
  Mat34 p2 = Mat34::Zero();
  Mat4 q = Mat4::Zero();
};

// Throws InvalidArgument unless id is three decimal digits.
void validate_record_id(const std::string& id);
std::string format_record_id(int n);

// Writes <dir>/<channel>/<id>.png for every channel, merges the matrices into
// <dir>/calibration.json and writes <dir>/metadata.json. Every file goes
// through a temporary name and rename.
void write_record(const std::string& dir, const DatasetRecord& record, const ChannelLayout& layout = {});

struct ReadResult {
  DatasetRecord record;
  std::vector<std::string> warnings;  // e.g. Q inconsistent with P1/P2
};

// Throws FileError: missing (absent map channel or calibration entry),
// malformed (bad PNG kind, JSON, matrix shape, mask index) or
// dimension_mismatch (rasters disagree). Image channels may be absent.
ReadResult read_record(const std::string& dir, const std::string& id, const ChannelLayout& layout = {});

// Sorted ids that have a disparity map in the dataset.
std::vector<std::string> list_record_ids(const std::string& dir, const ChannelLayout& layout = {});

// Largest |Q - Q(P1, P2)| entry. Used for the consistency warning.
double q_inconsistency(const Mat34& p1, const Mat34& p2, const Mat4& q, int width = 1, int height = 1);
inline constexpr double kQTolerance = 1e-6;

// Disparity estimates from an external method: <dir>/<id>.png, or
// <dir>/Disparity/<id>.png when that directory exists.
std::string estimate_path(const std::string& dir, const std::string& id);
std::vector<std::string> list_estimate_ids(const std::string& dir);
DisparityMap read_estimate(const std::string& dir, const std::string& id);

}  // namespace stereoref
