#include "stereoref/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

template <class M>
json matrix_to_json(const M& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class M>
M matrix_from_json(const json& j, const std::string& path, const char* name) {
  M m;
  if (!j.is_array() || j.size() != static_cast<std::size_t>(m.rows()))
    throw FileError(FileError::Kind::malformed, path, std::string(name) + " must have " + std::to_string(m.rows()) + " rows");
  for (int r = 0; r < m.rows(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(m.cols()))
      throw FileError(FileError::Kind::malformed, path,
                      std::string(name) + " rows must have " + std::to_string(m.cols()) + " entries");
    for (int c = 0; c < m.cols(); ++c) {
      if (!row[c].is_number()) throw FileError(FileError::Kind::malformed, path, std::string(name) + " entries must be numbers");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

json read_json(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FileError(FileError::Kind::malformed, path, std::string("invalid JSON: ") + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string channel_path(const std::string& dir, const std::string& channel, const std::string& id) {
  return (fs::path(dir) / channel / (id + ".png")).string();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Serialises read-modify-write cycles of calibration.json within the process.
std::mutex& calibration_mutex() {
  static std::mutex m;
  return m;
}

Raster<double> read_q16_channel(const std::string& path) { return decode_q16(read_png_gray16(path)); }

Gray16Image encode_channel(const Raster<double>& map, const std::string& path) {
  try {
    return encode_q16(map);
  } catch (const EncodeRangeError& e) {
    throw FileError(FileError::Kind::out_of_range, path, e.what());
  }
}

}  // namespace

EncodeRangeError::EncodeRangeError(int x, int y, double value)
    : InvalidArgument("value " + fmt_value(value) + " at pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") is outside the encodable range [0, 255.99]"),
      x_(x),
      y_(y),
      value_(value) {}

Gray16Image encode_q16(const Raster<double>& map) {
  Gray16Image out(map.width(), map.height(), 0);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const double v = map(x, y);
      if (!is_valid(v)) continue;
      if (!(v >= 0 && v <= kMaxEncodable)) throw EncodeRangeError(x, y, v);
      const long q = std::lround(v * kQuantization);
      out(x, y) = static_cast<std::uint16_t>(std::max(1L, q));
    }
  }
  return out;
}

Raster<double> decode_q16(const Gray16Image& raster) {
  Raster<double> out(raster.width(), raster.height(), kInvalid);
  auto src = raster.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] != 0) dst[i] = src[i] / kQuantization;
  return out;
}

const std::vector<Rgb8>& mask_palette() {
  static const std::vector<Rgb8> palette = {
      {0, 0, 0},      // valid
      {0, 255, 0},    // occluded_left
      {255, 0, 0},    // occluded_right
      {255, 255, 0},  // non_overlap
      {0, 0, 255},    // outside_model
  };
  return palette;
}

IndexedImage encode_mask(const MaskMap& mask) {
  IndexedImage out{Raster<std::uint8_t>(mask.width(), mask.height()), mask_palette()};
  auto src = mask.pixels();
  auto dst = out.indices.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(src[i]);
  return out;
}

MaskMap decode_mask(const IndexedImage& image) {
  MaskMap out(image.indices.width(), image.indices.height());
  auto src = image.indices.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] >= kMaskLabelCount) throw InvalidArgument("unknown mask index " + std::to_string(src[i]));
    dst[i] = static_cast<MaskLabel>(src[i]);
  }
  return out;
}

ChannelLayout load_layout(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  ChannelLayout layout;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FileError(FileError::Kind::malformed, path, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (value.empty())
      throw FileError(FileError::Kind::malformed, path, "line " + std::to_string(lineno) + ": empty value for " + key);
    std::string* slot = nullptr;
    if (key == "left") slot = &layout.left;
    else if (key == "right") slot = &layout.right;
    else if (key == "depth_left") slot = &layout.depth_left;
    else if (key == "depth_right") slot = &layout.depth_right;
    else if (key == "disparity") slot = &layout.disparity;
    else if (key == "mask") slot = &layout.mask;
    else if (key == "calibration") slot = &layout.calibration;
    if (slot == nullptr)
      throw FileError(FileError::Kind::malformed, path, "line " + std::to_string(lineno) + ": unknown key " + key);
    *slot = value;
  }
  return layout;
}

ChannelLayout layout_for(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / kLayoutManifest;
  std::error_code ec;
  if (fs::is_regular_file(manifest, ec)) return load_layout(manifest.string());
  return {};
}

Calibration load_calibration(const std::string& path, const std::string& id) {
  const json root = read_json(path);
  if (!root.is_object()) throw FileError(FileError::Kind::malformed, path, "calibration must be a JSON object");
  const json* entry = nullptr;
  if (root.contains("P1")) {
    entry = &root;
  } else if (!id.empty()) {
    if (!root.contains(id)) throw FileError(FileError::Kind::missing, path, "no calibration entry for id " + id);
    entry = &root[id];
  } else if (root.size() == 1) {
    entry = &root.begin().value();
  } else {
    throw FileError(FileError::Kind::malformed, path, "calibration holds several entries; an id is required");
  }
  if (!entry->is_object()) throw FileError(FileError::Kind::malformed, path, "calibration entry must be an object");
  for (const char* key : {"P1", "P2", "Q"})
    if (!entry->contains(key)) throw FileError(FileError::Kind::malformed, path, std::string("missing ") + key);
  Calibration c;
  c.p1 = matrix_from_json<Mat34>((*entry)["P1"], path, "P1");
  c.p2 = matrix_from_json<Mat34>((*entry)["P2"], path, "P2");
  c.q = matrix_from_json<Mat4>((*entry)["Q"], path, "Q");
  auto read_size = [&](const char* key) {
    if (!entry->contains(key)) return 0;
    const json& v = (*entry)[key];
    if (!v.is_number_integer() || v.get<long>() <= 0)
      throw FileError(FileError::Kind::malformed, path, std::string(key) + " must be a positive integer");
    return v.get<int>();
  };
  c.width = read_size("width");
  c.height = read_size("height");
  return c;
}

RectifiedRig rig_from_calibration(const Calibration& calib, int width, int height) {
  const int w = calib.width > 0 ? calib.width : width;
  const int h = calib.height > 0 ? calib.height : height;
  return RectifiedRig::from_projections(calib.p1, calib.p2, w, h);
}

void validate_record_id(const std::string& id) {
  if (id.size() != 3 || !std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw InvalidArgument("record id must be three digits, got '" + id + "'");
}

std::string format_record_id(int n) {
  if (n < 0 || n > 999) throw InvalidArgument("record number must be in [0, 999]");
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", n);
  return buf;
}

double q_inconsistency(const Mat34& p1, const Mat34& p2, const Mat4& q, int width, int height) {
  const RectifiedRig rig = RectifiedRig::from_projections(p1, p2, width, height);
  return (build_matrices(rig).q - q).cwiseAbs().maxCoeff();
}

void write_record(const std::string& dir, const DatasetRecord& r, const ChannelLayout& layout) {
  validate_record_id(r.id);
  const Raster<double>& ref = r.disparity;
  if (ref.empty()) throw InvalidArgument("record " + r.id + " has no disparity map");
  if (!ref.same_shape(r.depth_left) || !ref.same_shape(r.depth_right) || !ref.same_shape(r.mask))
    throw InvalidArgument("record " + r.id + ": map dimensions differ");
  if (r.left.empty() != r.right.empty())
    throw InvalidArgument("record " + r.id + ": provide both rectified images or neither");
  if (!r.left.empty() && (!ref.same_shape(r.left) || !ref.same_shape(r.right)))
    throw InvalidArgument("record " + r.id + ": image dimensions differ from the maps");

  std::error_code ec;
  auto ensure_dir = [&](const fs::path& p) {
    fs::create_directories(p, ec);
    if (ec) throw FileError(FileError::Kind::io, p.string(), "cannot create directory: " + ec.message());
  };
  ensure_dir(dir);

  // Encode every map before touching the disk so a range error leaves no
  // partial record behind.
  const std::string p_dl = channel_path(dir, layout.depth_left, r.id);
  const std::string p_dr = channel_path(dir, layout.depth_right, r.id);
  const std::string p_d = channel_path(dir, layout.disparity, r.id);
  const std::string p_m = channel_path(dir, layout.mask, r.id);
  const auto dl = encode_png(encode_channel(r.depth_left, p_dl));
  const auto dr = encode_png(encode_channel(r.depth_right, p_dr));
  const auto d = encode_png(encode_channel(r.disparity, p_d));
  const auto m = encode_png(encode_mask(r.mask));

  auto put = [&](const std::string& path, const std::vector<std::uint8_t>& bytes) {
    ensure_dir(fs::path(path).parent_path());
    write_file(path, bytes);
  };
  if (!r.left.empty()) {
    put(channel_path(dir, layout.left, r.id), encode_png(r.left));
    put(channel_path(dir, layout.right, r.id), encode_png(r.right));
  }
  put(p_dl, dl);
  put(p_dr, dr);
  put(p_d, d);
  put(p_m, m);

  {
    std::lock_guard lock(calibration_mutex());
    const std::string calib_path = (fs::path(dir) / layout.calibration).string();
    json calib = json::object();
    if (fs::exists(calib_path, ec)) {
      calib = read_json(calib_path);
      if (!calib.is_object() || calib.contains("P1"))
        throw FileError(FileError::Kind::malformed, calib_path, "expected an object keyed by record id");
    }
    json entry = json::object();
    entry["P1"] = matrix_to_json(r.p1);
    entry["P2"] = matrix_to_json(r.p2);
    entry["Q"] = matrix_to_json(r.q);
    entry["width"] = ref.width();
    entry["height"] = ref.height();
    calib[r.id] = std::move(entry);
    write_json(calib_path, calib);
  }

  json meta = json::object();
  meta["quantization"] = static_cast<int>(kQuantization);
  meta["invalid_value"] = 0;
  meta["depth_unit"] = "mm";
  meta["disparity_unit"] = "px";
  json labels = json::object();
  const char* names[] = {"valid", "occluded_left", "occluded_right", "non_overlap", "outside_model"};
  for (int i = 0; i < kMaskLabelCount; ++i) labels[names[i]] = i;
  meta["mask_indices"] = labels;
  write_json((fs::path(dir) / "metadata.json").string(), meta);
}

ReadResult read_record(const std::string& dir, const std::string& id, const ChannelLayout& layout) {
  validate_record_id(id);
  ReadResult out;
  DatasetRecord& r = out.record;
  r.id = id;

  const std::string meta_path = (fs::path(dir) / "metadata.json").string();
  std::error_code ec;
  if (fs::exists(meta_path, ec)) {
    const json meta = read_json(meta_path);
    if (meta.contains("quantization") &&
        (!meta["quantization"].is_number() || meta["quantization"].get<double>() != kQuantization))
      throw FileError(FileError::Kind::malformed, meta_path,
                      "unsupported quantization " + meta["quantization"].dump() + " (expected 256)");
  }

  const std::string p_d = channel_path(dir, layout.disparity, id);
  r.disparity = DisparityMap(read_q16_channel(p_d));
  auto check_shape = [&](const auto& raster, const std::string& path) {
    if (!raster.same_shape(r.disparity))
      throw FileError(FileError::Kind::dimension_mismatch, path,
                      std::to_string(raster.width()) + "x" + std::to_string(raster.height()) + " differs from disparity " +
                          std::to_string(r.disparity.width()) + "x" + std::to_string(r.disparity.height()));
  };
  const std::string p_dl = channel_path(dir, layout.depth_left, id);
  r.depth_left = DepthMap(read_q16_channel(p_dl));
  check_shape(r.depth_left, p_dl);
  const std::string p_dr = channel_path(dir, layout.depth_right, id);
  r.depth_right = DepthMap(read_q16_channel(p_dr));
  check_shape(r.depth_right, p_dr);
  const std::string p_m = channel_path(dir, layout.mask, id);
  try {
    r.mask = decode_mask(read_png_indexed(p_m));
  } catch (const InvalidArgument& e) {
    throw FileError(FileError::Kind::malformed, p_m, e.what());
  }
  check_shape(r.mask, p_m);

  const std::string p_l = channel_path(dir, layout.left, id);
  const std::string p_r = channel_path(dir, layout.right, id);
  const bool has_l = fs::exists(p_l, ec);
  const bool has_r = fs::exists(p_r, ec);
  if (has_l != has_r)
    throw FileError(FileError::Kind::missing, has_l ? p_r : p_l, "rectified image present for one eye only");
  if (has_l) {
    r.left = read_png_rgb(p_l);
    check_shape(r.left, p_l);
    r.right = read_png_rgb(p_r);
    check_shape(r.right, p_r);
  }

  const std::string calib_path = (fs::path(dir) / layout.calibration).string();
  const Calibration c = load_calibration(calib_path, id);
  r.p1 = c.p1;
  r.p2 = c.p2;
  r.q = c.q;
  if ((c.width > 0 && c.width != r.disparity.width()) || (c.height > 0 && c.height != r.disparity.height()))
    throw FileError(FileError::Kind::dimension_mismatch, calib_path, "image size of entry " + id + " differs from the maps");
  try {
    const double dq = q_inconsistency(c.p1, c.p2, c.q, r.disparity.width(), r.disparity.height());
    if (dq > kQTolerance)
      out.warnings.push_back(calib_path + ": Q of entry " + id + " differs from the Q implied by P1/P2 by " +
                             fmt_value(dq));
  } catch (const InvalidArgument& e) {
    throw FileError(FileError::Kind::malformed, calib_path, "entry " + id + ": " + e.what());
  }
  return out;
}

std::vector<std::string> list_record_ids(const std::string& dir, const ChannelLayout& layout) {
  const fs::path channel = fs::path(dir) / layout.disparity;
  std::error_code ec;
  if (!fs::is_directory(channel, ec)) throw FileError(FileError::Kind::missing, channel.string(), "no disparity channel");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(channel)) {
    if (entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    try {
      validate_record_id(stem);
    } catch (const InvalidArgument&) {
      continue;
    }
    ids.push_back(stem);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string estimate_path(const std::string& dir, const std::string& id) {
  const fs::path sub = fs::path(dir) / "Disparity";
  std::error_code ec;
  const fs::path base = fs::is_directory(sub, ec) ? sub : fs::path(dir);
  return (base / (id + ".png")).string();
}

std::vector<std::string> list_estimate_ids(const std::string& dir) {
  const fs::path sub = fs::path(dir) / "Disparity";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw FileError(FileError::Kind::missing, dir, "no such directory");
  const fs::path base = fs::is_directory(sub, ec) ? sub : fs::path(dir);
  ChannelLayout flat;
  flat.disparity = ".";
  return list_record_ids(base.string(), flat);
}

DisparityMap read_estimate(const std::string& dir, const std::string& id) {
  validate_record_id(id);
  return DisparityMap(read_q16_channel(estimate_path(dir, id)));
}

}  // namespace stereoref
