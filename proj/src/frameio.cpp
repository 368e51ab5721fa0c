#include "waypixel/frameio.hpp"

#include "waypixel/binary.hpp"
#include "waypixel/error.hpp"

#include <json.hpp>
#include <sodium.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace waypixel {

using nlohmann::json;

// ---------------------------------------------------------------------------
// base64 / files

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  const std::size_t max_len =
      sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(max_len, '\0');
  sodium_bin2base64(out.data(), max_len, bytes.data(), bytes.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::char_traits<char>::length(out.c_str()));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t bin_len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &bin_len,
                        &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedFile, "invalid base64 payload");
  }
  out.resize(bin_len);
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// validation

std::size_t ValidationReport::count(ViolationKind kind) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == kind ? 1 : 0;
  return n;
}

std::string ValidationReport::summary() const {
  std::ostringstream ss;
  for (const auto& v : violations) {
    ss << v.detail;
    if (v.frame_index >= 0) ss << " [frame " << v.frame_index << "]";
    if (v.pair_index >= 0) ss << " [pair " << v.pair_index << "]";
    ss << "\n";
  }
  return ss.str();
}

ValidationReport validate_bundle(const MatchBundle& bundle) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, int frame, int pair, std::string detail) {
    report.violations.push_back({kind, frame, pair, std::move(detail)});
  };

  if (bundle.window_size < 1) add(ViolationKind::BadWindow, -1, -1, "window_size < 1");

  for (std::size_t f = 0; f < bundle.frames.size(); ++f) {
    const auto& fr = bundle.frames[f];
    const int fi = static_cast<int>(f);
    if (fr.frame_id != f) {
      add(ViolationKind::FrameIdGap, fi, -1, "frame ids must be contiguous from 0");
    }
    if (fr.width <= 0 || fr.height <= 0) {
      add(ViolationKind::BadFrameSize, fi, -1, "non-positive frame dimensions");
      continue;
    }
    const std::size_t n = static_cast<std::size_t>(fr.width) * static_cast<std::size_t>(fr.height);
    if (fr.pointmap.size() != n) add(ViolationKind::PointmapSize, fi, -1, "pointmap size mismatch");
    if (fr.valid_mask.size() != n) add(ViolationKind::MaskSize, fi, -1, "valid_mask size mismatch");
    if (fr.pointmap.size() != n || fr.valid_mask.size() != n) continue;
    bool nonfinite = false;
    bool behind = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!fr.valid_mask[i]) continue;
      const auto& p = fr.pointmap[i];
      if (!p.allFinite()) {
        nonfinite = true;
      } else if (!(p.z() > 0.0f)) {
        behind = true;
      }
    }
    if (nonfinite) add(ViolationKind::NonFinitePoint, fi, -1, "valid point with non-finite coordinates");
    if (behind) add(ViolationKind::PointBehindCamera, fi, -1, "valid point with z <= 0");
  }

  const auto num_frames = bundle.frames.size();
  for (std::size_t k = 0; k < bundle.pairs.size(); ++k) {
    const auto& pair = bundle.pairs[k];
    const int pk = static_cast<int>(k);
    if (pair.frame_i >= num_frames || pair.frame_j >= num_frames) {
      add(ViolationKind::DanglingFrame, -1, pk, "pair references a missing frame");
      continue;
    }
    if (pair.frame_i <= pair.frame_j) {
      add(ViolationKind::PairOrder, -1, pk, "pair requires frame_i > frame_j");
    } else if (static_cast<long>(pair.frame_i) - static_cast<long>(pair.frame_j) >
               bundle.window_size) {
      add(ViolationKind::WindowExceeded, -1, pk, "frame_i - frame_j exceeds window_size");
    }
    const auto& fa = bundle.frames[pair.frame_i];
    const auto& fb = bundle.frames[pair.frame_j];
    const bool sizes_ok = fa.pointmap.size() == fa.valid_mask.size() &&
                          fb.pointmap.size() == fb.valid_mask.size() &&
                          fa.valid_mask.size() == static_cast<std::size_t>(fa.width) * fa.height &&
                          fb.valid_mask.size() == static_cast<std::size_t>(fb.width) * fb.height;
    std::set<std::tuple<int, int, int, int>> seen;
    bool oob = false, invalid = false, dup = false, conf = false;
    for (const auto& m : pair.matches) {
      if (!fa.in_bounds(m.pixel_i) || !fb.in_bounds(m.pixel_j)) {
        oob = true;
      } else if (sizes_ok && (!fa.valid(m.pixel_i) || !fb.valid(m.pixel_j))) {
        invalid = true;
      }
      if (!seen.emplace(m.pixel_i.u, m.pixel_i.v, m.pixel_j.u, m.pixel_j.v).second) dup = true;
      if (!(m.confidence >= 0.0f && m.confidence <= 1.0f)) conf = true;
    }
    if (oob) add(ViolationKind::PixelOutOfBounds, -1, pk, "match pixel outside frame bounds");
    if (invalid) add(ViolationKind::PixelNotValid, -1, pk, "match pixel not set in valid_mask");
    if (dup) add(ViolationKind::DuplicateMatch, -1, pk, "duplicate (pixel_i, pixel_j) entry");
    if (conf) add(ViolationKind::BadConfidence, -1, pk, "confidence outside [0, 1]");
  }
  return report;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json float_to_json(float value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  double as_double = 0.0;
  std::from_chars(buf, res.ptr, as_double);
  return as_double;
}

template <class T>
T require(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing field '") + key + "' in " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation,
                std::string("bad type for '") + key + "' in " + where + ": " + e.what());
  }
}

}  // namespace

std::string serialize_bundle(const MatchBundle& bundle) {
  json root;
  root["version"] = 1;
  root["window_size"] = bundle.window_size;
  json frames = json::array();
  for (const auto& fr : bundle.frames) {
    ByteWriter pm;
    for (const auto& p : fr.pointmap) {
      pm.f32(p.x());
      pm.f32(p.y());
      pm.f32(p.z());
    }
    json jf;
    jf["id"] = fr.frame_id;
    jf["width"] = fr.width;
    jf["height"] = fr.height;
    jf["pointmap_b64"] = base64_encode(pm.bytes());
    jf["valid_mask_b64"] = base64_encode(fr.valid_mask);
    frames.push_back(std::move(jf));
  }
  root["frames"] = std::move(frames);
  json pairs = json::array();
  for (const auto& pr : bundle.pairs) {
    json jm = json::array();
    for (const auto& m : pr.matches) {
      jm.push_back(json::array({m.pixel_i.u, m.pixel_i.v, m.pixel_j.u, m.pixel_j.v,
                                float_to_json(m.confidence)}));
    }
    json jp;
    jp["i"] = pr.frame_i;
    jp["j"] = pr.frame_j;
    jp["matches"] = std::move(jm);
    pairs.push_back(std::move(jp));
  }
  root["pairs"] = std::move(pairs);
  root["meta"] = json::object();
  for (const auto& [k, v] : bundle.meta) root["meta"][k] = v;
  return root.dump() + "\n";
}

MatchBundle parse_bundle(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::SchemaViolation, "top level must be an object");
  if (require<int>(root, "version", "bundle") != 1) {
    throw Error(ErrorCode::SchemaViolation, "unsupported bundle version");
  }
  MatchBundle bundle;
  bundle.window_size = require<int>(root, "window_size", "bundle");
  const auto frames = require<json>(root, "frames", "bundle");
  const auto pairs = require<json>(root, "pairs", "bundle");
  if (!frames.is_array() || !pairs.is_array()) {
    throw Error(ErrorCode::SchemaViolation, "frames and pairs must be arrays");
  }
  for (const auto& jf : frames) {
    FrameRecord fr;
    fr.frame_id = require<std::uint32_t>(jf, "id", "frame");
    fr.width = require<int>(jf, "width", "frame");
    fr.height = require<int>(jf, "height", "frame");
    const auto pm = base64_decode(require<std::string>(jf, "pointmap_b64", "frame"));
    fr.valid_mask = base64_decode(require<std::string>(jf, "valid_mask_b64", "frame"));
    if (pm.size() % 12 != 0) throw Error(ErrorCode::SchemaViolation, "pointmap payload not float triples");
    ByteReader rd(pm);
    fr.pointmap.resize(pm.size() / 12);
    for (auto& p : fr.pointmap) {
      const float x = rd.f32();
      const float y = rd.f32();
      const float z = rd.f32();
      p = {x, y, z};
    }
    bundle.frames.push_back(std::move(fr));
  }
  for (const auto& jp : pairs) {
    PairRecord pr;
    pr.frame_i = require<std::uint32_t>(jp, "i", "pair");
    pr.frame_j = require<std::uint32_t>(jp, "j", "pair");
    const auto matches = require<json>(jp, "matches", "pair");
    if (!matches.is_array()) throw Error(ErrorCode::SchemaViolation, "matches must be an array");
    for (const auto& jm : matches) {
      if (!jm.is_array() || jm.size() != 5) {
        throw Error(ErrorCode::SchemaViolation, "match must be [u_i, v_i, u_j, v_j, conf]");
      }
      try {
        Match m;
        m.pixel_i = {jm[0].get<int>(), jm[1].get<int>()};
        m.pixel_j = {jm[2].get<int>(), jm[3].get<int>()};
        m.confidence = static_cast<float>(jm[4].get<double>());
        pr.matches.push_back(m);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("bad match entry: ") + e.what());
      }
    }
    bundle.pairs.push_back(std::move(pr));
  }
  if (root.contains("meta")) {
    const auto& meta = root["meta"];
    if (!meta.is_object()) throw Error(ErrorCode::SchemaViolation, "meta must be an object");
    for (auto it = meta.begin(); it != meta.end(); ++it) {
      if (!it.value().is_string()) throw Error(ErrorCode::SchemaViolation, "meta values must be strings");
      bundle.meta[it.key()] = it.value().get<std::string>();
    }
  }
  return bundle;
}

MatchBundle load_bundle(const std::filesystem::path& path) {
  auto bundle = parse_bundle(read_text_file(path));
  const auto report = validate_bundle(bundle);
  if (!report.ok()) {
    const bool dangling = report.count(ViolationKind::DanglingFrame) > 0;
    throw Error(dangling ? ErrorCode::SchemaViolation : ErrorCode::InvariantViolation,
                path.string() + ":\n" + report.summary());
  }
  return bundle;
}

void save_bundle(const MatchBundle& bundle, const std::filesystem::path& path) {
  write_text_file(path, serialize_bundle(bundle));
}

}  // namespace waypixel
