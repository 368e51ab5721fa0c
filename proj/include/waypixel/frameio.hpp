#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace waypixel {

struct PixelCoord {
  int u = 0;  // column
  int v = 0;  // row

  auto operator<=>(const PixelCoord&) const = default;
};

/// Dense per-pixel pointmap of one frame, expressed in that frame's camera
/// coordinates (x right, y down, z forward), meters.
struct FrameRecord {
  std::uint32_t frame_id = 0;
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> pointmap;  // row-major, width * height
  std::vector<std::uint8_t> valid_mask;   // 0/1 per pixel

  std::size_t index(PixelCoord p) const {
    return static_cast<std::size_t>(p.v) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(p.u);
  }
  bool in_bounds(PixelCoord p) const {
    return p.u >= 0 && p.v >= 0 && p.u < width && p.v < height;
  }
  bool valid(PixelCoord p) const { return in_bounds(p) && valid_mask[index(p)] != 0; }
  const Eigen::Vector3f& point(PixelCoord p) const { return pointmap[index(p)]; }

  bool operator==(const FrameRecord&) const = default;
};

struct Match {
  PixelCoord pixel_i;
  PixelCoord pixel_j;
  float confidence = 1.0f;

  bool operator==(const Match&) const = default;
};

/// Correspondences between a current frame `frame_i` and an earlier frame
/// `frame_j` (frame_i > frame_j).
struct PairRecord {
  std::uint32_t frame_i = 0;
  std::uint32_t frame_j = 0;
  std::vector<Match> matches;

  bool operator==(const PairRecord&) const = default;
};

struct MatchBundle {
  int window_size = 1;
  std::vector<FrameRecord> frames;
  std::vector<PairRecord> pairs;
  std::map<std::string, std::string> meta;

  bool operator==(const MatchBundle&) const = default;
};

enum class ViolationKind {
  BadWindow,
  FrameIdGap,
  PointmapSize,
  MaskSize,
  BadFrameSize,
  NonFinitePoint,
  PointBehindCamera,
  DanglingFrame,
  PairOrder,
  WindowExceeded,
  PixelOutOfBounds,
  PixelNotValid,
  DuplicateMatch,
  BadConfidence,
};

struct Violation {
  ViolationKind kind;
  int frame_index = -1;  // -1 when not frame-specific
  int pair_index = -1;   // -1 when not pair-specific
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
  std::string summary() const;
};

ValidationReport validate_bundle(const MatchBundle& bundle);

/// Canonical `waypixel-bundle v1` text. Identical bundles give identical bytes.
std::string serialize_bundle(const MatchBundle& bundle);
MatchBundle parse_bundle(std::string_view text);

MatchBundle load_bundle(const std::filesystem::path& path);
void save_bundle(const MatchBundle& bundle, const std::filesystem::path& path);

// Shared helpers for the binary sections of the on-disk formats.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace waypixel
