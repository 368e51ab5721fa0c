#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace waypixel {

struct SubmapSpec {
  std::uint32_t center = 0;
  int radius = 4;     // temporal radius R, frames
  int subsample = 1;  // f_s
};

/// Frames center + k * f_s for |k * f_s| <= R, clipped to [0, N - 1].
std::vector<std::uint32_t> build_submap(const SubmapSpec& spec, std::size_t num_frames);

enum class LocalizerMode { Matched, Oracle };

LocalizerMode parse_localizer_mode(const std::string& text);
std::string to_string(LocalizerMode mode);

struct LocalizerConfig {
  LocalizerMode mode = LocalizerMode::Oracle;
  int radius = 4;
  int subsample = 1;
};

struct LocalizationStep {
  std::size_t step = 0;
  std::uint32_t index = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> counts;
};

struct LocalizationState {
  std::uint32_t current_index = 0;
  std::size_t step = 0;
  std::vector<LocalizationStep> history;
};

/// Moves the pointer to the submap frame with the most matches, preferring
/// the larger frame id on ties. Throws NoMatches (state untouched) when every
/// count is zero.
LocalizationState localize(const std::vector<std::pair<std::uint32_t, std::size_t>>& counts,
                           const LocalizationState& state);

}  // namespace waypixel
