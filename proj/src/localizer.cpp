#include "waypixel/localizer.hpp"

#include "waypixel/error.hpp"

#include <algorithm>

namespace waypixel {

std::vector<std::uint32_t> build_submap(const SubmapSpec& spec, std::size_t num_frames) {
  if (spec.center >= num_frames) throw Error(ErrorCode::InvalidArgument, "submap center out of range");
  if (spec.radius < 0 || spec.subsample < 1) {
    throw Error(ErrorCode::InvalidArgument, "submap radius must be >= 0 and subsample >= 1");
  }
  std::vector<std::uint32_t> frames;
  const long center = spec.center;
  const long steps = spec.radius / spec.subsample;
  for (long k = -steps; k <= steps; ++k) {
    const long f = center + k * spec.subsample;
    if (f >= 0 && f < static_cast<long>(num_frames)) frames.push_back(static_cast<std::uint32_t>(f));
  }
  return frames;
}

LocalizerMode parse_localizer_mode(const std::string& text) {
  if (text == "matched") return LocalizerMode::Matched;
  if (text == "oracle") return LocalizerMode::Oracle;
  throw Error(ErrorCode::InvalidArgument, "unknown localizer mode '" + text + "'");
}

std::string to_string(LocalizerMode mode) {
  return mode == LocalizerMode::Matched ? "matched" : "oracle";
}

LocalizationState localize(const std::vector<std::pair<std::uint32_t, std::size_t>>& counts,
                           const LocalizationState& state) {
  const std::pair<std::uint32_t, std::size_t>* best = nullptr;
  for (const auto& c : counts) {
    if (c.second == 0) continue;
    if (best == nullptr || c.second > best->second ||
        (c.second == best->second && c.first > best->first)) {
      best = &c;
    }
  }
  if (best == nullptr) throw Error(ErrorCode::NoMatches, "query matched no submap frame");
  LocalizationState next = state;
  next.current_index = best->first;
  next.history.push_back({state.step, best->first, counts});
  next.step = state.step + 1;
  return next;
}

}  // namespace waypixel
