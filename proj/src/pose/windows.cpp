#include "gicisad/pose/windows.hpp"

#include <algorithm>
#include <cmath>

#include "gicisad/errors.hpp"

namespace gicisad::pose {

std::vector<Window> make_windows(const PoseTrack& track, std::size_t length, std::size_t past_frames,
                                 std::size_t stride) {
  if (past_frames == 0 || past_frames >= length) {
    throw ConfigError("past frame count must satisfy 0 < l < L");
  }
  if (stride == 0) throw ConfigError("window stride must be at least 1");
  std::vector<Window> out;
  const std::size_t n = track.frame_count();
  if (n < length) return out;
  const std::size_t frame_size = track.joints * track.channels;
  out.reserve((n - length) / stride + 1);
  for (std::size_t start = 0; start + length <= n; start += stride) {
    Window w;
    w.origin = {track.video_id, track.actor_id, track.first_frame + static_cast<std::int64_t>(start)};
    w.length = length;
    w.past_frames = past_frames;
    w.joints = track.joints;
    w.channels = track.channels;
    auto first = track.coords.begin() + static_cast<std::ptrdiff_t>(start * frame_size);
    auto split = first + static_cast<std::ptrdiff_t>(past_frames * frame_size);
    auto last = first + static_cast<std::ptrdiff_t>(length * frame_size);
    w.past.assign(first, split);
    w.future.assign(split, last);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> make_windows(const PoseDataset& dataset, std::size_t length,
                                 std::size_t past_frames, std::size_t stride) {
  std::vector<Window> out;
  for (const auto& track : dataset.tracks) {
    auto w = make_windows(track, length, past_frames, stride);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

NormalizePolicy parse_normalize_policy(const std::string& name) {
  if (name == "center-scale") return NormalizePolicy::kCenterScale;
  if (name == "none") return NormalizePolicy::kNone;
  throw ConfigError("unknown normalization policy '" + name + "'");
}

std::string to_string(NormalizePolicy policy) {
  return policy == NormalizePolicy::kCenterScale ? "center-scale" : "none";
}

NormalizedWindow normalize_window(const Window& window, NormalizePolicy policy) {
  const std::size_t frame_size = window.joints * window.channels;
  NormalizedWindow out{window, {std::vector<double>(frame_size, 0.0), 1.0}};
  if (policy == NormalizePolicy::kNone) return out;

  auto& center = out.record.center;
  for (std::size_t f = 0; f < window.past_frames; ++f)
    for (std::size_t i = 0; i < frame_size; ++i) center[i] += window.past[f * frame_size + i];
  for (double& c : center) c /= static_cast<double>(window.past_frames);

  std::vector<double> body(window.channels, 0.0);
  for (std::size_t i = 0; i < frame_size; ++i) body[i % window.channels] += center[i];
  for (double& b : body) b /= static_cast<double>(window.joints);
  double ss = 0.0;
  for (std::size_t f = 0; f < window.past_frames; ++f) {
    for (std::size_t i = 0; i < frame_size; ++i) {
      const double d = window.past[f * frame_size + i] - body[i % window.channels];
      ss += d * d;
    }
  }
  const double scale =
      std::max(std::sqrt(ss / static_cast<double>(window.past.size())), kMinNormalizationScale);
  out.record.scale = scale;

  auto apply = [&](std::vector<double>& block) {
    for (std::size_t j = 0; j < block.size(); ++j) block[j] = (block[j] - center[j % frame_size]) / scale;
  };
  apply(out.window.past);
  apply(out.window.future);
  return out;
}

Window denormalize_window(const Window& window, const NormalizationRecord& record) {
  const std::size_t frame_size = window.joints * window.channels;
  if (record.center.size() != frame_size) {
    throw ContractViolation("normalization record does not match window layout");
  }
  Window out = window;
  auto undo = [&](std::vector<double>& block) {
    for (std::size_t j = 0; j < block.size(); ++j) block[j] = block[j] * record.scale + record.center[j % frame_size];
  };
  undo(out.past);
  undo(out.future);
  return out;
}

}  // namespace gicisad::pose
