#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gicisad/pose/data.hpp"

namespace gicisad::pose {

struct WindowOrigin {
  std::string video_id;
  std::string actor_id;
  std::int64_t first_frame = 0;

  auto operator<=>(const WindowOrigin&) const = default;
};

/// An L-frame slice split into `past` (l frames) and `future` (L - l frames),
/// each stored frames x joints x channels.
struct Window {
  WindowOrigin origin;
  std::size_t length = 6;  // L
  std::size_t past_frames = 3;  // l
  std::size_t joints = 0;
  std::size_t channels = 2;
  std::vector<double> past;
  std::vector<double> future;

  std::size_t future_frames() const { return length - past_frames; }
};

/// Windows start at frames 0, stride, 2*stride, ... of the track. A track
/// shorter than `length` yields no windows.
std::vector<Window> make_windows(const PoseTrack& track, std::size_t length, std::size_t past_frames,
                                 std::size_t stride = 1);
std::vector<Window> make_windows(const PoseDataset& dataset, std::size_t length,
                                 std::size_t past_frames, std::size_t stride = 1);

enum class NormalizePolicy { kCenterScale, kNone };

NormalizePolicy parse_normalize_policy(const std::string& name);
std::string to_string(NormalizePolicy policy);

/// Inverse of a normalization: original = normalized * scale + center.
struct NormalizationRecord {
  std::vector<double> center;  // joints x channels
  double scale = 1.0;
};

struct NormalizedWindow {
  Window window;
  NormalizationRecord record;
};

inline constexpr double kMinNormalizationScale = 1e-6;

/// center-scale subtracts the per-joint mean pose of the past frames and
/// divides by the standard deviation of the past coordinates about the body
/// centre, i.e. the skeleton's spatial spread (floored at
/// kMinNormalizationScale). The same map is applied to the future frames.
NormalizedWindow normalize_window(const Window& window, NormalizePolicy policy);
Window denormalize_window(const Window& window, const NormalizationRecord& record);

}  // namespace gicisad::pose
