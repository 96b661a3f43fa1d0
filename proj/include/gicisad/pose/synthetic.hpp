#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gicisad/pose/data.hpp"

namespace gicisad::pose {

/// The 17-joint skeleton used by the generator (COCO keypoint order).
inline constexpr std::size_t kTemplateJoints = 17;

enum class BodyRegion { kHead, kTorso, kLeftArm, kRightArm, kLeftLeg, kRightLeg };

/// Accepts "left_arm", "left-arm" and "left arm" spellings.
BodyRegion parse_region(const std::string& name);
std::string to_string(BodyRegion region);
std::vector<std::size_t> region_joints(BodyRegion region);
/// Undirected bone list of the template skeleton.
std::vector<std::pair<std::size_t, std::size_t>> template_bones();

enum class AnomalyKind { kNone, kRegionFreeze, kRegionJitter, kGlobalSpeedup };

AnomalyKind parse_anomaly_kind(const std::string& name);
std::string to_string(AnomalyKind kind);

/// Inclusive frame range, counted from the start of the video.
struct FrameSpan {
  std::int64_t first = 0;
  std::int64_t last = 0;
};

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::string video_prefix = "v";
  std::size_t videos = 4;
  std::size_t frames = 64;
  std::size_t actors = 1;
  std::size_t joints = kTemplateJoints;
  /// Per-frame coordinate noise, normalized image units.
  double noise = 0.001;
  /// Gait cycles per frame; each actor draws within +-20%.
  double base_frequency = 0.05;
  /// Largest per-frame drift of the body centre.
  double drift = 0.001;

  AnomalyKind anomaly_kind = AnomalyKind::kNone;
  BodyRegion anomaly_region = BodyRegion::kLeftArm;
  std::vector<FrameSpan> anomaly_spans;
  /// Videos receiving the anomaly; empty means all.
  std::vector<std::size_t> anomaly_videos;
  /// When positive and no spans are given, each anomalous video gets one
  /// randomly placed span covering this fraction of its frames.
  double anomaly_rate = 0.0;
  std::size_t anomaly_actor = 0;
};

SyntheticSpec parse_synthetic_spec(const std::string& text);
std::string format_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticData {
  PoseDataset dataset;
  /// One label per video frame.
  LabelSet labels;
};

/// Sinusoidal gait with Gaussian noise. Anomaly spans touch only the
/// chosen actor: region-freeze holds the region's pose from the span start,
/// region-jitter multiplies the region's noise by 5, global-speedup doubles
/// every frequency. Noise draws are identical with and without anomalies.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace gicisad::pose
