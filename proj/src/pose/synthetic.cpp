#include "gicisad/pose/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gicisad/errors.hpp"
#include "gicisad/keyvalue.hpp"
#include "gicisad/numerics/rng.hpp"

namespace gicisad::pose {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kJitterFactor = 5.0;

struct JointMotion {
  double rest_x, rest_y;
  double amp_x, amp_y;
  double multiplier;  // harmonic of the gait frequency
  double phase;
};

// Rest pose in body units (height ~1, y pointing down) and swing pattern.
// Arms swing against the legs; head, shoulders and hips bob at twice the
// gait frequency.
constexpr std::array<JointMotion, kTemplateJoints> kTemplate = {{
    {0.00, -0.45, 0.010, 0.015, 2, 0.0},         // nose
    {0.03, -0.48, 0.010, 0.015, 2, 0.0},         // left eye
    {-0.03, -0.48, 0.010, 0.015, 2, 0.0},        // right eye
    {0.06, -0.46, 0.010, 0.015, 2, 0.0},         // left ear
    {-0.06, -0.46, 0.010, 0.015, 2, 0.0},        // right ear
    {0.12, -0.30, 0.012, 0.015, 2, 0.0},         // left shoulder
    {-0.12, -0.30, 0.012, 0.015, 2, 0.0},        // right shoulder
    {0.15, -0.12, 0.060, 0.020, 1, kPi},         // left elbow
    {-0.15, -0.12, 0.060, 0.020, 1, 0.0},        // right elbow
    {0.16, 0.05, 0.120, 0.040, 1, kPi + 0.3},    // left wrist
    {-0.16, 0.05, 0.120, 0.040, 1, 0.3},         // right wrist
    {0.08, 0.05, 0.010, 0.010, 2, 0.0},          // left hip
    {-0.08, 0.05, 0.010, 0.010, 2, 0.0},         // right hip
    {0.09, 0.28, 0.080, 0.030, 1, 0.0},          // left knee
    {-0.09, 0.28, 0.080, 0.030, 1, kPi},         // right knee
    {0.09, 0.50, 0.150, 0.050, 1, 0.4},          // left ankle
    {-0.09, 0.50, 0.150, 0.050, 1, kPi + 0.4},   // right ankle
}};

bool in_spans(const std::vector<FrameSpan>& spans, std::int64_t frame) {
  return std::any_of(spans.begin(), spans.end(),
                     [frame](const FrameSpan& s) { return frame >= s.first && frame <= s.last; });
}

std::vector<FrameSpan> parse_spans(const std::string& text) {
  std::vector<FrameSpan> spans;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(start, comma - start);
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    start = comma + 1;
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) throw ConfigError("anomaly span '" + item + "' must be 'first-last'");
    FrameSpan s{parse_int_value("anomaly_spans", item.substr(0, dash)),
                parse_int_value("anomaly_spans", item.substr(dash + 1))};
    if (s.first < 0 || s.last < s.first) throw ConfigError("invalid anomaly span '" + item + "'");
    spans.push_back(s);
  }
  return spans;
}

}  // namespace

BodyRegion parse_region(const std::string& raw) {
  std::string name = raw;
  std::replace(name.begin(), name.end(), ' ', '_');
  std::replace(name.begin(), name.end(), '-', '_');
  if (name == "head") return BodyRegion::kHead;
  if (name == "torso") return BodyRegion::kTorso;
  if (name == "left_arm") return BodyRegion::kLeftArm;
  if (name == "right_arm") return BodyRegion::kRightArm;
  if (name == "left_leg") return BodyRegion::kLeftLeg;
  if (name == "right_leg") return BodyRegion::kRightLeg;
  throw ConfigError("unknown body region '" + raw + "'");
}

std::string to_string(BodyRegion region) {
  switch (region) {
    case BodyRegion::kHead: return "head";
    case BodyRegion::kTorso: return "torso";
    case BodyRegion::kLeftArm: return "left_arm";
    case BodyRegion::kRightArm: return "right_arm";
    case BodyRegion::kLeftLeg: return "left_leg";
    case BodyRegion::kRightLeg: return "right_leg";
  }
  return "?";
}

std::vector<std::size_t> region_joints(BodyRegion region) {
  switch (region) {
    case BodyRegion::kHead: return {0, 1, 2, 3, 4};
    case BodyRegion::kTorso: return {5, 6, 11, 12};
    case BodyRegion::kLeftArm: return {7, 9};
    case BodyRegion::kRightArm: return {8, 10};
    case BodyRegion::kLeftLeg: return {13, 15};
    case BodyRegion::kRightLeg: return {14, 16};
  }
  return {};
}

std::vector<std::pair<std::size_t, std::size_t>> template_bones() {
  return {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {0, 5}, {0, 6}, {5, 6}, {5, 7}, {7, 9},
          {6, 8}, {8, 10}, {5, 11}, {6, 12}, {11, 12}, {11, 13}, {13, 15}, {12, 14}, {14, 16}};
}

AnomalyKind parse_anomaly_kind(const std::string& name) {
  if (name == "none") return AnomalyKind::kNone;
  if (name == "region-freeze") return AnomalyKind::kRegionFreeze;
  if (name == "region-jitter") return AnomalyKind::kRegionJitter;
  if (name == "global-speedup") return AnomalyKind::kGlobalSpeedup;
  throw ConfigError("unknown anomaly kind '" + name + "'");
}

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kNone: return "none";
    case AnomalyKind::kRegionFreeze: return "region-freeze";
    case AnomalyKind::kRegionJitter: return "region-jitter";
    case AnomalyKind::kGlobalSpeedup: return "global-speedup";
  }
  return "?";
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  const auto kv = KeyValues::parse(text);
  kv.require_known({"seed", "video_prefix", "videos", "frames", "actors", "joints", "noise",
                    "base_frequency", "drift", "anomaly_kind", "anomaly_region", "anomaly_spans",
                    "anomaly_videos", "anomaly_rate", "anomaly_actor"});
  SyntheticSpec s;
  auto count = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  };
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  s.video_prefix = kv.get_string("video_prefix", s.video_prefix);
  s.videos = count("videos", s.videos);
  s.frames = count("frames", s.frames);
  s.actors = count("actors", s.actors);
  s.joints = count("joints", s.joints);
  s.noise = kv.get_double("noise", s.noise);
  s.base_frequency = kv.get_double("base_frequency", s.base_frequency);
  s.drift = kv.get_double("drift", s.drift);
  s.anomaly_kind = parse_anomaly_kind(kv.get_string("anomaly_kind", "none"));
  s.anomaly_region = parse_region(kv.get_string("anomaly_region", "left_arm"));
  s.anomaly_spans = parse_spans(kv.get_string("anomaly_spans", ""));
  for (auto v : kv.get_int_list("anomaly_videos", {})) {
    if (v < 0) throw ConfigError("anomaly_videos entries must be non-negative");
    s.anomaly_videos.push_back(static_cast<std::size_t>(v));
  }
  s.anomaly_rate = kv.get_double("anomaly_rate", 0.0);
  s.anomaly_actor = count("anomaly_actor", 0);
  return s;
}

std::string format_synthetic_spec(const SyntheticSpec& s) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("seed", std::to_string(s.seed));
  line("video_prefix", s.video_prefix);
  line("videos", std::to_string(s.videos));
  line("frames", std::to_string(s.frames));
  line("actors", std::to_string(s.actors));
  line("joints", std::to_string(s.joints));
  line("noise", format_number(s.noise));
  line("base_frequency", format_number(s.base_frequency));
  line("drift", format_number(s.drift));
  line("anomaly_kind", to_string(s.anomaly_kind));
  line("anomaly_region", to_string(s.anomaly_region));
  std::string spans, videos;
  for (const auto& sp : s.anomaly_spans) {
    if (!spans.empty()) spans += ", ";
    spans += std::to_string(sp.first) + "-" + std::to_string(sp.last);
  }
  for (auto v : s.anomaly_videos) {
    if (!videos.empty()) videos += ", ";
    videos += std::to_string(v);
  }
  line("anomaly_spans", spans);
  line("anomaly_videos", videos);
  line("anomaly_rate", format_number(s.anomaly_rate));
  line("anomaly_actor", std::to_string(s.anomaly_actor));
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.joints != kTemplateJoints) {
    throw ConfigError("the synthetic skeleton template has " + std::to_string(kTemplateJoints) +
                      " joints, spec asks for " + std::to_string(spec.joints));
  }
  if (spec.videos == 0 || spec.frames == 0 || spec.actors == 0) {
    throw ConfigError("synthetic spec needs at least one video, frame and actor");
  }
  if (spec.noise < 0.0 || spec.base_frequency <= 0.0 || spec.drift < 0.0) {
    throw ConfigError("noise and drift must be non-negative, base_frequency positive");
  }
  if (spec.anomaly_rate < 0.0 || spec.anomaly_rate > 1.0) throw ConfigError("anomaly_rate must lie in [0, 1]");
  if (spec.anomaly_kind != AnomalyKind::kNone && spec.anomaly_actor >= spec.actors) {
    throw ConfigError("anomaly_actor out of range");
  }
  for (const auto& sp : spec.anomaly_spans) {
    if (sp.last >= static_cast<std::int64_t>(spec.frames)) {
      throw ConfigError("anomaly span " + std::to_string(sp.first) + "-" + std::to_string(sp.last) +
                        " exceeds the track length");
    }
  }
  for (auto v : spec.anomaly_videos) {
    if (v >= spec.videos) throw ConfigError("anomaly_videos entry out of range");
  }

  const std::size_t J = kTemplateJoints;
  const std::size_t C = 2;
  const RngStream root(spec.seed);
  const auto region = region_joints(spec.anomaly_region);
  std::vector<bool> in_region(J, false);
  for (auto j : region) in_region[j] = true;

  SyntheticData out;
  out.dataset.joints = J;
  out.dataset.channels = C;
  for (std::size_t v = 0; v < spec.videos; ++v) {
    char idx[16];
    std::snprintf(idx, sizeof idx, "%02zu", v);
    const std::string video_id = spec.video_prefix + idx;
    RngStream video_rng = root.split(v);

    const bool anomalous_video =
        spec.anomaly_kind != AnomalyKind::kNone &&
        (spec.anomaly_videos.empty() ||
         std::find(spec.anomaly_videos.begin(), spec.anomaly_videos.end(), v) != spec.anomaly_videos.end());
    std::vector<FrameSpan> spans;
    if (anomalous_video) {
      spans = spec.anomaly_spans;
      if (spans.empty() && spec.anomaly_rate > 0.0) {
        RngStream span_rng = video_rng.split(0xa11);
        const auto len = std::max<std::int64_t>(
            1, std::llround(spec.anomaly_rate * static_cast<double>(spec.frames)));
        const auto start = static_cast<std::int64_t>(
            span_rng.uniform_index(spec.frames - static_cast<std::size_t>(len) + 1));
        spans.push_back({start, start + len - 1});
      }
    }

    for (std::size_t a = 0; a < spec.actors; ++a) {
      RngStream actor_rng = video_rng.split(1000 + a);
      RngStream noise_rng = actor_rng.split(1);
      const double cx = 0.3 + 0.4 * actor_rng.uniform();
      const double cy = 0.4 + 0.2 * actor_rng.uniform();
      const double size = 0.15 + 0.1 * actor_rng.uniform();
      const double freq = spec.base_frequency * (0.8 + 0.4 * actor_rng.uniform());
      const double phase0 = 2.0 * kPi * actor_rng.uniform();
      const double vx = spec.drift * (2.0 * actor_rng.uniform() - 1.0);
      const double vy = spec.drift * (2.0 * actor_rng.uniform() - 1.0);
      std::array<double, kTemplateJoints> amp_jitter{}, phase_jitter{};
      for (std::size_t j = 0; j < J; ++j) {
        amp_jitter[j] = 0.9 + 0.2 * actor_rng.uniform();
        phase_jitter[j] = 0.2 * (2.0 * actor_rng.uniform() - 1.0);
      }

      const bool affected = anomalous_video && a == spec.anomaly_actor;
      PoseTrack track{video_id, "a" + std::to_string(a), 0, J, C, {}};
      track.coords.resize(spec.frames * J * C);
      double gait_phase = phase0;
      std::vector<double> held(J * C, 0.0);
      for (std::size_t f = 0; f < spec.frames; ++f) {
        const auto frame = static_cast<std::int64_t>(f);
        const bool active = affected && in_spans(spans, frame);
        const bool span_start = active && (f == 0 || !in_spans(spans, frame - 1));
        double* pose = track.coords.data() + f * J * C;
        for (std::size_t j = 0; j < J; ++j) {
          const auto& m = kTemplate[j];
          const double theta = m.multiplier * gait_phase + m.phase + phase_jitter[j];
          const double bx = m.rest_x + amp_jitter[j] * m.amp_x * std::sin(theta);
          const double by = m.rest_y + amp_jitter[j] * m.amp_y * std::cos(theta);
          double nx = noise_rng.normal() * spec.noise;
          double ny = noise_rng.normal() * spec.noise;
          if (active && spec.anomaly_kind == AnomalyKind::kRegionJitter && in_region[j]) {
            nx *= kJitterFactor;
            ny *= kJitterFactor;
          }
          pose[j * C] = cx + vx * static_cast<double>(f) + size * bx + nx;
          pose[j * C + 1] = cy + vy * static_cast<double>(f) + size * by + ny;
        }
        if (active && spec.anomaly_kind == AnomalyKind::kRegionFreeze) {
          for (std::size_t j : region) {
            if (span_start) {
              held[j * C] = pose[j * C];
              held[j * C + 1] = pose[j * C + 1];
            }
            pose[j * C] = held[j * C];
            pose[j * C + 1] = held[j * C + 1];
          }
        }
        const bool fast = active && spec.anomaly_kind == AnomalyKind::kGlobalSpeedup;
        gait_phase += 2.0 * kPi * freq * (fast ? 2.0 : 1.0);
      }
      out.dataset.tracks.push_back(std::move(track));
    }

    for (std::size_t f = 0; f < spec.frames; ++f) {
      const auto frame = static_cast<std::int64_t>(f);
      out.labels.add({video_id, frame, anomalous_video && in_spans(spans, frame)});
    }
  }
  return out;
}

}  // namespace gicisad::pose
