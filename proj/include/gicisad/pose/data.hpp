#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gicisad::pose {

/// One actor's skeleton over a run of consecutive frames.
struct PoseTrack {
  std::string video_id;
  std::string actor_id;
  std::int64_t first_frame = 0;
  std::size_t joints = 0;
  std::size_t channels = 2;
  /// frames x joints x channels, row-major.
  std::vector<double> coords;

  std::size_t frame_count() const { return joints * channels != 0 ? coords.size() / (joints * channels) : 0; }
  std::int64_t last_frame() const { return first_frame + static_cast<std::int64_t>(frame_count()) - 1; }
  std::span<const double> frame(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * joints * channels, joints * channels);
  }
};

struct FrameLabel {
  std::string video_id;
  std::int64_t frame = 0;
  bool anomalous = false;
};

/// Ground truth keyed by (video, frame); at most one label per key.
class LabelSet {
 public:
  /// Throws DataError on a duplicate key.
  void add(const FrameLabel& label);
  std::optional<bool> find(const std::string& video_id, std::int64_t frame) const;
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t anomalous_count() const;
  std::vector<FrameLabel> to_vector() const;
  void merge(const LabelSet& other);

 private:
  std::map<std::pair<std::string, std::int64_t>, bool> labels_;
};

struct PoseDataset {
  std::size_t joints = 0;
  std::size_t channels = 2;
  /// Sorted by (video_id, actor_id).
  std::vector<PoseTrack> tracks;

  /// Appends another dataset with matching joints/channels.
  void merge(const PoseDataset& other);
};

PoseDataset parse_pose_text(const std::string& text);
std::string format_pose_text(const PoseDataset& dataset);
PoseDataset load_pose_dataset(const std::filesystem::path& path);
void write_pose_dataset(const std::filesystem::path& path, const PoseDataset& dataset);

LabelSet parse_label_text(const std::string& text);
std::string format_label_text(const LabelSet& labels);
LabelSet load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelSet& labels);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gicisad::pose
