#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gicisad/numerics/params.hpp"
#include "gicisad/pipeline/score.hpp"
#include "gicisad/pose/data.hpp"

namespace gicisad::eval {

struct VideoExtent {
  std::string video_id;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
};

/// Frame range of each video over all of its actors, sorted by video id.
std::vector<VideoExtent> video_extents(const pose::PoseDataset& dataset);

struct FrameScoreSeries {
  std::string video_id;
  std::int64_t first_frame = 0;
  std::vector<double> scores;
  std::vector<std::size_t> coverage;  // windows contributing to each frame
};

/// Windows sharing (video, first frame) are fused across actors with
/// multi_actor_score; each fused score lands on the window's future frames
/// (origin + l .. origin + L - 1), overlapping contributions are averaged,
/// and uncovered frames copy the nearest covered frame (the earlier one on
/// a tie). Videos without any record are left out. Throws DataError for a
/// record whose video has no extent.
std::vector<FrameScoreSeries> frame_scores(const std::vector<pipeline::ScoreRecord>& records,
                                           const std::vector<VideoExtent>& extents, std::size_t window_length,
                                           std::size_t past_frames);

struct FrameScore {
  std::string video_id;
  std::int64_t frame = 0;
  double score = 0.0;
};

std::vector<FrameScore> flatten(const std::vector<FrameScoreSeries>& series);

/// CSV `video_id,frame,score`.
std::string format_frame_scores(const std::vector<FrameScore>& scores);
std::vector<FrameScore> parse_frame_scores(const std::string& text);

struct RocResult {
  double auroc = 0.5;
  std::vector<std::pair<double, double>> curve;  // (fpr, tpr) from (0,0) to (1,1)
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Mann-Whitney AUROC with ties counted as one half; the curve groups tied
/// scores into single steps. Throws EvaluationError when a class is absent.
RocResult auroc(std::span<const double> scores, const std::vector<bool>& anomalous);
/// Joins scores with labels by (video, frame). Throws DataError when a
/// scored frame has no label.
RocResult auroc(const std::vector<FrameScore>& scores, const pose::LabelSet& labels);

/// Trapezoidal area under a curve of (fpr, tpr) points.
double curve_area(const std::vector<std::pair<double, double>>& curve);

struct ParamBreakdown {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> modules;  // registration order
};

/// Trainable scalars grouped by the first dotted segment of each name.
ParamBreakdown param_count(const ParamSet& params);
std::string format_param_breakdown(const ParamBreakdown& breakdown);

inline constexpr std::size_t kHistogramBins = 50;

/// Writes scores.csv (video_id,frame,score,label), roc.csv (fpr,tpr),
/// auroc.txt and histogram.svg (normal and anomalous frame scores in 50
/// shared bins). Throws IoError when the directory cannot be written.
void emit_report(const std::vector<FrameScore>& scores, const pose::LabelSet& labels, const RocResult& roc,
                 const std::filesystem::path& out_dir);

/// SVG histogram alone; an empty series is not drawn.
std::string histogram_svg(std::span<const double> normal, std::span<const double> anomalous);

}  // namespace gicisad::eval
