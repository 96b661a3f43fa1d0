#include "gicisad/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "gicisad/errors.hpp"

namespace gicisad::eval {

std::vector<VideoExtent> video_extents(const pose::PoseDataset& dataset) {
  std::map<std::string, VideoExtent> by_video;
  for (const auto& track : dataset.tracks) {
    if (track.frame_count() == 0) continue;
    auto [it, fresh] = by_video.try_emplace(track.video_id, VideoExtent{track.video_id, track.first_frame,
                                                                       track.last_frame()});
    if (!fresh) {
      it->second.first_frame = std::min(it->second.first_frame, track.first_frame);
      it->second.last_frame = std::max(it->second.last_frame, track.last_frame());
    }
  }
  std::vector<VideoExtent> out;
  for (auto& [id, extent] : by_video) out.push_back(extent);
  return out;
}

std::vector<FrameScoreSeries> frame_scores(const std::vector<pipeline::ScoreRecord>& records,
                                           const std::vector<VideoExtent>& extents, std::size_t window_length,
                                           std::size_t past_frames) {
  if (past_frames >= window_length) throw ContractViolation("past frames must be fewer than the window length");
  std::map<std::string, const VideoExtent*> extent_of;
  for (const auto& e : extents) extent_of[e.video_id] = &e;

  std::map<std::pair<std::string, std::int64_t>, std::vector<double>> actors;
  for (const auto& r : records) {
    if (!extent_of.contains(r.origin.video_id)) {
      throw DataError("score record references unknown video '" + r.origin.video_id + "'");
    }
    actors[{r.origin.video_id, r.origin.first_frame}].push_back(r.aggregate);
  }

  std::map<std::string, FrameScoreSeries> series;
  std::map<std::string, std::vector<double>> sums;
  for (const auto& [key, per_actor] : actors) {
    const auto& [video, origin] = key;
    const VideoExtent& extent = *extent_of.at(video);
    auto [it, fresh] = series.try_emplace(video);
    auto& s = it->second;
    auto& total = sums[video];
    if (fresh) {
      const auto frames = static_cast<std::size_t>(extent.last_frame - extent.first_frame + 1);
      s.video_id = video;
      s.first_frame = extent.first_frame;
      s.scores.assign(frames, 0.0);
      s.coverage.assign(frames, 0);
      total.assign(frames, 0.0);
    }
    const double fused = pipeline::multi_actor_score(per_actor);
    for (std::size_t f = past_frames; f < window_length; ++f) {
      const std::int64_t frame = origin + static_cast<std::int64_t>(f);
      if (frame < extent.first_frame || frame > extent.last_frame) continue;
      const auto idx = static_cast<std::size_t>(frame - extent.first_frame);
      total[idx] += fused;
      s.coverage[idx]++;
    }
  }

  std::vector<FrameScoreSeries> out;
  for (auto& [video, s] : series) {
    const auto& total = sums[video];
    const std::size_t n = s.scores.size();
    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.coverage[i] > 0) {
        s.scores[i] = total[i] / static_cast<double>(s.coverage[i]);
        covered.push_back(i);
      }
    }
    if (covered.empty()) continue;
    for (std::size_t i = 0, c = 0; i < n; ++i) {
      if (s.coverage[i] > 0) continue;
      while (c + 1 < covered.size() && covered[c + 1] < i) ++c;
      std::size_t pick = covered[c];
      if (pick < i && c + 1 < covered.size() && covered[c + 1] - i < i - pick) pick = covered[c + 1];
      s.scores[i] = s.scores[pick];
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FrameScore> flatten(const std::vector<FrameScoreSeries>& series) {
  std::vector<FrameScore> out;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      out.push_back({s.video_id, s.first_frame + static_cast<std::int64_t>(i), s.scores[i]});
    }
  }
  return out;
}

std::string format_frame_scores(const std::vector<FrameScore>& scores) {
  std::ostringstream out;
  out << "video_id,frame,score\n";
  for (const auto& s : scores) out << s.video_id << "," << s.frame << "," << pose::format_number(s.score) << "\n";
  return out.str();
}

std::vector<FrameScore> parse_frame_scores(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<FrameScore> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "video_id,frame,score") throw ParseError("expected header 'video_id,frame,score'", line_no);
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), line_no);
    FrameScore s;
    s.video_id = fields[0];
    try {
      std::size_t used = 0;
      s.frame = std::stoll(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("frame");
      s.score = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw ParseError("malformed frame or score", line_no);
    }
    if (!std::isfinite(s.score)) throw ParseError("non-finite score", line_no);
    out.push_back(std::move(s));
  }
  if (!header) throw ParseError("missing header", line_no);
  return out;
}

RocResult auroc(std::span<const double> scores, const std::vector<bool>& anomalous) {
  if (scores.size() != anomalous.size()) throw ContractViolation("one label per score");
  RocResult r;
  for (bool a : anomalous) (a ? r.positives : r.negatives)++;
  if (r.positives == 0) throw EvaluationError("labels contain no anomalous frames");
  if (r.negatives == 0) throw EvaluationError("labels contain no normal frames");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (anomalous[order[k]]) positive_rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(r.positives), n = static_cast<double>(r.negatives);
  r.auroc = (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);

  r.curve.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = order.size(); i > 0;) {
    std::size_t j = i;
    while (j > 0 && scores[order[j - 1]] == scores[order[i - 1]]) {
      (anomalous[order[j - 1]] ? tp : fp)++;
      --j;
    }
    r.curve.emplace_back(static_cast<double>(fp) / n, static_cast<double>(tp) / p);
    i = j;
  }
  return r;
}

RocResult auroc(const std::vector<FrameScore>& scores, const pose::LabelSet& labels) {
  std::vector<double> values;
  std::vector<bool> flags;
  for (const auto& s : scores) {
    const auto label = labels.find(s.video_id, s.frame);
    if (!label) {
      throw DataError("no label for video '" + s.video_id + "' frame " + std::to_string(s.frame));
    }
    values.push_back(s.score);
    flags.push_back(*label);
  }
  return auroc(values, flags);
}

double curve_area(const std::vector<std::pair<double, double>>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  }
  return area;
}

ParamBreakdown param_count(const ParamSet& params) {
  ParamBreakdown out;
  for (const auto& p : params) {
    const std::string module = p.name.substr(0, p.name.find('.'));
    auto it = std::find_if(out.modules.begin(), out.modules.end(),
                           [&](const auto& m) { return m.first == module; });
    if (it == out.modules.end()) {
      out.modules.emplace_back(module, 0);
      it = std::prev(out.modules.end());
    }
    it->second += p.tensor.size();
    out.total += p.tensor.size();
  }
  return out;
}

std::string format_param_breakdown(const ParamBreakdown& breakdown) {
  std::ostringstream out;
  for (const auto& [module, count] : breakdown.modules) out << module << " " << count << "\n";
  out << "total " << breakdown.total << "\n";
  return out.str();
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string histogram_svg(std::span<const double> normal, std::span<const double> anomalous) {
  constexpr double width = 640, height = 360, left = 50, right = 20, top = 30, bottom = 40;
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (auto series : {normal, anomalous}) {
    for (double v : series) {
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto bin_counts = [&](std::span<const double> values) {
    std::vector<std::size_t> counts(kHistogramBins, 0);
    for (double v : values) {
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(kHistogramBins));
      counts[std::min(b, kHistogramBins - 1)]++;
    }
    return counts;
  };
  const auto normal_counts = bin_counts(normal), anomalous_counts = bin_counts(anomalous);
  std::size_t peak = 1;
  for (std::size_t b = 0; b < kHistogramBins; ++b) peak = std::max({peak, normal_counts[b], anomalous_counts[b]});

  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const double bar_w = plot_w / static_cast<double>(kHistogramBins);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">anomaly score histogram ("
      << kHistogramBins << " bins)</text>\n";
  auto draw = [&](const std::vector<std::size_t>& counts, const char* cls, const char* color) {
    svg << "<g class=\"" << cls << "\" fill=\"" << color << "\" fill-opacity=\"0.55\">\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      if (counts[b] == 0) continue;
      const double h = plot_h * static_cast<double>(counts[b]) / static_cast<double>(peak);
      svg << "<rect x=\"" << fixed(left + bar_w * static_cast<double>(b)) << "\" y=\""
          << fixed(top + plot_h - h) << "\" width=\"" << fixed(bar_w) << "\" height=\"" << fixed(h)
          << "\"/>\n";
    }
    svg << "</g>\n";
  };
  if (!normal.empty()) draw(normal_counts, "normal", "#1f77b4");
  if (!anomalous.empty()) draw(anomalous_counts, "anomalous", "#d62728");
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"" << height - 12 << "\" font-size=\"11\" font-family=\"sans-serif\">"
      << pose::format_number(lo) << "</text>\n";
  svg << "<text x=\"" << left + plot_w << "\" y=\"" << height - 12
      << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">" << pose::format_number(hi)
      << "</text>\n";
  double legend_y = top + 12;
  if (!normal.empty()) {
    svg << "<text x=\"" << left + plot_w - 120 << "\" y=\"" << legend_y
        << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#1f77b4\">normal (" << normal.size()
        << ")</text>\n";
    legend_y += 16;
  }
  if (!anomalous.empty()) {
    svg << "<text x=\"" << left + plot_w - 120 << "\" y=\"" << legend_y
        << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#d62728\">anomalous (" << anomalous.size()
        << ")</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const std::vector<FrameScore>& scores, const pose::LabelSet& labels, const RocResult& roc,
                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create report directory '" + out_dir.string() + "'");
  }
  std::ostringstream score_csv;
  score_csv << "video_id,frame,score,label\n";
  std::vector<double> normal, anomalous;
  for (const auto& s : scores) {
    const auto label = labels.find(s.video_id, s.frame);
    const bool a = label.value_or(false);
    score_csv << s.video_id << "," << s.frame << "," << pose::format_number(s.score) << ","
              << (label ? (a ? "1" : "0") : "") << "\n";
    (a ? anomalous : normal).push_back(s.score);
  }
  std::ostringstream roc_csv;
  roc_csv << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.curve) roc_csv << pose::format_number(fpr) << "," << pose::format_number(tpr) << "\n";

  pose::write_text_file(out_dir / "scores.csv", score_csv.str());
  pose::write_text_file(out_dir / "roc.csv", roc_csv.str());
  pose::write_text_file(out_dir / "auroc.txt", "auroc " + pose::format_number(roc.auroc) + "\npositives " +
                                                   std::to_string(roc.positives) + "\nnegatives " +
                                                   std::to_string(roc.negatives) + "\n");
  pose::write_text_file(out_dir / "histogram.svg", histogram_svg(normal, anomalous));
}

}  // namespace gicisad::eval
