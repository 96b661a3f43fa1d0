#include "gicisad/pose/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "gicisad/errors.hpp"

namespace gicisad::pose {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::int64_t parse_int(std::string_view s, std::size_t line, const char* what) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
  }
  return v;
}

double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("invalid coordinate '" + std::string(s) + "'", line);
  }
  return v;
}

// Parses "key=value" tokens of a header line after the leading tag.
std::map<std::string, std::int64_t> header_fields(std::string_view rest, std::size_t line) {
  std::map<std::string, std::int64_t> out;
  std::istringstream in{std::string(rest)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("malformed header token '" + token + "'", line);
    out[token.substr(0, eq)] = parse_int(std::string_view(token).substr(eq + 1), line, "header value");
  }
  return out;
}

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    f(trim(std::string_view(text).substr(start, end - start)), line_no);
    start = end + 1;
  }
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Labels

void LabelSet::add(const FrameLabel& label) {
  auto [it, inserted] = labels_.emplace(std::make_pair(label.video_id, label.frame), label.anomalous);
  if (!inserted) {
    throw DataError("duplicate label for video '" + label.video_id + "' frame " +
                    std::to_string(label.frame));
  }
}

std::optional<bool> LabelSet::find(const std::string& video_id, std::int64_t frame) const {
  auto it = labels_.find({video_id, frame});
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSet::anomalous_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels_.begin(), labels_.end(), [](const auto& kv) { return kv.second; }));
}

std::vector<FrameLabel> LabelSet::to_vector() const {
  std::vector<FrameLabel> out;
  out.reserve(labels_.size());
  for (const auto& [key, value] : labels_) out.push_back({key.first, key.second, value});
  return out;
}

void LabelSet::merge(const LabelSet& other) {
  for (const auto& l : other.to_vector()) add(l);
}

LabelSet parse_label_text(const std::string& text) {
  LabelSet labels;
  bool seen_header = false;
  for_each_line(text, [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    if (!seen_header) {
      if (line != "#labels v1") throw ParseError("expected header '#labels v1'", no);
      seen_header = true;
      return;
    }
    const auto f = split_fields(line);
    if (f.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(f.size()), no);
    const auto flag = parse_int(f[2], no, "label");
    if (flag != 0 && flag != 1) throw ParseError("label must be 0 or 1", no);
    try {
      labels.add({std::string(trim(f[0])), parse_int(f[1], no, "frame"), flag == 1});
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(e.what(), no);
    }
  });
  if (!seen_header) throw ParseError("missing '#labels v1' header", 1);
  return labels;
}

std::string format_label_text(const LabelSet& labels) {
  std::string out = "#labels v1\n";
  for (const auto& l : labels.to_vector()) {
    out += l.video_id + "," + std::to_string(l.frame) + "," + (l.anomalous ? "1" : "0") + "\n";
  }
  return out;
}

LabelSet load_labels(const std::filesystem::path& path) { return parse_label_text(read_text_file(path)); }

void write_labels(const std::filesystem::path& path, const LabelSet& labels) {
  write_text_file(path, format_label_text(labels));
}

// ---------------------------------------------------------------------------
// Poses

void PoseDataset::merge(const PoseDataset& other) {
  if (tracks.empty() && joints == 0) {
    joints = other.joints;
    channels = other.channels;
  }
  if (other.joints != joints || other.channels != channels) {
    throw DataError("cannot merge datasets with different joint/channel counts");
  }
  for (const auto& t : other.tracks) {
    for (const auto& mine : tracks) {
      if (mine.video_id == t.video_id && mine.actor_id == t.actor_id) {
        throw DataError("track (" + t.video_id + ", " + t.actor_id + ") present in both datasets");
      }
    }
    tracks.push_back(t);
  }
  std::sort(tracks.begin(), tracks.end(), [](const PoseTrack& a, const PoseTrack& b) {
    return std::tie(a.video_id, a.actor_id) < std::tie(b.video_id, b.actor_id);
  });
}

PoseDataset parse_pose_text(const std::string& text) {
  PoseDataset ds;
  bool seen_header = false;
  // (video, actor) -> (frame -> coords)
  std::map<std::pair<std::string, std::string>, std::map<std::int64_t, std::vector<double>>> raw;
  for_each_line(text, [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    if (!seen_header) {
      if (!line.starts_with("#poses v1")) throw ParseError("expected header '#poses v1 J=<int> C=<int>'", no);
      auto fields = header_fields(line.substr(9), no);
      if (!fields.contains("J") || !fields.contains("C") || fields["J"] <= 0 || fields["C"] <= 0) {
        throw ParseError("header must declare positive J and C", no);
      }
      ds.joints = static_cast<std::size_t>(fields["J"]);
      ds.channels = static_cast<std::size_t>(fields["C"]);
      seen_header = true;
      return;
    }
    const auto f = split_fields(line);
    const std::size_t expected = 3 + ds.joints * ds.channels;
    if (f.size() != expected) {
      throw ParseError("expected " + std::to_string(ds.joints * ds.channels) +
                           " coordinates, got " + std::to_string(f.size() < 3 ? 0 : f.size() - 3),
                       no);
    }
    std::string video(trim(f[0]));
    std::string actor(trim(f[2]));
    if (video.empty() || actor.empty()) throw ParseError("empty video or actor id", no);
    const std::int64_t frame = parse_int(f[1], no, "frame");
    std::vector<double> coords(ds.joints * ds.channels);
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = parse_double(f[3 + i], no);
    auto& frames = raw[{video, actor}];
    if (!frames.emplace(frame, std::move(coords)).second) {
      throw ParseError("duplicate record for video '" + video + "' frame " + std::to_string(frame) +
                           " actor '" + actor + "'",
                       no);
    }
  });
  if (!seen_header) throw ParseError("missing '#poses v1' header", 1);
  for (auto& [key, frames] : raw) {
    PoseTrack t{key.first, key.second, frames.begin()->first, ds.joints, ds.channels, {}};
    std::int64_t expect = t.first_frame;
    for (auto& [frame, coords] : frames) {
      if (frame != expect) {
        throw DataError("track (" + key.first + ", " + key.second + ") is missing frame " +
                        std::to_string(expect));
      }
      t.coords.insert(t.coords.end(), coords.begin(), coords.end());
      ++expect;
    }
    ds.tracks.push_back(std::move(t));
  }
  return ds;
}

std::string format_pose_text(const PoseDataset& ds) {
  std::string out = "#poses v1 J=" + std::to_string(ds.joints) + " C=" + std::to_string(ds.channels) + "\n";
  for (const auto& t : ds.tracks) {
    for (std::size_t i = 0; i < t.frame_count(); ++i) {
      out += t.video_id + "," + std::to_string(t.first_frame + static_cast<std::int64_t>(i)) + "," + t.actor_id;
      for (double v : t.frame(i)) {
        out += ',';
        out += format_number(v);
      }
      out += '\n';
    }
  }
  return out;
}

PoseDataset load_pose_dataset(const std::filesystem::path& path) {
  return parse_pose_text(read_text_file(path));
}

void write_pose_dataset(const std::filesystem::path& path, const PoseDataset& dataset) {
  write_text_file(path, format_pose_text(dataset));
}

}  // namespace gicisad::pose
