#include "heg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "heg/errors.hpp"

namespace heg {

using nlohmann::json;

Box Box::from_corners(double x1, double y1, double x2, double y2) {
  return Box{(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
}

void VideoSequence::validate() const {
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    const std::string where = "video '" + video_id + "' detection #" + std::to_string(i) +
                              " (frame " + std::to_string(d.frame_index) + ", object " +
                              std::to_string(d.object_id) + ")";
    if (d.frame_index >= frame_count) {
      throw DataError(where + ": frame index beyond frame_count " + std::to_string(frame_count));
    }
    if (!(d.box.width > 0.0) || !(d.box.height > 0.0)) {
      throw DataError(where + ": box width and height must be positive");
    }
    const bool overlaps = d.box.x1() < frame_width && d.box.x2() > 0.0 &&
                          d.box.y1() < frame_height && d.box.y2() > 0.0;
    if (!overlaps) throw DataError(where + ": box lies outside the image");
  }
}

std::vector<const Detection*> VideoSequence::detections_at(std::size_t frame_index) const {
  std::vector<const Detection*> out;
  for (const Detection& d : detections)
    if (d.frame_index == frame_index) out.push_back(&d);
  return out;
}

std::vector<std::size_t> sample_frames(const VideoSequence& seq, std::size_t stride) {
  if (stride == 0) throw DomainError("sample_frames: stride must be >= 1");
  std::vector<std::size_t> frames;
  for (std::size_t f = 0; f < seq.frame_count; f += stride) frames.push_back(f);
  return frames;
}

double sample_interval_seconds(double fps, std::size_t stride) {
  if (!(fps > 0.0)) throw DomainError("sample_interval_seconds: fps must be positive");
  return static_cast<double>(stride) / fps;
}

TubeWindow tube_window(const Detection& det, const VideoSequence& seq, std::size_t tau,
                       double scale, std::size_t channels) {
  if (tau < 2 || tau % 2 != 0) throw DomainError("tube_window: tau must be even and >= 2");
  if (!(scale > 0.0)) throw DomainError("tube_window: scale must be positive");
  if (seq.frame_count < tau) {
    throw DomainError("tube_window: sequence '" + seq.video_id + "' too short (" +
                      std::to_string(seq.frame_count) + " frames < tau " + std::to_string(tau) +
                      ")");
  }
  const auto half = static_cast<std::int64_t>(tau / 2);
  const auto t = static_cast<std::int64_t>(det.frame_index);
  const auto total = static_cast<std::int64_t>(seq.frame_count);
  std::int64_t start = t - half;
  std::int64_t end = t + half;
  if (start < 0) {
    end -= start;
    start = 0;
  }
  if (end > total) {
    start -= end - total;
    end = total;
  }

  const double w = det.box.width * scale;
  const double h = det.box.height * scale;
  const double x1 = std::clamp(det.box.center_x - w / 2.0, 0.0, seq.frame_width);
  const double x2 = std::clamp(det.box.center_x + w / 2.0, 0.0, seq.frame_width);
  const double y1 = std::clamp(det.box.center_y - h / 2.0, 0.0, seq.frame_height);
  const double y2 = std::clamp(det.box.center_y + h / 2.0, 0.0, seq.frame_height);

  TubeWindow tube;
  tube.object_id = det.object_id;
  tube.center_frame = det.frame_index;
  tube.start = static_cast<std::size_t>(start);
  tube.end = static_cast<std::size_t>(end);
  tube.crop_box = Box::from_corners(x1, y1, x2, y2);
  tube.tau = tau;
  tube.channels = channels;
  return tube;
}

namespace {

template <typename T>
T field(const json& rec, const char* key, std::size_t line_no) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw DataError("annotations line " + std::to_string(line_no) + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw DataError("annotations line " + std::to_string(line_no) + ": field '" + key +
                    "': " + e.what());
  }
}

}  // namespace

std::vector<VideoSequence> read_annotations(std::istream& in) {
  std::vector<VideoSequence> videos;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("annotations line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto kind = field<std::string>(rec, "record", line_no);
    if (kind == "video") {
      VideoSequence v;
      v.video_id = field<std::string>(rec, "video_id", line_no);
      v.fps = field<double>(rec, "fps", line_no);
      v.frame_count = field<std::size_t>(rec, "frame_count", line_no);
      v.frame_width = field<double>(rec, "frame_width", line_no);
      v.frame_height = field<double>(rec, "frame_height", line_no);
      v.label = field<int>(rec, "label", line_no);
      if (index.count(v.video_id)) {
        throw DataError("annotations line " + std::to_string(line_no) + ": duplicate video '" +
                        v.video_id + "'");
      }
      index[v.video_id] = videos.size();
      videos.push_back(std::move(v));
    } else if (kind == "detection") {
      const auto vid = field<std::string>(rec, "video_id", line_no);
      auto it = index.find(vid);
      if (it == index.end()) {
        throw DataError("annotations line " + std::to_string(line_no) +
                        ": detection before header of video '" + vid + "'");
      }
      Detection d;
      d.frame_index = field<std::size_t>(rec, "frame_index", line_no);
      d.object_id = field<ObjectId>(rec, "object_id", line_no);
      const auto corners = field<std::vector<double>>(rec, "box", line_no);
      if (corners.size() != 4) {
        throw DataError("annotations line " + std::to_string(line_no) +
                        ": box must be [x1, y1, x2, y2]");
      }
      d.box = Box::from_corners(corners[0], corners[1], corners[2], corners[3]);
      if (auto ac = rec.find("agent_class"); ac != rec.end() && !ac->is_null()) {
        d.agent_class = ac->get<std::string>();
      }
      videos[it->second].detections.push_back(std::move(d));
    } else {
      throw DataError("annotations line " + std::to_string(line_no) + ": unknown record '" + kind +
                      "'");
    }
  }
  for (const auto& v : videos) v.validate();
  return videos;
}

std::vector<VideoSequence> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotations file " + path.string());
  return read_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<VideoSequence>& videos) {
  for (const auto& v : videos) {
    json header = {{"record", "video"},
                   {"video_id", v.video_id},
                   {"fps", v.fps},
                   {"frame_count", v.frame_count},
                   {"frame_width", v.frame_width},
                   {"frame_height", v.frame_height},
                   {"label", v.label}};
    out << header.dump() << '\n';
    for (const auto& d : v.detections) {
      json rec = {{"record", "detection"},
                  {"video_id", v.video_id},
                  {"frame_index", d.frame_index},
                  {"object_id", d.object_id},
                  {"box", {d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2()}}};
      rec["agent_class"] = d.agent_class ? json(*d.agent_class) : json(nullptr);
      out << rec.dump() << '\n';
    }
  }
}

void write_annotations(const std::filesystem::path& path, const std::vector<VideoSequence>& videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write annotations file " + path.string());
  write_annotations(out, videos);
}

}  // namespace heg
