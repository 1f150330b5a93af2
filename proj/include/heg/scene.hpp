#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace heg {

using ObjectId = std::int64_t;

// Center-format box in pixels.
struct Box {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;
  double height = 0.0;

  static Box from_corners(double x1, double y1, double x2, double y2);
  double x1() const { return center_x - width / 2.0; }
  double y1() const { return center_y - height / 2.0; }
  double x2() const { return center_x + width / 2.0; }
  double y2() const { return center_y + height / 2.0; }
  double area() const { return width * height; }

  bool operator==(const Box&) const = default;
};

struct Detection {
  std::size_t frame_index = 0;
  ObjectId object_id = 0;
  Box box;
  std::optional<std::string> agent_class;
};

struct VideoSequence {
  std::string video_id;
  double fps = 30.0;
  std::size_t frame_count = 0;
  double frame_width = 0.0;
  double frame_height = 0.0;
  std::vector<Detection> detections;
  int label = 0;

  // Throws DataError naming the first offending detection.
  void validate() const;
  std::vector<const Detection*> detections_at(std::size_t frame_index) const;
};

// Frame indices 0, stride, 2*stride, ... below frame_count.
std::vector<std::size_t> sample_frames(const VideoSequence& seq, std::size_t stride);

// Seconds between consecutive sampled frames.
double sample_interval_seconds(double fps, std::size_t stride);

struct TubeWindow {
  ObjectId object_id = 0;
  std::size_t center_frame = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  Box crop_box;
  std::size_t tau = 0;
  std::size_t channels = 3;

  std::size_t length() const { return end - start; }
};

// The window [t - tau/2, t + tau/2) is shifted, not shrunk, at the sequence
// ends so every tube spans exactly tau frames. The crop is the box scaled
// about its center, clipped to the image.
TubeWindow tube_window(const Detection& det, const VideoSequence& seq, std::size_t tau,
                       double scale, std::size_t channels = 3);

// Line-delimited JSON annotation files. See docs/formats.md.
std::vector<VideoSequence> read_annotations(std::istream& in);
std::vector<VideoSequence> read_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const std::vector<VideoSequence>& videos);
void write_annotations(const std::filesystem::path& path, const std::vector<VideoSequence>& videos);

}  // namespace heg
