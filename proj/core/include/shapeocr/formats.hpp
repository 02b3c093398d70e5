#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "shapeocr/detector.hpp"
#include "shapeocr/mask.hpp"

namespace shapeocr {

struct DetectionDump {
  int width = 0;
  int height = 0;
  std::vector<CandidateDetection> detections;
};

// `DETECTIONS v1 w h count`, then per candidate a `D` line followed by one `P` line per
// segmentation polyline. Landmark positions are not stored.
void write_detections(std::ostream& out, const DetectionDump& dump);
DetectionDump read_detections(std::istream& in);
void write_detections(const std::filesystem::path& path, const DetectionDump& dump);
DetectionDump read_detections(const std::filesystem::path& path);

// Per-character ground truth: `GTSEG v1 w h n`, then per character `C label runs` followed
// by that many `x y width height` row runs.
struct GroundTruth {
  int width = 0;
  int height = 0;
  std::string labels;
  std::vector<BinaryMask> masks;
};

void write_ground_truth(std::ostream& out, const GroundTruth& gt);
GroundTruth read_ground_truth(std::istream& in);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// Whitespace-separated manifest line: `image word [groundtruth] [detections]`. Relative
// paths resolve against the manifest's directory; '-' marks an absent optional field.
struct ManifestEntry {
  std::filesystem::path image;
  std::string word;
  std::filesystem::path ground_truth;
  std::filesystem::path detections;
  int line = 0;
};

std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& base_dir);

}  // namespace shapeocr
