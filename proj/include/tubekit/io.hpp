#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tubekit/core.hpp"
#include "tubekit/footprint.hpp"
#include "tubekit/fusion.hpp"
#include "tubekit/scoring.hpp"
#include "tubekit/synth.hpp"
#include "tubekit/tracker.hpp"

namespace tubekit::io {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Line-delimited JSON records. The first line is a header
/// {"schema": <name>, "version": 1}; every further line is one record.
class RecordWriter {
 public:
  RecordWriter(const fs::path& path, std::string_view schema);
  void write(const nlohmann::ordered_json& record);
  void close();

 private:
  fs::path path_;
  std::ofstream out_;
};

class RecordReader {
 public:
  RecordReader(const fs::path& path, std::string_view schema);
  /// Reads the next record; false at end of file. Throws InputError on
  /// malformed lines.
  bool next(nlohmann::json& record);

  /// InputError naming file, line and field.
  [[noreturn]] void fail(std::string_view field, std::string_view message) const;

  template <typename T>
  T get(const nlohmann::json& record, std::string_view field) const;
  BoundingBox get_box(const nlohmann::json& record, std::string_view field) const;
  std::vector<double> get_vector(const nlohmann::json& record, std::string_view field) const;

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

struct VideoInfo {
  std::string video_id;
  int num_frames = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const VideoInfo&, const VideoInfo&) = default;
};

template <typename T>
using Keyed = std::vector<std::pair<std::string, T>>;  // (video_id, item)

void write_videos(const fs::path& path, const std::vector<VideoInfo>& videos);
std::vector<VideoInfo> read_videos(const fs::path& path);

void write_detections(const fs::path& path, const Keyed<Detection>& detections);
Keyed<Detection> read_detections(const fs::path& path, int num_classes);

void write_proposals(const fs::path& path, const Keyed<Proposal>& proposals);
Keyed<Proposal> read_proposals(const fs::path& path, int num_classes);

void write_ground_truth(const fs::path& path, const std::vector<GroundTruthTube>& tubes);
std::vector<GroundTruthTube> read_ground_truth(const fs::path& path, int num_classes);

/// A tube plus its fused score when it has been scored.
struct TubeRecord {
  Tube tube;
  std::optional<TubeScore> score;
  friend bool operator==(const TubeRecord&, const TubeRecord&) = default;
};

/// One "tube" record (label, score, clip scores) followed by one "entry"
/// record per frame.
void write_tubes(const fs::path& path, const std::vector<TubeRecord>& tubes);
std::vector<TubeRecord> read_tubes(const fs::path& path, int num_classes);

void write_actors(const fs::path& path, const std::vector<std::string>& video_ids,
                  const std::vector<std::vector<ActorTrack>>& actors);
std::pair<std::vector<std::string>, std::vector<std::vector<ActorTrack>>> read_actors(const fs::path& path);

void write_matches(const fs::path& path, const Keyed<PointMatchSet>& matches);
Keyed<PointMatchSet> read_matches(const fs::path& path);

void write_cell_accuracy(const fs::path& path, const CellLayout& layout,
                         const std::vector<std::vector<double>>& accuracy);
std::pair<CellLayout, std::vector<std::vector<double>>> read_cell_accuracy(const fs::path& path);

/// Precomputed clip descriptors keyed by (video, tube index, clip index).
using ClipFeatureTable = std::map<std::tuple<std::string, int, int>, std::vector<double>>;
void write_clip_features(const fs::path& path, const ClipFeatureTable& table);
ClipFeatureTable read_clip_features(const fs::path& path);

// ---- binary array container -------------------------------------------
//
// A file is a sequence of array records, all little-endian:
//   char[4]  magic "TKAR"
//   u32      version (1)
//   u32      dtype (1 = f64, 2 = f32)
//   u32      rank
//   u64      dims[rank]
//   u32      meta_len
//   u8       meta[meta_len]   UTF-8 JSON object
//   payload  prod(dims) values of dtype, row-major

enum class DType : std::uint32_t { kF64 = 1, kF32 = 2 };

struct Array {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
  friend bool operator==(const Array&, const Array&) = default;
};

class ArrayWriter {
 public:
  explicit ArrayWriter(const fs::path& path);
  void write(const Array& array, DType dtype = DType::kF64);
  void close();

 private:
  fs::path path_;
  std::ofstream out_;
};

class ArrayReader {
 public:
  explicit ArrayReader(const fs::path& path);
  bool next(Array& array);

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t index_ = 0;
};

std::vector<Array> read_arrays(const fs::path& path);

void write_flow(ArrayWriter& writer, const std::string& video_id, const FlowMagnitudeGrid& grid);
/// Flow grids keyed by (video, frame).
std::map<std::pair<std::string, int>, FlowMagnitudeGrid> read_flow(const fs::path& path);

void write_weights(const fs::path& path, const RecurrentScorerWeights& weights);
RecurrentScorerWeights read_weights(const fs::path& path);

void write_gmm(const fs::path& path, const GaussianMixture& gmm);
GaussianMixture read_gmm(const fs::path& path);

void write_feature_grids(const fs::path& path, const std::map<std::pair<std::string, int>, FeatureGridSequence>& grids);
std::map<std::pair<std::string, int>, FeatureGridSequence> read_feature_grids(const fs::path& path);

/// Throws InputError naming `producer` when `path` does not exist.
void require_file(const fs::path& path, std::string_view producer);

}  // namespace tubekit::io
