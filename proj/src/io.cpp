#include "tubekit/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "tubekit/error.hpp"

namespace tubekit::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

void require_file(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw InputError(path.string() + " not found (produced by `" + std::string(producer) + "`)");
  }
}

RecordWriter::RecordWriter(const fs::path& path, std::string_view schema) : path_(path), out_(path) {
  if (!out_) throw ProcessingError("cannot open " + path.string() + " for writing");
  ojson header;
  header["schema"] = schema;
  header["version"] = kSchemaVersion;
  out_ << header.dump() << '\n';
}

void RecordWriter::write(const ojson& record) { out_ << record.dump() << '\n'; }

void RecordWriter::close() {
  out_.close();
  if (!out_) throw ProcessingError("failed writing " + path_.string());
}

RecordReader::RecordReader(const fs::path& path, std::string_view schema) : path_(path), in_(path) {
  if (!in_) throw InputError(path.string() + ": cannot open");
  json header;
  if (!next(header)) throw InputError(path.string() + ": empty file, expected a schema header");
  if (!header.is_object() || !header.contains("schema") || header["schema"] != schema) {
    fail("schema", "expected schema '" + std::string(schema) + "'");
  }
  if (!header.contains("version") || header["version"] != kSchemaVersion) {
    fail("version", "unsupported schema version");
  }
}

bool RecordReader::next(json& record) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(path_.string() + ":" + std::to_string(line_) + ": malformed record: " + e.what());
    }
    if (!record.is_object()) fail("", "record is not an object");
    return true;
  }
  return false;
}

void RecordReader::fail(std::string_view field, std::string_view message) const {
  std::string msg = path_.string() + ":" + std::to_string(line_) + ": ";
  if (!field.empty()) msg += "field '" + std::string(field) + "': ";
  msg += message;
  throw InputError(msg);
}

template <typename T>
T RecordReader::get(const json& record, std::string_view field) const {
  const auto it = record.find(field);
  if (it == record.end()) fail(field, "missing");
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) fail(field, "expected a number");
      const double v = it->get<double>();
      if (!std::isfinite(v)) fail(field, "not finite");
      return v;
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) fail(field, "expected an integer");
      return it->get<T>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) fail(field, "expected a boolean");
      return it->get<bool>();
    } else {
      if (!it->is_string()) fail(field, "expected a string");
      return it->get<T>();
    }
  } catch (const json::exception& e) {
    fail(field, e.what());
  }
}

template int RecordReader::get<int>(const json&, std::string_view) const;
template double RecordReader::get<double>(const json&, std::string_view) const;
template std::string RecordReader::get<std::string>(const json&, std::string_view) const;

std::vector<double> RecordReader::get_vector(const json& record, std::string_view field) const {
  const auto it = record.find(field);
  if (it == record.end()) fail(field, "missing");
  if (!it->is_array()) fail(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) fail(field, "expected an array of numbers");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(field, "not finite");
    out.push_back(d);
  }
  return out;
}

BoundingBox RecordReader::get_box(const json& record, std::string_view field) const {
  const auto v = get_vector(record, field);
  if (v.size() != 4) fail(field, "expected [x_min, y_min, x_max, y_max]");
  BoundingBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) fail(field, "box must have x_min < x_max and y_min < y_max");
  return b;
}

namespace {

ojson box_json(const BoundingBox& b) { return ojson::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

void check_scores(const RecordReader& r, const std::vector<double>& scores, int num_classes, std::string_view field) {
  if (static_cast<int>(scores.size()) != num_classes) {
    r.fail(field, "has " + std::to_string(scores.size()) + " entries, expected " + std::to_string(num_classes));
  }
}

int get_frame(const RecordReader& r, const json& rec, std::string_view field = "frame") {
  const int f = r.get<int>(rec, field);
  if (f < 0) r.fail(field, "must be >= 0");
  return f;
}

}  // namespace

void write_videos(const fs::path& path, const std::vector<VideoInfo>& videos) {
  RecordWriter w(path, "tubekit.videos");
  for (const auto& v : videos) {
    w.write({{"video", v.video_id}, {"frames", v.num_frames}, {"width", v.width}, {"height", v.height}});
  }
  w.close();
}

std::vector<VideoInfo> read_videos(const fs::path& path) {
  RecordReader r(path, "tubekit.videos");
  std::vector<VideoInfo> out;
  json rec;
  while (r.next(rec)) {
    VideoInfo v{r.get<std::string>(rec, "video"), r.get<int>(rec, "frames"), r.get<int>(rec, "width"),
                r.get<int>(rec, "height")};
    if (v.num_frames < 0) r.fail("frames", "must be >= 0");
    if (v.width <= 0 || v.height <= 0) r.fail("width", "frame size must be positive");
    out.push_back(std::move(v));
  }
  return out;
}

void write_detections(const fs::path& path, const Keyed<Detection>& detections) {
  RecordWriter w(path, "tubekit.detections");
  for (const auto& [video, d] : detections) {
    w.write({{"video", video},
             {"frame", d.frame_index},
             {"box", box_json(d.box)},
             {"scores", d.class_scores},
             {"source", to_string(d.source)}});
  }
  w.close();
}

Keyed<Detection> read_detections(const fs::path& path, int num_classes) {
  RecordReader r(path, "tubekit.detections");
  Keyed<Detection> out;
  json rec;
  while (r.next(rec)) {
    Detection d;
    d.frame_index = get_frame(r, rec);
    d.box = r.get_box(rec, "box");
    d.class_scores = r.get_vector(rec, "scores");
    check_scores(r, d.class_scores, num_classes, "scores");
    try {
      d.source = source_from_string(r.get<std::string>(rec, "source"));
    } catch (const InputError& e) {
      r.fail("source", e.what());
    }
    out.emplace_back(r.get<std::string>(rec, "video"), std::move(d));
  }
  return out;
}

void write_proposals(const fs::path& path, const Keyed<Proposal>& proposals) {
  RecordWriter w(path, "tubekit.proposals");
  for (const auto& [video, p] : proposals) {
    ojson rec{{"video", video}, {"frame", p.frame_index}, {"box", box_json(p.box)}, {"objectness", p.objectness}};
    if (!p.class_scores.empty()) rec["scores"] = p.class_scores;
    w.write(rec);
  }
  w.close();
}

Keyed<Proposal> read_proposals(const fs::path& path, int num_classes) {
  RecordReader r(path, "tubekit.proposals");
  Keyed<Proposal> out;
  json rec;
  while (r.next(rec)) {
    Proposal p;
    p.frame_index = get_frame(r, rec);
    p.box = r.get_box(rec, "box");
    p.objectness = r.get<double>(rec, "objectness");
    if (rec.contains("scores")) {
      p.class_scores = r.get_vector(rec, "scores");
      check_scores(r, p.class_scores, num_classes, "scores");
    }
    out.emplace_back(r.get<std::string>(rec, "video"), std::move(p));
  }
  return out;
}

void write_ground_truth(const fs::path& path, const std::vector<GroundTruthTube>& tubes) {
  RecordWriter w(path, "tubekit.ground_truth");
  for (std::size_t k = 0; k < tubes.size(); ++k) {
    for (const auto& e : tubes[k].entries) {
      w.write({{"video", tubes[k].video_id},
               {"tube", k},
               {"label", tubes[k].label},
               {"frame", e.frame_index},
               {"box", box_json(e.box)}});
    }
  }
  w.close();
}

std::vector<GroundTruthTube> read_ground_truth(const fs::path& path, int num_classes) {
  RecordReader r(path, "tubekit.ground_truth");
  std::vector<GroundTruthTube> out;
  std::optional<int> current;
  json rec;
  auto finish = [&] {
    if (out.empty()) return;
    try {
      validate(out.back(), num_classes);
    } catch (const InputError& e) {
      r.fail("tube", e.what());
    }
  };
  while (r.next(rec)) {
    const int id = r.get<int>(rec, "tube");
    const std::string video = r.get<std::string>(rec, "video");
    const int label = r.get<int>(rec, "label");
    if (label < 0 || label >= num_classes) r.fail("label", "out of range");
    if (!current || *current != id) {
      finish();
      out.push_back({video, label, {}});
      current = id;
    } else if (out.back().video_id != video || out.back().label != label) {
      r.fail("tube", "entries of one tube disagree on video or label");
    }
    const int frame = get_frame(r, rec);
    if (!out.back().entries.empty() && frame != out.back().entries.back().frame_index + 1) {
      r.fail("frame", "tube entries must be consecutive frames");
    }
    out.back().entries.push_back({frame, r.get_box(rec, "box")});
  }
  finish();
  return out;
}

namespace {

ojson tube_score_json(const TubeScore& s) {
  return {{"frame_mean", s.frame_mean}, {"clip_mean", s.clip_mean}, {"combined", s.combined},
          {"label", s.label},           {"score", s.score}};
}

}  // namespace

void write_tubes(const fs::path& path, const std::vector<TubeRecord>& tubes) {
  RecordWriter w(path, "tubekit.tubes");
  for (std::size_t k = 0; k < tubes.size(); ++k) {
    const Tube& t = tubes[k].tube;
    ojson head{{"type", "tube"}, {"video", t.video_id}, {"tube", k}};
    if (t.label) head["label"] = *t.label;
    if (t.tube_score) head["score"] = *t.tube_score;
    if (t.clip_scores) {
      head["clip_length"] = t.clip_scores->clip_length;
      head["clip_scores"] = t.clip_scores->scores;
    }
    if (tubes[k].score) head["fused"] = tube_score_json(*tubes[k].score);
    w.write(head);
    for (const auto& e : t.entries) {
      w.write({{"type", "entry"},
               {"tube", k},
               {"frame", e.frame_index},
               {"box", box_json(e.box)},
               {"scores", e.class_scores},
               {"source", to_string(e.source)}});
    }
  }
  w.close();
}

std::vector<TubeRecord> read_tubes(const fs::path& path, int num_classes) {
  RecordReader r(path, "tubekit.tubes");
  std::vector<TubeRecord> out;
  std::optional<int> current;
  json rec;
  auto finish = [&] {
    if (out.empty()) return;
    try {
      validate(out.back().tube, num_classes);
    } catch (const InputError& e) {
      r.fail("tube", e.what());
    }
  };
  while (r.next(rec)) {
    const std::string type = r.get<std::string>(rec, "type");
    const int id = r.get<int>(rec, "tube");
    if (type == "tube") {
      finish();
      TubeRecord tr;
      tr.tube.video_id = r.get<std::string>(rec, "video");
      if (rec.contains("label")) tr.tube.label = r.get<int>(rec, "label");
      if (rec.contains("score")) tr.tube.tube_score = r.get<double>(rec, "score");
      if (rec.contains("clip_scores")) {
        ClipScoreSequence cs;
        cs.clip_length = r.get<int>(rec, "clip_length");
        if (!rec["clip_scores"].is_array()) r.fail("clip_scores", "expected an array of arrays");
        for (const auto& row : rec["clip_scores"]) {
          json wrapper{{"row", row}};
          cs.scores.push_back(r.get_vector(wrapper, "row"));
        }
        tr.tube.clip_scores = std::move(cs);
      }
      if (rec.contains("fused")) {
        const json& f = rec["fused"];
        if (!f.is_object()) r.fail("fused", "expected an object");
        TubeScore s;
        s.frame_mean = r.get_vector(f, "frame_mean");
        s.clip_mean = r.get_vector(f, "clip_mean");
        s.combined = r.get_vector(f, "combined");
        s.label = r.get<int>(f, "label");
        s.score = r.get<double>(f, "score");
        tr.score = std::move(s);
      }
      out.push_back(std::move(tr));
      current = id;
    } else if (type == "entry") {
      if (!current || *current != id) r.fail("tube", "entry does not follow its tube record");
      Detection d;
      d.frame_index = get_frame(r, rec);
      d.box = r.get_box(rec, "box");
      d.class_scores = r.get_vector(rec, "scores");
      check_scores(r, d.class_scores, num_classes, "scores");
      try {
        d.source = source_from_string(r.get<std::string>(rec, "source"));
      } catch (const InputError& e) {
        r.fail("source", e.what());
      }
      out.back().tube.entries.push_back(std::move(d));
    } else {
      r.fail("type", "expected 'tube' or 'entry'");
    }
  }
  finish();
  return out;
}

void write_actors(const fs::path& path, const std::vector<std::string>& video_ids,
                  const std::vector<std::vector<ActorTrack>>& actors) {
  RecordWriter w(path, "tubekit.actors");
  for (std::size_t v = 0; v < video_ids.size(); ++v) {
    for (std::size_t a = 0; a < actors[v].size(); ++a) {
      const auto& t = actors[v][a];
      ojson boxes = ojson::array();
      for (const auto& b : t.boxes) boxes.push_back(box_json(b));
      w.write({{"video", video_ids[v]},
               {"actor", a},
               {"label", t.label},
               {"region", box_json(t.region)},
               {"action", {t.action.start, t.action.end}},
               {"boxes", boxes}});
    }
  }
  w.close();
}

std::pair<std::vector<std::string>, std::vector<std::vector<ActorTrack>>> read_actors(const fs::path& path) {
  RecordReader r(path, "tubekit.actors");
  std::vector<std::string> ids;
  std::vector<std::vector<ActorTrack>> actors;
  json rec;
  while (r.next(rec)) {
    const std::string video = r.get<std::string>(rec, "video");
    if (ids.empty() || ids.back() != video) {
      ids.push_back(video);
      actors.emplace_back();
    }
    ActorTrack t;
    t.label = r.get<int>(rec, "label");
    t.region = r.get_box(rec, "region");
    const auto action = r.get_vector(rec, "action");
    if (action.size() != 2 || action[0] >= action[1]) r.fail("action", "expected [start, end) with start < end");
    t.action = {static_cast<int>(action[0]), static_cast<int>(action[1])};
    if (!rec.contains("boxes") || !rec["boxes"].is_array()) r.fail("boxes", "expected an array of boxes");
    for (const auto& b : rec["boxes"]) {
      json wrapper{{"box", b}};
      t.boxes.push_back(r.get_box(wrapper, "box"));
    }
    actors.back().push_back(std::move(t));
  }
  return {std::move(ids), std::move(actors)};
}

void write_matches(const fs::path& path, const Keyed<PointMatchSet>& matches) {
  RecordWriter w(path, "tubekit.matches");
  for (const auto& [video, m] : matches) {
    ojson pairs = ojson::array();
    for (const auto& p : m.pairs) pairs.push_back({p.from.x, p.from.y, p.to.x, p.to.y});
    w.write({{"video", video}, {"from", m.from_frame}, {"to", m.to_frame}, {"pairs", pairs}});
  }
  w.close();
}

Keyed<PointMatchSet> read_matches(const fs::path& path) {
  RecordReader r(path, "tubekit.matches");
  Keyed<PointMatchSet> out;
  json rec;
  while (r.next(rec)) {
    PointMatchSet m;
    m.from_frame = get_frame(r, rec, "from");
    m.to_frame = get_frame(r, rec, "to");
    if (std::abs(m.to_frame - m.from_frame) != 1) r.fail("to", "frames must be adjacent");
    if (!rec.contains("pairs") || !rec["pairs"].is_array()) r.fail("pairs", "expected an array");
    for (const auto& p : rec["pairs"]) {
      json wrapper{{"pair", p}};
      const auto v = r.get_vector(wrapper, "pair");
      if (v.size() != 4) r.fail("pairs", "each pair is [from_x, from_y, to_x, to_y]");
      m.pairs.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
    out.emplace_back(r.get<std::string>(rec, "video"), std::move(m));
  }
  return out;
}

void write_cell_accuracy(const fs::path& path, const CellLayout& layout,
                         const std::vector<std::vector<double>>& accuracy) {
  RecordWriter w(path, "tubekit.cell_accuracy");
  for (std::size_t c = 0; c < accuracy.size(); ++c) {
    w.write({{"class", c}, {"grid_size", layout.spatial_size}, {"cell_side", layout.cell_side}, {"alpha", accuracy[c]}});
  }
  w.close();
}

std::pair<CellLayout, std::vector<std::vector<double>>> read_cell_accuracy(const fs::path& path) {
  RecordReader r(path, "tubekit.cell_accuracy");
  std::optional<CellLayout> layout;
  std::vector<std::vector<double>> alpha;
  json rec;
  while (r.next(rec)) {
    const CellLayout l{r.get<int>(rec, "grid_size"), r.get<int>(rec, "cell_side")};
    if (layout && !(*layout == l)) r.fail("grid_size", "layout differs between classes");
    layout = l;
    if (r.get<int>(rec, "class") != static_cast<int>(alpha.size())) r.fail("class", "classes must be listed in order");
    auto a = r.get_vector(rec, "alpha");
    try {
      l.validate();
    } catch (const ConfigError& e) {
      r.fail("cell_side", e.what());
    }
    if (static_cast<int>(a.size()) != l.cell_count()) r.fail("alpha", "length does not match the cell layout");
    for (double v : a) {
      if (v < 0.0 || v > 1.0) r.fail("alpha", "accuracies must lie in [0, 1]");
    }
    alpha.push_back(std::move(a));
  }
  if (!layout) throw InputError(path.string() + ": no classes");
  return {*layout, std::move(alpha)};
}

void write_clip_features(const fs::path& path, const ClipFeatureTable& table) {
  RecordWriter w(path, "tubekit.clip_features");
  for (const auto& [key, values] : table) {
    w.write({{"video", std::get<0>(key)}, {"tube", std::get<1>(key)}, {"clip", std::get<2>(key)}, {"values", values}});
  }
  w.close();
}

ClipFeatureTable read_clip_features(const fs::path& path) {
  RecordReader r(path, "tubekit.clip_features");
  ClipFeatureTable out;
  json rec;
  while (r.next(rec)) {
    auto key = std::make_tuple(r.get<std::string>(rec, "video"), r.get<int>(rec, "tube"), r.get<int>(rec, "clip"));
    if (out.contains(key)) r.fail("clip", "duplicate clip record");
    out[key] = r.get_vector(rec, "values");
  }
  return out;
}

// ---- binary container ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'K', 'A', 'R'};

template <typename U>
void put(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
bool take(std::istream& in, U& value) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return true;
}

}  // namespace

ArrayWriter::ArrayWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw ProcessingError("cannot open " + path.string() + " for writing");
}

void ArrayWriter::write(const Array& array, DType dtype) {
  std::uint64_t count = 1;
  for (auto d : array.shape) count *= d;
  if (count != array.data.size()) {
    throw ProcessingError(path_.string() + ": array shape does not match its data length");
  }
  if (!array.meta.is_null() && !array.meta.is_object()) {
    throw ProcessingError(path_.string() + ": array metadata must be an object");
  }
  out_.write(kMagic, 4);
  put<std::uint32_t>(out_, 1);
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(dtype));
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(array.shape.size()));
  for (auto d : array.shape) put<std::uint64_t>(out_, d);
  const std::string meta = array.meta.is_null() ? "{}" : array.meta.dump();
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(meta.size()));
  out_.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (double v : array.data) {
    if (dtype == DType::kF64) {
      put<std::uint64_t>(out_, std::bit_cast<std::uint64_t>(v));
    } else {
      put<std::uint32_t>(out_, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
}

void ArrayWriter::close() {
  out_.close();
  if (!out_) throw ProcessingError("failed writing " + path_.string());
}

ArrayReader::ArrayReader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw InputError(path.string() + ": cannot open");
}

bool ArrayReader::next(Array& array) {
  char magic[4];
  if (!in_.read(magic, 4)) {
    if (in_.gcount() == 0) return false;
    throw InputError(path_.string() + ": truncated array header");
  }
  const std::string where = path_.string() + ": array " + std::to_string(index_);
  if (std::memcmp(magic, kMagic, 4) != 0) throw InputError(where + ": bad magic");
  std::uint32_t version = 0, dtype = 0, rank = 0, meta_len = 0;
  if (!take(in_, version) || !take(in_, dtype) || !take(in_, rank)) throw InputError(where + ": truncated header");
  if (version != 1) throw InputError(where + ": unsupported version " + std::to_string(version));
  if (dtype != 1 && dtype != 2) throw InputError(where + ": unknown dtype " + std::to_string(dtype));
  if (rank > 8) throw InputError(where + ": rank " + std::to_string(rank) + " too large");
  array.shape.assign(rank, 0);
  std::uint64_t count = 1;
  for (auto& d : array.shape) {
    if (!take(in_, d)) throw InputError(where + ": truncated shape");
    count *= d;
  }
  if (!take(in_, meta_len)) throw InputError(where + ": truncated header");
  std::string meta(meta_len, '\0');
  if (!in_.read(meta.data(), meta_len)) throw InputError(where + ": truncated metadata");
  try {
    array.meta = json::parse(meta);
  } catch (const json::parse_error& e) {
    throw InputError(where + ": malformed metadata: " + e.what());
  }
  if (!array.meta.is_object()) throw InputError(where + ": metadata is not an object");
  if (count > (std::uint64_t{1} << 32)) throw InputError(where + ": payload too large");
  array.data.resize(count);
  for (auto& v : array.data) {
    if (dtype == 1) {
      std::uint64_t raw = 0;
      if (!take(in_, raw)) throw InputError(where + ": truncated payload");
      v = std::bit_cast<double>(raw);
    } else {
      std::uint32_t raw = 0;
      if (!take(in_, raw)) throw InputError(where + ": truncated payload");
      v = static_cast<double>(std::bit_cast<float>(raw));
    }
  }
  ++index_;
  return true;
}

std::vector<Array> read_arrays(const fs::path& path) {
  ArrayReader reader(path);
  std::vector<Array> out;
  Array a;
  while (reader.next(a)) out.push_back(a);
  return out;
}

namespace {

Array matrix_array(const std::string& name, const Matrix& m) {
  Array a;
  a.meta["name"] = name;
  a.shape = {static_cast<std::uint64_t>(m.rows), static_cast<std::uint64_t>(m.cols)};
  a.data = m.data;
  return a;
}

Array vector_array(const std::string& name, const std::vector<double>& v) {
  Array a;
  a.meta["name"] = name;
  a.shape = {v.size()};
  a.data = v;
  return a;
}

std::map<std::string, Array> by_name(const fs::path& path) {
  std::map<std::string, Array> out;
  for (auto& a : read_arrays(path)) {
    if (!a.meta.contains("name") || !a.meta["name"].is_string()) {
      throw InputError(path.string() + ": array without a name");
    }
    out[a.meta["name"].get<std::string>()] = std::move(a);
  }
  return out;
}

const Array& named(const std::map<std::string, Array>& arrays, const fs::path& path, const std::string& name,
                   std::size_t rank) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw InputError(path.string() + ": missing array '" + name + "'");
  if (it->second.shape.size() != rank) {
    throw InputError(path.string() + ": array '" + name + "' must have rank " + std::to_string(rank));
  }
  return it->second;
}

Matrix to_matrix(const Array& a) {
  Matrix m(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]));
  m.data = a.data;
  return m;
}

}  // namespace

void write_flow(ArrayWriter& writer, const std::string& video_id, const FlowMagnitudeGrid& grid) {
  Array a;
  a.meta = {{"kind", "flow"}, {"video", video_id}, {"frame", grid.frame_index}, {"stride", grid.stride}};
  a.shape = {static_cast<std::uint64_t>(grid.height), static_cast<std::uint64_t>(grid.width)};
  a.data = grid.values;
  writer.write(a, DType::kF32);
}

std::map<std::pair<std::string, int>, FlowMagnitudeGrid> read_flow(const fs::path& path) {
  std::map<std::pair<std::string, int>, FlowMagnitudeGrid> out;
  ArrayReader reader(path);
  Array a;
  while (reader.next(a)) {
    if (a.shape.size() != 2 || !a.meta.contains("video") || !a.meta.contains("frame") || !a.meta.contains("stride")) {
      throw InputError(path.string() + ": flow arrays need rank 2 and video/frame/stride metadata");
    }
    FlowMagnitudeGrid g;
    g.frame_index = a.meta["frame"].get<int>();
    g.stride = a.meta["stride"].get<double>();
    g.height = static_cast<int>(a.shape[0]);
    g.width = static_cast<int>(a.shape[1]);
    g.values = std::move(a.data);
    try {
      validate(g);
    } catch (const InputError& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    out[{a.meta["video"].get<std::string>(), g.frame_index}] = std::move(g);
  }
  return out;
}

void write_weights(const fs::path& path, const RecurrentScorerWeights& weights) {
  weights.validate();
  ArrayWriter w(path);
  Array io = matrix_array("W_io", weights.input_to_output);
  io.meta["activation"] = std::string(to_string(weights.activation));
  w.write(io);
  w.write(matrix_array("W_hh", weights.hidden_to_hidden));
  w.write(vector_array("b_y", weights.bias));
  w.write(matrix_array("W_cls", weights.classifier));
  w.write(vector_array("b_cls", weights.classifier_bias));
  w.close();
}

RecurrentScorerWeights read_weights(const fs::path& path) {
  const auto arrays = by_name(path);
  RecurrentScorerWeights w;
  const Array& io = named(arrays, path, "W_io", 2);
  w.input_to_output = to_matrix(io);
  try {
    w.activation = activation_from_string(io.meta.value("activation", std::string("tanh")));
    w.hidden_to_hidden = to_matrix(named(arrays, path, "W_hh", 2));
    w.bias = named(arrays, path, "b_y", 1).data;
    w.classifier = to_matrix(named(arrays, path, "W_cls", 2));
    w.classifier_bias = named(arrays, path, "b_cls", 1).data;
    w.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return w;
}

void write_gmm(const fs::path& path, const GaussianMixture& gmm) {
  gmm.validate();
  ArrayWriter w(path);
  const auto k = static_cast<std::uint64_t>(gmm.components());
  const auto d = static_cast<std::uint64_t>(gmm.dim());
  w.write(vector_array("weights", gmm.weights));
  Array means, vars;
  means.meta["name"] = "means";
  vars.meta["name"] = "variances";
  means.shape = vars.shape = {k, d};
  for (std::size_t c = 0; c < k; ++c) {
    means.data.insert(means.data.end(), gmm.means[c].begin(), gmm.means[c].end());
    vars.data.insert(vars.data.end(), gmm.variances[c].begin(), gmm.variances[c].end());
  }
  w.write(means);
  w.write(vars);
  w.close();
}

GaussianMixture read_gmm(const fs::path& path) {
  const auto arrays = by_name(path);
  GaussianMixture g;
  g.weights = named(arrays, path, "weights", 1).data;
  const Array& means = named(arrays, path, "means", 2);
  const Array& vars = named(arrays, path, "variances", 2);
  if (means.shape != vars.shape || means.shape[0] != g.weights.size()) {
    throw InputError(path.string() + ": gmm arrays disagree in shape");
  }
  const auto d = static_cast<std::ptrdiff_t>(means.shape[1]);
  for (std::size_t c = 0; c < g.weights.size(); ++c) {
    const auto off = static_cast<std::ptrdiff_t>(c) * d;
    g.means.emplace_back(means.data.begin() + off, means.data.begin() + off + d);
    g.variances.emplace_back(vars.data.begin() + off, vars.data.begin() + off + d);
  }
  try {
    g.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return g;
}

void write_feature_grids(const fs::path& path, const std::map<std::pair<std::string, int>, FeatureGridSequence>& grids) {
  ArrayWriter w(path);
  for (const auto& [key, g] : grids) {
    Array a;
    a.meta = {{"kind", "feature_grid"}, {"video", key.first}, {"tube", key.second}};
    a.shape = {static_cast<std::uint64_t>(g.clips), static_cast<std::uint64_t>(g.spatial_size),
               static_cast<std::uint64_t>(g.spatial_size), static_cast<std::uint64_t>(g.depth)};
    a.data = g.values;
    w.write(a);
  }
  w.close();
}

std::map<std::pair<std::string, int>, FeatureGridSequence> read_feature_grids(const fs::path& path) {
  std::map<std::pair<std::string, int>, FeatureGridSequence> out;
  for (auto& a : read_arrays(path)) {
    if (a.shape.size() != 4 || a.shape[1] != a.shape[2] || !a.meta.contains("video") || !a.meta.contains("tube")) {
      throw InputError(path.string() + ": feature grids need shape [clips, s, s, depth] and video/tube metadata");
    }
    FeatureGridSequence g;
    g.clips = static_cast<int>(a.shape[0]);
    g.spatial_size = static_cast<int>(a.shape[1]);
    g.depth = static_cast<int>(a.shape[3]);
    g.values = std::move(a.data);
    g.validate();
    out[{a.meta["video"].get<std::string>(), a.meta["tube"].get<int>()}] = std::move(g);
  }
  return out;
}

}  // namespace tubekit::io
