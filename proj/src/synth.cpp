#include "tubekit/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "tubekit/error.hpp"
#include "tubekit/parallel.hpp"
#include "tubekit/rng.hpp"

namespace tubekit {

std::string_view to_string(MotionModel m) {
  switch (m) {
    case MotionModel::kLinear: return "linear";
    case MotionModel::kSinusoidal: return "sinusoidal";
    case MotionModel::kRandomWalk: return "random_walk";
  }
  return "linear";
}

MotionModel motion_from_string(std::string_view name) {
  if (name == "linear") return MotionModel::kLinear;
  if (name == "sinusoidal") return MotionModel::kSinusoidal;
  if (name == "random_walk") return MotionModel::kRandomWalk;
  throw ConfigError("unknown motion model '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synth." + msg); };
  if (video_count < 0) fail("video_count must be >= 0");
  if (frames_per_video < 1) fail("frames_per_video must be >= 1");
  if (frame_width < 1 || frame_height < 1) fail("frame size must be positive");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (actors_per_video < 1) fail("actors_per_video must be >= 1");
  if (!(actor_width > 0.0 && actor_width <= frame_width && actor_height > 0.0 && actor_height <= frame_height)) {
    fail("actor size must be positive and fit in the frame");
  }
  if (!(speed >= 0.0)) fail("speed must be >= 0");
  if (!(action_fraction > 0.0 && action_fraction <= 1.0)) fail("action_fraction must lie in (0, 1]");
  for (auto [name, v] : {std::pair{"miss_rate", miss_rate}, {"false_positive_rate", false_positive_rate},
                         {"label_confusion", label_confusion}, {"proposal_recall", proposal_recall},
                         {"drift_rate", drift_rate}}) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
  }
  for (auto [name, v] : {std::pair{"box_jitter", box_jitter}, {"score_noise", score_noise},
                         {"match_noise", match_noise}, {"flow_noise", flow_noise}, {"feature_noise", feature_noise},
                         {"home_margin", home_margin}}) {
    if (!(v >= 0.0)) fail(std::string(name) + " must be >= 0");
  }
  if (distractor_proposals < 0) fail("distractor_proposals must be >= 0");
  if (!(flow_stride > 0.0)) fail("flow_stride must be positive");
  if (match_grid < 1) fail("match_grid must be >= 1");
  if (clip_length < 1) fail("clip_length must be >= 1");
  if (feature_dim < num_classes) fail("feature_dim must be >= num_classes");
  if (grid_depth < 1 || grid_size < 1 || cell_side < 1 || grid_size % cell_side != 0) {
    fail("grid_size must be a positive multiple of cell_side");
  }
  if (gmm_components < 1) fail("gmm_components must be >= 1");
  if (spatial_focus) {
    if (actor_width + 2 * home_margin > frame_width || actor_height + 2 * home_margin > frame_height) {
      fail("home regions (actor size + 2 * home_margin) must fit in the frame");
    }
  } else if (actors_per_video > 1 && actor_height * actors_per_video > frame_height) {
    fail("actor bands do not fit: actors_per_video * actor_height exceeds frame height");
  }
}

bool ScenarioConfig::noiseless() const {
  return box_jitter == 0.0 && miss_rate == 0.0 && false_positive_rate == 0.0 && label_confusion == 0.0 &&
         score_noise == 0.0 && match_noise == 0.0 && proposal_recall == 1.0;
}

std::string synthetic_video_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "v%04d", index);
  return buf;
}

namespace {

constexpr std::uint64_t kVideoStream = 0x766964ULL;
constexpr std::uint64_t kMatchStream = 0x6d61ULL;
constexpr std::uint64_t kFlowStream = 0x666cULL;
constexpr std::uint64_t kClipStream = 0x636cULL;
constexpr std::uint64_t kGridStream = 0x6772ULL;
constexpr std::uint64_t kDriftStream = 0x6472ULL;
constexpr std::uint64_t kGmmStream = 0x676dULL;

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

// Folds p into [lo, hi] by mirror reflection.
double reflect(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double u = std::fmod(p - lo, 2.0 * span);
  if (u < 0.0) u += 2.0 * span;
  return lo + (u <= span ? u : 2.0 * span - u);
}

BoundingBox home_region(const ScenarioConfig& c, int label) {
  const double w = c.actor_width + 2.0 * c.home_margin;
  const double h = c.actor_height + 2.0 * c.home_margin;
  const double rx = 0.9 * (c.frame_width - w) / 2.0;
  const double ry = 0.9 * (c.frame_height - h) / 2.0;
  const double theta = -std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * label / c.num_classes;
  const double cx = c.frame_width / 2.0 + (c.num_classes > 1 ? rx * std::cos(theta) : 0.0);
  const double cy = c.frame_height / 2.0 + (c.num_classes > 1 ? ry * std::sin(theta) : 0.0);
  return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

BoundingBox actor_region(const ScenarioConfig& c, int actor, int label) {
  if (c.spatial_focus) return home_region(c, label);
  if (c.actors_per_video > 1) {
    const double band = static_cast<double>(c.frame_height) / c.actors_per_video;
    return {0.0, band * actor, static_cast<double>(c.frame_width), band * (actor + 1)};
  }
  return {0.0, 0.0, static_cast<double>(c.frame_width), static_cast<double>(c.frame_height)};
}

std::vector<BoundingBox> trajectory(const ScenarioConfig& c, const BoundingBox& region, Rng& rng) {
  const double w = c.actor_width;
  const double h = c.actor_height;
  const double x_lo = region.x_min, x_hi = region.x_max - w;
  const double y_lo = region.y_min, y_hi = region.y_max - h;
  const double x0 = rng.uniform(x_lo, x_hi);
  const double y0 = rng.uniform(y_lo, y_hi);
  std::vector<BoundingBox> boxes;
  boxes.reserve(static_cast<std::size_t>(c.frames_per_video));
  auto push = [&](double x, double y) { boxes.push_back({x, y, x + w, y + h}); };
  switch (c.motion) {
    case MotionModel::kLinear: {
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double vx = c.speed * std::cos(theta);
      const double vy = c.speed * std::sin(theta);
      for (int t = 0; t < c.frames_per_video; ++t) push(reflect(x0 + vx * t, x_lo, x_hi), reflect(y0 + vy * t, y_lo, y_hi));
      break;
    }
    case MotionModel::kSinusoidal: {
      const double ax = (x_hi - x_lo) / 2.0, ay = (y_hi - y_lo) / 2.0;
      const double px = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double py = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double wx = ax > 0.0 && c.speed > 0.0 ? c.speed / ax : 0.0;
      const double wy = ay > 0.0 && c.speed > 0.0 ? 0.73 * c.speed / ay : 0.0;
      for (int t = 0; t < c.frames_per_video; ++t) {
        push(x_lo + ax + ax * std::sin(wx * t + px), y_lo + ay + ay * std::sin(wy * t + py));
      }
      break;
    }
    case MotionModel::kRandomWalk: {
      double x = x0, y = y0;
      for (int t = 0; t < c.frames_per_video; ++t) {
        push(x, y);
        x = reflect(x + rng.normal(0.0, c.speed), x_lo, x_hi);
        y = reflect(y + rng.normal(0.0, c.speed), y_lo, y_hi);
      }
      break;
    }
  }
  return boxes;
}

BoundingBox jitter(const BoundingBox& b, double sigma, Rng& rng) {
  if (sigma <= 0.0) return b;
  BoundingBox out{b.x_min + rng.normal(0.0, sigma), b.y_min + rng.normal(0.0, sigma), b.x_max + rng.normal(0.0, sigma),
                  b.y_max + rng.normal(0.0, sigma)};
  if (out.x_max - out.x_min < 1.0) out.x_max = out.x_min + 1.0;
  if (out.y_max - out.y_min < 1.0) out.y_max = out.y_min + 1.0;
  return out;
}

std::vector<double> detection_scores(const ScenarioConfig& c, int top, Rng& rng) {
  std::vector<double> s(static_cast<std::size_t>(c.num_classes), 0.0);
  if (c.score_noise <= 0.0) {
    s[static_cast<std::size_t>(top)] = 1.0;
    return s;
  }
  const double peak = std::clamp(1.0 - std::abs(rng.normal(0.0, c.score_noise)), 0.05, 1.0);
  for (int k = 0; k < c.num_classes; ++k) {
    s[static_cast<std::size_t>(k)] = k == top ? peak : std::min(std::abs(rng.normal(0.0, c.score_noise)), 0.9 * peak);
  }
  return s;
}

Proposal make_proposal(const ScenarioConfig& c, int frame, const BoundingBox& box,
                       const std::vector<ActorTrack>& actors, Rng& rng) {
  Proposal p;
  p.frame_index = frame;
  p.box = box;
  p.class_scores.assign(static_cast<std::size_t>(c.num_classes), 0.0);
  double best = 0.0;
  int best_label = -1;
  for (const auto& a : actors) {
    const double o = iou(box, a.boxes[static_cast<std::size_t>(frame)]);
    if (o > best) {
      best = o;
      best_label = a.label;
    }
  }
  if (best_label >= 0) {
    double s = best;
    if (c.score_noise > 0.0) s = std::clamp(s * (1.0 - std::abs(rng.normal(0.0, c.score_noise))), 0.0, 1.0);
    p.class_scores[static_cast<std::size_t>(best_label)] = s;
  }
  p.objectness = best;
  return p;
}

BoundingBox random_box(const ScenarioConfig& c, double scale, Rng& rng) {
  const double w = std::min(c.actor_width * scale, static_cast<double>(c.frame_width));
  const double h = std::min(c.actor_height * scale, static_cast<double>(c.frame_height));
  const double x = rng.uniform(0.0, c.frame_width - w);
  const double y = rng.uniform(0.0, c.frame_height - h);
  return {x, y, x + w, y + h};
}

SyntheticVideo generate_video(const ScenarioConfig& c, int index) {
  Rng rng(derive_seed(c.seed, {kVideoStream, static_cast<std::uint64_t>(index)}));
  SyntheticVideo v;
  v.video_id = synthetic_video_id(index);
  v.num_frames = c.frames_per_video;
  const auto n = static_cast<std::size_t>(c.frames_per_video);
  v.static_detections.resize(n);
  v.flow_detections.resize(n);
  v.early_detections.resize(n);
  v.proposals.resize(n);

  for (int a = 0; a < c.actors_per_video; ++a) {
    ActorTrack track;
    track.label = (index * c.actors_per_video + a) % c.num_classes;
    track.region = actor_region(c, a, track.label);
    track.boxes = trajectory(c, track.region, rng);
    const int length = std::max(1, static_cast<int>(std::lround(c.frames_per_video * c.action_fraction)));
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.frames_per_video - length + 1)));
    track.action = {start, start + length};
    v.actors.push_back(std::move(track));
  }

  for (int f = 0; f < c.frames_per_video; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    for (const auto& actor : v.actors) {
      if (!actor.action.contains(f)) continue;
      const bool missed = rng.bernoulli(c.miss_rate);
      const bool confused = c.num_classes > 1 && rng.bernoulli(c.label_confusion);
      const int top = confused ? (actor.label + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.num_classes - 1)))) % c.num_classes
                               : actor.label;
      if (missed) continue;
      const BoundingBox& truth = actor.boxes[fi];
      auto make = [&](Source source) {
        Detection d;
        d.frame_index = f;
        d.box = jitter(truth, c.box_jitter, rng);
        d.class_scores = detection_scores(c, top, rng);
        d.source = source;
        return d;
      };
      v.static_detections[fi].push_back(make(Source::kStatic));
      v.flow_detections[fi].push_back(make(Source::kFlow));
      v.early_detections[fi].push_back(make(Source::kEarlyFusion));
    }
    if (rng.bernoulli(c.false_positive_rate)) {
      Detection d;
      d.frame_index = f;
      d.box = random_box(c, rng.uniform(0.7, 1.3), rng);
      d.class_scores.assign(static_cast<std::size_t>(c.num_classes), 0.0);
      const auto cls = rng.below(static_cast<std::uint64_t>(c.num_classes));
      d.class_scores[cls] = rng.uniform(0.3, 0.9);
      d.source = Source::kStatic;
      v.static_detections[fi].push_back(std::move(d));
    }

    for (const auto& actor : v.actors) {
      if (rng.bernoulli(c.proposal_recall)) {
        v.proposals[fi].push_back(make_proposal(c, f, jitter(actor.boxes[fi], c.box_jitter, rng), v.actors, rng));
      }
    }
    for (int k = 0; k < c.distractor_proposals; ++k) {
      BoundingBox box;
      if (k % 2 == 0) {
        const auto& actor = v.actors[static_cast<std::size_t>(k / 2) % v.actors.size()];
        const BoundingBox& t = actor.boxes[fi];
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const bool horizontal = rng.bernoulli(0.5);
        const double dx = horizontal ? sign * 0.5 * t.width() : 0.0;
        const double dy = horizontal ? 0.0 : sign * 0.5 * t.height();
        box = {t.x_min + dx, t.y_min + dy, t.x_max + dx, t.y_max + dy};
      } else {
        box = random_box(c, rng.uniform(0.7, 1.3), rng);
      }
      v.proposals[fi].push_back(make_proposal(c, f, box, v.actors, rng));
    }
  }
  return v;
}

}  // namespace

SyntheticWorld::SyntheticWorld(ScenarioConfig config, std::vector<std::string> video_ids,
                               std::vector<std::vector<ActorTrack>> actors)
    : config_(std::move(config)), video_ids_(std::move(video_ids)), actors_(std::move(actors)) {
  if (video_ids_.size() != actors_.size()) throw InputError("synthetic world: video and actor lists differ in length");
  for (std::size_t i = 0; i < video_ids_.size(); ++i) index_[video_ids_[i]] = i;
}

SyntheticWorld SyntheticWorld::from_bundle(const ScenarioBundle& bundle) {
  std::vector<std::string> ids;
  std::vector<std::vector<ActorTrack>> actors;
  for (const auto& v : bundle.videos) {
    ids.push_back(v.video_id);
    actors.push_back(v.actors);
  }
  return SyntheticWorld(bundle.config, std::move(ids), std::move(actors));
}

std::size_t SyntheticWorld::video_index(const std::string& video_id) const {
  auto it = index_.find(video_id);
  if (it == index_.end()) throw InputError("synthetic world: unknown video '" + video_id + "'");
  return it->second;
}

PointMatchSet SyntheticWorld::match(const std::string& video_id, int from_frame, int to_frame,
                                    const BoundingBox& region) const {
  PointMatchSet out{from_frame, to_frame, {}};
  const std::size_t v = video_index(video_id);
  const auto& tracks = actors_[v];
  const int frames = config_.frames_per_video;
  if (from_frame < 0 || from_frame >= frames || to_frame < 0 || to_frame >= frames) return out;
  const auto ff = static_cast<std::size_t>(from_frame);
  const auto tf = static_cast<std::size_t>(to_frame);
  Rng rng(derive_seed(config_.seed, {kMatchStream, v, static_cast<std::uint64_t>(from_frame),
                                     static_cast<std::uint64_t>(to_frame), bits(region.x_min), bits(region.y_min),
                                     bits(region.x_max), bits(region.y_max)}));
  const int n = config_.match_grid;
  out.pairs.reserve(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Point from{region.x_min + (j + 0.5) / n * region.width(), region.y_min + (i + 0.5) / n * region.height()};
      Point to = from;
      for (const auto& a : tracks) {
        const BoundingBox& src = a.boxes[ff];
        if (!src.contains(from.x, from.y)) continue;
        const BoundingBox& dst = a.boxes[tf];
        to.x = dst.x_min + (from.x - src.x_min) / src.width() * dst.width();
        to.y = dst.y_min + (from.y - src.y_min) / src.height() * dst.height();
        break;
      }
      if (config_.match_noise > 0.0) {
        to.x += rng.normal(0.0, config_.match_noise);
        to.y += rng.normal(0.0, config_.match_noise);
      }
      out.pairs.push_back({from, to});
    }
  }
  return out;
}

PointMatchSet SyntheticWorld::frame_matches(std::size_t video, int from_frame, int to_frame) const {
  const std::string& id = video_ids_.at(video);
  const BoundingBox frame{0.0, 0.0, static_cast<double>(config_.frame_width), static_cast<double>(config_.frame_height)};
  PointMatchSet out = match(id, from_frame, to_frame, frame);
  if (from_frame < 0 || from_frame >= config_.frames_per_video) return out;
  for (const auto& a : actors_[video]) {
    const auto part = match(id, from_frame, to_frame, a.boxes[static_cast<std::size_t>(from_frame)]);
    out.pairs.insert(out.pairs.end(), part.pairs.begin(), part.pairs.end());
  }
  return out;
}

FlowMagnitudeGrid SyntheticWorld::flow(std::size_t video, int frame) const {
  const auto& tracks = actors_.at(video);
  FlowMagnitudeGrid g;
  g.frame_index = frame;
  g.stride = config_.flow_stride;
  g.width = static_cast<int>(std::ceil(config_.frame_width / g.stride));
  g.height = static_cast<int>(std::ceil(config_.frame_height / g.stride));
  g.values.resize(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height));
  Rng rng(derive_seed(config_.seed, {kFlowStream, video, static_cast<std::uint64_t>(frame)}));
  const int last = config_.frames_per_video - 1;
  const int other = frame < last ? frame + 1 : std::max(frame - 1, 0);
  std::vector<double> motion;
  for (const auto& a : tracks) {
    const auto& b0 = a.boxes[static_cast<std::size_t>(frame)];
    const auto& b1 = a.boxes[static_cast<std::size_t>(other)];
    motion.push_back(std::max(1.0, std::hypot(b1.center_x() - b0.center_x(), b1.center_y() - b0.center_y())));
  }
  for (int r = 0; r < g.height; ++r) {
    for (int col = 0; col < g.width; ++col) {
      const double x = (col + 0.5) * g.stride;
      const double y = (r + 0.5) * g.stride;
      double value = config_.flow_noise > 0.0 ? std::abs(rng.normal(0.0, config_.flow_noise)) : 0.0;
      for (std::size_t a = 0; a < tracks.size(); ++a) {
        if (tracks[a].boxes[static_cast<std::size_t>(frame)].contains(x, y)) {
          value = motion[a];
          break;
        }
      }
      g.values[static_cast<std::size_t>(r) * static_cast<std::size_t>(g.width) + static_cast<std::size_t>(col)] = value;
    }
  }
  return g;
}

std::vector<double> SyntheticWorld::clip_features(std::size_t video, const Tube& tube, const FrameInterval& clip) const {
  const auto& tracks = actors_.at(video);
  int label = -1;
  double best = 0.3;
  for (const auto& a : tracks) {
    double sum = 0.0;
    int frames = 0, acting = 0;
    for (int f = clip.start; f < clip.end; ++f) {
      const Detection* d = tube.at_frame(f);
      if (!d) continue;
      sum += iou(d->box, a.boxes[static_cast<std::size_t>(f)]);
      ++frames;
      if (a.action.contains(f)) ++acting;
    }
    if (frames == 0) continue;
    const double mean = sum / frames;
    if (mean >= best && 2 * acting >= clip.length()) {
      best = mean;
      label = a.label;
    }
  }
  const Detection* anchor = tube.at_frame(clip.start);
  const BoundingBox box = anchor ? anchor->box : BoundingBox{};
  Rng rng(derive_seed(config_.seed, {kClipStream, video, static_cast<std::uint64_t>(clip.start),
                                     static_cast<std::uint64_t>(clip.end), bits(box.x_min), bits(box.y_min)}));
  std::vector<double> x(static_cast<std::size_t>(config_.feature_dim), 0.0);
  if (label >= 0) x[static_cast<std::size_t>(label)] = config_.feature_amplitude;
  for (double& v : x) v += rng.normal(0.0, config_.feature_noise);
  return x;
}

FeatureGridSequence SyntheticWorld::feature_grid(std::size_t video, std::span<const FrameInterval> clips) const {
  const auto& tracks = actors_.at(video);
  FeatureGridSequence g;
  g.spatial_size = config_.grid_size;
  g.depth = config_.grid_depth;
  g.clips = static_cast<int>(clips.size());
  const int s = g.spatial_size;
  g.values.reserve(clips.size() * static_cast<std::size_t>(s * s * g.depth));
  for (const auto& clip : clips) {
    const int mid = (clip.start + clip.end - 1) / 2;
    Rng rng(derive_seed(config_.seed, {kGridStream, video, static_cast<std::uint64_t>(mid)}));
    const double cw = static_cast<double>(config_.frame_width) / s;
    const double ch = static_cast<double>(config_.frame_height) / s;
    std::vector<double> mean(static_cast<std::size_t>(g.depth));
    for (int r = 0; r < s; ++r) {
      for (int col = 0; col < s; ++col) {
        // Each grid point responds in proportion to how much of its cell an acting actor covers.
        const BoundingBox cell{col * cw, r * ch, (col + 1) * cw, (r + 1) * ch};
        std::fill(mean.begin(), mean.end(), 0.0);
        for (const auto& a : tracks) {
          if (!a.action.contains(mid)) continue;
          const BoundingBox& b = a.boxes[static_cast<std::size_t>(mid)];
          const double ix = std::max(0.0, std::min(b.x_max, cell.x_max) - std::max(b.x_min, cell.x_min));
          const double iy = std::max(0.0, std::min(b.y_max, cell.y_max) - std::max(b.y_min, cell.y_min));
          const double cover = ix * iy / cell.area();
          auto& m = mean[static_cast<std::size_t>(a.label % g.depth)];
          m = std::max(m, config_.feature_amplitude * cover);
        }
        for (int k = 0; k < g.depth; ++k) g.values.push_back(mean[static_cast<std::size_t>(k)] + rng.normal(0.0, config_.feature_noise));
      }
    }
  }
  return g;
}

RecurrentScorerWeights synthetic_scorer_weights(const ScenarioConfig& config) {
  const int classes = config.num_classes;
  RecurrentScorerWeights w;
  w.input_to_output = Matrix(classes, config.feature_dim);
  for (int c = 0; c < classes; ++c) w.input_to_output(c, c) = 0.5;
  w.hidden_to_hidden = Matrix::identity(classes, 0.1);
  w.bias.assign(static_cast<std::size_t>(classes), 0.0);
  w.activation = Activation::kTanh;
  w.classifier = Matrix(classes + 1, classes);
  for (int c = 0; c < classes; ++c) w.classifier(c, c) = 8.0;
  w.classifier_bias.assign(static_cast<std::size_t>(classes + 1), 0.0);
  w.classifier_bias.back() = 5.0;
  return w;
}

void fit_footprint_statistics(ScenarioBundle& bundle) {
  const auto& c = bundle.config;
  const SyntheticWorld world = SyntheticWorld::from_bundle(bundle);
  const CellLayout layout{c.grid_size, c.cell_side};
  std::vector<FeatureGridSequence> grids;
  for (const auto& gt : bundle.ground_truth) {
    const std::size_t v = world.video_index(gt.video_id);
    const auto clips = slice_clips(gt.extent(), c.clip_length);
    grids.push_back(world.feature_grid(v, clips));
  }
  if (grids.empty()) {
    bundle.gmm = {};
    bundle.cell_accuracy.assign(static_cast<std::size_t>(c.num_classes),
                                std::vector<double>(static_cast<std::size_t>(layout.cell_count()), 0.0));
    return;
  }

  std::size_t total = 0;
  for (const auto& g : grids) total += g.values.size() / static_cast<std::size_t>(g.depth);
  const std::size_t step = std::max<std::size_t>(1, total / 20000);
  std::vector<std::vector<double>> sample;
  std::size_t counter = 0;
  for (const auto& g : grids) {
    for (std::size_t off = 0; off < g.values.size(); off += static_cast<std::size_t>(g.depth), ++counter) {
      if (counter % step != 0) continue;
      sample.emplace_back(g.values.begin() + static_cast<std::ptrdiff_t>(off),
                          g.values.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(g.depth)));
    }
  }
  EmOptions em;
  em.seed = derive_seed(c.seed, {kGmmStream});
  bundle.gmm = fit_gmm(sample, c.gmm_components, em);

  // One labeled sample per clip of every ground-truth tube. Tubes of each
  // class alternate between the training and the test side.
  std::vector<CellSample> train, test;
  std::vector<std::size_t> seen(static_cast<std::size_t>(c.num_classes), 0);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const bool to_train = seen[static_cast<std::size_t>(bundle.ground_truth[i].label)]++ % 2 == 0;
    const auto per_clip = static_cast<std::ptrdiff_t>(grids[i].values.size()) / grids[i].clips;
    for (int t = 0; t < grids[i].clips; ++t) {
      FeatureGridSequence clip = grids[i];
      clip.clips = 1;
      clip.values.assign(grids[i].values.begin() + t * per_clip, grids[i].values.begin() + (t + 1) * per_clip);
      CellSample s{aggregate_cells(clip, layout, bundle.gmm), bundle.ground_truth[i].label};
      (to_train ? train : test).push_back(std::move(s));
    }
  }
  if (test.empty()) test = train;
  if (train.empty()) train = test;
  bundle.cell_accuracy = nearest_centroid_accuracy(train, test, c.num_classes);
}

ScenarioBundle generate(const ScenarioConfig& config, int threads) {
  config.validate();
  ScenarioBundle bundle;
  bundle.config = config;
  bundle.videos.resize(static_cast<std::size_t>(config.video_count));
  parallel_for(bundle.videos.size(), threads,
               [&](std::size_t i) { bundle.videos[i] = generate_video(config, static_cast<int>(i)); });
  for (const auto& v : bundle.videos) {
    for (const auto& a : v.actors) {
      GroundTruthTube gt;
      gt.video_id = v.video_id;
      gt.label = a.label;
      for (int f = a.action.start; f < a.action.end; ++f) gt.entries.push_back({f, a.boxes[static_cast<std::size_t>(f)]});
      bundle.ground_truth.push_back(std::move(gt));
    }
  }
  bundle.weights = synthetic_scorer_weights(config);
  fit_footprint_statistics(bundle);
  if (config.drift_rate > 0.0) inject_drift(bundle, config.drift_rate);
  return bundle;
}

void inject_drift(ScenarioBundle& bundle, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("inject_drift: rate must lie in [0, 1]");
  const auto& c = bundle.config;
  const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(bundle.ground_truth.size())));
  if (count == 0) return;
  Rng rng(derive_seed(c.seed, {kDriftStream, bundle.drift_tubes.size()}));
  std::vector<std::size_t> order(bundle.ground_truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  for (std::size_t k = 0; k < count; ++k) {
    const auto& source = bundle.ground_truth[order[k]];
    std::vector<const BoundingBox*> occupied;
    for (const auto& gt : bundle.ground_truth) {
      if (gt.video_id != source.video_id) continue;
      for (const auto& e : gt.entries) occupied.push_back(&e.box);
    }
    std::optional<BoundingBox> spot;
    for (int attempt = 0; attempt < 2000 && !spot; ++attempt) {
      const BoundingBox candidate = random_box(c, 1.0, rng);
      const bool clear = std::none_of(occupied.begin(), occupied.end(),
                                      [&](const BoundingBox* b) { return iou(candidate, *b) > 0.0; });
      if (clear) spot = candidate;
    }
    if (!spot) continue;  // no free area in this video
    Tube t;
    t.video_id = source.video_id;
    t.label = source.label;
    for (const auto& e : source.entries) {
      Detection d;
      d.frame_index = e.frame_index;
      d.box = *spot;
      d.class_scores.assign(static_cast<std::size_t>(c.num_classes), 0.0);
      d.class_scores[static_cast<std::size_t>(source.label)] = 1.0;
      d.source = Source::kTracked;
      t.entries.push_back(std::move(d));
    }
    bundle.drift_tubes.push_back(std::move(t));
  }
}

}  // namespace tubekit
