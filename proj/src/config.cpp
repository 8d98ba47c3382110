#include "tubekit/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "tubekit/error.hpp"

namespace tubekit {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    out.push_back(parse_double(key, item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

template <typename Enum>
struct EnumNames {
  std::vector<std::pair<Enum, std::string_view>> names;

  Enum parse(std::string_view key, std::string_view v) const {
    for (const auto& [e, n] : names) {
      if (n == v) return e;
    }
    std::string allowed;
    for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
    throw ConfigError(std::string(key) + ": expected one of " + allowed + ", got '" + std::string(v) + "'");
  }
  std::string name(Enum e) const {
    for (const auto& [x, n] : names) {
      if (x == e) return std::string(n);
    }
    return {};
  }
};

const EnumNames<TrackerMethod> kMethods{{{TrackerMethod::kPointMatching, "point_matching"},
                                         {TrackerMethod::kNeighborhood, "neighborhood"}}};
const EnumNames<ScoreFusion> kFusions{{{ScoreFusion::kAdd, "add"}, {ScoreFusion::kMultiply, "multiply"}}};
const EnumNames<Projection> kProjections{{{Projection::kMeanBox, "mean_box"}, {Projection::kUnion, "union"}}};
const EnumNames<TrimMode> kTrimModes{{{TrimMode::kTrimLowEnds, "trim_low_ends"},
                                      {TrimMode::kBetweenLowClips, "between_low_clips"}}};
const EnumNames<MotionModel> kMotions{{{MotionModel::kLinear, "linear"},
                                       {MotionModel::kSinusoidal, "sinusoidal"},
                                       {MotionModel::kRandomWalk, "random_walk"}}};

struct Field {
  std::string key;
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field number(std::string key, T PipelineConfig::*member) {
  return {key,
          [member](PipelineConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*member = parse_double(k, v);
            } else {
              c.*member = parse_int<T>(k, v);
            }
          },
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

template <typename S, typename T>
Field nested(std::string key, S PipelineConfig::*outer, T S::*member) {
  return {key,
          [outer, member](PipelineConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_same_v<T, bool>) {
              c.*outer.*member = parse_bool(k, v);
            } else if constexpr (std::is_floating_point_v<T>) {
              c.*outer.*member = parse_double(k, v);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              c.*outer.*member = parse_list(k, v);
            } else {
              c.*outer.*member = parse_int<T>(k, v);
            }
          },
          [outer, member](const PipelineConfig& c) {
            const T& v = c.*outer.*member;
            if constexpr (std::is_same_v<T, bool>) {
              return std::string(v ? "true" : "false");
            } else if constexpr (std::is_floating_point_v<T>) {
              return format_double(v);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              return format_list(v);
            } else {
              return std::to_string(v);
            }
          }};
}

Field flag(std::string key, bool PipelineConfig::*member) {
  return {key, [member](PipelineConfig& c, std::string_view k, std::string_view v) { c.*member = parse_bool(k, v); },
          [member](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <typename Enum>
Field choice(std::string key, Enum PipelineConfig::*member, const EnumNames<Enum>& names) {
  return {key, [member, &names](PipelineConfig& c, std::string_view k, std::string_view v) { c.*member = names.parse(k, v); },
          [member, &names](const PipelineConfig& c) { return names.name(c.*member); }};
}

const std::vector<Field>& fields() {
  using P = PipelineConfig;
  using S = ScenarioConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number("classes", &P::classes));
    f.push_back(number("fusion.nms_threshold", &P::fusion_nms_threshold));
    f.push_back(number("fusion.min_flow_magnitude", &P::fusion_min_flow_magnitude));
    f.push_back(flag("fusion.saliency", &P::fusion_saliency));
    f.push_back(choice("tracker.method", &P::tracker_method, kMethods));
    f.push_back(nested("tracker.min_match_ratio", &P::tracker, &TrackerConfig::min_match_ratio));
    f.push_back(nested("tracker.min_prev_overlap", &P::tracker, &TrackerConfig::min_prev_overlap));
    f.push_back(nested("tracker.consume_overlap", &P::tracker, &TrackerConfig::consume_overlap));
    f.push_back(nested("tracker.max_predicted_run", &P::tracker, &TrackerConfig::max_predicted_run));
    f.push_back(number("tracker.search_radius", &P::tracker_search_radius));
    f.push_back(flag("tracker.include_drift", &P::tracker_include_drift));
    f.push_back(number("scoring.clip_length", &P::clip_length));
    f.push_back(choice("scoring.fusion", &P::score_fusion, kFusions));
    f.push_back(flag("prune.enabled", &P::prune_enabled));
    f.push_back(number("prune.st_threshold", &P::prune_st_threshold));
    f.push_back(flag("footprint.enabled", &P::footprint_enabled));
    f.push_back(number("footprint.grid_size", &P::footprint_grid_size));
    f.push_back(number("footprint.cell_side", &P::footprint_cell_side));
    f.push_back(choice("footprint.projection", &P::footprint_projection, kProjections));
    f.push_back(flag("localize.enabled", &P::localize_enabled));
    f.push_back(number("localize.tau", &P::localize_tau));
    f.push_back(choice("localize.mode", &P::localize_mode, kTrimModes));
    f.push_back(nested("evaluation.iou_thresholds", &P::evaluation, &EvalConfig::iou_thresholds));
    f.push_back(nested("evaluation.score_grid", &P::evaluation, &EvalConfig::score_grid));
    f.push_back(nested("evaluation.fpr_max", &P::evaluation, &EvalConfig::fpr_max));
    f.push_back(nested("evaluation.recall_track_iou", &P::evaluation, &EvalConfig::recall_track_iou));
    f.push_back(nested("evaluation.taxonomy_iou", &P::evaluation, &EvalConfig::taxonomy_iou));
    f.push_back(nested("evaluation.false_neg_floor", &P::evaluation, &EvalConfig::false_neg_floor));
    f.push_back(nested("synth.seed", &P::synth, &S::seed));
    f.push_back(nested("synth.video_count", &P::synth, &S::video_count));
    f.push_back(nested("synth.frames_per_video", &P::synth, &S::frames_per_video));
    f.push_back(nested("synth.frame_width", &P::synth, &S::frame_width));
    f.push_back(nested("synth.frame_height", &P::synth, &S::frame_height));
    f.push_back(nested("synth.actors_per_video", &P::synth, &S::actors_per_video));
    f.push_back(nested("synth.actor_width", &P::synth, &S::actor_width));
    f.push_back(nested("synth.actor_height", &P::synth, &S::actor_height));
    f.push_back({"synth.motion",
                 [](P& c, std::string_view k, std::string_view v) { c.synth.motion = kMotions.parse(k, v); },
                 [](const P& c) { return kMotions.name(c.synth.motion); }});
    f.push_back(nested("synth.speed", &P::synth, &S::speed));
    f.push_back(nested("synth.spatial_focus", &P::synth, &S::spatial_focus));
    f.push_back(nested("synth.home_margin", &P::synth, &S::home_margin));
    f.push_back(nested("synth.action_fraction", &P::synth, &S::action_fraction));
    f.push_back(nested("synth.box_jitter", &P::synth, &S::box_jitter));
    f.push_back(nested("synth.miss_rate", &P::synth, &S::miss_rate));
    f.push_back(nested("synth.false_positive_rate", &P::synth, &S::false_positive_rate));
    f.push_back(nested("synth.label_confusion", &P::synth, &S::label_confusion));
    f.push_back(nested("synth.score_noise", &P::synth, &S::score_noise));
    f.push_back(nested("synth.match_noise", &P::synth, &S::match_noise));
    f.push_back(nested("synth.proposal_recall", &P::synth, &S::proposal_recall));
    f.push_back(nested("synth.distractor_proposals", &P::synth, &S::distractor_proposals));
    f.push_back(nested("synth.drift_rate", &P::synth, &S::drift_rate));
    f.push_back(nested("synth.flow_stride", &P::synth, &S::flow_stride));
    f.push_back(nested("synth.flow_noise", &P::synth, &S::flow_noise));
    f.push_back(nested("synth.match_grid", &P::synth, &S::match_grid));
    f.push_back(nested("synth.feature_dim", &P::synth, &S::feature_dim));
    f.push_back(nested("synth.feature_amplitude", &P::synth, &S::feature_amplitude));
    f.push_back(nested("synth.feature_noise", &P::synth, &S::feature_noise));
    f.push_back(nested("synth.grid_depth", &P::synth, &S::grid_depth));
    f.push_back(nested("synth.gmm_components", &P::synth, &S::gmm_components));
    f.push_back(number("run.threads", &P::threads));
    return f;
  }();
  return table;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, key, trim(value));
      return;
    }
  }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

void PipelineConfig::validate() const {
  auto unit = [](double v, const char* key) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(key) + " must lie in [0, 1]");
  };
  if (classes < 1) throw ConfigError("classes must be >= 1");
  unit(fusion_nms_threshold, "fusion.nms_threshold");
  if (!(fusion_min_flow_magnitude >= 0.0)) throw ConfigError("fusion.min_flow_magnitude must be >= 0");
  tracker.validate();
  if (!(tracker_search_radius >= 0.0)) throw ConfigError("tracker.search_radius must be >= 0");
  if (clip_length < 1) throw ConfigError("scoring.clip_length must be >= 1");
  unit(prune_st_threshold, "prune.st_threshold");
  footprint_layout().validate();
  unit(localize_tau, "localize.tau");
  evaluation.validate();
  scenario().validate();
  if (threads < 1) throw ConfigError("run.threads must be >= 1");
}

ScenarioConfig PipelineConfig::scenario() const {
  ScenarioConfig s = synth;
  s.num_classes = classes;
  s.clip_length = clip_length;
  s.grid_size = footprint_grid_size;
  s.cell_side = footprint_cell_side;
  return s;
}

std::string PipelineConfig::to_text() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = dot == std::string::npos ? std::string() : f.key.substr(0, dot);
    if (s != section && !out.empty()) out += '\n';
    section = s;
    out += f.key + " = " + f.get(*this) + '\n';
  }
  return out;
}

PipelineConfig PipelineConfig::parse(std::string_view text, std::string_view origin) {
  PipelineConfig c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

std::pair<std::string, std::string> split_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  return {std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1)))};
}

}  // namespace tubekit
