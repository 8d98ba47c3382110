#include "tubekit/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "tubekit/error.hpp"
#include "tubekit/fusion.hpp"
#include "tubekit/localizer.hpp"
#include "tubekit/scoring.hpp"
#include "tubekit/tracker.hpp"

namespace tubekit {

namespace {

std::optional<fs::path> find_input(const StageDirs& dirs, const char* name) {
  if (fs::exists(dirs.out / name)) return dirs.out / name;
  if (fs::exists(dirs.in / name)) return dirs.in / name;
  return std::nullopt;
}

fs::path locate(const StageDirs& dirs, const char* name, std::string_view producer) {
  if (auto p = find_input(dirs, name)) return *p;
  std::string where = dirs.out.string();
  if (dirs.in != dirs.out) where += " or " + dirs.in.string();
  throw InputError(std::string(name) + " not found in " + where + "; it is produced by `" + std::string(producer) + "`");
}

constexpr std::string_view kSynth = "tubekit synth";

struct VideoIndex {
  std::vector<io::VideoInfo> videos;
  std::map<std::string, std::size_t> index;

  std::size_t at(const std::string& id, const fs::path& source) const {
    auto it = index.find(id);
    if (it == index.end()) throw InputError(source.string() + ": unknown video '" + id + "'");
    return it->second;
  }
};

VideoIndex load_videos(const StageDirs& dirs) {
  const fs::path path = locate(dirs, files::kVideos, kSynth);
  VideoIndex vi;
  vi.videos = io::read_videos(path);
  std::sort(vi.videos.begin(), vi.videos.end(),
            [](const io::VideoInfo& a, const io::VideoInfo& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 0; i < vi.videos.size(); ++i) {
    if (!vi.index.emplace(vi.videos[i].video_id, i).second) {
      throw InputError(path.string() + ": duplicate video '" + vi.videos[i].video_id + "'");
    }
  }
  return vi;
}

template <typename T>
std::vector<std::vector<std::vector<T>>> by_frame(const io::Keyed<T>& items, const VideoIndex& vi,
                                                  const fs::path& source) {
  std::vector<std::vector<std::vector<T>>> out(vi.videos.size());
  for (std::size_t v = 0; v < vi.videos.size(); ++v) out[v].resize(static_cast<std::size_t>(vi.videos[v].num_frames));
  for (const auto& [video, item] : items) {
    const std::size_t v = vi.at(video, source);
    if (item.frame_index >= vi.videos[v].num_frames) {
      throw InputError(source.string() + ": video '" + video + "' frame " + std::to_string(item.frame_index) +
                       " is past its last frame");
    }
    out[v][static_cast<std::size_t>(item.frame_index)].push_back(item);
  }
  return out;
}

template <typename T>
io::Keyed<T> flatten(const std::vector<std::vector<std::vector<T>>>& grouped, const VideoIndex& vi) {
  io::Keyed<T> out;
  for (std::size_t v = 0; v < grouped.size(); ++v) {
    for (const auto& frame : grouped[v]) {
      for (const auto& item : frame) out.emplace_back(vi.videos[v].video_id, item);
    }
  }
  return out;
}

std::optional<SyntheticWorld> load_world(const StageDirs& dirs) {
  const auto actors_path = find_input(dirs, files::kActors);
  if (!actors_path) return std::nullopt;
  const auto scenario = PipelineConfig::load(locate(dirs, files::kScenario, kSynth).string()).scenario();
  auto [ids, actors] = io::read_actors(*actors_path);
  return SyntheticWorld(scenario, std::move(ids), std::move(actors));
}

double tube_rank_score(const Tube& t) { return t.tube_score.value_or(0.0); }

// Canonical order: video, first frame, descending score, last frame, first box.
bool tube_before(const Tube& a, const Tube& b) {
  if (a.video_id != b.video_id) return a.video_id < b.video_id;
  const FrameInterval ea = a.extent(), eb = b.extent();
  if (ea.start != eb.start) return ea.start < eb.start;
  if (tube_rank_score(a) != tube_rank_score(b)) return tube_rank_score(a) > tube_rank_score(b);
  if (ea.end != eb.end) return ea.end < eb.end;
  if (a.entries.empty() || b.entries.empty()) return a.entries.size() < b.entries.size();
  return box_less(a.entries.front().box, b.entries.front().box);
}

void canonical_sort(std::vector<io::TubeRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const io::TubeRecord& a, const io::TubeRecord& b) { return tube_before(a.tube, b.tube); });
}

// Records of each video, in file order.
std::vector<std::vector<io::TubeRecord>> group_tubes(std::vector<io::TubeRecord> records, const VideoIndex& vi,
                                                     const fs::path& source) {
  std::vector<std::vector<io::TubeRecord>> out(vi.videos.size());
  for (auto& r : records) out[vi.at(r.tube.video_id, source)].push_back(std::move(r));
  return out;
}

}  // namespace

void write_bundle(const ScenarioBundle& bundle, const PipelineConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  {
    PipelineConfig canonical = config;
    canonical.threads = 1;  // keeps the bundle independent of the worker count
    std::ofstream cfg(dir / files::kScenario);
    cfg << canonical.to_text();
    if (!cfg) throw ProcessingError("failed writing " + (dir / files::kScenario).string());
  }
  const auto& sc = bundle.config;
  std::vector<io::VideoInfo> videos;
  std::vector<std::string> ids;
  std::vector<std::vector<ActorTrack>> actors;
  io::Keyed<Detection> stat, flow, early;
  io::Keyed<Proposal> proposals;
  for (const auto& v : bundle.videos) {
    videos.push_back({v.video_id, v.num_frames, sc.frame_width, sc.frame_height});
    ids.push_back(v.video_id);
    actors.push_back(v.actors);
    for (int f = 0; f < v.num_frames; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      for (const auto& d : v.static_detections[fi]) stat.emplace_back(v.video_id, d);
      for (const auto& d : v.flow_detections[fi]) flow.emplace_back(v.video_id, d);
      for (const auto& d : v.early_detections[fi]) early.emplace_back(v.video_id, d);
      for (const auto& p : v.proposals[fi]) proposals.emplace_back(v.video_id, p);
    }
  }
  io::write_videos(dir / files::kVideos, videos);
  io::write_actors(dir / files::kActors, ids, actors);
  io::write_ground_truth(dir / files::kGroundTruth, bundle.ground_truth);
  io::write_detections(dir / files::kStaticDetections, stat);
  io::write_detections(dir / files::kFlowDetections, flow);
  io::write_detections(dir / files::kEarlyDetections, early);
  io::write_proposals(dir / files::kProposals, proposals);

  const SyntheticWorld world = SyntheticWorld::from_bundle(bundle);
  io::ArrayWriter flow_out(dir / files::kFlow);
  for (std::size_t v = 0; v < bundle.videos.size(); ++v) {
    for (int f = 0; f < bundle.videos[v].num_frames; ++f) io::write_flow(flow_out, ids[v], world.flow(v, f));
  }
  flow_out.close();

  io::Keyed<PointMatchSet> matches;
  for (std::size_t v = 0; v < bundle.videos.size(); ++v) {
    for (int f = 0; f + 1 < bundle.videos[v].num_frames; ++f) matches.emplace_back(ids[v], world.frame_matches(v, f, f + 1));
  }
  io::write_matches(dir / files::kMatches, matches);

  io::write_weights(dir / files::kWeights, bundle.weights);
  if (!bundle.gmm.weights.empty()) io::write_gmm(dir / files::kGmm, bundle.gmm);
  io::write_cell_accuracy(dir / files::kFootprint, CellLayout{sc.grid_size, sc.cell_side}, bundle.cell_accuracy);
  std::vector<io::TubeRecord> drift;
  for (const auto& t : bundle.drift_tubes) drift.push_back({t, std::nullopt});
  io::write_tubes(dir / files::kDrift, drift);
}

void run_synth(const PipelineConfig& config, const fs::path& out) {
  config.validate();
  write_bundle(generate(config.scenario(), config.threads), config, out);
}

void run_fuse(const PipelineConfig& config, const StageDirs& dirs) {
  config.validate();
  const VideoIndex vi = load_videos(dirs);
  const int k = config.classes;
  const fs::path static_path = locate(dirs, files::kStaticDetections, kSynth);
  const fs::path flow_path = locate(dirs, files::kFlowDetections, kSynth);
  const fs::path early_path = locate(dirs, files::kEarlyDetections, kSynth);
  const fs::path prop_path = locate(dirs, files::kProposals, kSynth);
  const auto stat = by_frame(io::read_detections(static_path, k), vi, static_path);
  const auto flow = by_frame(io::read_detections(flow_path, k), vi, flow_path);
  const auto early = by_frame(io::read_detections(early_path, k), vi, early_path);
  const auto props = by_frame(io::read_proposals(prop_path, k), vi, prop_path);
  std::map<std::pair<std::string, int>, FlowMagnitudeGrid> grids;
  fs::path grid_path;
  if (config.fusion_saliency) {
    grid_path = locate(dirs, files::kFlow, kSynth);
    grids = io::read_flow(grid_path);
  }

  std::vector<std::vector<std::vector<Detection>>> fused(vi.videos.size());
  std::vector<std::vector<std::vector<Proposal>>> salient(vi.videos.size());
  parallel_for(vi.videos.size(), config.threads, [&](std::size_t v) {
    const auto& info = vi.videos[v];
    const auto n = static_cast<std::size_t>(info.num_frames);
    fused[v].resize(n);
    salient[v].resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      const auto late = late_fuse(stat[v][f], flow[v][f], config.fusion_nms_threshold);
      fused[v][f] = merge_early_late(early[v][f], late, config.fusion_nms_threshold);
      if (!config.fusion_saliency) {
        salient[v][f] = props[v][f];
        continue;
      }
      auto it = grids.find({info.video_id, static_cast<int>(f)});
      if (it == grids.end()) {
        throw InputError(grid_path.string() + ": no flow grid for video '" + info.video_id + "' frame " +
                         std::to_string(f));
      }
      salient[v][f] = saliency_prune(props[v][f], it->second, config.fusion_min_flow_magnitude);
    }
  });
  fs::create_directories(dirs.out);
  io::write_detections(dirs.out / files::kDetections, flatten(fused, vi));
  io::write_proposals(dirs.out / files::kSalientProposals, flatten(salient, vi));
}

void run_track(const PipelineConfig& config, const StageDirs& dirs) {
  config.validate();
  const VideoIndex vi = load_videos(dirs);
  const int k = config.classes;
  const fs::path det_path = locate(dirs, files::kDetections, "tubekit fuse");
  const fs::path prop_path = locate(dirs, files::kSalientProposals, "tubekit fuse");
  const auto dets = by_frame(io::read_detections(det_path, k), vi, det_path);
  const auto props = by_frame(io::read_proposals(prop_path, k), vi, prop_path);

  std::optional<SyntheticWorld> world;
  MatchSetMatcher stored;
  const PointMatcher* matcher = nullptr;
  if (config.tracker_method == TrackerMethod::kPointMatching) {
    world = load_world(dirs);
    if (world) {
      matcher = &*world;
    } else {
      const fs::path match_path = locate(dirs, files::kMatches, kSynth);
      for (auto& [video, set] : io::read_matches(match_path)) {
        vi.at(video, match_path);
        stored.add(video, std::move(set));
      }
      matcher = &stored;
    }
  }

  std::vector<std::vector<Tube>> tubes(vi.videos.size());
  parallel_for(vi.videos.size(), config.threads, [&](std::size_t v) {
    VideoFrames frames{vi.videos[v].video_id, vi.videos[v].num_frames, dets[v], props[v]};
    tubes[v] = matcher ? build_tubes(frames, *matcher, proposal_class_score, config.tracker)
                       : build_tubes_neighborhood(frames, proposal_class_score, config.tracker,
                                                  config.tracker_search_radius);
  });

  std::vector<io::TubeRecord> records;
  for (auto& per_video : tubes) {
    for (auto& t : per_video) records.push_back({std::move(t), std::nullopt});
  }
  if (config.tracker_include_drift) {
    if (const auto drift_path = find_input(dirs, files::kDrift)) {
      for (auto& r : io::read_tubes(*drift_path, k)) {
        vi.at(r.tube.video_id, *drift_path);
        r.tube.label.reset();
        r.tube.tube_score.reset();
        r.tube.clip_scores.reset();
        records.push_back({std::move(r.tube), std::nullopt});
      }
    }
  }
  canonical_sort(records);
  fs::create_directories(dirs.out);
  io::write_tubes(dirs.out / files::kCandidates, records);
}

void run_score(const PipelineConfig& config, const StageDirs& dirs) {
  config.validate();
  const VideoIndex vi = load_videos(dirs);
  const fs::path cand_path = locate(dirs, files::kCandidates, "tubekit track");
  auto records = io::read_tubes(cand_path, config.classes);
  for (const auto& r : records) vi.at(r.tube.video_id, cand_path);
  const auto weights = io::read_weights(locate(dirs, files::kWeights, kSynth));
  if (weights.output_dim() < config.classes) {
    throw ConfigError("scorer weights have " + std::to_string(weights.output_dim()) + " outputs but classes = " +
                      std::to_string(config.classes));
  }
  const auto world = load_world(dirs);
  io::ClipFeatureTable table;
  fs::path table_path;
  if (!world) {
    table_path = locate(dirs, files::kClipFeatures, "an external clip feature extractor (see docs/FORMATS.md)");
    table = io::read_clip_features(table_path);
  }

  parallel_for(records.size(), config.threads, [&](std::size_t i) {
    Tube& tube = records[i].tube;
    const auto clips = slice_clips(tube, config.clip_length);
    std::vector<std::vector<double>> features;
    features.reserve(clips.size());
    for (std::size_t c = 0; c < clips.size(); ++c) {
      if (world) {
        features.push_back(world->clip_features(world->video_index(tube.video_id), tube, clips[c]));
        continue;
      }
      auto it = table.find({tube.video_id, static_cast<int>(i), static_cast<int>(c)});
      if (it == table.end()) {
        throw InputError(table_path.string() + ": no features for video '" + tube.video_id + "' tube " +
                         std::to_string(i) + " clip " + std::to_string(c));
      }
      features.push_back(it->second);
    }
    const ClipScoreSequence seq = recurrent_forward(features, weights, config.clip_length);
    TubeScore s = score_tube(tube, seq, config.score_fusion);
    tube.label = s.label;
    tube.tube_score = s.score;
    tube.clip_scores = seq;
    records[i].score = std::move(s);
  });
  canonical_sort(records);
  fs::create_directories(dirs.out);
  io::write_tubes(dirs.out / files::kScored, records);
}

void run_prune(const PipelineConfig& config, const StageDirs& dirs) {
  config.validate();
  const VideoIndex vi = load_videos(dirs);
  const fs::path scored_path = locate(dirs, files::kScored, "tubekit score");
  auto records = io::read_tubes(scored_path, config.classes);
  for (const auto& r : records) {
    if (!r.score) throw InputError(scored_path.string() + ": tube in video '" + r.tube.video_id + "' is not scored");
  }
  std::optional<FootprintMap> map;
  if (config.footprint_enabled) {
    const fs::path alpha_path = locate(dirs, files::kFootprint, kSynth);
    auto [layout, alpha] = io::read_cell_accuracy(alpha_path);
    if (!(layout == config.footprint_layout())) {
      throw ConfigError(alpha_path.string() + ": cell layout " + std::to_string(layout.spatial_size) + "/" +
                        std::to_string(layout.cell_side) + " differs from footprint.grid_size/footprint.cell_side");
    }
    if (static_cast<int>(alpha.size()) != config.classes) {
      throw ConfigError(alpha_path.string() + ": has " + std::to_string(alpha.size()) + " classes, config has " +
                        std::to_string(config.classes));
    }
    map = build_footprint_map(alpha, layout);
  }

  auto grouped = group_tubes(std::move(records), vi, scored_path);
  std::vector<std::vector<io::TubeRecord>> kept(grouped.size());
  parallel_for(grouped.size(), config.threads, [&](std::size_t v) {
    std::vector<ScoredTube> tubes;
    for (auto& r : grouped[v]) tubes.push_back({std::move(r.tube), std::move(*r.score)});
    if (config.prune_enabled) tubes = prune_overlapped(std::move(tubes), config.prune_st_threshold);
    if (map) {
      tubes = prune_drifted(std::move(tubes), *map, vi.videos[v].width, vi.videos[v].height,
                            config.footprint_projection);
    }
    for (auto& t : tubes) kept[v].push_back({std::move(t.tube), std::move(t.score)});
  });
  std::vector<io::TubeRecord> out;
  for (auto& per_video : kept) {
    for (auto& r : per_video) out.push_back(std::move(r));
  }
  canonical_sort(out);
  fs::create_directories(dirs.out);
  io::write_tubes(dirs.out / files::kPruned, out);
}

void run_localize(const PipelineConfig& config, const StageDirs& dirs) {
  config.validate();
  const fs::path pruned_path = locate(dirs, files::kPruned, "tubekit prune");
  auto records = io::read_tubes(pruned_path, config.classes);
  std::vector<std::optional<io::TubeRecord>> result(records.size());
  parallel_for(records.size(), config.threads, [&](std::size_t i) {
    const auto& r = records[i];
    if (!config.localize_enabled) {
      result[i] = r;
      return;
    }
    if (!r.tube.label || !r.tube.clip_scores) {
      throw InputError(pruned_path.string() + ": tube in video '" + r.tube.video_id +
                       "' has no label or clip scores; run `tubekit score` first");
    }
    const auto intervals = slice_clips(r.tube, r.tube.clip_scores->clip_length);
    auto trimmed = localize(r.tube, *r.tube.clip_scores, intervals, config.localize_tau, config.localize_mode);
    if (trimmed) result[i] = io::TubeRecord{std::move(*trimmed), r.score};
  });
  std::vector<io::TubeRecord> out;
  for (auto& r : result) {
    if (r) out.push_back(std::move(*r));
  }
  canonical_sort(out);
  fs::create_directories(dirs.out);
  io::write_tubes(dirs.out / files::kFinal, out);
}

EvalReport run_evaluate(const PipelineConfig& config, const StageDirs& dirs,
                        const std::optional<fs::path>& predictions) {
  config.validate();
  fs::path pred_path;
  if (predictions) {
    io::require_file(*predictions, "tubekit localize");
    pred_path = *predictions;
  } else {
    pred_path = locate(dirs, files::kFinal, "tubekit localize");
  }
  std::vector<Tube> tubes;
  for (auto& r : io::read_tubes(pred_path, config.classes)) tubes.push_back(std::move(r.tube));
  const auto gt = io::read_ground_truth(locate(dirs, files::kGroundTruth, kSynth), config.classes);
  EvalReport report = evaluate(tubes, gt, config.classes, config.evaluation);
  fs::create_directories(dirs.out);
  std::ofstream json_out(dirs.out / files::kReportJson);
  json_out << report.to_json() << '\n';
  std::ofstream text_out(dirs.out / files::kReportText);
  text_out << report.to_table();
  if (!json_out || !text_out) throw ProcessingError("failed writing the evaluation report to " + dirs.out.string());
  return report;
}

std::optional<EvalReport> run_pipeline(const PipelineConfig& config, const StageDirs& dirs) {
  run_fuse(config, dirs);
  run_track(config, dirs);
  run_score(config, dirs);
  run_prune(config, dirs);
  run_localize(config, dirs);
  if (!find_input(dirs, files::kGroundTruth)) return std::nullopt;
  return run_evaluate(config, dirs);
}

}  // namespace tubekit
