#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "tubekit/error.hpp"
#include "tubekit/io.hpp"
#include "tubekit/rng.hpp"

using namespace tubekit;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("record files round-trip") {
  const auto dir = test::scratch_dir("io_records");
  Rng rng(61);

  SUBCASE("videos") {
    const std::vector<io::VideoInfo> v{{"v0000", 30, 640, 480}, {"v0001", 12, 320, 240}};
    io::write_videos(dir / "videos.jsonl", v);
    CHECK(io::read_videos(dir / "videos.jsonl") == v);
  }
  SUBCASE("detections and proposals") {
    io::Keyed<Detection> dets;
    for (int i = 0; i < 20; ++i) {
      auto d = test::make_detection(i % 5, test::random_int_box(rng, 100), {rng.uniform(), rng.uniform()});
      d.source = static_cast<Source>(i % 3);
      dets.emplace_back(i < 10 ? "a" : "b", d);
    }
    io::write_detections(dir / "d.jsonl", dets);
    CHECK(io::read_detections(dir / "d.jsonl", 2) == dets);
    io::Keyed<Proposal> props{{"a", Proposal{3, {1, 2, 3, 4}, 0.75, {}}}, {"a", Proposal{4, {1, 2, 5, 6}, 0.5, {0.1, 0.2}}}};
    io::write_proposals(dir / "p.jsonl", props);
    CHECK(io::read_proposals(dir / "p.jsonl", 2) == props);
  }
  SUBCASE("ground truth") {
    std::vector<GroundTruthTube> gt{{"v", 1, {{3, {0, 0, 5, 5}}, {4, {1, 0, 6, 5}}}}, {"v", 0, {{0, {9, 9, 20, 20}}}}};
    io::write_ground_truth(dir / "gt.jsonl", gt);
    CHECK(io::read_ground_truth(dir / "gt.jsonl", 2) == gt);
  }
  SUBCASE("tubes with and without scores") {
    Tube plain = test::make_tube("v", 2, 6, {0.5, 1.25, 10, 20}, 2);
    Tube scored = test::make_tube("w", 0, 3, {3, 3, 7, 9}, 2);
    scored.label = 1;
    scored.tube_score = 1.0 / 3.0;
    scored.clip_scores = ClipScoreSequence{16, {{0.25, 0.75}}};
    const std::vector<io::TubeRecord> tubes{{plain, std::nullopt},
                                            {scored, TubeScore{{0.1, 0.2}, {0.3, 0.4}, {0.4, 0.6}, 1, 0.6}}};
    io::write_tubes(dir / "t.jsonl", tubes);
    CHECK(io::read_tubes(dir / "t.jsonl", 2) == tubes);
  }
  SUBCASE("matches, cell accuracy and clip features") {
    io::Keyed<PointMatchSet> m{{"v", PointMatchSet{4, 5, {{{1, 2}, {3, 4}}, {{5.5, 6}, {7, 8}}}}}};
    io::write_matches(dir / "m.jsonl", m);
    CHECK(io::read_matches(dir / "m.jsonl") == m);
    const CellLayout layout{4, 2};
    const std::vector<std::vector<double>> acc{{0.0, 0.5, 1.0, 0.25}, {1, 1, 1, 1}};
    io::write_cell_accuracy(dir / "a.jsonl", layout, acc);
    CHECK(io::read_cell_accuracy(dir / "a.jsonl") == std::pair{layout, acc});
    const io::ClipFeatureTable f{{{"v", 0, 0}, {1.0, -2.0}}, {{"v", 0, 1}, {0.5, 0.0}}, {{"w", 3, 0}, {1e-300, 7.0}}};
    io::write_clip_features(dir / "f.jsonl", f);
    CHECK(io::read_clip_features(dir / "f.jsonl") == f);
  }
}

TEST_CASE("record errors name file, line and field") {
  const auto dir = test::scratch_dir("io_errors");
  const auto p = dir / "gt.jsonl";
  const std::string header = R"({"schema":"tubekit.ground_truth","version":1})";
  const std::string good = R"({"video":"v","tube":0,"label":0,"frame":0,"box":[0,0,5,5]})";

  write_text(p, header + "\n" + good + "\n" + R"({"video":"v","tube":0,"label":0,"frame":1,"box":[5,5,1,1]})" + "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find("gt.jsonl:3: field 'box'") != std::string::npos);

  write_text(p, header + "\n" + R"({"video":"v","tube":0,"frame":0,"box":[0,0,5,5]})" + "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find(":2: field 'label'") != std::string::npos);

  write_text(p, header + "\n" + R"({"video":"v","tube":0,"label":2,"frame":0,"box":[0,0,5,5]})" + "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find(":2: field 'label': out of range") != std::string::npos);

  write_text(p, header + "\n" + good + "\n" + R"({"video":"v","tube":0,"label":0,"frame":3,"box":[0,0,5,5]})" + "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find(":3: field 'frame'") != std::string::npos);

  write_text(p, header + "\n{not json\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find(":2: malformed record") != std::string::npos);

  write_text(p, R"({"schema":"tubekit.tubes","version":1})" "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find("field 'schema'") != std::string::npos);

  write_text(p, R"({"schema":"tubekit.ground_truth","version":2})" "\n");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find("field 'version'") != std::string::npos);

  write_text(p, "");
  CHECK(error_of([&] { io::read_ground_truth(p, 2); }).find("empty file") != std::string::npos);

  CHECK(error_of([&] { io::read_ground_truth(dir / "missing.jsonl", 2); }).find("cannot open") != std::string::npos);
  CHECK(error_of([&] { io::require_file(dir / "missing.jsonl", "tubekit synth"); }).find("tubekit synth") !=
        std::string::npos);

  const auto d = dir / "d.jsonl";
  write_text(d, std::string(R"({"schema":"tubekit.detections","version":1})") + "\n" +
                    R"({"video":"v","frame":0,"box":[0,0,5,5],"scores":[0.5,null],"source":"static"})" + "\n");
  CHECK(error_of([&] { io::read_detections(d, 2); }).find(":2: field 'scores'") != std::string::npos);
}

TEST_CASE("array container") {
  const auto dir = test::scratch_dir("io_arrays");
  SUBCASE("f64 arrays are exact") {
    io::Array a;
    a.meta = {{"name", "x"}};
    a.shape = {2, 3};
    a.data = {1.0 / 3.0, -0.0, 1e-310, 2.5, -7.0, 1e300};
    io::ArrayWriter w(dir / "a.bin");
    w.write(a);
    w.write(io::Array{{{"name", "empty"}}, {0}, {}});
    w.close();
    const auto back = io::read_arrays(dir / "a.bin");
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1].shape == std::vector<std::uint64_t>{0});
  }
  SUBCASE("header layout is little-endian") {
    io::ArrayWriter w(dir / "b.bin");
    w.write(io::Array{{}, {1}, {1.0}}, io::DType::kF32);
    w.close();
    const auto bytes = test::slurp(dir / "b.bin");
    CHECK(bytes.substr(0, 4) == "TKAR");
    CHECK(bytes[4] == 1);
    CHECK(bytes[8] == 2);
    CHECK(bytes[12] == 1);
    CHECK(bytes[16] == 1);
    CHECK(bytes.size() == 4 + 4 + 4 + 4 + 8 + 4 + 2 + 4);
  }
  SUBCASE("corrupt files") {
    write_text(dir / "c.bin", "NOPE");
    CHECK_THROWS_AS(io::read_arrays(dir / "c.bin"), InputError);
    io::ArrayWriter w(dir / "d.bin");
    w.write(io::Array{{}, {4}, {1, 2, 3, 4}});
    w.close();
    const auto bytes = test::slurp(dir / "d.bin");
    write_text(dir / "d.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(io::read_arrays(dir / "d.bin"), InputError);
  }
  SUBCASE("shape and data must agree") {
    io::ArrayWriter w(dir / "e.bin");
    CHECK_THROWS(w.write(io::Array{{}, {3}, {1, 2}}));
  }
}

TEST_CASE("typed binary files round-trip") {
  const auto dir = test::scratch_dir("io_typed");
  Rng rng(62);
  SUBCASE("flow is stored in single precision") {
    FlowMagnitudeGrid g{7, 3, 2, 16.0, {0.1, 0.2, 0.3, 1.5, 2.0, 0.0}};
    io::ArrayWriter w(dir / "flow.bin");
    io::write_flow(w, "v0001", g);
    w.close();
    const auto flows = io::read_flow(dir / "flow.bin");
    const auto& back = flows.at({"v0001", 7});
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.stride == 16.0);
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == static_cast<double>(static_cast<float>(g.values[i])));
  }
  SUBCASE("weights") {
    RecurrentScorerWeights wts;
    wts.input_to_output = Matrix(3, 2);
    wts.hidden_to_hidden = Matrix(3, 3);
    wts.classifier = Matrix(4, 3);
    for (auto* m : {&wts.input_to_output, &wts.hidden_to_hidden, &wts.classifier}) {
      for (double& v : m->data) v = rng.normal(0.0, 1.0);
    }
    wts.bias = {0.1, 0.2, 0.3};
    wts.classifier_bias = {0, 1, 2, 3};
    wts.activation = Activation::kLogistic;
    io::write_weights(dir / "w.bin", wts);
    CHECK(io::read_weights(dir / "w.bin") == wts);
  }
  SUBCASE("gmm and feature grids") {
    GaussianMixture g{{0.25, 0.75}, {{0, 1}, {2, 3}}, {{1, 1}, {0.5, 2}}};
    io::write_gmm(dir / "g.bin", g);
    CHECK(io::read_gmm(dir / "g.bin") == g);
    FeatureGridSequence f{2, 3, 2, std::vector<double>(24)};
    for (double& v : f.values) v = rng.normal(0.0, 1.0);
    const std::map<std::pair<std::string, int>, FeatureGridSequence> grids{{{"v", 0}, f}, {{"v", 4}, f}};
    io::write_feature_grids(dir / "f.bin", grids);
    CHECK(io::read_feature_grids(dir / "f.bin") == grids);
  }
}
