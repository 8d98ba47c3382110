#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(TUBEKIT_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command line") {
  const auto dir = test::scratch_dir("cli");
  const auto log = dir / "log.txt";
  const std::string bundle = (dir / "bundle").string();
  const std::string out = (dir / "out").string();

  REQUIRE(run("synth --out " + bundle + " --stage-override synth.video_count=4 --stage-override synth.frames_per_video=40",
              log) == 0);
  CHECK(fs::exists(fs::path(bundle) / "scenario.cfg"));

  REQUIRE(run("pipeline --in " + bundle + " --out " + out, log) == 0);
  const auto report = test::slurp(fs::path(out) / "report.txt");
  CHECK(report.find("video-mAP") != std::string::npos);
  CHECK(test::slurp(fs::path(out) / "report.json").find("\"recall_track\": 1.0") != std::string::npos);

  SUBCASE("stages compose to the pipeline") {
    const std::string staged = (dir / "staged").string();
    for (const char* stage : {"fuse", "track", "score", "prune", "localize", "evaluate"}) {
      CAPTURE(stage);
      REQUIRE(run(std::string(stage) + " --in " + bundle + " --out " + staged, log) == 0);
    }
    CHECK(test::slurp(fs::path(staged) / "final_tubes.jsonl") == test::slurp(fs::path(out) / "final_tubes.jsonl"));
  }
  SUBCASE("same seed, same bundle") {
    const std::string again = (dir / "again").string();
    REQUIRE(run("synth --out " + again + " --threads 3 --stage-override synth.video_count=4 "
                "--stage-override synth.frames_per_video=40",
                log) == 0);
    for (const char* name : {"ground_truth.jsonl", "detections_static.jsonl", "flow.bin", "matches.jsonl"}) {
      CHECK(test::slurp(fs::path(again) / name) == test::slurp(fs::path(bundle) / name));
    }
    const std::string other = (dir / "other").string();
    REQUIRE(run("synth --out " + other + " --seed 99 --stage-override synth.video_count=4 "
                "--stage-override synth.frames_per_video=40",
                log) == 0);
    CHECK(test::slurp(fs::path(other) / "ground_truth.jsonl") != test::slurp(fs::path(bundle) / "ground_truth.jsonl"));
  }
  SUBCASE("exit codes") {
    CHECK(run("track --in " + (dir / "empty").string(), log) == 2);
    CHECK(test::slurp(log).find("tubekit synth") != std::string::npos);
    const std::string fresh = (dir / "fresh").string();
    CHECK(run("track --in " + bundle + " --out " + fresh, log) == 2);
    CHECK(test::slurp(log).find("tubekit fuse") != std::string::npos);
    CHECK(run("fuse --in " + bundle + " --out " + out + " --stage-override no.such_key=1", log) == 3);
    CHECK(run("fuse --in " + bundle + " --out " + out + " --stage-override fusion.nms_threshold=7", log) == 3);
    CHECK(run("fuse --bogus-flag", log) == 3);
    std::ofstream(fs::path(bundle) / "broken.jsonl") << "{\"schema\":\"tubekit.tubes\",\"version\":1}\n{oops\n";
    CHECK(run("evaluate --in " + bundle + " --out " + out + " --predictions " + (fs::path(bundle) / "broken.jsonl").string(),
              log) == 2);
    CHECK(test::slurp(log).find("broken.jsonl:2") != std::string::npos);
  }
}
