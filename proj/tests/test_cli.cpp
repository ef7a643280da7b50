#include <doctest.h>

#include "fixtures.hpp"
#include "posefuse/serialize.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace posefuse;
using namespace testutil;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(POSEFUSE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// A tiny config written to `dir`/config.json.
std::string tiny_config(const std::string& dir, double pretrain_lr = 1e-5) {
  Config c = small_config();
  c.data.train = 16;
  c.data.heldout = 4;
  c.pretrain.lr = pretrain_lr;
  const std::string path = dir + "/config.json";
  write_file(path, config_to_json(c));
  return path;
}

}  // namespace

TEST_CASE("cli pipeline runs end to end with documented exit codes") {
  const std::string dir = temp_dir("cli");
  const std::string cfg = tiny_config(dir);
  const std::string base = " --config " + cfg;
  REQUIRE(run("generate" + base + " --seed 42 --out " + dir + "/data") == 0);
  REQUIRE(run("pretrain" + base + " --data " + dir + "/data --out " + dir + "/models") == 0);
  REQUIRE(run("train" + base + " --data " + dir + "/data --models " + dir + "/models --out " + dir + "/run") == 0);
  const std::string common = base + " --data " + dir + "/data --models " + dir + "/models";
  CHECK(run("eval" + common + " --cham " + dir + "/run/cham.bin --out " + dir + "/metrics.json") == 0);
  CHECK(run("eval" + common + " --strategy wrist_copy --out " + dir + "/wc.json") == 0);
  CHECK(run("infer" + common + " --sample 0 --out " + dir + "/infer") == 0);
  CHECK(run("export" + base + " --data " + dir + "/data --what gt --sample 1 --out " + dir + "/gt.obj") == 0);
  CHECK(run("export" + base + " --what hand --out " + dir + "/hand.obj") == 0);
  CHECK(run("bench" + common + " --runs 2 --out " + dir + "/timings.json") == 0);

  const auto metrics = nlohmann::json::parse(read_file(dir + "/metrics.json"));
  CHECK(metrics.at("per_sample").size() == 4);
  CHECK(metrics.at("context").at("strategy") == "cham");
  CHECK(std::filesystem::exists(dir + "/gt.obj"));
  CHECK(std::filesystem::exists(dir + "/run/train_log.jsonl"));
  CHECK(read_file(dir + "/models/pretrain_log.jsonl").find("train_split_loss") != std::string::npos);

  // Usage errors.
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("eval" + common + " --strategy nonsense") == 1);
  CHECK(run("generate --out " + dir + "/x --config /does/not/exist.json") == 1);
  write_file(dir + "/bad.json", R"({"data": {"unknown_key": 1}})");
  CHECK(run("generate --config " + dir + "/bad.json --out " + dir + "/x") == 1);
  CHECK(run("infer" + common + " --sample 999 --out " + dir + "/x") == 1);

  // Contract violations.
  CHECK(run("eval" + base + " --data " + dir + "/missing --models " + dir + "/models") == 2);
  std::string blob = read_file(dir + "/models/body.bin");
  blob[blob.size() / 2] = static_cast<char>(blob[blob.size() / 2] ^ 1);
  write_file(dir + "/models/body.bin", blob);
  CHECK(run("eval" + common) == 2);
}

TEST_CASE("cli reports a diverging run as a numeric failure") {
  const std::string dir = temp_dir("cli_nan");
  const std::string cfg = tiny_config(dir, 1e300);
  const std::string base = " --config " + cfg;
  REQUIRE(run("generate" + base + " --seed 1 --out " + dir + "/data") == 0);
  CHECK(run("pretrain" + base + " --data " + dir + "/data --out " + dir + "/models") == 3);
}
