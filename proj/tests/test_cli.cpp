#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "groundrl/dataset.hpp"
#include "groundrl/output_parser.hpp"

using namespace groundrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GROUNDRL_CLI_PATH;
const std::string kData = GROUNDRL_TEST_DATA_DIR;

struct Run {
  int code;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout; stderr is discarded.
Run run(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / ("groundrl_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string perfect_completions(const std::vector<GroundingInstance>& data) {
  std::string out;
  for (const auto& inst : data) {
    out += json{{"id", inst.id()}, {"completion", canonical_completion("t", inst.entities())}}
               .dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("validate exit codes") {
  CHECK(run("validate " + kData + "/clean.jsonl").code == 0);
  const auto bad = run("validate " + kData + "/one_error_each.jsonl");
  CHECK(bad.code == 3);
  CHECK(bad.out.find("rejected: 7") != std::string::npos);
  CHECK(run("validate " + kData + "/missing.jsonl").code == 2);
  CHECK(run("validate").code == 1);
  CHECK(run("frobnicate").code == 1);
}

TEST_CASE("score") {
  const auto dir = scratch();
  const auto data = load_dataset(kData + "/clean.jsonl").instances;
  const std::string ds = kData + "/clean.jsonl";

  const auto first = json{{"id", data[0].id()},
                          {"completion", canonical_completion("t", data[0].entities())}};
  const auto one = run("score " + write(dir / "one.jsonl", first.dump() + "\n") + " " + ds);
  CHECK(one.code == 0);
  CHECK(one.out.find("mean r_total: 2.275") != std::string::npos);

  const auto empty = run("score " + write(dir / "empty.jsonl", "") + " " + ds);
  CHECK(empty.code == 0);
  CHECK(empty.out.empty());

  const auto stray = run("score " +
                         write(dir / "stray.jsonl", R"({"id": "ghost", "completion": ""})" "\n") +
                         " " + ds);
  CHECK(stray.code == 0);
  CHECK(stray.out.empty());

  CHECK(run("score " + (dir / "none.jsonl").string() + " " + ds).code == 2);
  CHECK(run("score " + (dir / "empty.jsonl").string() + " " + ds + " --format xml").code == 1);
}

TEST_CASE("score and serve agree byte for byte") {
  const auto dir = scratch();
  const std::string ds = kData + "/clean.jsonl";
  const auto data = load_dataset(ds).instances;

  std::string completions;
  std::string requests;
  int n = 0;
  for (const auto& inst : data) {
    const std::vector<std::string> texts = {
        canonical_completion("t", inst.entities()), "",
        "subject: [(0, 0), (50, 50)]",
        canonical_completion("", std::vector<Entity>(inst.entities().begin(),
                                                     inst.entities().begin() + 1))};
    for (const auto& text : texts) {
      completions += json{{"id", inst.id()}, {"completion", text}}.dump() + "\n";
      requests += json{{"request_id", n++}, {"instance_id", inst.id()}, {"completion", text}}
                      .dump() + "\n";
    }
  }
  requests += R"({"shutdown": true})" "\n";

  const auto scored = run("score --format record " + write(dir / "c.jsonl", completions) + " " + ds);
  const auto served = run("serve " + ds + " < " + write(dir / "r.jsonl", requests));
  CHECK(scored.code == 0);
  CHECK(served.code == 0);
  const auto a = lines(scored.out), b = lines(served.out);
  REQUIRE(a.size() == b.size() + 1);  // score adds a summary record
  for (std::size_t i = 0; i < b.size(); ++i) {
    const json x = json::parse(a[i]), y = json::parse(b[i]);
    CHECK(y["request_id"] == static_cast<int>(i));
    for (const char* key : {"r_fmt", "r_ent", "r_rel", "r_total"}) {
      CHECK(x[key].dump() == y[key].dump());
    }
  }
}

TEST_CASE("evaluate") {
  const auto dir = scratch();
  const std::string ds = kData + "/clean.jsonl";
  const auto data = load_dataset(ds).instances;
  const std::string preds = write(dir / "p.jsonl", perfect_completions(data));
  const auto all = run("evaluate --format record " + preds + " " + ds);
  CHECK(all.code == 0);
  CHECK(json::parse(all.out)["macc_micro"] == 100.0);
  const auto test_only = run("evaluate --format record --split test " + preds + " " + ds);
  CHECK(json::parse(test_only.out)["instances"] == 1);
  CHECK(run("evaluate --threshold 1.5 " + preds + " " + ds).code == 1);
}

TEST_CASE("train-toy modes") {
  const auto dir = scratch();
  const std::string trace = (dir / "trace.csv").string();

  const auto two = run("train-toy --seed 1 --trace-out " + trace);
  CHECK(two.code == 0);
  CHECK(two.out.find("mode: two-stage") != std::string::npos);
  std::ifstream in(trace);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "stage,step,mean_reward,r_fmt_mean,r_ent_mean,r_rel_mean,kl,loss,p_best");
  // p_best trends upward over stage II: last-quarter mean above first-quarter mean.
  std::vector<double> p;
  while (std::getline(in, row)) {
    if (row.rfind("grpo,", 0) == 0) p.push_back(std::stod(row.substr(row.rfind(',') + 1)));
  }
  REQUIRE(p.size() == 200);
  double early = 0, late = 0;
  for (std::size_t i = 0; i < 50; ++i) early += p[i], late += p[150 + i];
  CHECK(late > early);

  const auto sft = run("train-toy --sft-only --trace-out " + trace);
  CHECK(sft.code == 0);
  std::ifstream sin(trace);
  std::getline(sin, header);
  int rows = 0;
  while (std::getline(sin, row)) {
    CHECK(row.rfind("sft,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 10);

  const auto grpo = run("train-toy --grpo-only --steps 3");
  CHECK(grpo.code == 0);
  CHECK(grpo.out.find("lambda1: 0.5\n") != std::string::npos);
  CHECK(grpo.out.find("lambda2: 0.5\n") != std::string::npos);

  CHECK(run("train-toy --grpo-only --sft-only").code == 1);
  CHECK(run("train-toy " + kData + "/missing.jsonl").code == 2);
  CHECK(run("train-toy " + kData + "/clean.jsonl --steps 2 --sft-steps 2").code == 0);
}
