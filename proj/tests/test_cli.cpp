// End-to-end checks of the command-line tool: exit codes, output formats,
// and the simulate trace format. Each case shells out to the built binary.
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sbm/emit.hpp"

namespace {

const std::string kCli = SBM_CLI_PATH;
const std::string kSource = SBM_SOURCE_DIR;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::string scratch_path(const std::string& name) {
  static const std::string dir = [] {
    auto d = std::filesystem::temp_directory_path() / "sbm_cli_tests";
    std::filesystem::create_directories(d);
    return d.string();
  }();
  return dir + "/" + name;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string stem = scratch_path("run" + std::to_string(counter++));
  const int status = std::system((kCli + " " + args + " > " + stem + ".out 2> " + stem + ".err").c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(stem + ".out");
  r.err = slurp(stem + ".err");
  return r;
}

std::string write_scratch(const std::string& name, const std::string& content) {
  const std::string path = scratch_path(name);
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

const std::string kGateAnalysis =
    "controller Gate {\n"
    "  processModel {\n"
    "    x: { true, false }\n"
    "  }\n"
    "  controlActions { CA }\n"
    "  ucas {\n"
    "    U1 {\n"
    "      action CA\n"
    "      type provided\n"
    "      contexts {\n"
    "        C1 [x = true]\n"
    "      }\n"
    "    }\n"
    "  }\n"
    "}\n";

}  // namespace

TEST_CASE("verify on the shipped example holds at the default bound") {
  RunResult r = run_cli("verify " + kSource + "/examples/acc.stpa");
  CHECK(r.code == 0);
  CHECK(r.out.find("ok — checked 324726 input lassos up to length 6") != std::string::npos);
  CHECK(r.out.find("violated") == std::string::npos);
  CHECK(r.err.empty());
}

TEST_CASE("validate splits clean, conflicting, and unreadable analyses") {
  CHECK(run_cli("validate " + kSource + "/examples/acc.stpa").code == 0);

  RunResult conflict = run_cli("validate " + kSource + "/tests/fixtures/conflict.stpa");
  CHECK(conflict.code == 1);
  CHECK(conflict.out.find("ERROR") != std::string::npos);
  CHECK(conflict.out.find("demanded and forbidden") != std::string::npos);

  CHECK(run_cli("validate " + scratch_path("missing.stpa")).code == 2);

  const std::string broken = write_scratch("broken.stpa", "controller Broken {\n");
  RunResult malformed = run_cli("validate " + broken);
  CHECK(malformed.code == 2);
  CHECK(malformed.err.find("error") != std::string::npos);

  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("ltl prints one obligation per rule context") {
  const std::string gate = write_scratch("gate.stpa", kGateAnalysis);
  RunResult r = run_cli("ltl " + gate);
  CHECK(r.code == 0);
  CHECK(r.out == "U1.C1: G ((x == true) -> !(controlAction == CA))\n");

  RunResult as_json = run_cli("ltl " + gate + " --json");
  CHECK(as_json.code == 0);
  const nlohmann::json j = nlohmann::json::parse(as_json.out);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  CHECK(j[0]["id"] == "U1.C1");
  CHECK(j[0]["shape"] == "forbidden");
  CHECK(j[0]["formula"] == "G ((x == true) -> !(controlAction == CA))");
}

TEST_CASE("synth picks the format from the flag or the extension") {
  const std::string acc = kSource + "/examples/acc.stpa";

  const std::string text_out = scratch_path("acc.sbm.txt");
  RunResult text = run_cli("synth " + acc + " -o " + text_out);
  CHECK(text.code == 0);
  CHECK(text.out.find("4 states, 12 transitions") != std::string::npos);
  CHECK(slurp(text_out).find("statechart {") != std::string::npos);
  CHECK(slurp(text_out).find("@LTL ") != std::string::npos);

  const std::string json_out = scratch_path("acc.sbm.json");
  CHECK(run_cli("synth " + acc + " -o " + json_out).code == 0);
  const sbm::Document doc = sbm::parse_json(slurp(json_out));
  CHECK(doc.chart.states.size() == 4);
  CHECK(doc.formulas.size() == 7);

  const std::string dot_out = scratch_path("acc.dot");
  CHECK(run_cli("synth " + acc + " -o " + dot_out).code == 0);
  CHECK(slurp(dot_out).find("digraph statechart {") != std::string::npos);

  const std::string forced = scratch_path("acc_as_dot.sbm.txt");
  CHECK(run_cli("synth " + acc + " -o " + forced + " --format dot").code == 0);
  CHECK(slurp(forced).find("digraph statechart {") != std::string::npos);

  CHECK(run_cli("synth " + kSource + "/tests/fixtures/conflict.stpa -o " +
                scratch_path("conflict.sbm.txt"))
            .code == 1);
}

TEST_CASE("verify writes the JSON report and tolerates look-ahead rules") {
  const std::string report = scratch_path("acc_report.json");
  RunResult r = run_cli("verify " + kSource + "/examples/acc.stpa --bound 3 --report " + report);
  CHECK(r.code == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(report));
  CHECK(j["ok"] == true);
  CHECK(j["bound"] == 3);
  CHECK(j["formulas"].size() == 7);

  const std::string early = write_scratch("early.stpa",
                                          "controller Early {\n"
                                          "  processModel {\n"
                                          "    x: { true, false }\n"
                                          "  }\n"
                                          "  controlActions { go }\n"
                                          "  ucas {\n"
                                          "    U1 {\n"
                                          "      action go\n"
                                          "      type notProvided\n"
                                          "      contexts {\n"
                                          "        C1 [x = false]\n"
                                          "      }\n"
                                          "    }\n"
                                          "    U2 {\n"
                                          "      action go\n"
                                          "      type tooEarly\n"
                                          "      contexts {\n"
                                          "        C1 [x = true]\n"
                                          "      }\n"
                                          "    }\n"
                                          "  }\n"
                                          "}\n");
  RunResult early_run = run_cli("verify " + early + " --bound 3");
  CHECK(early_run.code == 0);
  CHECK(early_run.out.find("note [U2.C1]") != std::string::npos);
  CHECK(early_run.out.find("U2.C1 forbiddenAtEntry: not guaranteed (violated)") !=
        std::string::npos);
  CHECK(early_run.out.find("ok — checked") != std::string::npos);

  CHECK(run_cli("verify " + early + " --bound 0").code == 2);
}

TEST_CASE("simulate steps the emitted machine over a scripted trace") {
  const std::string machine = scratch_path("sim.sbm.json");
  REQUIRE(run_cli("synth " + kSource + "/examples/acc.stpa -o " + machine).code == 0);

  RunResult looped = run_cli("simulate " + machine + " --inputs " + kSource + "/examples/acc.inputs");
  CHECK(looped.code == 0);
  CHECK(looped.out ==
        "reaction 0: state=s0 controlAction=none\n"
        "reaction 1: state=s_stop controlAction=stop\n"
        "reaction 2: state=s_accelerate_C1 controlAction=accelerate\n"
        "reaction 3: state=s0 controlAction=none\n"
        "reaction 4: state=s0 controlAction=none\n"
        "loops back to reaction 4\n");

  const std::string finite = write_scratch("finite.trace",
                                           "# no loop marker: plain finite run\n"
                                           "speed = desired, timeGap = tooSmall\n"
                                           "speed = desired, timeGap = enough\n");
  RunResult straight = run_cli("simulate " + machine + " --inputs " + finite);
  CHECK(straight.code == 0);
  CHECK(straight.out ==
        "reaction 0: state=s0 controlAction=none\n"
        "reaction 1: state=s_stop controlAction=stop\n"
        "reaction 2: state=s0 controlAction=none\n");

  const std::string unknown = write_scratch("unknown.trace", "speed = warp, timeGap = enough\n");
  RunResult bad_value = run_cli("simulate " + machine + " --inputs " + unknown);
  CHECK(bad_value.code == 2);
  CHECK(bad_value.err.find("expected var=value") != std::string::npos);

  const std::string partial = write_scratch("partial.trace", "timeGap = enough\n");
  RunResult incomplete = run_cli("simulate " + machine + " --inputs " + partial);
  CHECK(incomplete.code == 2);
  CHECK(incomplete.err.find("no value for variable 'speed'") != std::string::npos);

  const std::string empty = write_scratch("empty.trace", "# nothing\n");
  CHECK(run_cli("simulate " + machine + " --inputs " + empty).code == 2);

  const std::string not_json = write_scratch("broken.sbm.json", "{\"statechart\": 1}");
  CHECK(run_cli("simulate " + not_json + " --inputs " + finite).code == 2);
}
