#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "support/test_support.hpp"
#include "vsi/cli.hpp"
#include "vsi/harness.hpp"

using namespace vsi;
using nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/// Writes a generated case as the input files `vsi search` expects.
struct SearchInputs {
    TempDir dir;
    SyntheticCase c = generate_case(1, {});
    std::string srt = dir.file("subs.srt");
    std::string targets = dir.file("targets.json");
    std::string script = dir.file("detections.json");

    SearchInputs() {
        write_file(srt, to_srt(c.track));
        write_file(targets, targets_to_json(c.targets).dump());
        write_file(script, detector_script_to_json(c.detector_script).dump());
    }

    std::vector<std::string> args(const std::string& detector = "", const std::string& encoder = "stub") const {
        return {"search",    "--frames",  std::to_string(c.timeline.frame_count()),
                "--fps",     "30",        "--subtitles",
                srt,         "--query",   c.query,
                "--targets", targets,     "--detector",
                detector.empty() ? "stub:" + script : detector,
                "--encoder", encoder};
    }
};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
    ~ScopedEnv() { ::unsetenv(name_); }

private:
    const char* name_;
};

}  // namespace

TEST_CASE("search: valid invocation writes K keyframes") {
    SearchInputs in;
    const auto out_path = in.dir.file("result.json");
    const auto r = run_cli(in.args() + std::vector<std::string>{"--output", out_path, "--top-k", "3"});
    CHECK(r.code == 0);
    const auto doc = json::parse(read_file(out_path));
    CHECK(doc.at("keyframes").size() == 3);
    CHECK(doc.at("config").at("top_k") == 3);
    CHECK(doc.contains("termination"));
    CHECK(doc.at("targets").at("targets").size() == 2);
}

TEST_CASE("search: stdout when no --output, and trace lines") {
    SearchInputs in;
    const auto trace = in.dir.file("trace.jsonl");
    const auto r = run_cli(in.args() + std::vector<std::string>{"--trace", trace, "--max-grid-side", "3"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    std::istringstream lines(read_file(trace));
    std::string line;
    std::int64_t count = 0;
    while (std::getline(lines, line)) {
        const auto rec = json::parse(line);
        CHECK(rec.at("iteration") == count + 1);
        ++count;
    }
    CHECK(count == doc.at("iterations").get<std::int64_t>());
}

TEST_CASE("search: missing --query is a usage error naming the flag") {
    SearchInputs in;
    auto args = in.args();
    const auto it = std::find(args.begin(), args.end(), "--query");
    args.erase(it, it + 2);
    const auto r = run_cli(args);
    CHECK(r.code == 2);
    CHECK(r.err.find("--query") != std::string::npos);
}

TEST_CASE("search: dead endpoints are backend failures") {
    SearchInputs in;
    CHECK(run_cli(in.args("proc:false")).code == 3);
    CHECK(run_cli(in.args("http://127.0.0.1:1")).code == 3);
    CHECK(run_cli(in.args("http:http://127.0.0.1:1/detect")).code == 3);
    CHECK(run_cli(in.args("", "proc:false")).code == 3);
}

TEST_CASE("search: invalid inputs are usage errors") {
    SearchInputs in;
    CHECK(run_cli(in.args() + std::vector<std::string>{"--text-weight", "1.5"}).code == 2);
    CHECK(run_cli(in.args() + std::vector<std::string>{"--frame-budget", "0"}).code == 2);
    CHECK(run_cli(in.args("bogus:thing")).code == 2);
    CHECK(run_cli(in.args("stub:" + in.dir.file("missing.json"))).code == 2);

    write_file(in.targets, R"({"targets":[]})");
    CHECK(run_cli(in.args()).code == 2);

    SearchInputs in2;
    write_file(in2.srt, "1\n00:00:01,000 --> 00:00:00,500\nbackwards\n");
    const auto r = run_cli(in2.args());
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);

    CHECK(run_cli({"search", "--frames", "0"}).code == 2);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("search: proc backends give the same answer as in-process stubs") {
    SearchInputs in;
    const std::string stub = VSI_STUB_BACKEND_BIN;
    const auto local = run_cli(in.args());
    const auto remote = run_cli(in.args("proc:" + stub + " --script " + in.script, "proc:" + stub));
    REQUIRE(local.code == 0);
    REQUIRE(remote.code == 0);
    CHECK(json::parse(local.out) == json::parse(remote.out));
}

TEST_CASE("search: detector dying mid-search exits 3") {
    SearchInputs in;
    const std::string stub = VSI_STUB_BACKEND_BIN;
    const auto r = run_cli(in.args("proc:" + stub + " --script " + in.script + " --exit-after 1") +
                           std::vector<std::string>{"--max-grid-side", "2"});
    CHECK(r.code == 3);
}

TEST_CASE("config precedence: defaults < VSI_CONFIG < --config < flags") {
    SearchInputs in;
    write_file(in.dir.file("env.cfg"), "top_k = 2\nframe_budget = 50\nmax_grid_side = 3\n");
    write_file(in.dir.file("file.cfg"), "top_k = 3\n");
    ScopedEnv env("VSI_CONFIG", in.dir.file("env.cfg"));

    auto cfg_of = [&](std::vector<std::string> extra) {
        const auto r = run_cli(in.args() + extra);
        REQUIRE(r.code == 0);
        return json::parse(r.out).at("config");
    };
    const auto from_env = cfg_of({});
    CHECK(from_env.at("top_k") == 2);
    CHECK(from_env.at("frame_budget") == 50);

    const auto from_file = cfg_of({"--config", in.dir.file("file.cfg")});
    CHECK(from_file.at("top_k") == 3);
    CHECK(from_file.at("frame_budget") == 128);

    const auto from_flag = cfg_of({"--config", in.dir.file("file.cfg"), "--top-k", "1"});
    CHECK(from_flag.at("top_k") == 1);
}

TEST_CASE("config: bad files are usage errors") {
    SearchInputs in;
    write_file(in.dir.file("bad.cfg"), "top_k = many\n");
    CHECK(run_cli(in.args() + std::vector<std::string>{"--config", in.dir.file("bad.cfg")}).code == 2);
    CHECK(run_cli(in.args() + std::vector<std::string>{"--config", in.dir.file("none.cfg")}).code == 2);
}

TEST_CASE("bench: two text weights give a two-row report") {
    TempDir dir;
    const auto report = dir.file("report.json");
    const auto r = run_cli({"bench", "--generate", "7,100", "--text-weight", "0.0", "--text-weight", "1.0",
                            "--output", report, "--jobs", "4"});
    CHECK(r.code == 0);
    const auto doc = json::parse(read_file(report));
    REQUIRE(doc.at("rows").size() == 2);
    CHECK(doc["rows"][0]["config"]["text_weight"] == 0.0);
    CHECK(doc["rows"][1]["config"]["text_weight"] == 1.0);
    CHECK(doc["rows"][0]["cases"] == 100);
    CHECK(r.out.find("hit_rate") != std::string::npos);
}

TEST_CASE("bench: identical seeds give byte-identical reports") {
    TempDir dir;
    const std::vector<std::string> common{"bench", "--generate", "3,20,n_gt=2", "--text-weight", "0.5",
                                          "--max-grid-side", "3", "--frame-budget", "100", "--seed", "5"};
    REQUIRE(run_cli(common + std::vector<std::string>{"--output", dir.file("a.json"), "--table", dir.file("a.txt")})
                .code == 0);
    REQUIRE(run_cli(common + std::vector<std::string>{"--output", dir.file("b.json"), "--table", dir.file("b.txt"),
                                                      "--jobs", "3"})
                .code == 0);
    CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));
    CHECK(read_file(dir.file("a.txt")) == read_file(dir.file("b.txt")));
}

TEST_CASE("bench: config files and saved corpora") {
    TempDir dir;
    write_file(dir.file("fast.cfg"), "frame_budget = 32\ntext_weight = 0.3\n");
    REQUIRE(run_cli({"bench", "--generate", "1,4", "--text-weight", "1", "--write-corpus", dir.file("corpus")}).code ==
            0);
    const auto r = run_cli({"bench", "--corpus", dir.file("corpus/manifest.json"), "--config", dir.file("fast.cfg"),
                            "--output", dir.file("r.json")});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(read_file(dir.file("r.json")));
    REQUIRE(doc.at("rows").size() == 1);
    CHECK(doc["rows"][0]["label"] == "fast");
    CHECK(doc["rows"][0]["config"]["frame_budget"] == 32);
    CHECK(doc["rows"][0]["cases"] == 4);
}

TEST_CASE("bench: bad parameters are usage errors") {
    TempDir dir;
    write_file(dir.file("empty.json"), "[]");
    CHECK(run_cli({"bench", "--corpus", dir.file("empty.json"), "--text-weight", "1"}).code == 2);
    CHECK(run_cli({"bench", "--generate", "7,10", "--text-weight", "1.5"}).code == 2);
    CHECK(run_cli({"bench", "--generate", "7,0", "--text-weight", "1"}).code == 2);
    CHECK(run_cli({"bench", "--generate", "7", "--text-weight", "1"}).code == 2);
    CHECK(run_cli({"bench", "--generate", "7,10,colour=blue", "--text-weight", "1"}).code == 2);
    CHECK(run_cli({"bench", "--generate", "7,10"}).code == 2);
    CHECK(run_cli({"bench", "--text-weight", "1"}).code == 2);
    CHECK(run_cli({"bench", "--corpus", dir.file("nope.json"), "--text-weight", "1"}).code == 2);
}

TEST_CASE("validate subcommand") {
    SearchInputs in;
    CHECK(run_cli({"validate", "--subtitles", in.srt, "--targets", in.targets, "--detector-script", in.script}).code ==
          0);
    write_file(in.dir.file("case.json"), case_to_json(in.c).dump());
    CHECK(run_cli({"validate", "--case", in.dir.file("case.json")}).code == 0);
    write_file(in.dir.file("bad.srt"), "1\nnot a timestamp\nx\n");
    const auto r = run_cli({"validate", "--subtitles", in.dir.file("bad.srt")});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(run_cli({"validate"}).code == 2);
}

TEST_CASE("the vsi binary reports exit codes") {
    SearchInputs in;
    auto shell = [](const std::vector<std::string>& args) {
        std::string cmd = VSI_CLI_BIN;
        for (const auto& a : args)
            cmd += " '" + a + "'";
        cmd += " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    CHECK(shell(in.args()) == 0);
    CHECK(shell(in.args("proc:false")) == 3);
    CHECK(shell({"search", "--frames", "10"}) == 2);
}
