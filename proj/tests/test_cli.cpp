#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "trustsim/cli.hpp"
#include "trustsim/serialize.hpp"

namespace fs = std::filesystem;
using trustsim::io::Json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = trustsim::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kDiamond =
    R"({"nodes":[0,1,2,3],"links":[{"a":0,"b":1,"p":1.0},{"a":0,"b":2,"p":1.0},)"
    R"({"a":1,"b":3,"p":0.3},{"a":2,"b":3,"p":1.0}]})";

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(invoke({}).code == trustsim::cli::kExitUsage);
    CHECK(invoke({"frobnicate"}).code == trustsim::cli::kExitUsage);
    CHECK(invoke({"check", "--metric", "simple", "--requirement", "r1", "--trials", "0"}).code ==
          trustsim::cli::kExitUsage);
    CHECK(invoke({"check", "--metric", "dtm", "--requirement", "r1"}).code ==
          trustsim::cli::kExitUsage);
    CHECK(invoke({"check", "--metric", "simple", "--requirement", "r1", "--alpha", "1.5"}).code ==
          trustsim::cli::kExitUsage);
    CHECK(invoke({"simulate"}).code == trustsim::cli::kExitUsage);
    CHECK(invoke({"simulate", "--topology", "cli_scratch/missing.json"}).code ==
          trustsim::cli::kExitUsage);
    CHECK(invoke({"--version"}).out == trustsim::cli::tool_version() + "\n");
}

TEST_CASE("check exit codes follow the expected table") {
    const auto simple = invoke({"check", "--metric", "simple", "--requirement", "r1", "--trials",
                                "5000", "--vary-alpha"});
    CHECK(simple.code == trustsim::cli::kExitOk);
    const auto report = Json::parse(simple.out);
    CHECK(report["violations"].empty());
    CHECK(report["trials_run"] == 5000);

    // WTM R2 is expected to fail, so finding violations is the expected outcome.
    const auto wtm = invoke({"check", "--metric", "wtm", "--requirement", "r2", "--mode", "grid",
                             "--step", "0.1", "--k", "2", "--depth", "2"});
    CHECK(wtm.code == trustsim::cli::kExitOk);
    CHECK_FALSE(Json::parse(wtm.out)["violations"].empty());

    const auto wtm_r1 = invoke({"check", "--metric", "wtm", "--requirement", "r1", "--mode",
                                "grid", "--k", "2", "--depth", "2"});
    CHECK(wtm_r1.code == trustsim::cli::kExitOk);
}

TEST_CASE("check writes report and manifest, and the report replays") {
    const auto dir = scratch("check");
    const auto out = (dir / "wtm.json").string();
    const auto r = invoke({"check", "--metric", "wtm", "--requirement", "r2", "--mode", "grid",
                           "--k", "2", "--depth", "2", "--out", out});
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(out));
    const auto manifest = trustsim::io::read_json_file(out + ".manifest.json");
    CHECK(manifest["command"] == "check");
    CHECK(manifest["tool_version"] == trustsim::cli::tool_version());

    const auto replay = invoke({"replay", "--in", out});
    CHECK(replay.code == 0);
    CHECK(replay.out.find("holds") == std::string::npos);

    const auto again = (dir / "again.json").string();
    CHECK(invoke({"rerun", "--manifest", out + ".manifest.json", "--out", again}).code == 0);
    CHECK(slurp(again) == slurp(out));

    auto doc = trustsim::io::read_json_file(out);
    doc["violations"][0]["ratings"][0] = doc["violations"][0]["ratings"][0].get<double>() + 0.01;
    const auto tampered = (dir / "tampered.json").string();
    write(tampered, doc.dump());
    CHECK(invoke({"replay", "--in", tampered}).code == trustsim::cli::kExitUsage);
}

TEST_CASE("saturated WSES accumulators surface as a replayable finding") {
    // With alpha 0.01 the negative accumulator can shrink to ~1e-15, where two
    // distinct good ratings round to the same reputation just below 1.
    const auto dir = scratch("wses");
    const auto out = (dir / "wses.json").string();
    const auto r = invoke({"check", "--metric", "wses", "--requirement", "r1", "--alpha", "0.01",
                           "--seed", "3", "--trials", "100000", "--out", out});
    CHECK(r.code == trustsim::cli::kExitFinding);
    const auto doc = trustsim::io::read_json_file(out);
    REQUIRE_FALSE(doc["violations"].empty());
    const auto& reps = doc["violations"][0]["reputations"];
    CHECK(reps[1].get<double>() == reps[2].get<double>());
    CHECK(reps[2].get<double>() < 1.0);
    CHECK(invoke({"replay", "--in", out}).code == 0);
}

TEST_CASE("simulate writes manifest, trace and summary deterministically") {
    const auto dir = scratch("simulate");
    write(dir / "diamond.json", kDiamond);
    write(dir / "failures.json", R"([{"tick":50,"node":2,"event":"fail"},)"
                                 R"({"tick":900,"node":2,"event":"recover"}])");

    for (const std::string fmt : {"jsonl", "csv"}) {
        CAPTURE(fmt);
        const auto a = dir / ("a_" + fmt), b = dir / ("b_" + fmt), c = dir / ("c_" + fmt);
        const std::vector<std::string> base{
            "simulate", "--topology", (dir / "diamond.json").string(), "--failures",
            (dir / "failures.json").string(), "--rounds", "6", "--packets", "30",
            "--dio-period", "200", "--late-fraction", "0.2", "--loss-trigger", "0.3",
            "--seed", "11", "--trace-format", fmt};
        auto args_a = base, args_b = base;
        args_a.insert(args_a.end(), {"--out-dir", a.string()});
        args_b.insert(args_b.end(), {"--out-dir", b.string()});
        REQUIRE(invoke(args_a).code == 0);
        REQUIRE(invoke(args_b).code == 0);
        const auto trace = "trace." + fmt;
        CHECK(fs::file_size(a / trace) > 0);
        CHECK(slurp(a / trace) == slurp(b / trace));
        CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));

        // The manifest embeds the topology, so a rerun needs no other input.
        fs::remove(dir / "diamond.json");
        CHECK(invoke({"rerun", "--manifest", (a / "manifest.json").string(), "--out-dir",
                      c.string()})
                  .code == 0);
        CHECK(slurp(c / trace) == slurp(a / trace));
        write(dir / "diamond.json", kDiamond);

        const auto summary = trustsim::io::read_json_file(a / "summary.json");
        CHECK(summary["dio_count"] == 6);
    }
}

TEST_CASE("simulate rejects a disconnected topology") {
    const auto dir = scratch("disconnected");
    write(dir / "split.json", R"({"nodes":[0,1,2],"links":[{"a":0,"b":1,"p":1.0}]})");
    const auto r = invoke({"simulate", "--topology", (dir / "split.json").string(), "--out-dir",
                           (dir / "out").string()});
    CHECK(r.code == trustsim::cli::kExitUsage);
    CHECK(r.err.find("unreachable nodes: 2") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("report reproduces the comparison table") {
    const auto r = invoke({"report", "--format", "json", "--trials", "2000"});
    REQUIRE(r.code == 0);
    const auto table = Json::parse(r.out);
    CHECK(table["matches_expected"] == true);
    REQUIRE(table["rows"].size() == 3);
    for (const auto& row : table["rows"]) {
        const bool wtm = row["metric"] == "wtm";
        CHECK(row["r1"]["holds"] == true);
        CHECK(row["r2"]["holds"] == !wtm);
    }
    const auto text = invoke({"report", "--trials", "2000"});
    CHECK(text.code == 0);
    CHECK(text.out.find("violates") != std::string::npos);
}
