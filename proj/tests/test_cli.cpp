#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <vector>

#include "kivi/cli.hpp"

namespace {

int run(std::initializer_list<const char*> args, std::string* stdout_text = nullptr,
        std::string* stderr_text = nullptr) {
    std::vector<const char*> argv{"kivi"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out, err;
    const int code = kivi::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (stdout_text) *stdout_text = out.str();
    if (stderr_text) *stderr_text = err.str();
    return code;
}

}  // namespace

TEST_CASE("no arguments prints help and exits 2") {
    std::string out;
    CHECK(run({}, &out) == 2);
    CHECK(out.find("estimate") != std::string::npos);
    CHECK(out.find("sweep") != std::string::npos);
}

TEST_CASE("unknown flag exits 2 with help text") {
    std::string err;
    CHECK(run({"estimate", "--no-such-flag"}, nullptr, &err) == 2);
    CHECK(err.find("--no-such-flag") != std::string::npos);
}

TEST_CASE("estimate --preset opt175b reports ~1.2TB baseline") {
    std::string out;
    REQUIRE(run({"estimate", "--preset", "opt175b"}, &out) == 0);
    CHECK(out.find("fp16_bytes = 1314259992576") != std::string::npos);
    CHECK(out.find("TiB") != std::string::npos);
}

TEST_CASE("estimate with budget reports max batch for both modes") {
    std::string out;
    REQUIRE(run({"estimate", "--preset", "llama2-7b", "--budget-bytes", "100000000000"}, &out) ==
            0);
    CHECK(out.find("max_batch_fp16 = ") != std::string::npos);
    CHECK(out.find("max_batch_kivi = ") != std::string::npos);
}

TEST_CASE("sweep with synthetic outliers picks K-C / V-T") {
    std::string out;
    REQUIRE(run({"sweep", "--bits", "2", "--synthetic-outliers", "--seed", "3"}, &out) == 0);
    CHECK(out.find("best_config = K - C, V - T") != std::string::npos);
}

TEST_CASE("bench runs a tiny workload") {
    std::string out;
    REQUIRE(run({"bench", "--prompt-len", "40", "--gen-len", "4", "--layers", "1", "--kv-heads",
                 "1", "--head-dim", "32", "--residual", "32", "--seed", "1"},
                &out) == 0);
    CHECK(out.find("tokens_per_sec = ") != std::string::npos);
    CHECK(out.find("peak_cache_bytes = ") != std::string::npos);
}

TEST_CASE("dump-roundtrip and analyze") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "kivi_cli_dump.bin").string();
    std::string out;
    REQUIRE(run({"dump-roundtrip", path.c_str(), "--seed", "5"}, &out) == 0);
    CHECK(out.find("roundtrip = ok") != std::string::npos);

    // Re-ingest the same dump through analyze.
    std::string report;
    const int code = run({"analyze", path.c_str(), "--bits", "2", "--group-size", "4"}, &report);
    CHECK(code == 0);
    CHECK(report.find("top_channels") != std::string::npos);
    CHECK(report.find("value_output_err") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("runtime errors exit 1") {
    std::string err;
    CHECK(run({"analyze", "/nonexistent/kivi.bin"}, nullptr, &err) == 1);
    CHECK(err.find("error") != std::string::npos);
}
