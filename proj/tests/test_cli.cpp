#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "volfactor/config.hpp"
#include "volfactor/report.hpp"

using namespace volfactor;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("default config carries the shipped parameter set") {
    const auto c = default_config();
    CHECK(c.model.mu_bar == 0.05);
    CHECK(c.model.m == 26.0);
    CHECK(c.model.sigma_bar == 0.2);
    CHECK(c.scheme.rho == 0.5);
    CHECK(c.scheme.rho1_slope == 0.0);
    CHECK(c.scheme.rho2_slope == -0.5);
    CHECK(c.scheme.rho12_slope == -1.0);
    CHECK(c.model.beta_bar == 5.0);
    CHECK(c.p == -1.0);
    CHECK(c.model.T == 1.0);
    CHECK(c.scheme.eps == 0.1);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("shipped default config file matches the built-in defaults") {
    const char* candidates[] = {"configs/default.json", "../configs/default.json",
                                "../../configs/default.json"};
    bool found = false;
    for (const char* path : candidates) {
        if (std::ifstream(path).good()) {
            const auto c = load_config(path);
            CHECK(config_hash(c) == config_hash(default_config()));
            found = true;
            break;
        }
    }
    CHECK(found);
}

TEST_CASE("config round trip preserves the hash") {
    const auto c = default_config();
    const auto text = config_to_json_text(c);
    const auto back = config_from_json_text(text);
    CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config error paths") {
    CHECK_THROWS_AS(config_from_json_text(""), ParseError);
    CHECK_THROWS_AS(config_from_json_text("[1,2]"), ParseError);
    CHECK_THROWS_AS(config_from_json_text(R"({"bogus": 1})"), ParseError);
    CHECK_THROWS_AS(config_from_json_text(R"({"model": {"bogus": 1}})"), ParseError);
    CHECK_THROWS_AS(config_from_json_text(R"({"correlation": {"eps": 3.0}})"), ValidationError);
    CHECK_THROWS_AS(config_from_json_text(R"({"model": {"p": 0.0}})"), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ParseError);
}

TEST_CASE("csv writer: precision, determinism, finiteness guard") {
    const std::string dir = std::filesystem::temp_directory_path() / "volfactor_test_csv";
    ensure_dir(dir);
    std::vector<std::vector<double>> rows{{1.0 / 3.0, 2.0}, {1e-17, -5.0}};
    write_csv(dir + "/a.csv", "x,y", rows);
    write_csv(dir + "/b.csv", "x,y", rows);
    const auto a = slurp(dir + "/a.csv");
    CHECK(a == slurp(dir + "/b.csv"));
    CHECK(a.find("0.33333333333333331") != std::string::npos);

    rows[0][0] = std::nan("");
    CHECK_THROWS_AS(write_csv(dir + "/c.csv", "x,y", rows), StabilityFailure);
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest embeds the exact config") {
    const auto c = default_config();
    const auto text = manifest_json(c, {"x.csv"}, 1.25);
    CHECK(text.find(config_hash(c)) != std::string::npos);
    CHECK(text.find("\"mu_bar\": 0.05") != std::string::npos);
    CHECK(text.find("x.csv") != std::string::npos);
}
