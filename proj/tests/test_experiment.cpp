#include <algorithm>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "palentir/experiment.hpp"

using namespace palentir;
namespace fs = std::filesystem;

namespace {

bool mentions(const std::vector<std::string>& diags, const std::string& s) {
    return std::any_of(diags.begin(), diags.end(), [&](const std::string& d) { return d.find(s) != std::string::npos; });
}

json tiny(const std::string& out) {
    return json{{"experiment", "denoise"},
                {"output", out},
                {"phantom", {{"recipe", "fig2-unit"}, {"n", 16}}},
                {"noise", {{"kind", "gaussian"}, {"snr_db", 20.0}, {"seed", 3}}},
                {"pals", {{"basis_n", 4}, {"mu", 10.0}, {"w", 0.05}, {"c", 0.01}, {"seed", 1}}},
                {"solver", {{"max_iter", 30}}},
                {"outer", {{"c_min", 0.0}, {"c_max", 1.0}, {"delta", 5}, {"k_max", 2}}}};
}

std::string scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "palentir_tests" / name;
    fs::remove_all(p);
    return p.string();
}

} // namespace

TEST(Config, EmptyConfigListsRequiredFields) {
    const auto d = validate(json::object());
    for (const char* f : {"experiment", "phantom", "noise", "pals", "output"}) EXPECT_TRUE(mentions(d, f)) << f;
    EXPECT_TRUE(mentions(d, "missing required field"));
}

TEST(Config, RejectsEvenWindowAndBadLevel) {
    json j = tiny("x");
    j["outer"]["delta"] = 28;
    EXPECT_TRUE(mentions(validate(j), "delta must be odd"));
    j = tiny("x");
    j["pals"]["c"] = 1.5;
    EXPECT_TRUE(mentions(validate(j), "c must lie in (0,1)"));
    j = tiny("x");
    j["pals"]["colour"] = 1;
    EXPECT_FALSE(validate(j).empty());
    j = tiny("x");
    j["noise"]["snr_db"] = "loud";
    EXPECT_FALSE(validate(j).empty());
    EXPECT_THROW(load_config(json::object()), ConfigError);
}

TEST(Config, EveryPresetValidates) {
    for (const auto& n : preset_names()) EXPECT_TRUE(validate(preset(n)).empty()) << n;
    EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, EchoRoundTrips) {
    for (const auto& n : preset_names()) {
        const RunConfig c = load_config(preset(n));
        const json echo = to_json(c);
        EXPECT_TRUE(validate(echo).empty()) << n;
        EXPECT_EQ(to_json(load_config(echo)), echo) << n;
    }
}

TEST(Pipeline, RerunFromEchoIsBitExact) {
    const std::string a = scratch("run_a"), b = scratch("run_b");
    const RunSummary s = run(load_config(tiny(a)));
    EXPECT_NEAR(s.realized_snr_db, 20.0, 1e-9);
    ASSERT_EQ(s.metrics.size(), 2u);
    for (const char* f : {"config.json", "truth.palf", "data.palf", "recon.palf", "phi.palf", "c_high.palf",
                          "c_low.palf", "params.palf", "outer.csv", "metrics.csv", "solve_0.csv", "recon.pgm"})
        EXPECT_TRUE(fs::exists(a + "/" + f)) << f;

    json echo = read_json(a + "/config.json");
    echo["output"] = b;
    run(load_config(echo));
    EXPECT_EQ(read_field(a + "/recon.palf").values(), read_field(b + "/recon.palf").values());
    EXPECT_EQ(read_vector(a + "/params.palf"), read_vector(b + "/params.palf"));
}

TEST(Pipeline, MetricsExperimentComparesFiles) {
    const std::string d = scratch("metrics");
    fs::create_directories(d);
    const ScalarField t = load_truth({"fig2-unit", "", 16, 1.0});
    ScalarField u = t;
    u[5] += 0.25;
    write_field(t, d + "/ref.palf");
    write_field(u, d + "/sub.palf");
    json j{{"experiment", "metrics"},
           {"output", d + "/out"},
           {"metrics", {{"reference", d + "/ref.palf"}, {"subject", d + "/sub.palf"}}}};
    const RunSummary s = run(load_config(j));
    ASSERT_EQ(s.metrics.size(), 1u);
    EXPECT_DOUBLE_EQ(s.metrics[0].mse, 0.0625 / 256.0);
}

TEST(Pipeline, ReadJsonReportsParseErrors) {
    const std::string d = scratch("bad");
    fs::create_directories(d);
    std::ofstream(d + "/c.json") << "{ \"experiment\": ";
    EXPECT_THROW(read_json(d + "/c.json"), Error);
    EXPECT_THROW(read_json(d + "/missing.json"), IoError);
}
