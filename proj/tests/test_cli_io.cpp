#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "rqed/commands.hpp"

using namespace rqed;
namespace fs = std::filesystem;

namespace {

const fs::path scenario_dir = RQED_SCENARIO_DIR;

fs::path fresh_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("rqed_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& f)
{
    std::ifstream in(f, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string config_message(const json& j)
{
    try {
        parse_scenario(j);
    } catch (const config_error& e) {
        return e.what();
    }
    return "";
}

json minimal()
{
    return json::parse(R"({"grid": {"period": 25.132741228718345, "n": 64}, "modes": {"broad": {"omega": [1.0]}}})");
}

StationaryKernel random_kernel(const TimeGrid& g, const SiteSet& s, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    StationaryKernel K(g, s);
    for (auto& v : K.values) v = {nd(rng), nd(rng) * 1e-300};
    K.values[0] = {std::numeric_limits<double>::denorm_min(), -0.0};
    return K;
}

} // namespace

// ---------------------------------------------------------------------------------------------
// Scenario validation.

TEST(Scenario, EmptyScenarioNamesMissingField) { EXPECT_EQ(config_message(json::object()), "missing field: grid"); }

TEST(Scenario, NestedMissingFieldsAreNamedWithPath)
{
    json j = minimal();
    j["grid"].erase("n");
    EXPECT_EQ(config_message(j), "missing field: grid.n");
    j = minimal();
    j.erase("modes");
    EXPECT_EQ(config_message(j), "missing field: modes");
    j = minimal();
    j["modes"] = {{"narrow", {{"omega", {1.0}}}}};
    EXPECT_EQ(config_message(j), "missing field: modes.narrow.omega0");
    j = minimal();
    j["sources"] = {{"J_e", {{{"kind", "packet"}, {"center", 1.0}}}}};
    EXPECT_EQ(config_message(j), "missing field: sources.J_e[0].width");
}

TEST(Scenario, WrongTypesAndValuesAreConfigurationErrors)
{
    json j = minimal();
    j["grid"]["n"] = "many";
    EXPECT_NE(config_message(j).find("grid.n"), std::string::npos);
    j = minimal();
    j["modes"]["broad"]["omega"] = {-1.0};
    EXPECT_FALSE(config_message(j).empty());
    j = minimal();
    j["device"] = {{"kind", "qutrit"}};
    EXPECT_NE(config_message(j).find("device.kind"), std::string::npos);
    j = minimal();
    j["sources"] = {{"J_e", {{{"kind", "chirp"}}}}};
    EXPECT_NE(config_message(j).find("kind"), std::string::npos);
}

TEST(Scenario, BudgetsRespectHardCaps)
{
    json j = minimal();
    j["budgets"] = {{"order", 4}};
    EXPECT_NE(config_message(j).find("hard cap"), std::string::npos);
    j["budgets"] = {{"colours", 2}};
    EXPECT_EQ(config_message(j), "unknown budget: colours");
    EXPECT_THROW(parse_scenario(minimal(), ".", {{"wick_factors", 10}}), config_error);
    const Scenario sc = parse_scenario(minimal(), ".", {{"wick_factors", 4}, {"cutoff", 5}});
    EXPECT_EQ(sc.budgets.wick_factors, 4);
    EXPECT_EQ(sc.budgets.cutoff, 5);
    j = minimal();
    j["device"] = {{"kind", "oscillator"}, {"omega", 1.0}, {"cutoff", 8}, {"current", {0.2}}};
    EXPECT_NE(config_message(j).find("budget violation"), std::string::npos);
}

TEST(Scenario, CommensurabilityWarnings)
{
    EXPECT_TRUE(parse_scenario(minimal()).warnings.empty());
    json j = minimal();
    j["modes"]["broad"]["omega"] = {1.1};
    const Scenario sc = parse_scenario(j);
    ASSERT_EQ(sc.warnings.size(), 1u);
    EXPECT_NE(sc.warnings[0].find("not commensurate"), std::string::npos);
}

TEST(Scenario, SourcePrimitivesMatchTheirDefinitions)
{
    json j = minimal();
    j["sites"] = 2;
    j["sources"] = {{"J_e",
                     {{{"kind", "spike"}, {"site", 1}, {"sample", 5}, {"amplitude", {0.0, 2.0}}},
                      {{"kind", "tone"}, {"site", 0}, {"omega", 1.0}, {"phase", 0.3}, {"amplitude", 0.5}}}},
                    {"A_e", {{{"kind", "packet"}, {"center", 3.0}, {"width", 0.5}, {"omega", 2.0}}}}};
    const Scenario sc = parse_scenario(j);
    const Signal& J = *sc.sources.J_e;
    const Signal& A = *sc.sources.A_e;
    for (int k = 0; k < sc.grid.n; ++k) {
        const double t = sc.grid.time(k);
        EXPECT_NEAR(std::abs(J(0, k) - 0.5 * std::cos(t + 0.3)), 0.0, 1e-15);
        EXPECT_EQ(J(1, k), k == 5 ? cplx(0.0, 2.0) : cplx(0.0));
        for (int x = 0; x < 2; ++x)
            EXPECT_NEAR(std::abs(A(x, k) - std::exp(-0.5 * std::pow((t - 3.0) / 0.5, 2)) * std::cos(2.0 * t)), 0.0, 1e-15);
    }
    EXPECT_FALSE(sc.sources.D_e.has_value());
}

TEST(Scenario, TableSourcesReadRelativeToScenario)
{
    const fs::path d = fresh_dir("table");
    {
        std::ofstream t(d / "drive.txt");
        t << "# site sample re im\n0 3 0.25 -1.5\n0 7 1e-3 0\n";
    }
    json j = minimal();
    j["sources"] = {{"J_e", {{{"kind", "table"}, {"file", "drive.txt"}, {"amplitude", 2.0}}}}};
    std::ofstream(d / "s.json") << j.dump();
    const Scenario sc = load_scenario(d / "s.json");
    EXPECT_EQ((*sc.sources.J_e)(0, 3), cplx(0.5, -3.0));
    EXPECT_EQ((*sc.sources.J_e)(0, 7), cplx(2e-3, 0.0));
    j["sources"]["J_e"][0]["file"] = "absent.txt";
    std::ofstream(d / "s.json") << j.dump();
    try {
        load_scenario(d / "s.json");
        FAIL() << "missing table accepted";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("does not exist"), std::string::npos);
    }
}

TEST(Scenario, HashFollowsContent)
{
    const Scenario a = parse_scenario(minimal()), b = parse_scenario(minimal());
    EXPECT_EQ(a.hash(), b.hash());
    json j = minimal();
    j["seed"] = 2;
    EXPECT_NE(parse_scenario(j).hash(), a.hash());
    const double x = 1.0;
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull); // published FNV-1a 64 test vector
    EXPECT_NE(fnv1a_value(x, 1), fnv1a_value(-x, 1));
}

TEST(Scenario, LeakyProfileScalesTolerances)
{
    Tolerances t;
    t.scale(1e3);
    EXPECT_DOUBLE_EQ(t.kernel, 1e-7);
    EXPECT_DOUBLE_EQ(t.wick, 1e-8);
    EXPECT_DOUBLE_EQ(t.rwa_slope, 0.2);
}

// ---------------------------------------------------------------------------------------------
// Artifact round trips.

class KernelFileRoundTrip : public ::testing::TestWithParam<Encoding> {};

TEST_P(KernelFileRoundTrip, BitExact)
{
    const fs::path d = fresh_dir(std::string("kernel_") + to_string(GetParam()));
    const TimeGrid g{0.25, 0.1 / 3.0, 24};
    const SiteSet s({"p", "q"}, {0.7, 1.0 / 3.0});
    const StationaryKernel K = random_kernel(g, s, 5);
    write_kernel(d / "k.rqk", K, "plus", ModeSet::single(Band::broad, 1.0, 2), GetParam());
    const KernelFile kf = read_kernel(d / "k.rqk");
    EXPECT_EQ(kf.kernel.grid, g);
    EXPECT_EQ(kf.kernel.sites.labels, s.labels);
    EXPECT_EQ(kf.kernel.sites.weights, s.weights);
    ASSERT_EQ(kf.kernel.values.size(), K.values.size());
    for (size_t i = 0; i < K.values.size(); ++i) {
        EXPECT_EQ(kf.kernel.values[i].real(), K.values[i].real());
        EXPECT_EQ(kf.kernel.values[i].imag(), K.values[i].imag());
    }
    EXPECT_EQ(kf.header.at("modeset"), hex64(modeset_hash(ModeSet::single(Band::broad, 1.0, 2))));
}

class CumulantFileRoundTrip : public ::testing::TestWithParam<Encoding> {};

TEST_P(CumulantFileRoundTrip, BitExact)
{
    const fs::path d = fresh_dir(std::string("cumulant_") + to_string(GetParam()));
    const PointSet P = PointSet::window(TimeGrid{0.0, 0.3, 12}, SiteSet::uniform(2), 3, 2);
    const CumulantSet Q = synthetic_bare_cumulants(P, 17);
    OutputSpec o;
    o.format = GetParam() == Encoding::text ? "text" : "binary";
    const auto files = write_cumulant_set(d, "q", Q, o);
    EXPECT_EQ(files.size(), Q.blocks.size());
    const CumulantSet R = read_cumulant_set(files);
    EXPECT_TRUE(R.schema == Q.schema);
    EXPECT_EQ(R.points.k, Q.points.k);
    EXPECT_EQ(R.points.site, Q.points.site);
    EXPECT_EQ(max_abs_diff(R, Q), 0.0);
    for (auto& [counts, blk] : Q.blocks) EXPECT_EQ(*R.find(counts), blk);
}

INSTANTIATE_TEST_SUITE_P(Encodings, KernelFileRoundTrip, ::testing::Values(Encoding::text, Encoding::binary));
INSTANTIATE_TEST_SUITE_P(Encodings, CumulantFileRoundTrip, ::testing::Values(Encoding::text, Encoding::binary));

TEST(ArtifactFiles, HeaderRecordsShapeAndGrid)
{
    const fs::path d = fresh_dir("header");
    const PointSet P = PointSet::window(TimeGrid{0.0, 0.3, 12}, SiteSet::uniform(1), 0, 3);
    const CumulantSet Q = synthetic_bare_cumulants(P, 3);
    write_cumulant_block(d / "b.rqc", Q, {1, 3}, Encoding::text);
    std::ifstream in(d / "b.rqc");
    std::string line;
    std::getline(in, line);
    const json h = json::parse(line);
    EXPECT_EQ(h.at("m"), 1);
    EXPECT_EQ(h.at("n"), 3);
    EXPECT_EQ(h.at("band"), "broad");
    EXPECT_EQ(h.at("grid").at("hash"), hex64(grid_hash(P.grid, P.sites)));
    EXPECT_EQ(h.at("entries"), 81);
}

TEST(ArtifactFiles, CorruptFilesAreRejected)
{
    const fs::path d = fresh_dir("corrupt");
    const StationaryKernel K = random_kernel(TimeGrid{0.0, 0.5, 8}, SiteSet(), 2);
    write_kernel(d / "k.rqk", K, "plus", ModeSet::single(Band::broad, 1.0), Encoding::binary);
    const std::string full = slurp(d / "k.rqk");
    std::ofstream(d / "short.rqk", std::ios::binary) << full.substr(0, full.size() - 8);
    EXPECT_THROW(read_kernel(d / "short.rqk"), config_error);
    std::ofstream(d / "plain.rqk") << "0 0 0 1 0\n";
    EXPECT_THROW(read_kernel(d / "plain.rqk"), config_error);
    EXPECT_THROW(read_cumulant_set({d / "k.rqk"}), config_error);
    EXPECT_THROW(read_kernel(d / "absent.rqk"), config_error);
}

// ---------------------------------------------------------------------------------------------
// Commands.

TEST(Commands, KernelsOnSingleModeMatchClosedForm)
{
    const fs::path d = fresh_dir("kernels");
    const Scenario sc = load_scenario(scenario_dir / "single_mode.json");
    const RunResult r = run_kernels(sc, {d, 1});
    EXPECT_TRUE(r.report.pass());
    const KernelFile plus = read_kernel(d / "kernel_broad_plus.rqk");
    const KernelFile ret = read_kernel(d / "kernel_broad_retarded.rqk");
    EXPECT_EQ(plus.header.at("kind"), "plus");
    const TimeGrid& g = ret.kernel.grid;
    double dp = 0.0, dr = 0.0;
    for (int k = 0; k < g.n; ++k) {
        // one mode, unit mode function, w = 1: plus kernel i e^{-i tau} / 2, retarded theta(tau) sin(tau)
        const double tau = g.lag(k);
        dp = std::max(dp, std::abs(plus.kernel(0, 0, k) - 0.5 * I * std::exp(-I * tau)));
        dr = std::max(dr, std::abs(ret.kernel(0, 0, k) - g.theta(k) * std::sin(tau)));
    }
    EXPECT_LT(dp, 1e-15);
    EXPECT_LT(dr, 1e-15);
}

TEST(Commands, VerifyWickOnTwoModes)
{
    const Scenario sc = load_scenario(scenario_dir / "two_mode_wick.json");
    const RunResult r = run_command("verify wick", sc, {fresh_dir("wick"), 1});
    EXPECT_TRUE(r.report.pass());
    EXPECT_LT(r.report.max_deviation(), 1e-11);
    EXPECT_EQ(r.report.checks.size(), 6u);
}

TEST(Commands, VerifyTransformsNeedsBothBands)
{
    Scenario sc = load_scenario(scenario_dir / "transforms.json");
    EXPECT_TRUE(run_command("verify transforms", sc, {fresh_dir("transforms"), 1}).report.pass());
    sc.narrow.reset();
    EXPECT_THROW(run_command("verify transforms", sc, {fresh_dir("transforms"), 1}), config_error);
}

TEST(Commands, DressEmitsReloadableCumulants)
{
    const fs::path d = fresh_dir("dress");
    const Scenario sc = load_scenario(scenario_dir / "dress.json");
    const RunResult r = run_dress(sc, {d, 1});
    EXPECT_TRUE(r.report.pass());
    std::vector<fs::path> dressed;
    for (auto& a : r.artifacts)
        if (a.filename().string().rfind("dressed_", 0) == 0) dressed.push_back(a);
    ASSERT_FALSE(dressed.empty());
    EXPECT_EQ(read_cumulant_set(dressed).kind, CumulantKind::dressed);
    EXPECT_NE(slurp(d / "diagrams.txt").find("|Aut|"), std::string::npos);
}

TEST(Commands, DressBudgetViolation)
{
    Scenario sc = load_scenario(scenario_dir / "dress.json");
    sc.dress.blocks = {{2, 3}};
    EXPECT_THROW(run_dress(sc, {fresh_dir("dress_budget"), 1}), config_error);
}

TEST(Commands, MomentsAgreeWithOracle)
{
    const fs::path d = fresh_dir("moments");
    const Scenario sc = load_scenario(scenario_dir / "moments_oscillator.json");
    const RunResult r = run_moments(sc, {d, 1});
    EXPECT_TRUE(r.report.pass());
    EXPECT_TRUE(fs::exists(d / "moments.tsv"));
    Scenario tight = sc;
    tight.tol.moments = 1e-9;
    const RunResult failed = run_moments(tight, {d, 1});
    const Check* f = failed.report.first_failure();
    ASSERT_NE(f, nullptr);
    EXPECT_NE(f->name.find("operator oracle"), std::string::npos);
}

TEST(Commands, RwaScanWritesTables)
{
    const fs::path d = fresh_dir("rwa");
    const RunResult r = run_rwa_scan(load_scenario(scenario_dir / "rwa_scan.json"), {d, 2});
    EXPECT_TRUE(r.report.pass());
    EXPECT_NE(slurp(d / "rwa_scan.tsv").find("# kernel"), std::string::npos);
}

TEST(Commands, UnknownCommandIsConfigurationError)
{
    EXPECT_THROW(run_command("dance", parse_scenario(minimal()), {fresh_dir("unknown"), 1}), config_error);
}

TEST(Commands, IdenticalScenarioGivesBitIdenticalFiles)
{
    const Scenario sc = load_scenario(scenario_dir / "dress.json");
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    for (const fs::path& d : {a, b}) {
        const RunResult r = run_dress(sc, {d, 1});
        write_json(d / "manifest.json", make_manifest(sc, "dress", "strict", r.report, r.artifacts));
    }
    int compared = 0;
    for (auto& e : fs::directory_iterator(a)) {
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
        ++compared;
    }
    EXPECT_GT(compared, 5);
}

TEST(Commands, ManifestRecordsHashSeedAndDeviations)
{
    const Scenario sc = load_scenario(scenario_dir / "single_mode.json");
    Report r;
    r.add("a", 1e-13, 1e-10);
    r.add("b", 3e-12, 1e-10);
    const json m = make_manifest(sc, "kernels", "leaky", r, {fs::path("x/kernel.rqk")});
    EXPECT_EQ(m.at("scenario_hash"), hex64(sc.hash()));
    EXPECT_EQ(m.at("seed"), sc.seed);
    EXPECT_EQ(m.at("max_deviation"), 3e-12);
    EXPECT_EQ(m.at("artifacts")[0], "kernel.rqk");
    EXPECT_EQ(m.at("versions").at("rqed"), rqed_version);
    EXPECT_TRUE(m.at("pass").get<bool>());
}
