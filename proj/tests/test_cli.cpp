#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbd/cli.hpp"

using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = qbd::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const char* name) { return std::string(QBD_FIXTURE_DIR) + "/" + name; }

std::string slurp(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string temp_path(const std::string& name)
{
    return (std::filesystem::path(::testing::TempDir()) / name).string();
}

} // namespace

TEST(Cli, SolvePr1)
{
    const auto r = run({"solve", "--levels", "10", fixture("pr1.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_EQ(doc["class"], "PositiveRecurrent");
    ASSERT_EQ(doc["u"].size(), 11u);
    const double x = doc["x"][0];
    EXPECT_NEAR(doc["u"][0][0].get<double>(), x - 2.5, 1e-12);
    for (int k = 1; k <= 10; ++k) EXPECT_NEAR(doc["u"][k][0].get<double>(), x - 7.5, 1e-12);
    EXPECT_TRUE(doc["residuals"]["pass"].get<bool>());
    EXPECT_NEAR(doc["y_star"][0].get<double>(), -2.5, 1e-12);
}

TEST(Cli, ClassifyNr1)
{
    const auto r = run({"classify", fixture("nr1.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_EQ(doc["class"], "NullRecurrent");
    EXPECT_EQ(doc["drift"].get<double>(), 0.0);
    ASSERT_EQ(doc["roots"].size(), 2u);
    EXPECT_NEAR(doc["roots"][0].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(doc["roots"][1].get<double>(), 1.0, 1e-12);
}

TEST(Cli, ValidationFailure)
{
    const auto r = run({"solve", fixture("bad_rowsum.json")});
    EXPECT_EQ(r.code, 1);
    const auto err = json::parse(r.err);
    EXPECT_EQ(err["error"]["type"], "ValidationError");
    EXPECT_EQ(err["error"]["exit_code"], 1);

    const auto v = run({"validate", fixture("bad_rowsum.json")});
    EXPECT_EQ(v.code, 1);
    EXPECT_FALSE(json::parse(v.out)["ok"].get<bool>());
    EXPECT_EQ(run({"validate", fixture("pr1.json")}).code, 0);
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run({"solve", "--bogus", fixture("pr1.json")}).code, 1);
    EXPECT_EQ(run({"solve", "--levels", "1", fixture("pr1.json")}).code, 1);
    EXPECT_EQ(run({"solve", "--y-perp", "sideways", fixture("pr1.json")}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"solve", fixture("missing.json")}).code, 1);
}

TEST(Cli, InfeasibleConstraint)
{
    const std::string path = temp_path("pr1_g1.json");
    std::ofstream(path) << R"({"m":1,"B":[[0.8]],"A_minus":[[0.6]],"A0":[[0.2]],"A1":[[0.2]],"g":[[1]]})";
    const auto r = run({"solve", "--y-perp", "zero", path});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(json::parse(r.err)["error"]["type"], "InfeasibleError");
    EXPECT_EQ(run({"solve", path}).code, 0);
    EXPECT_EQ(run({"compare-prob", path}).code, 3);
}

TEST(Cli, NumericalFailureOnTightResidualTolerance)
{
    const auto model = qbd::random_model(3, 3, qbd::ChainClass::PositiveRecurrent);
    const auto g = qbd::random_rhs(5, 3);
    const std::string path = temp_path("random3.json");
    std::ofstream(path) << qbd::serialize_problem(model, g);
    const auto r = run({"solve", "--residual-tol", "1e-300", path});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(json::parse(r.out)["residuals"]["pass"].get<bool>());
}

TEST(Cli, OracleNeedsNonsingularA1)
{
    const std::string path = temp_path("singular_a1.json");
    std::ofstream(path) << R"({"m":1,"B":[[1.0]],"A_minus":[[0.5]],"A0":[[0.5]],"A1":[[0.0]],"g":[[0],[1]]})";
    EXPECT_EQ(run({"oracle", path}).code, 2);
    const auto ok = run({"oracle", fixture("nr1.json")});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(json::parse(ok.out)["pass"].get<bool>());
}

TEST(Cli, OutputFilesAreDeterministic)
{
    const std::string a = temp_path("a.json"), b = temp_path("b.json");
    ASSERT_EQ(run({"solve", "--levels", "12", "-o", a, fixture("nr1.json")}).code, 0);
    ASSERT_EQ(run({"solve", "--levels", "12", "-o", b, fixture("nr1.json")}).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    const std::string csv = slurp(temp_path("a.csv"));
    EXPECT_EQ(csv.rfind("level,phase_0\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 14);
    EXPECT_EQ(slurp(temp_path("a.csv")), slurp(temp_path("b.csv")));
}

TEST(Cli, LemmasAndCompare)
{
    for (const char* f : {"pr1.json", "tr1.json", "nr1.json"}) {
        const auto r = run({"lemmas", fixture(f)});
        EXPECT_EQ(r.code, 0) << f << r.err;
        EXPECT_TRUE(json::parse(r.out)["all_pass"].get<bool>()) << f;
    }
    const auto c = run({"compare-prob", fixture("pr1.json")});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto doc = json::parse(c.out);
    EXPECT_TRUE(doc["is_match"].get<bool>());
    EXPECT_NEAR(doc["offset"].get<double>(), 2.5, 1e-12);
}

TEST(Cli, TransientFreeVector)
{
    const auto r = run({"solve", "--y-free", "0.5", fixture("tr1.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["y"][0].get<double>(), 0.5, 1e-15);
    EXPECT_EQ(run({"solve", "--y-free", "0.5,1", fixture("tr1.json")}).code, 1);
}
