#include <akcurv/config.hpp>
#include <akcurv/run.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace akcurv;
using namespace akcurv::config;

namespace {

// Runs `fn`, expecting a ConfigError at line:column whose text contains `needle`.
template <class Fn>
void expect_error(Fn fn, int line, int column, const std::string& needle) {
  try {
    fn();
    ADD_FAILURE() << "expected ConfigError containing '" << needle << "'";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.where().line, line) << e.what();
    EXPECT_EQ(e.where().column, column) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

run::RunConfig parse_run(const std::string& text) { return run::parse_run_config(Document::parse(text, "test.cfg")); }

const char* kMinimal =
    "[chart]\n"
    "n = 2\n"
    "z = 0.5, 1.5\n"
    "z_points = 8\n"
    "t_points = 8\n"
    "[metric]\n"
    "preset = flat\n";

}  // namespace

TEST(Document, SectionsKeysAndComments) {
  const auto doc = Document::parse(
      "# leading comment\n"
      "; another\n"
      "[alpha]\n"
      "x = 1\n"
      "  name =  spaced value  \n"
      "\n"
      "[beta]\n"
      "flag = true\n");
  ASSERT_EQ(doc.sections().size(), 2u);
  const auto* alpha = doc.find("alpha");
  ASSERT_NE(alpha, nullptr);
  EXPECT_EQ(alpha->where().line, 3);
  EXPECT_EQ(alpha->integer("x"), 1);
  EXPECT_EQ(alpha->string("name"), "spaced value");
  EXPECT_EQ(alpha->at("name").where.line, 5);
  EXPECT_TRUE(doc.find("beta")->boolean("flag"));
  EXPECT_EQ(doc.find("gamma"), nullptr);
  EXPECT_EQ(alpha->keys(), (std::vector<std::string>{"name", "x"}));
}

TEST(Document, ListsAndQuoting) {
  const auto doc = Document::parse(
      "[s]\n"
      "plain = a, b ,c\n"
      "bracketed = [1, 2.5, 2*pi]\n"
      "quoted = \"x, y\", z\n"
      "single = \"only\"\n");
  const auto* s = doc.find("s");
  EXPECT_EQ(s->list("plain"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_FALSE(s->at("plain").bracketed);
  const auto nums = s->numbers("bracketed");
  ASSERT_EQ(nums.size(), 3u);
  EXPECT_DOUBLE_EQ(nums[2], 2 * M_PI);
  EXPECT_TRUE(s->at("bracketed").bracketed);
  EXPECT_EQ(s->list("quoted"), (std::vector<std::string>{"x, y", "z"}));
  EXPECT_EQ(s->string("single"), "only");
  EXPECT_EQ(s->at("plain").item_locations[1].column, 12);
}

TEST(Document, TypedAccessorsAndFallbacks) {
  const auto doc = Document::parse("[s]\nx = 3/4 + 1\nk = 12\nb = no\nl = 1, 2, 3\n");
  const auto* s = doc.find("s");
  EXPECT_DOUBLE_EQ(s->number("x"), 1.75);
  EXPECT_DOUBLE_EQ(s->number("missing", -2.0), -2.0);
  EXPECT_EQ(s->integer("k"), 12);
  EXPECT_EQ(s->integer("missing", 5), 5);
  EXPECT_FALSE(s->boolean("b"));
  EXPECT_TRUE(s->boolean("missing", true));
  EXPECT_EQ(s->integers("l"), (std::vector<long>{1, 2, 3}));
  EXPECT_EQ(s->string("missing", "fallback"), "fallback");
}

TEST(Document, SyntaxErrorsCarryLineAndColumn) {
  expect_error([] { Document::parse("[s]\nx = 1\nx = 2\n"); }, 3, 1, "duplicate");
  expect_error([] { Document::parse("[s]\n[s]\n"); }, 2, 1, "duplicate");
  expect_error([] { Document::parse("x = 1\n"); }, 1, 1, "section");
  expect_error([] { Document::parse("[s]\njust text\n"); }, 2, 6, "'='");
  expect_error([] { Document::parse("[s\n"); }, 1, 1, "]");
  expect_error([] { Document::parse("[s]\nq = \"open\n"); }, 2, 5, "quote");
  expect_error([] { Document::parse("[s]\nl = [1, 2\n"); }, 2, 10, "]");
}

TEST(Document, TypeErrorsPointAtTheValue) {
  const auto doc = Document::parse("[s]\nx = abc\nk = 1.5\nb = maybe\nl = 1, zz\n", "file.cfg");
  const auto* s = doc.find("s");
  expect_error([&] { s->number("x"); }, 2, 5, "file.cfg:2:5");
  expect_error([&] { s->integer("k"); }, 3, 5, "integer");
  expect_error([&] { s->boolean("b"); }, 4, 5, "boolean");
  expect_error([&] { s->numbers("l"); }, 5, 8, "zz");
  expect_error([&] { s->number("absent"); }, 1, 1, "absent");
  expect_error([&] { s->require_keys({"x", "k", "b"}); }, 5, 1, "unknown key 'l'");
  expect_error([&] { doc.require_sections({"other"}); }, 1, 1, "unknown section");
}

TEST(ConstantArithmetic, Evaluation) {
  EXPECT_DOUBLE_EQ(evaluate_constant("1/3 + 2^3"), 1.0 / 3 + 8);
  EXPECT_DOUBLE_EQ(evaluate_constant("-2*pi"), -2 * M_PI);
  EXPECT_DOUBLE_EQ(evaluate_constant("sqrt(4) + ln(1)"), 2.0);
  EXPECT_DOUBLE_EQ(evaluate_constant("1e-3"), 1e-3);
  EXPECT_THROW(evaluate_constant("1 +"), std::invalid_argument);
  EXPECT_THROW(evaluate_constant("z1"), std::invalid_argument);
}

TEST(RunConfig, MinimalConfigUsesDefaults) {
  const auto cfg = parse_run(kMinimal);
  EXPECT_EQ(cfg.chart.n, 2);
  EXPECT_EQ(cfg.chart.z_points, 8);
  EXPECT_TRUE(cfg.chart.t_periodic);
  EXPECT_EQ(cfg.path, run::Path::Analytic);
  EXPECT_EQ(cfg.h_refine, 0);
  EXPECT_DOUBLE_EQ(cfg.tolerances.get("identity"), 1e-10);
  EXPECT_DOUBLE_EQ(cfg.tolerances.get("fd_constant"), 50.0);
  EXPECT_DOUBLE_EQ(cfg.tolerances.fd(0.1), 0.5);
  EXPECT_THROW(cfg.tolerances.get("nonsense"), std::out_of_range);
}

TEST(RunConfig, SectionsOverrideDefaults) {
  const auto cfg = parse_run(std::string(kMinimal) +
                             "[run]\ntasks = curvature, riemann\nexpect = einstein\nout = elsewhere\n"
                             "h_refine = 2\n[tolerances]\nidentity = 1e-9\n");
  EXPECT_EQ(cfg.tasks, (std::vector<std::string>{"curvature", "riemann"}));
  EXPECT_TRUE(cfg.expects("einstein"));
  EXPECT_FALSE(cfg.expects("kahler"));
  EXPECT_EQ(cfg.out, "elsewhere");
  EXPECT_EQ(cfg.h_refine, 2);
  EXPECT_DOUBLE_EQ(cfg.tolerances.get("identity"), 1e-9);
}

TEST(RunConfig, SemanticErrors) {
  expect_error([] { parse_run("[metric]\npreset = flat\n"); }, 0, 0, "test.cfg: missing [chart]");
  expect_error([] { parse_run(std::string(kMinimal) + "[run]\ntasks = curvature, nope\n"); }, 9, 20, "nope");
  expect_error([] { parse_run(std::string(kMinimal) + "[run]\nh_refine = 7\n"); }, 9, 12, "h_refine");
  expect_error([] { parse_run(std::string(kMinimal) + "[tolerances]\nmystery = 1\n"); }, 9, 1, "mystery");
  expect_error([] { parse_run(std::string(kMinimal) + "[metric2]\n"); }, 8, 1, "metric2");
  expect_error([] { parse_run(std::string(kMinimal) + "[run]\nexpect = happiness\n"); }, 9, 10, "happiness");
}

TEST(RunConfig, ChartNeedsEightPointsPerAxis) {
  std::string text = kMinimal;
  text.replace(text.find("z_points = 8"), 12, "z_points = 7");
  expect_error([&] { parse_run(text); }, 4, 12, "8");
}

TEST(RunConfig, MetricMustBeSpecifiedExactlyOnce) {
  const std::string chart = "[chart]\nn = 1\nz = 1, 2\nz_points = 8\nt_points = 8\n";
  expect_error([&] { parse_run(chart + "[metric]\n"); }, 6, 1, "preset");
  expect_error([&] { parse_run(chart + "[metric]\npreset = flat\nrandom = true\n"); }, 6, 1, "exactly one");
  expect_error([&] { parse_run(chart + "[metric]\npreset = torus\n"); }, 7, 10, "torus");
}

TEST(RunConfig, ExpressionErrorsPointIntoTheItem) {
  const std::string text = std::string("[chart]\nn = 1\nz = 1, 2\nz_points = 8\nt_points = 8\n") +
                           "[metric]\nG = 1/z1^2\nH = z1**2\nP = 0\n";
  expect_error([&] { parse_run(text); }, 8, 5, "byte offset 3");
}

TEST(RunConfig, RationalItemsAcceptExactArithmetic) {
  const auto cfg = parse_run(std::string(kMinimal) + "[toric]\npolytope = box\nlo = 0, 0\nhi = 1, 3/2\n"
                                                     "s = 3*z1 - z2 + 1/2\n");
  EXPECT_EQ(cfg.document.find("toric")->list("hi")[1], "3/2");
  expect_error([] { parse_run(std::string(kMinimal) + "[toric]\npolytope = box\nlo = 0, 0\nhi = 1, sqrt(2)\n"); },
               11, 9, "rational");
}
