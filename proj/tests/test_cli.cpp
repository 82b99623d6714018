#include "fdiff/config.hpp"
#include "fdiff/rule_dump.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

using namespace fdiff;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// stdout only; stderr is captured separately when asked.
Run run(const std::string& args, bool stderr_to_stdout = false)
{
  std::string cmd = std::string(FDIFF_CLI) + " " + args + (stderr_to_stdout ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p)
    return r;
  std::array<char, 4096> buf{};
  for (std::size_t k; (k = fread(buf.data(), 1, buf.size(), p)) > 0;)
    r.out.append(buf.data(), k);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string write_temp(const std::string& name, const std::string& text)
{
  std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << text;
  return path;
}

} // namespace

TEST(Config, Defaults)
{
  auto c = config_from_string("{}");
  EXPECT_NO_THROW(c.validate_suite());
  EXPECT_EQ(c.specs().size(), default_suite().size());
  EXPECT_EQ(c.format, "json");
}

TEST(Config, ExactValues)
{
  auto c = config_from_string(R"({
    "theory": {"propagator": "standard", "mass_sq": "3/4", "interactions": [3, {"s": 4, "lambda": "-1/2"}]},
    "diffeo": {"symbolic": false, "a": {"1": "1/2", "2": "a2", "3": 5}},
    "suite": {"checks": ["bn"], "max_n": 4, "seed": 9, "fault": {"coefficient": 1, "delta": "2/3"}},
    "output": {"format": "pretty", "timing": true}
  })");
  EXPECT_EQ(c.theory.mass_sq, RationalFunction(Rational(3, 4)));
  ASSERT_EQ(c.theory.interactions.size(), 2u);
  EXPECT_EQ(c.theory.interactions[0].lambda, sym("lambda3"));
  EXPECT_EQ(c.theory.interactions[1].lambda, RationalFunction(Rational(-1, 2)));
  EXPECT_EQ(c.diffeo.coeff(1), RationalFunction(Rational(1, 2)));
  EXPECT_EQ(c.diffeo.coeff(2), sym("a2"));
  EXPECT_EQ(c.diffeo.coeff(3), RationalFunction(5));
  EXPECT_TRUE(c.diffeo.coeff(4).is_zero());
  auto specs = c.specs();
  ASSERT_EQ(specs.size(), 1u);
  EXPECT_EQ(specs[0].max_n, 4);
  EXPECT_EQ(specs[0].seed, 9u);
  ASSERT_TRUE(specs[0].fault);
  EXPECT_EQ(specs[0].fault->delta, Rational(2, 3));
  EXPECT_TRUE(c.timing);
}

TEST(Config, ExplicitPowerCollapsesDuplicates)
{
  auto c = config_from_string(R"({"suite": {"s": 4}})");
  auto specs = c.specs();
  EXPECT_EQ(specs.size(), default_suite().size() - 2);
  for (auto& s : specs)
    EXPECT_EQ(s.s, 4);
}

TEST(Config, Nonlocal)
{
  auto c = config_from_string(R"({"theory": {"mass_sq": "msq", "nonlocal": {"alpha": {"1": "alpha1"}}}})");
  auto t = c.effective_theory();
  EXPECT_TRUE(t.is_generalized());
  EXPECT_EQ(t.beta.at(1), parse_expression("1-2*alpha1*msq"));
}

TEST(Config, Rejections)
{
  for (const char* bad : {
           R"({"theory": {)",
           R"([1, 2])",
           R"({"extra": 1})",
           R"({"diffeo": {"a": {"1": 0.5}}})",
           R"({"diffeo": {"a": {"0": "2"}}})",
           R"({"diffeo": {"a": {"x": "1"}}})",
           R"({"diffeo": {"a": {"1": "1/0"}}})",
           R"j({"diffeo": {"a": {"1": "x(1+2)"}}})j",
           R"({"theory": {"interactions": [2]}})",
           R"({"theory": {"interactions": [{"s": 3, "power": 1}]}})",
           R"({"theory": {"propagator": "massive"}})",
           R"({"theory": {"nonlocal": {"alpha": {"0": "2"}}}})",
           R"({"suite": {"seed": -1}})",
           R"({"suite": {"max_n": "5"}})",
           R"({"suite": {"fault": {"delta": "a1"}}})",
           R"({"output": {"trace": 1}})",
       }) {
    EXPECT_THROW(
        {
          auto c = config_from_string(bad);
          c.validate_suite();
        },
        Error)
        << bad;
  }
  for (const char* bad : {R"({"suite": {"checks": ["nope"]}})", R"({"suite": {"s": 2}})",
                          R"({"output": {"format": "xml"}})", R"({"suite": {"max_n": 1}})"})
    EXPECT_THROW(config_from_string(bad).validate_suite(), Error) << bad;
  EXPECT_THROW(load_config("/nonexistent/fdiff.json"), Error);
}

TEST(RuleDump, Grouping)
{
  auto d = DiffeoSpec::symbolic_spec();
  EXPECT_EQ(grouped_string(free_vertex(3, d)), "2*i*a1*(x1+x2+x3)");
  EXPECT_EQ(grouped_string(free_vertex(4, d)), "4*i*a1^2*msq+i*(6*a2+4*a1^2)*(x1+x2+x3+x4)");
  EXPECT_EQ(grouped_string(generalized_vertex(4, d)), "6*i*a2*(X1+X2+X3+X4)+4*i*a1^2*(X(1+2)+X(1+3)+X(1+4))");
  EXPECT_EQ(grouped_string(parse_expression("-x1-x2+3")), "3-(x1+x2)");
  EXPECT_EQ(grouped_string(parse_expression("a1*x1")), "a1*x1");
  EXPECT_EQ(grouped_string(RationalFunction()), "0");
}

TEST(RuleDump, Json)
{
  auto j = rule_json(3, "standard", "free", free_vertex(3, DiffeoSpec::symbolic_spec()));
  EXPECT_EQ(j["valence"], 3);
  ASSERT_EQ(j["terms"].size(), 3u);
  EXPECT_EQ(j["terms"][0]["coefficient"], "2*i*a1");
  EXPECT_EQ(j["terms"][0]["edges"][0], "x1");
  EXPECT_TRUE(j.contains("mass_term"));
}

TEST(Cli, RulesPretty)
{
  auto r = run("rules --n 3 --format pretty");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "2*i*a1*(x1+x2+x3)\n");
  r = run("rules --n 3 --kind interaction --s 4 --format pretty");
  EXPECT_EQ(r.out, "0\n");
  r = run("rules --n 4 --kind interaction --s 3 --format pretty");
  EXPECT_EQ(r.out, "-12*i*a1*lambda3\n");
  r = run("rules --n 4 --kind generalized --format pretty");
  EXPECT_EQ(r.out, "6*i*a2*(X1+X2+X3+X4)+4*i*a1^2*(X(1+2)+X(1+3)+X(1+4))\n");
}

TEST(Cli, RulesJson)
{
  auto r = run("rules --n 4");
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["valence"], 4);
  EXPECT_EQ(j["kind"], "free");
  EXPECT_EQ(j["terms"].size(), 5u);
}

TEST(Cli, TreeSums)
{
  auto j = nlohmann::json::parse(run("treesum --kind b --n 3").out);
  EXPECT_EQ(j["value"], "-6*a2+12*a1^2");
  EXPECT_EQ(j["tree_count"], 4);
  j = nlohmann::json::parse(run("treesum --kind S --n 4 --s 3").out);
  EXPECT_EQ(j["value"], "0");
  EXPECT_EQ(j["by_valence"]["3"], "12*i*a1*lambda3");
  j = nlohmann::json::parse(run("treesum --kind A --n 4 --offshell 2").out);
  EXPECT_EQ(j["value"], "6*i*a2*x2-12*i*a1^2*x2");
  EXPECT_EQ(j["offshell"][0], 2);
  j = nlohmann::json::parse(run("treesum --kind bprime --n 2 --trace").out);
  EXPECT_EQ(j["value"], "-2*a1+lambda3/x(1+2)");
  EXPECT_EQ(j["trace"].size(), 2u);
}

TEST(Cli, VerifyExitCodes)
{
  auto r = run("verify --check bn --max-n 5");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["status"], "pass");
  r = run("verify --check bn --max-n 5 --fault 2");
  EXPECT_EQ(r.code, 1);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["reports"][0]["witness"]["n"], 3);
  r = run("verify --check kinematics --max-n 4 --format csv");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("check,params,status", 0), 0u);
}

TEST(Cli, ByteIdentical)
{
  std::string args = "verify --check kinematics --check interaction --max-n 5 --seed 3 --fault 1:1/7";
  auto a = run(args), b = run(args + " --jobs 2");
  EXPECT_EQ(a.code, 1);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run("treesum --kind A --n 5 --offshell all").out, run("treesum --kind A --n 5 --offshell all --jobs 3").out);
}

TEST(Cli, TimingOnlyOnRequest)
{
  EXPECT_EQ(run("verify --check bn --max-n 3").out.find("wall_ms"), std::string::npos);
  EXPECT_NE(run("verify --check bn --max-n 3 --timing").out.find("wall_ms"), std::string::npos);
}

TEST(Cli, ConfigFile)
{
  auto good = write_temp("fdiff_good.json", R"({"diffeo": {"symbolic": false, "a": {"1": "1/2"}},
                                                 "suite": {"checks": ["bn"], "max_n": 4},
                                                 "output": {"format": "pretty"}})");
  auto r = run("--config " + good + " treesum --kind b --n 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("b_2 = -1\n", 0), 0u);
  r = run("--config " + good + " verify");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("PASS  bn (max_n=4"), std::string::npos);
}

TEST(Cli, ErrorsGoToStderr)
{
  auto bad = write_temp("fdiff_bad.json", R"({"theory": {)");
  auto floaty = write_temp("fdiff_float.json", R"({"diffeo": {"a": {"1": 0.5}}})");
  for (const std::string& args : std::vector<std::string>{"rules --n 2", "verify --check nope", "--config " + bad + " verify",
                           "--config " + floaty + " rules --n 3", "treesum --kind b --n 3 --offshell 1",
                           "treesum --kind A --n 4 --offshell 7", "--format xml rules --n 3", "", "--s 2 rules --n 3",
                           "verify --fault x"}) {
    auto r = run(args);
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_TRUE(r.out.empty()) << args;
    EXPECT_FALSE(run(args, true).out.empty()) << args;
  }
  EXPECT_NE(run("--config " + bad + " verify", true).out.find("parse error"), std::string::npos);
}
