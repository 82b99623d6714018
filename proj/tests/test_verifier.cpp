#include "fdiff/report_io.hpp"

#include <gtest/gtest.h>

using namespace fdiff;

namespace {

CheckSpec small(const std::string& name, int max_n, int s = 3)
{
  CheckSpec c;
  c.name = name;
  c.max_n = max_n;
  c.s = s;
  c.trials = 5;
  return c;
}

std::vector<CheckSpec> small_suite()
{
  return {small("bn", 5),          small("smatrix_free", 5), small("interaction", 6, 3), small("interaction", 6, 4),
          small("bprime", 5),      small("adiabatic", 5, 3), small("adiabatic", 5, 4),   small("generalized", 5),
          small("nonlocal", 5),    small("kinematics", 5)};
}

} // namespace

TEST(Verifier, SmallSuitePasses)
{
  for (auto& c : small_suite()) {
    auto r = run_check(c);
    EXPECT_EQ(r.status, Status::Pass) << c.name << " s=" << c.s << ": " << r.witness.quantity << " " << r.witness.residual;
    EXPECT_TRUE(r.witness.empty());
    EXPECT_FALSE(r.wall_ms.has_value());
  }
}

TEST(Verifier, EveryCheckCatchesFault)
{
  for (auto c : small_suite()) {
    c.fault = Fault{2, 1};
    auto r = run_check(c);
    EXPECT_EQ(r.status, Status::Fail) << c.name;
    EXPECT_FALSE(r.witness.empty()) << c.name;
    EXPECT_GE(r.witness.n, 2) << c.name;
  }
}

TEST(Verifier, FaultOnFirstCoefficient)
{
  auto c = small("bn", 4);
  c.fault = Fault{1, Rational(1, 3)};
  auto r = run_check(c);
  ASSERT_EQ(r.status, Status::Fail);
  EXPECT_EQ(r.witness.n, 2);
}

TEST(Verifier, WitnessReproducesStandalone)
{
  auto c = small("bn", 5);
  c.fault = Fault{2, 1};
  auto r = run_check(c);
  ASSERT_EQ(r.status, Status::Fail);
  ASSERT_EQ(r.witness.n, 3);
  DiffeoSpec bad = DiffeoSpec::symbolic_spec();
  bad.a[2] = bad.coeff(2) + RationalFunction(Rational(1));
  auto diff = tree_sum_b(3, DiffeoSpec::symbolic_spec()).value - bn_closed_form(3, bad);
  EXPECT_EQ(r.witness.residual, diff.to_string());
  EXPECT_EQ(r.witness.residual, "6");
}

TEST(Verifier, Deterministic)
{
  auto specs = small_suite();
  specs[9].fault = Fault{3, 2};
  auto a = to_json(run_suite(specs)).dump();
  auto b = to_json(run_suite(specs, 3)).dump();
  EXPECT_EQ(a, b);
}

TEST(Verifier, KinematicSeedMatters)
{
  auto c = small("kinematics", 4);
  c.fault = Fault{2, 1};
  auto r1 = run_check(c);
  c.seed = 7;
  auto r2 = run_check(c);
  ASSERT_EQ(r1.status, Status::Fail);
  ASSERT_EQ(r2.status, Status::Fail);
  EXPECT_NE(r1.witness.residual, r2.witness.residual);
}

TEST(Verifier, EmptySuitePasses)
{
  auto reports = run_suite({});
  EXPECT_TRUE(reports.empty());
  EXPECT_TRUE(suite_passed(reports));
  EXPECT_EQ(to_json(reports).dump(), R"({"status":"pass","reports":[]})");
}

TEST(Verifier, Validation)
{
  EXPECT_THROW(small("nope", 4).validate(), Error);
  EXPECT_THROW(small("bn", 1).validate(), Error);
  EXPECT_THROW(small("bn", 11).validate(), Error);
  EXPECT_THROW(small("interaction", 4, 2).validate(), Error);
  EXPECT_THROW(small("interaction", 3, 4).validate(), Error);
  auto c = small("bn", 6);
  c.order = 5;
  EXPECT_THROW(c.validate(), Error);
  c = small("kinematics", 4);
  c.trials = 0;
  EXPECT_THROW(c.validate(), Error);
  c = small("bn", 4);
  c.fault = Fault{0, 1};
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(run_suite({small("bn", 4), small("nope", 4)}), Error);
  EXPECT_NO_THROW(small("adiabatic", 2).validate());
}

TEST(Verifier, DefaultSuiteShape)
{
  auto s = default_suite();
  ASSERT_EQ(s.size(), 10u);
  for (auto& c : s)
    EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(default_max_n("bn"), 7);
  EXPECT_EQ(default_max_n("interaction"), 8);
}

TEST(Reports, Formats)
{
  Report pass;
  pass.name = "bn";
  pass.params = {{"max_n", "3"}};
  Report fail;
  fail.name = "interaction";
  fail.params = {{"max_n", "4"}, {"s", "3"}};
  fail.status = Status::Fail;
  fail.witness = {4, "S_4, \"cut\"", "", "-12*i*lambda3"};
  std::vector<Report> rs{pass, fail};

  EXPECT_EQ(to_json(rs).dump(),
            R"({"status":"fail","reports":[{"check":"bn","params":{"max_n":"3"},"status":"pass"},)"
            R"({"check":"interaction","params":{"max_n":"4","s":"3"},"status":"fail",)"
            R"("witness":{"n":4,"quantity":"S_4, \"cut\"","residual":"-12*i*lambda3"}}]})");
  EXPECT_EQ(to_csv(rs), "check,params,status,witness_n,witness_quantity,witness_tree,witness_residual\n"
                        "bn,max_n=3,pass,,,,\n"
                        "interaction,max_n=4;s=3,fail,4,\"S_4, \"\"cut\"\"\",,-12*i*lambda3\n");
  auto p = to_pretty(rs);
  EXPECT_NE(p.find("PASS  bn (max_n=3)"), std::string::npos);
  EXPECT_NE(p.find("FAIL  interaction"), std::string::npos);
  EXPECT_NE(p.find("suite: fail"), std::string::npos);

  pass.wall_ms = 12.4;
  EXPECT_EQ(to_json(pass)["wall_ms"], 12);
  EXPECT_NE(to_csv({pass}, true).find(",wall_ms\nbn,max_n=3,pass,,,,,12\n"), std::string::npos);
}
