#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <random>

#include "spopf/case_io.hpp"
#include "spopf/power_flow.hpp"
#include "spopf/quadratic_model.hpp"
#include "test_util.hpp"

using namespace spopf;

namespace {

const char* kTwoBus = R"(function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	138	1	1.1	0.9;
	2	1	50	10	0	2	1	1	0	138	1	1.05	0.95;
];
mpc.gen = [
	1	0	0	100	-100	1.02	100	1	200	0	0	0	0	0	0	0	0	0	0	0	0;
];
mpc.branch = [
	1	2	0.02	0.1	0.04	120	0	0	0	0	1	-30	30;
];
)";

Vector random_state(std::mt19937_64& rng, Index nx) {
  Vector x(nx);
  for (Index i = 0; i < nx; ++i) x(i) = 0.8 + 0.4 * test::uniform01(rng);
  for (Index i = nx / 2; i < nx; ++i) x(i) = 0.4 * (test::uniform01(rng) - 0.5);
  return x;
}

}  // namespace

TEST_CASE("9-bus reference case parses with the expected counts") {
  NetworkCase nc = parse_matpower(test::read_file(test::data_dir() + "/case9.m"));
  CHECK(nc.name == "case9");
  CHECK(nc.base_mva == 100.0);
  CHECK(nc.buses.size() == 9);
  CHECK(nc.generators.size() == 3);
  CHECK(nc.branches.size() == 9);
  CHECK(nc.buses[4].pd == doctest::Approx(0.9));
  CHECK(nc.buses[8].qd == doctest::Approx(0.5));
  CHECK(nc.branches[0].x == doctest::Approx(0.0576));
  CHECK(nc.generators[2].pmax == doctest::Approx(2.7));
  // +-360 degree angle limits mean unconstrained
  for (const auto& br : nc.branches) CHECK_FALSE(br.has_angle_limit);
  CHECK(nc.slack_index() == 0);
}

TEST_CASE("two-bus case round-trips through the json mirror") {
  NetworkCase nc = parse_matpower(kTwoBus);
  CHECK(nc.buses.size() == 2);
  CHECK(nc.branches[0].has_angle_limit);
  CHECK(nc.branches[0].angle_max == doctest::Approx(30.0 * M_PI / 180.0));
  CHECK(nc.buses[1].bs == doctest::Approx(0.02));

  const std::string js = case_to_json(nc);
  NetworkCase back = parse_case_json(js);
  CHECK(case_to_json(back) == js);
  CHECK(back.buses.size() == nc.buses.size());
  CHECK(back.branches[0].flow_limit == doctest::Approx(1.2));
  CHECK(back.generators[0].vset == doctest::Approx(1.02));
}

TEST_CASE("parser reports syntactic and semantic errors") {
  CHECK_THROWS_AS(parse_matpower("function mpc = x\nmpc.baseMVA = 100;\nmpc.bus = [1 3"),
                  ParseError);
  CHECK_THROWS_AS(parse_matpower("mpc.bus = [];"), ParseError);  // missing baseMVA
  // dangling branch endpoint
  std::string bad = kTwoBus;
  bad.replace(bad.find("	1	2	0.02"), 8, "	1	7	0.02");
  CHECK_THROWS_AS(parse_matpower(bad), CaseError);
  // no slack
  std::string noslack = kTwoBus;
  noslack.replace(noslack.find("	1	3	0"), 4, "	1	2	0");
  CHECK_THROWS(parse_matpower(noslack));
}

TEST_CASE("two generators on one bus parse with a merge flag") {
  std::string twice = kTwoBus;
  twice.replace(twice.find("mpc.gen = [\n"), 12,
                "mpc.gen = [\n\t1\t0\t0\t50\t-50\t1.02\t100\t1\t50\t10\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;\n");
  NetworkCase nc = parse_matpower(twice);
  CHECK(nc.generators.size() == 2);
  bool flagged = false;
  for (const auto& w : nc.warnings) flagged = flagged || w.find("multiple generators") != std::string::npos;
  CHECK(flagged);
  NetworkCase merged = merge_generators(nc);
  CHECK(merged.generators.size() == 1);
  CHECK(merged.generators[0].pmax == doctest::Approx(2.0 + 0.5));
  CHECK(merged.generators[0].qmin == doctest::Approx(-1.0 - 0.5));
}

TEST_CASE("generator merging") {
  NetworkCase nc = parse_matpower(kTwoBus);
  Generator extra = nc.generators[0];
  extra.pmax = 0.5;
  extra.pmin = 0.1;
  extra.qmax = 0.2;
  extra.qmin = -0.2;
  nc.generators.push_back(extra);

  SUBCASE("limits add up") {
    NetworkCase merged = merge_generators(nc);
    CHECK(merged.generators.size() == 1);
    CHECK(merged.generators[0].pmax == doctest::Approx(2.0 + 0.5));
    CHECK(merged.generators[0].pmin == doctest::Approx(0.0 + 0.1));
    CHECK(merged.generators[0].qmax == doctest::Approx(1.0 + 0.2));
  }

  SUBCASE("idempotent on merged cases") {
    NetworkCase merged = merge_generators(nc);
    NetworkCase twice = merge_generators(merged);
    CHECK(case_to_json(twice) == case_to_json(merged));
  }

  SUBCASE("conflicting setpoints fail") {
    nc.generators[1].vset = 1.00;
    CHECK_THROWS_AS(merge_generators(nc), CaseError);
  }
}

TEST_CASE("json mirror of the reference case yields the same normalized case") {
  NetworkCase a = parse_matpower(test::read_file(test::data_dir() + "/case9.m"));
  NetworkCase b = parse_case_json(case_to_json(a));
  b.name = a.name;
  CHECK(case_to_json(b) == case_to_json(a));
}

TEST_CASE("taps, shifts and shunts match the complex oracle") {
  NetworkCase nc =
      merge_generators(parse_matpower(test::read_file(test::data_dir() + "/case4tap.m")));
  CHECK(nc.branches[1].tap == doctest::Approx(0.98));
  CHECK(nc.branches[3].shift == doctest::Approx(2.5 * M_PI / 180.0));
  CHECK(nc.buses[2].bs == doctest::Approx(0.12));
  CHECK(nc.buses[3].gs == doctest::Approx(0.01));

  QuadraticModel model = QuadraticModel::build(nc);
  const Index n = model.n_buses(), nx = model.state_dim();
  std::mt19937_64 rng(79);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector x = random_state(rng, nx);
    Vector u(model.control_dim());
    for (Index j = 0; j < u.size(); ++j) u(j) = test::uniform01(rng);
    const Vector f = model.f(x, u);
    const auto S = test::oracle_injections(nc, x);
    for (Index i = 0; i < n; ++i) {
      const Bus& bus = nc.buses[static_cast<size_t>(i)];
      if (i != model.slack_bus()) {
        double expect = S[static_cast<size_t>(i)].real() + bus.pd;
        if (nc.has_generator_at(bus.id))
          expect -= u(model.control_index("P:" + std::to_string(bus.id)));
        CHECK(f(i) == doctest::Approx(expect).epsilon(1e-12));
      }
      if (!nc.has_generator_at(bus.id))
        CHECK(f(n + i) ==
              doctest::Approx(S[static_cast<size_t>(i)].imag() + bus.qd).epsilon(1e-12));
    }
  }

  // the jacobian still matches finite differences with the full branch model
  const Vector x = random_state(rng, nx);
  const Vector u = Vector::Ones(model.control_dim());
  const Matrix J = model.jacobian(x);
  const double h = 1e-6;
  for (Index c = 0; c < nx; ++c) {
    Vector xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    const Vector fd = (model.f(xp, u) - model.f(xm, u)) / (2 * h);
    for (Index r = 0; r < nx; ++r) CHECK(J(r, c) == doctest::Approx(fd(r)).epsilon(1e-6));
  }

  // and the power flow solves
  Vector uop(3);
  uop(model.control_index("P:2")) = 0.4;
  uop(model.control_index("V:1")) = 1.02 * 1.02;
  uop(model.control_index("V:2")) = 1.0;
  PowerFlowResult r = solve_power_flow(model, uop, model.flat_start());
  CHECK(r.converged);
  CHECK(r.residual_inf < 1e-8);
}

TEST_CASE("quadratic model structure") {
  NetworkCase nc = merge_generators(parse_matpower(test::read_file(test::data_dir() + "/case9.m")));
  QuadraticModel model = QuadraticModel::build(nc);
  const Index nx = model.state_dim();
  CHECK(nx == 18);
  CHECK(model.control_dim() == 5);  // P:2 P:3 V:1 V:2 V:3

  SUBCASE("every H_k is symmetric with rank at most four") {
    for (Index k = 0; k < model.num_equations(); ++k) {
      const Matrix H = Matrix(model.H(k));
      CHECK((H - H.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
      Eigen::JacobiSVD<Matrix> svd(H);
      Index rank = 0;
      for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10 * svd.singularValues()(0)) ++rank;
      CHECK(rank <= 4);
      // support confined to the owning bus's two rows and columns
      const Index n = model.n_buses();
      const Index bus = k < n ? k : k - n;
      for (Index r = 0; r < nx; ++r)
        for (Index c = 0; c < nx; ++c)
          if (H(r, c) != 0.0) {
            const bool in_cross =
                r == bus || r == n + bus || c == bus || c == n + bus;
            CHECK(in_cross);
          }
    }
  }

  SUBCASE("f matches the complex power-balance oracle at random points") {
    std::mt19937_64 rng(53);
    const Index n = model.n_buses();
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = random_state(rng, nx);
      Vector u(model.control_dim());
      for (Index j = 0; j < u.size(); ++j) u(j) = test::uniform01(rng);
      const Vector f = model.f(x, u);
      const auto S = test::oracle_injections(nc, x);
      for (Index i = 0; i < n; ++i) {
        const Bus& bus = nc.buses[static_cast<size_t>(i)];
        const bool gen = nc.has_generator_at(bus.id);
        // active rows
        double expect;
        if (i == model.slack_bus()) {
          expect = x(n + i);
        } else {
          expect = S[static_cast<size_t>(i)].real() + bus.pd;
          if (gen) expect -= u(model.control_index("P:" + std::to_string(bus.id)));
        }
        CHECK(f(i) == doctest::Approx(expect).epsilon(1e-12));
        // reactive / voltage rows
        if (gen) {
          const double vsq = x(i) * x(i) + x(n + i) * x(n + i);
          expect = vsq - u(model.control_index("V:" + std::to_string(bus.id)));
        } else {
          expect = S[static_cast<size_t>(i)].imag() + bus.qd;
        }
        CHECK(f(n + i) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  SUBCASE("jacobian matches finite differences") {
    std::mt19937_64 rng(59);
    const Vector x = random_state(rng, nx);
    Vector u = Vector::Ones(model.control_dim());
    const Matrix J = model.jacobian(x);
    const double h = 1e-6;
    for (Index c = 0; c < nx; ++c) {
      Vector xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      const Vector fd = (model.f(xp, u) - model.f(xm, u)) / (2 * h);
      for (Index r = 0; r < nx; ++r)
        CHECK(J(r, c) == doctest::Approx(fd(r)).epsilon(1e-6));
    }
    CHECK((model.jacobian(Vector::Zero(nx)) - model.jacobian_at_zero()).lpNorm<Eigen::Infinity>() ==
          0.0);
  }

  SUBCASE("jacobian is affine in the state") {
    std::mt19937_64 rng(61);
    const Vector x1 = random_state(rng, nx), x2 = random_state(rng, nx);
    const double alpha = 0.37;
    const Matrix lhs = model.jacobian(alpha * x1 + (1 - alpha) * x2);
    const Matrix rhs = alpha * model.jacobian(x1) + (1 - alpha) * model.jacobian(x2);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-13 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()));
  }

  SUBCASE("weighted hessian sum matches the jacobian linear part") {
    std::mt19937_64 rng(67);
    Vector theta(nx), v(nx);
    for (Index i = 0; i < nx; ++i) {
      theta(i) = test::uniform01(rng) - 0.5;
      v(i) = test::uniform01(rng) - 0.5;
    }
    // theta^T (J(v) - J0) == v^T (sum_k theta_k H_k) by symmetry of H_k
    const Vector lhs = model.jacobian_linear_part(v).transpose() * theta;
    const Vector rhs = model.weighted_hessian_sum(theta).transpose() * v;
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("control configuration freezes voltages into constants") {
    QuadraticModel sub = model.configure_controls(
        {"P:2", "P:3"}, {{"V:1", 1.0}, {"V:2", 1.0}, {"V:3", 1.0}});
    CHECK(sub.control_dim() == 2);
    std::mt19937_64 rng(71);
    const Vector x = random_state(rng, nx);
    Vector u_full = Vector::Zero(model.control_dim());
    u_full(model.control_index("P:2")) = 0.7;
    u_full(model.control_index("P:3")) = 0.4;
    u_full(model.control_index("V:1")) = 1.0;
    u_full(model.control_index("V:2")) = 1.0;
    u_full(model.control_index("V:3")) = 1.0;
    Vector u_sub(2);
    u_sub << 0.7, 0.4;
    CHECK((model.f(x, u_full) - sub.f(x, u_sub)).lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK_THROWS(model.configure_controls({"P:2"}, {}));           // uncovered slots
    CHECK_THROWS(model.configure_controls({"P:9"}, {}));           // unknown name
  }
}
