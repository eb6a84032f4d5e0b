#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "pvlab/discrete_oracle.hpp"
#include "pvlab/errors.hpp"
#include "pvlab/gauss_oracle.hpp"

using namespace pvlab;
using namespace pvlab::discrete;

namespace {

std::vector<double> identity_values(int alphabet) {
  std::vector<double> values(alphabet);
  std::iota(values.begin(), values.end(), 0.0);
  return values;
}

std::vector<std::vector<int>> nested(int n_frames) {
  std::vector<std::vector<int>> contexts;
  for (int m = 1; m <= n_frames - 1; ++m) {
    std::vector<int> lags(m);
    std::iota(lags.begin(), lags.end(), 1);
    contexts.push_back(std::move(lags));
  }
  return contexts;
}

}  // namespace

TEST_CASE("deterministic kernels concentrate the joint on K tuples") {
  DiscreteChainSpec spec;
  spec.alphabet = 3;
  spec.n_frames = 3;
  spec.source_pmf = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  StepKernel copy;
  copy.order = 1;
  copy.table = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // next = prev
  spec.kernels = {copy, copy};

  const JointPMF pmf = enumerate_joint(spec);
  int carrying_mass = 0;
  for (double p : pmf.table)
    if (p > 0.0) ++carrying_mass;
  CHECK(carrying_mass == 3);
  CHECK(std::abs(std::accumulate(pmf.table.begin(), pmf.table.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("binary flip joint matches the direct product") {
  const double p = 0.1;
  const JointPMF pmf = enumerate_joint(binary_flip_chain(2, p));
  // Index layout: x_T most significant, then x_1.
  CHECK(pmf.table[0] == doctest::Approx((1 - p) / 2).epsilon(1e-15));  // (0,0)
  CHECK(pmf.table[1] == doctest::Approx(p / 2).epsilon(1e-15));        // (0,1)
  CHECK(pmf.table[2] == doctest::Approx(p / 2).epsilon(1e-15));        // (1,0)
  CHECK(pmf.table[3] == doctest::Approx((1 - p) / 2).epsilon(1e-15));  // (1,1)
}

TEST_CASE("random joints always normalize") {
  for (int seed = 0; seed < 20; ++seed) {
    PhiloxStream stream(RngSpec{201, std::uint64_t(seed)});
    const int alphabet = 2 + int(stream.next_u64() % 3);
    const int n_frames = 2 + int(stream.next_u64() % 4);
    std::vector<int> orders;
    for (int t = 1; t <= n_frames - 1; ++t)
      orders.push_back(1 + int(stream.next_u64() % t));
    const DiscreteChainSpec spec =
        random_spec(alphabet, n_frames, orders, stream.spec());
    const JointPMF pmf = enumerate_joint(spec);
    double total = 0.0;
    for (double p : pmf.table) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("deterministic chains have zero reconstruction error") {
  DiscreteChainSpec spec;
  spec.alphabet = 2;
  spec.n_frames = 3;
  spec.source_pmf = {0.25, 0.75};
  StepKernel flip_all;
  flip_all.order = 1;
  flip_all.table = {0, 1, 1, 0};  // next = 1 - prev, a bijection
  spec.kernels = {flip_all, flip_all};
  const JointPMF pmf = enumerate_joint(spec);
  CHECK(conditional_error_discrete(pmf, identity_values(2), {1}) == 0.0);
  CHECK(conditional_error_discrete(pmf, identity_values(2), {2}) == 0.0);
}

TEST_CASE("flip chain error is p(1-p) by hand enumeration") {
  const JointPMF pmf = enumerate_joint(binary_flip_chain(2, 0.1));
  const double error = conditional_error_discrete(pmf, identity_values(2), {1});
  CHECK(std::abs(error - 0.09) < 1e-12);
}

TEST_CASE("first-order specs ignore older context frames") {
  for (int seed = 0; seed < 20; ++seed) {
    PhiloxStream stream(RngSpec{202, std::uint64_t(seed)});
    const int alphabet = 2 + int(stream.next_u64() % 3);
    const DiscreteChainSpec spec =
        random_spec(alphabet, 4, {1, 1, 1}, stream.spec());
    const JointPMF pmf = enumerate_joint(spec);
    const auto values = identity_values(alphabet);
    const double base = conditional_error_discrete(pmf, values, {1});
    CHECK(std::abs(base - conditional_error_discrete(pmf, values, {1, 2})) < 1e-12);
    CHECK(std::abs(base - conditional_error_discrete(pmf, values, {1, 2, 3})) < 1e-12);
  }
}

TEST_CASE("zero-probability contexts contribute nothing") {
  DiscreteChainSpec spec;
  spec.alphabet = 2;
  spec.n_frames = 2;
  spec.source_pmf = {1.0, 0.0};  // x_T is always 0
  StepKernel kernel;
  kernel.order = 1;
  kernel.table = {0.5, 0.5, 0.5, 0.5};
  spec.kernels = {kernel};
  const JointPMF pmf = enumerate_joint(spec);
  CHECK(conditional_error_discrete(pmf, identity_values(2), {1}) == 0.0);
}

TEST_CASE("theorem check over exact tables") {
  // Order-1 chain: every gap vanishes.
  const DiscreteChainSpec flip = binary_flip_chain(4, 0.2);
  const OracleReport flat =
      theorem_check_discrete(flip, identity_values(2), nested(4));
  CHECK(flat.chain_kind == "discrete(1,1,1)");
  CHECK(flat.monotone(1e-12));
  for (const OracleRow& row : flat.rows)
    if (row.has_gap) {
      CHECK(std::abs(row.gap_to_prev) < 1e-12);
      CHECK(row.equality_flag);
    }

  // A generic order-2 step breaks conditional independence.
  PhiloxStream stream(RngSpec{203, 0});
  const DiscreteChainSpec order2 = random_spec(2, 3, {1, 2}, stream.spec());
  const OracleReport strict =
      theorem_check_discrete(order2, identity_values(2), {{1}, {1, 2}});
  CHECK(strict.chain_kind == "discrete(1,2)");
  CHECK(strict.rows[1].gap_to_prev > 0.0);
  CHECK(strict.identity_ok(1e-12));

  // Single context: one row, no gaps.
  const OracleReport single =
      theorem_check_discrete(flip, identity_values(2), {{1}});
  CHECK(single.rows.size() == 1);
  CHECK_FALSE(single.rows[0].has_gap);
}

TEST_CASE("nested errors never increase over randomized specs") {
  for (int seed = 0; seed < 50; ++seed) {
    PhiloxStream stream(RngSpec{204, std::uint64_t(seed)});
    const int alphabet = 2 + int(stream.next_u64() % 3);
    const int n_frames = 2 + int(stream.next_u64() % 4);
    std::vector<int> orders;
    for (int t = 1; t <= n_frames - 1; ++t)
      orders.push_back(1 + int(stream.next_u64() % t));
    const DiscreteChainSpec spec =
        random_spec(alphabet, n_frames, orders, stream.spec());
    const OracleReport report =
        theorem_check_discrete(spec, identity_values(alphabet), nested(n_frames));
    CHECK(report.monotone(1e-12));
    CHECK(report.identity_ok(1e-12));
  }
}

TEST_CASE("randomized order-2 specs have strictly positive gaps") {
  int strict = 0;
  for (int seed = 0; seed < 50; ++seed) {
    PhiloxStream stream(RngSpec{205, std::uint64_t(seed)});
    const int alphabet = 2 + int(stream.next_u64() % 2);
    const DiscreteChainSpec spec = random_spec(alphabet, 3, {1, 2}, stream.spec());
    const OracleReport report =
        theorem_check_discrete(spec, identity_values(alphabet), {{1}, {1, 2}});
    CHECK(report.rows[1].gap_to_prev >= -1e-12);
    if (report.rows[1].gap_to_prev > 1e-8) ++strict;
  }
  CHECK(strict >= 45);
}

TEST_CASE("value map scaling scales the error quadratically") {
  const DiscreteChainSpec spec = binary_flip_chain(3, 0.15);
  const JointPMF pmf = enumerate_joint(spec);
  const double unit = conditional_error_discrete(pmf, {0.0, 1.0}, {1});
  const double doubled = conditional_error_discrete(pmf, {0.0, 2.0}, {1});
  CHECK(doubled == doctest::Approx(4.0 * unit).epsilon(1e-12));
}

TEST_CASE("cross validation converges to the exact error") {
  // Deterministic chain: zero empirical error.
  DiscreteChainSpec copy_chain;
  copy_chain.alphabet = 2;
  copy_chain.n_frames = 2;
  copy_chain.source_pmf = {0.5, 0.5};
  StepKernel copy;
  copy.order = 1;
  copy.table = {1, 0, 0, 1};
  copy_chain.kernels = {copy};
  const CrossValReport exact =
      cross_validate(copy_chain, identity_values(2), {1}, 10'000, RngSpec{206, 0});
  CHECK(exact.empirical_mse == 0.0);
  CHECK(exact.within_bound);

  // Flip chain at n = 1e5 lands within 1% of 0.09.
  const CrossValReport flip = cross_validate(binary_flip_chain(2, 0.1),
                                             identity_values(2), {1}, 100'000,
                                             RngSpec{206, 1});
  CHECK(flip.exact_l_star == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(flip.empirical_mse == doctest::Approx(0.09).epsilon(0.01));
  CHECK(flip.within_bound);

  // Determinism across runs.
  const CrossValReport again = cross_validate(binary_flip_chain(2, 0.1),
                                              identity_values(2), {1}, 100'000,
                                              RngSpec{206, 1});
  CHECK(again.empirical_mse == flip.empirical_mse);

  CHECK_THROWS_AS(cross_validate(binary_flip_chain(2, 0.1), identity_values(2), {1},
                                 100, RngSpec{206, 2}),
                  ArgumentError);
}

TEST_CASE("agreement with the gaussian oracle on a sign-quantized chain") {
  // First-order Gaussian chain; Sheppard's formula gives the sign-flip
  // probability arccos(rho)/pi between consecutive frames.
  const std::vector<double> betas{0.3, 0.6};
  gauss::GaussianSource source;
  source.mean = Eigen::VectorXd::Zero(1);
  source.cov = Eigen::MatrixXd::Identity(1, 1);
  const gauss::JointGaussian joint = gauss::build_joint(
      source, {gauss::MarkovOrder::kFirstOrder, NoiseSchedule{betas}}, 3);

  DiscreteChainSpec quantized;
  quantized.alphabet = 2;
  quantized.n_frames = 3;
  quantized.source_pmf = {0.5, 0.5};
  for (int t = 1; t <= 2; ++t) {
    const double rho = joint.cov(t - 1, t) /
                       std::sqrt(joint.cov(t - 1, t - 1) * joint.cov(t, t));
    const double flip = std::acos(rho) / std::numbers::pi;
    StepKernel kernel;
    kernel.order = 1;
    kernel.table = {1 - flip, flip, flip, 1 - flip};
    quantized.kernels.push_back(std::move(kernel));
  }

  const OracleReport discrete_report =
      theorem_check_discrete(quantized, identity_values(2), {{1}, {1, 2}});
  const OracleReport gauss_report = gauss::theorem_check(joint, {{1}, {1, 2}});
  CHECK(std::abs(discrete_report.rows[1].gap_to_prev) < 1e-12);
  CHECK(std::abs(gauss_report.rows[1].gap_to_prev) < 1e-10);
  CHECK(discrete_report.rows[1].equality_flag == gauss_report.rows[1].equality_flag);
}

TEST_CASE("spec validation and resource bounds") {
  DiscreteChainSpec bad = binary_flip_chain(3, 0.1);
  bad.kernels[0].table[0] = 0.6;  // row no longer sums to 1
  CHECK_THROWS_AS(bad.validate(), ArgumentError);

  DiscreteChainSpec wrong_order = binary_flip_chain(3, 0.1);
  wrong_order.kernels[0].order = 2;  // order 2 at step 1 is impossible
  CHECK_THROWS_AS(wrong_order.validate(), ArgumentError);

  DiscreteChainSpec short_pmf = binary_flip_chain(3, 0.1);
  short_pmf.source_pmf = {1.0};
  CHECK_THROWS_AS(short_pmf.validate(), ArgumentError);

  // 10^8 states exceed the enumeration bound.
  PhiloxStream stream(RngSpec{207, 0});
  const DiscreteChainSpec huge =
      random_spec(10, 8, std::vector<int>(7, 1), stream.spec());
  CHECK_THROWS_AS(enumerate_joint(huge), ResourceError);
}
