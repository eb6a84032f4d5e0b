// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Criteria 1-8 exercise the library directly; 9 and 10 drive the pvlab
// binary named by the PVLAB_BIN environment variable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "pvlab/augment.hpp"
#include "pvlab/discrete_oracle.hpp"
#include "pvlab/gauss_oracle.hpp"
#include "pvlab/image_io.hpp"
#include "pvlab/predictor.hpp"

namespace fs = std::filesystem;
using namespace pvlab;

namespace {

struct Criterion {
  std::string name;
  double time_limit_s = 0.0;
  std::function<bool(std::string&)> body;
};

gauss::GaussianSource unit_source(int dim = 1) {
  gauss::GaussianSource source;
  source.mean = Eigen::VectorXd::Zero(dim);
  source.cov = Eigen::MatrixXd::Identity(dim, dim);
  return source;
}

gauss::GaussianSource random_source(int dim, PhiloxStream& stream) {
  Eigen::MatrixXd a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = stream.next_normal();
  gauss::GaussianSource source;
  source.cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
  source.mean.resize(dim);
  for (int r = 0; r < dim; ++r) source.mean[r] = stream.next_normal();
  return source;
}

std::vector<std::vector<int>> nested_contexts(int n_frames) {
  std::vector<std::vector<int>> contexts;
  for (int m = 1; m <= n_frames - 1; ++m) {
    std::vector<int> lags(m);
    std::iota(lags.begin(), lags.end(), 1);
    contexts.push_back(std::move(lags));
  }
  return contexts;
}

bool within(double value, double target, double rel) {
  return std::abs(value - target) <= rel * std::abs(target);
}

// ---- criteria 1-8 ---------------------------------------------------------

bool criterion_monotonicity(std::string& detail) {
  int failures = 0;
  for (int config = 0; config < 100; ++config) {
    PhiloxStream stream(RngSpec{900, std::uint64_t(config)});
    const int dim = 1 + int(stream.next_u64() % 4);
    const int n_frames = 2 + int(stream.next_u64() % 5);
    const gauss::MarkovOrder order = (stream.next_u64() & 1)
                                         ? gauss::MarkovOrder::kHighOrder
                                         : gauss::MarkovOrder::kFirstOrder;
    std::vector<double> betas(n_frames - 1);
    for (double& b : betas) b = 0.05 + 0.9 * stream.next_double();
    const gauss::GaussianSource source = random_source(dim, stream);
    const gauss::JointGaussian joint =
        gauss::build_joint(source, {order, NoiseSchedule{betas}}, n_frames);
    const OracleReport report = gauss::theorem_check(joint, nested_contexts(n_frames));
    if (!report.monotone(1e-9)) ++failures;
  }
  detail = std::to_string(100 - failures) + "/100 configurations monotone within 1e-9";
  return failures == 0;
}

bool criterion_first_order_equality(std::string& detail) {
  int failures = 0;
  for (int config = 0; config < 30; ++config) {
    PhiloxStream stream(RngSpec{901, std::uint64_t(config)});
    const int dim = 1 + int(stream.next_u64() % 4);
    const int n_frames = 3 + int(stream.next_u64() % 4);
    std::vector<double> betas(n_frames - 1);
    for (double& b : betas) b = 0.05 + 0.9 * stream.next_double();
    const gauss::GaussianSource source = random_source(dim, stream);
    const gauss::JointGaussian joint = gauss::build_joint(
        source, {gauss::MarkovOrder::kFirstOrder, NoiseSchedule{betas}}, n_frames);
    const double base = gauss::conditional_error(joint, {1});
    for (int m = 2; m <= n_frames - 1; ++m) {
      std::vector<int> lags(m);
      std::iota(lags.begin(), lags.end(), 1);
      if (!(std::abs(base - gauss::conditional_error(joint, lags)) < 1e-10)) ++failures;
    }
  }

  for (int config = 0; config < 20; ++config) {
    PhiloxStream stream(RngSpec{902, std::uint64_t(config)});
    const int alphabet = 2 + int(stream.next_u64() % 3);
    const int n_frames = 3 + int(stream.next_u64() % 2);
    const discrete::DiscreteChainSpec spec = discrete::random_spec(
        alphabet, n_frames, std::vector<int>(n_frames - 1, 1), stream.spec());
    std::vector<double> values(alphabet);
    std::iota(values.begin(), values.end(), 0.0);
    const OracleReport report =
        discrete::theorem_check_discrete(spec, values, nested_contexts(n_frames));
    for (const OracleRow& row : report.rows)
      if (row.has_gap && !(std::abs(row.gap_to_prev) < 1e-10)) ++failures;
  }
  detail = "gaussian and discrete first-order gaps < 1e-10";
  return failures == 0;
}

bool criterion_high_order_pinned(std::string& detail) {
  const gauss::ChainKind kind{gauss::MarkovOrder::kHighOrder, NoiseSchedule{{0.5, 0.5}}};
  const gauss::JointGaussian joint = gauss::build_joint(unit_source(), kind, 3);

  // Schur route against the hand-propagated constants 1/2, 4/9, 1/18.
  const double l1 = gauss::conditional_error(joint, {1});
  const double l2 = gauss::conditional_error(joint, {1, 2});
  bool ok = std::abs(l1 - 0.5) < 1e-9 && std::abs(l2 - 4.0 / 9.0) < 1e-9 &&
            std::abs((l1 - l2) - 1.0 / 18.0) < 1e-9;

  // Monte-Carlo route: residuals of the optimal predictors over 1e6 chains.
  const Eigen::MatrixXd samples =
      gauss::sample_chain(unit_source(), kind, 3, 1'000'000, RngSpec{903, 0});
  const gauss::AffinePredictor p1 = gauss::optimal_predictor(joint, {1});
  const gauss::AffinePredictor p2 = gauss::optimal_predictor(joint, {1, 2});
  double mse1 = 0.0, mse2 = 0.0;
  for (long long i = 0; i < samples.rows(); ++i) {
    const double r1 = samples(i, 0) - (p1.coeff(0, 0) * samples(i, 1) + p1.offset[0]);
    const double r2 = samples(i, 0) - (p2.coeff(0, 0) * samples(i, 1) +
                                       p2.coeff(0, 1) * samples(i, 2) + p2.offset[0]);
    mse1 += r1 * r1;
    mse2 += r2 * r2;
  }
  mse1 /= double(samples.rows());
  mse2 /= double(samples.rows());
  ok = ok && within(mse1, 0.5, 0.01) && within(mse2, 4.0 / 9.0, 0.01) &&
       within(mse1 - mse2, 1.0 / 18.0, 0.01);

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "schur (%.6f, %.6f) monte-carlo (%.6f, %.6f) vs (0.5, 0.4444)", l1, l2,
                mse1, mse2);
  detail = buf;
  return ok;
}

bool criterion_discrete(std::string& detail) {
  const discrete::DiscreteChainSpec flip = discrete::binary_flip_chain(3, 0.1);
  const std::vector<double> values{0.0, 1.0};
  const double flip_error = discrete::conditional_error_discrete(
      discrete::enumerate_joint(flip), values, {1});
  bool ok = std::abs(flip_error - 0.09) <= 1e-12;

  const OracleReport flat = discrete::theorem_check_discrete(flip, values,
                                                             nested_contexts(3));
  for (const OracleRow& row : flat.rows)
    if (row.has_gap && !(std::abs(row.gap_to_prev) < 1e-12)) ok = false;

  int strict = 0;
  for (int seed = 0; seed < 50; ++seed) {
    PhiloxStream stream(RngSpec{904, std::uint64_t(seed)});
    const int alphabet = 2 + int(stream.next_u64() % 2);
    const discrete::DiscreteChainSpec spec =
        discrete::random_spec(alphabet, 3, {1, 2}, stream.spec());
    std::vector<double> embed(alphabet);
    std::iota(embed.begin(), embed.end(), 0.0);
    const OracleReport report =
        discrete::theorem_check_discrete(spec, embed, {{1}, {1, 2}});
    const double gap = report.rows[1].gap_to_prev;
    if (gap < -1e-12) ok = false;
    if (gap > 1e-8) ++strict;
  }
  ok = ok && strict >= 45;
  detail = "flip L* exact, order-2 strict gaps " + std::to_string(strict) + "/50";
  return ok;
}

bool criterion_empirical(std::string& detail) {
  const predictor::ContextComparison first = predictor::compare_context_sizes(
      unit_source(), {gauss::MarkovOrder::kFirstOrder, NoiseSchedule{{0.5, 0.5}}}, 3, 1,
      2, 100'000, 100'000, 0.0, RngSpec{905, 0});
  const predictor::ContextComparison high = predictor::compare_context_sizes(
      unit_source(), {gauss::MarkovOrder::kHighOrder, NoiseSchedule{{0.5, 0.5}}}, 3, 1,
      2, 100'000, 100'000, 0.0, RngSpec{905, 1});

  const bool match = within(first.eval_small.mse, first.oracle_small, 0.02) &&
                     within(first.eval_large.mse, first.oracle_large, 0.02) &&
                     within(high.eval_small.mse, high.oracle_small, 0.02) &&
                     within(high.eval_large.mse, high.oracle_large, 0.02);
  const bool separation = (-high.mse_diff > 4.0 * high.se_diff) &&
                          (std::abs(first.mse_diff) <= 4.0 * first.se_diff);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "high-order gain %.5f (4se %.5f), first-order drift %.6f",
                -high.mse_diff, 4.0 * high.se_diff, first.mse_diff);
  detail = buf;
  return match && separation;
}

bool criterion_schedules(std::string& detail) {
  const NoiseSchedule betas = linear_beta_schedule(8, 0.0001, 0.05);
  bool ok = betas.betas.front() == 0.0001 && betas.betas.back() == 0.05;

  BlurSchedule defaults;
  ok = ok && defaults.kernel_size == 11;

  const BlurSchedule eight{8, 11, 1.0, 0.05};
  for (int t = 1; t <= 7; ++t)
    ok = ok && std::abs(eight.sigma_at(t) - std::exp(0.05 * t)) < 1e-12;
  const BlurSchedule eighteen{18, 11, 1.0, 0.01};
  for (int t = 1; t <= 17; ++t)
    ok = ok && std::abs(eighteen.sigma_at(t) - std::exp(0.01 * t)) < 1e-12;

  detail = "beta endpoints exact, 11x11 kernel, 8/18-frame sigma ladders";
  return ok;
}

bool criterion_augment_invariants(std::string& detail) {
  PhiloxStream pixel_stream(RngSpec{906, 0});
  Frame image(12, 10, 1);
  for (float& v : image.data) v = float(pixel_stream.next_double());

  bool ok = true;

  // Blur: mean preserved, variance non-increasing toward frame 0.
  const PseudoVideo blur = augment::make_blur_video(image, BlurSchedule{6, 11, 1.0, 0.05});
  const double mean = image.channel_means()[0];
  auto variance = [](const Frame& frame) {
    const double m = frame.channel_means()[0];
    double acc = 0.0;
    for (float v : frame.data) acc += (v - m) * (v - m);
    return acc / double(frame.size());
  };
  for (const Frame& frame : blur.frames)
    ok = ok && std::abs(frame.channel_means()[0] - mean) < 1e-5;
  for (std::size_t t = 1; t < blur.frames.size(); ++t)
    ok = ok && variance(blur.frames[t - 1]) <= variance(blur.frames[t]) + 1e-5;

  // Heat: identity, semigroup, DC preservation.
  const Frame identity = augment::heat_operator_apply(image, 0.0);
  for (std::size_t i = 0; i < image.size(); ++i)
    ok = ok && std::abs(identity.data[i] - image.data[i]) <= 1e-5;
  const Frame chained =
      augment::heat_operator_apply(augment::heat_operator_apply(image, 0.9), 1.3);
  const Frame direct = augment::heat_operator_apply(image, 2.2);
  for (std::size_t i = 0; i < image.size(); ++i)
    ok = ok && std::abs(chained.data[i] - direct.data[i]) <= 1e-4;
  ok = ok && std::abs(direct.channel_means()[0] - mean) <= 1e-6;

  // Cosine eigenfunction attenuation within 1e-3 relative.
  const int w = 16;
  for (int freq : {1, 3}) {
    Frame wave(8, w, 1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < w; ++x)
        wave.at(y, x, 0) = float(std::cos(std::numbers::pi * freq * (x + 0.5) / w));
    const Frame out = augment::heat_operator_apply(wave, 1.5);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < wave.size(); ++i) {
      num += double(out.data[i]) * double(wave.data[i]);
      den += double(wave.data[i]) * double(wave.data[i]);
    }
    const double expected =
        std::exp(-1.5 * std::numbers::pi * std::numbers::pi * freq * freq / double(w * w));
    ok = ok && std::abs(num / den - expected) <= 1e-3 * expected;
  }

  detail = "blur mean/variance, heat identity/semigroup/DC, cosine rates";
  return ok;
}

bool criterion_gradient_check(std::string& detail) {
  const gauss::ChainKind kind{gauss::MarkovOrder::kHighOrder, NoiseSchedule{{0.4, 0.3}}};
  const Eigen::MatrixXd samples =
      gauss::sample_chain(unit_source(2), kind, 3, 64, RngSpec{907, 0});
  const predictor::Dataset data = predictor::make_dataset(samples, 2, 2);

  double worst = 0.0;
  for (int init = 0; init < 3; ++init) {
    predictor::MLPTrainConfig config;
    config.width = 8;
    config.epochs = 0;
    config.rng = RngSpec{907, 10 + std::uint64_t(init)};
    const predictor::MLPPredictor mlp = predictor::fit_mlp(data, config);
    worst = std::max(worst, predictor::mlp_gradient_check(
                                mlp, data, 10, RngSpec{907, 20 + std::uint64_t(init)}));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max relative error %.2e over 3 initializations", worst);
  detail = buf;
  return worst < 1e-4;
}

// ---- criteria 9-10: the command-line binary -------------------------------

std::string binary_path() {
  const char* path = std::getenv("PVLAB_BIN");
  return path ? path : "";
}

int run_cli(const std::string& args) {
  const std::string cmd = binary_path() + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// Compares every output file except the manifest (whose wall-clock field
// legitimately differs), then checks the manifests agree on checksums.
bool same_outputs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(a))
    names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    if (name == "run_manifest.json") continue;
    if (read_file(a / name) != read_file(b / name)) return false;
  }
  // Checksums inside the manifests must agree even though timings differ.
  auto checksums = [](const fs::path& dir) {
    const std::string manifest = read_file(dir / "run_manifest.json");
    const std::size_t at = manifest.find("\"outputs\"");
    if (at == std::string::npos) return std::string();
    return manifest.substr(at, manifest.find(']', at) - at);
  };
  return checksums(a) == checksums(b);
}

bool criterion_determinism(std::string& detail) {
  if (binary_path().empty()) {
    detail = "PVLAB_BIN not set";
    return false;
  }
  const fs::path root = fs::temp_directory_path() / "pvlab_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);

  // verify twice at different thread counts.
  bool ok = run_cli("verify --out " + (root / "v1").string() + " --threads 1") == 0;
  ok = ok && run_cli("verify --out " + (root / "v2").string() + " --threads 4") == 0;
  ok = ok && same_outputs(root / "v1", root / "v2");

  // oracle twice.
  write_file(root / "oracle.json",
             R"({"version":1,"seed":8,"oracle":{"family":"gaussian","kind":"high-order",)"
             R"("n_frames":3,"betas":[0.5,0.5]}})");
  ok = ok && run_cli("oracle --config " + (root / "oracle.json").string() + " --out " +
                     (root / "o1").string()) == 0;
  ok = ok && run_cli("oracle --config " + (root / "oracle.json").string() + " --out " +
                     (root / "o2").string()) == 0;
  ok = ok && same_outputs(root / "o1", root / "o2");

  // augment twice at different thread counts.
  const fs::path images = root / "images";
  fs::create_directories(images);
  PhiloxStream stream(RngSpec{908, 0});
  for (int i = 0; i < 3; ++i) {
    Frame frame(8, 6, 1);
    for (float& v : frame.data) v = float(stream.next_double());
    write_image(frame, (images / ("img" + std::to_string(i) + ".pgm")).string());
  }
  write_file(root / "augment.json",
             R"({"version":1,"seed":8,"augment":{"input_dir":")" + images.string() +
                 R"(","family":"noise-high-order","n_frames":4,)"
                 R"("noise":{"beta_start":0.0001,"beta_end":0.05}}})");
  ok = ok && run_cli("augment --config " + (root / "augment.json").string() + " --out " +
                     (root / "a1").string() + " --threads 1") == 0;
  ok = ok && run_cli("augment --config " + (root / "augment.json").string() + " --out " +
                     (root / "a2").string() + " --threads 4") == 0;
  ok = ok && same_outputs(root / "a1", root / "a2");

  detail = "verify/oracle/augment reruns byte-identical across thread counts";
  return ok;
}

bool criterion_end_to_end(std::string& detail) {
  if (binary_path().empty()) {
    detail = "PVLAB_BIN not set";
    return false;
  }
  const fs::path root = fs::temp_directory_path() / "pvlab_acceptance_e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cmd = binary_path() + " verify --out " + (root / "out").string() +
                          " > " + (root / "stdout.txt").string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  const bool exit_ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  const std::string stdout_text = read_file(root / "stdout.txt");
  const bool reported = stdout_text.find("verify: 5/5 PASS") != std::string::npos;
  detail = reported ? "verify reports 5/5 PASS" : "verify did not report 5/5 PASS";
  return exit_ok && reported;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {"theorem-1 monotonicity, gaussian sweep", 5.0, criterion_monotonicity},
      {"first-order equality case, both oracles", 5.0, criterion_first_order_equality},
      {"high-order pinned values, schur + monte-carlo", 10.0, criterion_high_order_pinned},
      {"discrete brute force", 10.0, criterion_discrete},
      {"empirical-oracle agreement", 60.0, criterion_empirical},
      {"schedule fidelity", 5.0, criterion_schedules},
      {"augmentation invariants", 10.0, criterion_augment_invariants},
      {"mlp gradient check", 5.0, criterion_gradient_check},
      {"rerun determinism", 60.0, criterion_determinism},
      {"end-to-end verify suite", 120.0, criterion_end_to_end},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = criteria[i].body(detail);
    } catch (const std::exception& err) {
      detail = std::string("exception: ") + err.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criteria[i].time_limit_s) {
      pass = false;
      detail += " [over time limit]";
    }
    if (!pass) ++failures;
    std::printf("%s  [%2zu] %-46s (%.2fs)  %s\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), elapsed, detail.c_str());
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
