#include "pvlab/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pvlab/augment.hpp"
#include "pvlab/discrete_oracle.hpp"
#include "pvlab/errors.hpp"
#include "pvlab/gauss_oracle.hpp"
#include "pvlab/image_io.hpp"
#include "pvlab/predictor.hpp"
#include "pvlab/report.hpp"
#include "pvlab/tensor_file.hpp"

namespace pvlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

void parallel_for(long long n, int threads, const std::function<void(long long)>& body) {
  if (threads <= 1 || n <= 1) {
    for (long long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long long> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      const long long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = int(std::min<long long>(threads, n));
  pool.reserve(count);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
  if (error) std::rethrow_exception(error);
}

void require_keys(const json& object, const std::string& where,
                  const std::vector<std::string>& allowed) {
  for (const auto& item : object.items()) {
    bool known = false;
    for (const std::string& key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ArgumentError("unknown key \"" + item.key() + "\" in " + where);
  }
}

json load_config(const RunOptions& options, const std::string& command) {
  json config;
  if (options.config_path.empty()) {
    if (command != "verify")
      throw ArgumentError("--config is required for the " + command + " command");
    config = json{{"version", kConfigVersion}, {"seed", 0}, {"verify", json::object()}};
  } else {
    std::ifstream in(options.config_path);
    if (!in) throw IoError("cannot open config file: " + options.config_path);
    try {
      config = json::parse(in);
    } catch (const json::parse_error& err) {
      throw ArgumentError(std::string("config is not valid JSON: ") + err.what());
    }
  }
  if (!config.is_object()) throw ArgumentError("config root must be a JSON object");
  require_keys(config, "config root", {"version", "seed", command});
  if (!config.contains("version") || !config["version"].is_number_integer() ||
      config["version"].get<int>() != kConfigVersion)
    throw ArgumentError("config \"version\" must equal " + std::to_string(kConfigVersion));
  if (!config.contains(command) || !config[command].is_object())
    throw ArgumentError("config must contain a \"" + command + "\" object");
  if (config.contains("seed") &&
      !(config["seed"].is_number_unsigned() ||
        (config["seed"].is_number_integer() && config["seed"].get<std::int64_t>() >= 0)))
    throw ArgumentError("config \"seed\" must be a nonnegative integer");

  // Resolve the effective seed; the echoed config carries it.
  std::uint64_t seed = config.value("seed", std::uint64_t(0));
  if (options.has_seed_override) seed = options.seed_override;
  config["seed"] = seed;
  return config;
}

// Collects the run outputs so the manifest can checksum them in fixed order.
class OutputDir {
 public:
  OutputDir(const RunOptions& options, const json& resolved_config)
      : dir_(options.out_dir), config_(resolved_config) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string());
    started_ = std::chrono::steady_clock::now();
    write_text("config.json", config_.dump(2) + "\n");
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir_ / name).string());
    out << text;
    if (!out) throw IoError("failed writing " + (dir_ / name).string());
    names_.push_back(name);
  }

  void note_external(const std::string& name) { names_.push_back(name); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // Writes run_manifest.json with per-output checksums.
  void finish() {
    std::sort(names_.begin(), names_.end());
    json outputs = json::array();
    for (const std::string& name : names_) {
      std::ifstream in(dir_ / name, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
      char digest[20];
      std::snprintf(digest, sizeof(digest), "%016llx",
                    (unsigned long long)fnv1a64(bytes));
      outputs.push_back(json{{"file", name}, {"checksum", digest}});
    }
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started_)
                            .count();
    char digest[20];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  (unsigned long long)fnv1a64(config_.dump(2)));
    const json manifest = {{"config_hash", digest},
                           {"tool_version", kToolVersion},
                           {"wall_clock_seconds", wall},
                           {"outputs", outputs}};
    std::ofstream out(dir_ / "run_manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  json config_;
  std::vector<std::string> names_;
  std::chrono::steady_clock::time_point started_;
};

// ---------------------------------------------------------------------------
// Config fragments shared by the chain-based commands
// ---------------------------------------------------------------------------

NoiseSchedule parse_schedule(const json& object, int n_frames, const std::string& where) {
  if (object.contains("betas")) {
    if (object.contains("beta_start") || object.contains("beta_end"))
      throw ArgumentError(where + ": give either \"betas\" or the linear endpoints");
    NoiseSchedule schedule;
    schedule.betas = object["betas"].get<std::vector<double>>();
    if (schedule.n_frames() != n_frames)
      throw ArgumentError(where + ": betas length must be n_frames - 1");
    schedule.validate();
    return schedule;
  }
  const double beta_start = object.value("beta_start", 1e-4);
  const double beta_end = object.value("beta_end", 0.05);
  return linear_beta_schedule(n_frames, beta_start, beta_end);
}

gauss::GaussianSource parse_source(const json& object, int dim, const std::string& where) {
  gauss::GaussianSource source;
  if (object.contains("mean")) {
    const auto values = object["mean"].get<std::vector<double>>();
    if (int(values.size()) != dim)
      throw ArgumentError(where + ": mean length must equal dim");
    source.mean = Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
  } else {
    source.mean = Eigen::VectorXd::Zero(dim);
  }
  if (object.contains("cov")) {
    const auto rows = object["cov"].get<std::vector<std::vector<double>>>();
    if (int(rows.size()) != dim) throw ArgumentError(where + ": cov must be dim x dim");
    source.cov.resize(dim, dim);
    for (int r = 0; r < dim; ++r) {
      if (int(rows[r].size()) != dim) throw ArgumentError(where + ": cov must be dim x dim");
      for (int c = 0; c < dim; ++c) source.cov(r, c) = rows[r][c];
    }
  } else {
    source.cov = Eigen::MatrixXd::Identity(dim, dim);
  }
  source.validate();
  return source;
}

gauss::MarkovOrder parse_kind(const json& object, const std::string& where) {
  const std::string kind = object.value("kind", "first-order");
  if (kind == "first-order") return gauss::MarkovOrder::kFirstOrder;
  if (kind == "high-order") return gauss::MarkovOrder::kHighOrder;
  throw ArgumentError(where + ": kind must be \"first-order\" or \"high-order\"");
}

std::vector<std::vector<int>> parse_contexts(const json& object, int n_frames,
                                             const std::string& where) {
  std::vector<std::vector<int>> contexts;
  if (object.contains("contexts")) {
    contexts = object["contexts"].get<std::vector<std::vector<int>>>();
    if (contexts.empty()) throw ArgumentError(where + ": contexts must be nonempty");
  } else {
    for (int m = 1; m <= n_frames - 1; ++m) {
      std::vector<int> lags(m);
      std::iota(lags.begin(), lags.end(), 1);
      contexts.push_back(std::move(lags));
    }
  }
  return contexts;
}

std::string betas_to_string(const NoiseSchedule& schedule) {
  std::string out = "betas=[";
  for (std::size_t i = 0; i < schedule.betas.size(); ++i) {
    if (i) out += ',';
    out += format_number(schedule.betas[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Verify sweeps. Stream-id blocks keep every sub-check on its own stream so
// results do not depend on --threads.
// ---------------------------------------------------------------------------

struct SweepResult {
  bool pass = false;
  std::string detail;
};

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

gauss::ChainKind random_chain(int n_frames, gauss::MarkovOrder order, PhiloxStream& stream) {
  gauss::ChainKind kind;
  kind.order = order;
  kind.schedule.betas.resize(n_frames - 1);
  for (double& beta : kind.schedule.betas) beta = 0.05 + 0.9 * stream.next_double();
  return kind;
}

std::vector<std::vector<int>> full_nested_contexts(int n_frames) {
  std::vector<std::vector<int>> contexts;
  for (int m = 1; m <= n_frames - 1; ++m) {
    std::vector<int> lags(m);
    std::iota(lags.begin(), lags.end(), 1);
    contexts.push_back(std::move(lags));
  }
  return contexts;
}

SweepResult sweep_gauss_monotonicity(std::uint64_t seed, int threads) {
  constexpr int kConfigs = 100;
  std::vector<int> failures(kConfigs, 0);
  parallel_for(kConfigs, threads, [&](long long i) {
    PhiloxStream stream(RngSpec{seed, 1000 + std::uint64_t(i)});
    const int dim = 1 + int(stream.next_u64() % 4);
    const int n_frames = 2 + int(stream.next_u64() % 5);
    const gauss::MarkovOrder order = (stream.next_u64() & 1)
                                         ? gauss::MarkovOrder::kHighOrder
                                         : gauss::MarkovOrder::kFirstOrder;
    const gauss::GaussianSource source = random_source(dim, stream);
    const gauss::ChainKind kind = random_chain(n_frames, order, stream);
    const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
    const OracleReport report =
        gauss::theorem_check(joint, full_nested_contexts(n_frames));
    if (!report.monotone(1e-9) || !report.identity_ok(1e-9)) failures[i] = 1;
  });
  const int failed = std::accumulate(failures.begin(), failures.end(), 0);
  return {failed == 0, std::to_string(kConfigs - failed) + "/" +
                           std::to_string(kConfigs) + " random chains monotone"};
}

SweepResult sweep_first_order_equality(std::uint64_t seed, int threads) {
  constexpr int kGaussConfigs = 30;
  constexpr int kDiscreteConfigs = 20;
  std::vector<int> failures(kGaussConfigs + kDiscreteConfigs, 0);
  parallel_for(kGaussConfigs + kDiscreteConfigs, threads, [&](long long i) {
    if (i < kGaussConfigs) {
      PhiloxStream stream(RngSpec{seed, 2000 + std::uint64_t(i)});
      const int dim = 1 + int(stream.next_u64() % 4);
      const int n_frames = 3 + int(stream.next_u64() % 4);
      const gauss::GaussianSource source = random_source(dim, stream);
      const gauss::ChainKind kind =
          random_chain(n_frames, gauss::MarkovOrder::kFirstOrder, stream);
      const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
      const double base = gauss::conditional_error(joint, {1});
      for (int m = 2; m <= n_frames - 1; ++m) {
        std::vector<int> lags(m);
        std::iota(lags.begin(), lags.end(), 1);
        if (std::abs(base - gauss::conditional_error(joint, lags)) >= 1e-10)
          failures[i] = 1;
      }
    } else {
      PhiloxStream stream(RngSpec{seed, 2500 + std::uint64_t(i)});
      const int alphabet = 2 + int(stream.next_u64() % 3);
      const int n_frames = 3 + int(stream.next_u64() % 2);
      const std::vector<int> orders(n_frames - 1, 1);
      const discrete::DiscreteChainSpec spec =
          discrete::random_spec(alphabet, n_frames, orders, stream.spec());
      std::vector<double> values(alphabet);
      std::iota(values.begin(), values.end(), 0.0);
      const OracleReport report =
          discrete::theorem_check_discrete(spec, values, full_nested_contexts(n_frames));
      for (const OracleRow& row : report.rows)
        if (row.has_gap && std::abs(row.gap_to_prev) >= 1e-12) failures[i] = 1;
    }
  });
  const int failed = std::accumulate(failures.begin(), failures.end(), 0);
  return {failed == 0, std::to_string(kGaussConfigs + kDiscreteConfigs - failed) + "/" +
                           std::to_string(kGaussConfigs + kDiscreteConfigs) +
                           " first-order chains show zero gap"};
}

SweepResult sweep_high_order_gap(std::uint64_t seed, int threads) {
  constexpr int kConfigs = 30;
  std::vector<int> failures(kConfigs, 0);
  parallel_for(kConfigs, threads, [&](long long i) {
    PhiloxStream stream(RngSpec{seed, 3000 + std::uint64_t(i)});
    const int dim = 1 + int(stream.next_u64() % 3);
    const int n_frames = 3 + int(stream.next_u64() % 3);
    const gauss::GaussianSource source = random_source(dim, stream);
    const gauss::ChainKind kind =
        random_chain(n_frames, gauss::MarkovOrder::kHighOrder, stream);
    const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
    const double gap = gauss::conditional_error(joint, {1}) -
                       gauss::conditional_error(joint, {1, 2});
    if (!(gap > 1e-6)) failures[i] = 1;
  });
  const int failed = std::accumulate(failures.begin(), failures.end(), 0);
  return {failed == 0, std::to_string(kConfigs - failed) + "/" + std::to_string(kConfigs) +
                           " high-order chains show a strict gap"};
}

SweepResult sweep_discrete(std::uint64_t seed, int threads, OutputDir* outputs) {
  // Pinned binary flip chain.
  const discrete::DiscreteChainSpec flip = discrete::binary_flip_chain(3, 0.1);
  const std::vector<double> binary_values{0.0, 1.0};
  const discrete::JointPMF pmf = discrete::enumerate_joint(flip);
  const double flip_error = discrete::conditional_error_discrete(pmf, binary_values, {1});
  const bool flip_ok = std::abs(flip_error - 0.09) <= 1e-12;

  const OracleReport flip_report =
      discrete::theorem_check_discrete(flip, binary_values, full_nested_contexts(3));
  bool order1_ok = true;
  for (const OracleRow& row : flip_report.rows)
    if (row.has_gap && std::abs(row.gap_to_prev) >= 1e-12) order1_ok = false;
  if (outputs) outputs->write_text("discrete_flip_report.csv", flip_report.to_csv());

  // Randomized order-2 specs: nonnegative gaps, almost all strictly positive.
  constexpr int kSeeds = 50;
  std::vector<int> strict(kSeeds, 0), negative(kSeeds, 0);
  parallel_for(kSeeds, threads, [&](long long i) {
    PhiloxStream stream(RngSpec{seed, 4000 + std::uint64_t(i)});
    const int alphabet = 2 + int(stream.next_u64() % 2);
    const discrete::DiscreteChainSpec spec =
        discrete::random_spec(alphabet, 3, {1, 2}, stream.spec());
    std::vector<double> values(alphabet);
    std::iota(values.begin(), values.end(), 0.0);
    const OracleReport report =
        discrete::theorem_check_discrete(spec, values, {{1}, {1, 2}});
    const double gap = report.rows[1].gap_to_prev;
    if (gap > 1e-8) strict[i] = 1;
    if (gap < -1e-12) negative[i] = 1;
  });
  const int strict_count = std::accumulate(strict.begin(), strict.end(), 0);
  const int negative_count = std::accumulate(negative.begin(), negative.end(), 0);

  const bool pass = flip_ok && order1_ok && strict_count >= 45 && negative_count == 0;
  std::ostringstream detail;
  detail << "flip L*=" << format_number(flip_error) << ", strict gaps " << strict_count
         << "/" << kSeeds;
  return {pass, detail.str()};
}

SweepResult sweep_empirical(std::uint64_t seed, OutputDir* outputs) {
  gauss::GaussianSource source;
  source.mean = Eigen::VectorXd::Zero(1);
  source.cov = Eigen::MatrixXd::Identity(1, 1);
  NoiseSchedule schedule;
  schedule.betas = {0.5, 0.5};

  constexpr long long kTrain = 100'000;
  constexpr long long kTest = 100'000;

  const predictor::ContextComparison first = predictor::compare_context_sizes(
      source, {gauss::MarkovOrder::kFirstOrder, schedule}, 3, 1, 2, kTrain, kTest, 0.0,
      RngSpec{seed, 5000});
  const predictor::ContextComparison high = predictor::compare_context_sizes(
      source, {gauss::MarkovOrder::kHighOrder, schedule}, 3, 1, 2, kTrain, kTest, 0.0,
      RngSpec{seed, 5001});

  auto within = [](double value, double target, double rel) {
    return std::abs(value - target) <= rel * std::abs(target);
  };
  const bool oracle_match = within(first.eval_small.mse, first.oracle_small, 0.02) &&
                            within(first.eval_large.mse, first.oracle_large, 0.02) &&
                            within(high.eval_small.mse, high.oracle_small, 0.02) &&
                            within(high.eval_large.mse, high.oracle_large, 0.02);
  const bool first_flat = std::abs(first.mse_diff) <= 4.0 * first.se_diff;
  const bool high_gain = -high.mse_diff > 4.0 * high.se_diff;

  if (outputs) {
    std::string csv =
        "chain_kind,k,mse,oracle_lstar,mse_diff,se_diff,oracle_gap\n";
    auto row = [&](const char* kind, int k, const predictor::Evaluation& eval,
                   const predictor::ContextComparison& cmp) {
      csv += csv_line({kind, std::to_string(k), format_number(eval.mse),
                       format_number(k == cmp.k_small ? cmp.oracle_small : cmp.oracle_large),
                       format_number(cmp.mse_diff), format_number(cmp.se_diff),
                       format_number(cmp.oracle_gap)});
    };
    row("first-order", 1, first.eval_small, first);
    row("first-order", 2, first.eval_large, first);
    row("high-order", 1, high.eval_small, high);
    row("high-order", 2, high.eval_large, high);
    outputs->write_text("empirical_comparison.csv", csv);
  }

  std::ostringstream detail;
  detail << "high-order mse " << format_number(high.eval_small.mse) << " -> "
         << format_number(high.eval_large.mse) << " (oracle 0.5 -> 0.4444)";
  return {oracle_match && first_flat && high_gain, detail.str()};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 1099511628211ull;
  }
  return hash;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

int cmd_augment(const RunOptions& options) {
  const json config = load_config(options, "augment");
  const json& section = config["augment"];
  const std::uint64_t seed = config["seed"].get<std::uint64_t>();

  require_keys(section, "augment", {"input_dir", "family", "n_frames", "blur", "heat", "noise"});
  if (!section.contains("input_dir")) throw ArgumentError("augment: input_dir is required");
  const std::string input_dir = section["input_dir"].get<std::string>();
  const std::string family = section.value("family", "blur");
  const int n_frames = section.value("n_frames", 8);
  if (n_frames < 2) throw ArgumentError("augment: n_frames must be at least 2");

  const std::string family_key = family == "blur"   ? "blur"
                                 : family == "heat" ? "heat"
                                 : (family == "noise-first-order" ||
                                    family == "noise-high-order")
                                     ? "noise"
                                     : "";
  if (family_key.empty())
    throw ArgumentError("augment: family must be blur, heat, noise-first-order or "
                        "noise-high-order");
  for (const char* key : {"blur", "heat", "noise"})
    if (section.contains(key) && key != family_key)
      throw ArgumentError(std::string("augment: key \"") + key +
                          "\" does not match family " + family);

  // Family parameters and a manifest description of them.
  BlurSchedule blur_schedule;
  HeatSchedule heat_schedule;
  NoiseSchedule noise_schedule;
  std::string params;
  if (family == "blur") {
    const json object = section.value("blur", json::object());
    require_keys(object, "augment.blur", {"kernel_size", "sigma0", "rate"});
    blur_schedule.n_frames = n_frames;
    blur_schedule.kernel_size = object.value("kernel_size", 11);
    blur_schedule.sigma0 = object.value("sigma0", 1.0);
    blur_schedule.rate = object.value("rate", 0.05);
    blur_schedule.validate();
    params = "kernel_size=" + std::to_string(blur_schedule.kernel_size) +
             ";sigma0=" + format_number(blur_schedule.sigma0) +
             ";rate=" + format_number(blur_schedule.rate);
  } else if (family == "heat") {
    if (!section.contains("heat")) throw ArgumentError("augment: heat parameters required");
    const json& object = section["heat"];
    require_keys(object, "augment.heat", {"times", "sigma_h"});
    heat_schedule.times = object.value("times", std::vector<double>{});
    heat_schedule.sigma_h = object.value("sigma_h", 0.0);
    heat_schedule.validate();
    if (heat_schedule.n_frames() != n_frames)
      throw ArgumentError("augment: heat times length must be n_frames - 1");
    params = "sigma_h=" + format_number(heat_schedule.sigma_h);
  } else {
    const json object = section.value("noise", json::object());
    require_keys(object, "augment.noise", {"betas", "beta_start", "beta_end"});
    noise_schedule = parse_schedule(object, n_frames, "augment.noise");
    params = betas_to_string(noise_schedule);
  }

  // Deterministic input order: sorted file names.
  std::vector<fs::path> files;
  {
    std::error_code ec;
    fs::directory_iterator it(input_dir, ec), end;
    if (ec) throw ArgumentError("augment: cannot read input directory " + input_dir);
    for (; it != end; it.increment(ec)) {
      if (ec) throw ArgumentError("augment: cannot read input directory " + input_dir);
      const std::string ext = it->path().extension().string();
      if (it->is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
        files.push_back(it->path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ArgumentError("augment: no .pgm/.ppm images in " + input_dir);

  OutputDir outputs(options, config);
  std::vector<std::string> rows(files.size());
  std::vector<std::string> errors(files.size());

  parallel_for((long long)files.size(), options.threads, [&](long long i) {
    const RngSpec rng{seed, std::uint64_t(i)};
    try {
      const Frame image = read_image(files[i].string());
      PseudoVideo video;
      if (family == "blur") video = augment::make_blur_video(image, blur_schedule);
      else if (family == "heat") video = augment::make_heat_video(image, heat_schedule, rng);
      else if (family == "noise-first-order")
        video = augment::first_order_markov_noise(image, noise_schedule, rng);
      else video = augment::high_order_markov_noise(image, noise_schedule, rng);

      const std::string name = files[i].stem().string() + ".pvid";
      write_video(video, outputs.path(name).string());
      rows[i] = csv_line({name, std::to_string(n_frames), family, params,
                          std::to_string(seed)});
    } catch (const std::exception& err) {
      errors[i] = files[i].string() + ": " + err.what();
    }
  });

  std::string manifest = "file,T,family,schedule_params,seed\n";
  int failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "[pvlab] augment failed for " << errors[i] << "\n";
      ++failed;
    } else {
      manifest += rows[i];
      outputs.note_external(files[i].stem().string() + ".pvid");
    }
  }
  outputs.write_text("manifest.csv", manifest);
  outputs.finish();
  std::cerr << "[pvlab] augment: " << files.size() - failed << "/" << files.size()
            << " images -> " << options.out_dir << "\n";
  return failed == 0 ? kExitOk : kExitIo;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

int cmd_oracle(const RunOptions& options) {
  const json config = load_config(options, "oracle");
  const json& section = config["oracle"];
  const std::uint64_t seed = config["seed"].get<std::uint64_t>();

  require_keys(section, "oracle",
               {"family", "kind", "n_frames", "dim", "mean", "cov", "betas", "beta_start",
                "beta_end", "contexts", "spec", "flip_prob", "alphabet", "orders",
                "value_map"});
  const std::string family = section.value("family", "gaussian");

  OracleReport report;
  if (family == "gaussian") {
    const int n_frames = section.value("n_frames", 3);
    const int dim = section.value("dim", 1);
    if (n_frames < 2 || dim < 1) throw ArgumentError("oracle: need n_frames >= 2, dim >= 1");
    const gauss::GaussianSource source = parse_source(section, dim, "oracle");
    gauss::ChainKind kind;
    kind.order = parse_kind(section, "oracle");
    kind.schedule = parse_schedule(section, n_frames, "oracle");
    const auto contexts = parse_contexts(section, n_frames, "oracle");

    const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
    report = gauss::theorem_check(joint, contexts);
    report.chain_kind = gauss::chain_kind_name(kind.order);
  } else if (family == "discrete") {
    const std::string spec_name = section.value("spec", "flip");
    discrete::DiscreteChainSpec spec;
    if (spec_name == "flip") {
      spec = discrete::binary_flip_chain(section.value("n_frames", 3),
                                         section.value("flip_prob", 0.1));
    } else if (spec_name == "random") {
      if (!section.contains("orders"))
        throw ArgumentError("oracle: random discrete spec needs \"orders\"");
      const auto orders = section["orders"].get<std::vector<int>>();
      if (section.contains("n_frames") &&
          section["n_frames"].get<int>() != int(orders.size()) + 1)
        throw ArgumentError("oracle: n_frames must equal orders length + 1");
      spec = discrete::random_spec(section.value("alphabet", 2), int(orders.size()) + 1,
                                   orders, RngSpec{seed, 0});
    } else {
      throw ArgumentError("oracle: discrete spec must be \"flip\" or \"random\"");
    }
    std::vector<double> values;
    if (section.contains("value_map")) {
      values = section["value_map"].get<std::vector<double>>();
    } else {
      values.resize(spec.alphabet);
      std::iota(values.begin(), values.end(), 0.0);
    }
    const auto contexts = parse_contexts(section, spec.n_frames, "oracle");
    report = discrete::theorem_check_discrete(spec, values, contexts);
  } else {
    throw ArgumentError("oracle: family must be \"gaussian\" or \"discrete\"");
  }

  OutputDir outputs(options, config);
  outputs.write_text("report.csv", report.to_csv());
  outputs.finish();

  for (const OracleRow& row : report.rows)
    if (row.degenerate)
      std::cerr << "[pvlab] oracle: context " << format_context_set(row.context_lags)
                << " needed a ridge/pseudo-inverse fallback\n";

  const int violation = report.first_violation(1e-9);
  if (violation >= 0) {
    std::cerr << "[pvlab] oracle: monotonicity violated at context "
              << format_context_set(report.rows[violation].context_lags) << " (L*="
              << format_number(report.rows[violation].l_star) << ")\n";
    return kExitAssertion;
  }
  std::cerr << "[pvlab] oracle: " << report.rows.size() << " contexts -> "
            << options.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const RunOptions& options) {
  const json config = load_config(options, "fit");
  const json& section = config["fit"];
  const std::uint64_t seed = config["seed"].get<std::uint64_t>();

  require_keys(section, "fit",
               {"kind", "n_frames", "dim", "mean", "cov", "betas", "beta_start", "beta_end",
                "context_sizes", "n_train", "n_test", "model", "ridge", "mlp"});
  const int n_frames = section.value("n_frames", 3);
  const int dim = section.value("dim", 1);
  if (n_frames < 2 || dim < 1) throw ArgumentError("fit: need n_frames >= 2, dim >= 1");
  const gauss::GaussianSource source = parse_source(section, dim, "fit");
  gauss::ChainKind kind;
  kind.order = parse_kind(section, "fit");
  kind.schedule = parse_schedule(section, n_frames, "fit");

  const auto context_sizes =
      section.value("context_sizes", std::vector<int>{1, 2});
  // Default split: 80/20 of 1e5 sampled chains.
  const long long n_train = section.value("n_train", 80000LL);
  const long long n_test = section.value("n_test", 20000LL);
  const std::string model = section.value("model", "linear");
  const double ridge = section.value("ridge", 0.0);
  if (model != "linear" && model != "mlp")
    throw ArgumentError("fit: model must be \"linear\" or \"mlp\"");

  // Validate sizes before any sampling happens.
  for (int k : context_sizes) {
    if (k < 1 || k > n_frames - 1)
      throw ArgumentError("fit: context size " + std::to_string(k) + " outside 1..T-1");
    if (n_train < (long long)k * dim + 1)
      throw ArgumentError("fit: n_train below the minimum " +
                          std::to_string((long long)k * dim + 1) + " for context size " +
                          std::to_string(k));
  }
  if (n_test < 1) throw ArgumentError("fit: n_test must be positive");

  predictor::MLPTrainConfig mlp_config;
  if (section.contains("mlp")) {
    const json& object = section["mlp"];
    require_keys(object, "fit.mlp", {"width", "learning_rate", "epochs", "batch_size"});
    mlp_config.width = object.value("width", 64);
    mlp_config.learning_rate = object.value("learning_rate", 0.01);
    mlp_config.epochs = object.value("epochs", 50);
    mlp_config.batch_size = object.value("batch_size", 32);
  }

  const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
  const Eigen::MatrixXd samples =
      gauss::sample_chain(source, kind, n_frames, n_train + n_test, RngSpec{seed, 0});
  const Eigen::MatrixXd train = samples.topRows(n_train);
  const Eigen::MatrixXd test = samples.bottomRows(n_test);

  EvalReport eval_report;
  for (std::size_t i = 0; i < context_sizes.size(); ++i) {
    const int k = context_sizes[i];
    const predictor::Dataset train_set = predictor::make_dataset(train, dim, k);
    const predictor::Dataset test_set = predictor::make_dataset(test, dim, k);

    predictor::Evaluation eval;
    if (model == "linear") {
      eval = predictor::evaluate(predictor::fit_linear(train_set, ridge), test_set);
    } else {
      predictor::MLPTrainConfig task_config = mlp_config;
      task_config.rng = RngSpec{seed, 10 + std::uint64_t(i)};
      eval = predictor::evaluate(predictor::fit_mlp(train_set, task_config), test_set);
    }

    std::vector<int> lags(k);
    std::iota(lags.begin(), lags.end(), 1);
    EvalRow row;
    row.chain_kind = gauss::chain_kind_name(kind.order);
    row.n_frames = n_frames;
    row.dim = dim;
    row.context_size = k;
    row.n_train = n_train;
    row.n_test = n_test;
    row.mse = eval.mse;
    row.oracle_lstar = gauss::conditional_error(joint, lags);
    row.psnr_db = eval.psnr_db;
    row.mean_gap = std::numeric_limits<double>::quiet_NaN();
    row.cov_frobenius_gap = std::numeric_limits<double>::quiet_NaN();
    row.teacher_forced = false;
    row.seed = seed;
    eval_report.rows.push_back(std::move(row));
  }

  OutputDir outputs(options, config);
  outputs.write_text("eval.csv", eval_report.to_csv());
  outputs.finish();
  std::cerr << "[pvlab] fit: " << eval_report.rows.size() << " context sizes -> "
            << options.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const RunOptions& options) {
  const json config = load_config(options, "generate");
  const json& section = config["generate"];
  const std::uint64_t seed = config["seed"].get<std::uint64_t>();

  require_keys(section, "generate",
               {"kind", "n_frames", "dim", "mean", "cov", "betas", "beta_start", "beta_end",
                "context_window", "n_videos", "n_heldout", "teacher_forced", "predictor",
                "n_train", "ridge", "residual_std", "write_videos"});
  const int n_frames = section.value("n_frames", 3);
  const int dim = section.value("dim", 1);
  if (n_frames < 2 || dim < 1) throw ArgumentError("generate: need n_frames >= 2, dim >= 1");
  const gauss::GaussianSource source = parse_source(section, dim, "generate");
  gauss::ChainKind kind;
  kind.order = parse_kind(section, "generate");
  kind.schedule = parse_schedule(section, n_frames, "generate");

  predictor::GenConfig gen;
  gen.context_window = section.value("context_window", 1);
  gen.n_videos = section.value("n_videos", 256LL);
  gen.teacher_forced = section.value("teacher_forced", false);
  const long long n_heldout =
      std::max<long long>(section.value("n_heldout", 4096LL), gen.n_videos);
  const std::string predictor_name = section.value("predictor", "oracle");
  const long long n_train = section.value("n_train", 20000LL);
  const double ridge = section.value("ridge", 0.0);
  const bool write_videos = section.value("write_videos", true);
  if (gen.context_window < 1 || gen.context_window >= n_frames)
    throw ArgumentError("generate: context_window outside 1..T-1");

  const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
  const int window = gen.context_window;
  const int n_steps = n_frames - window;

  // Per-step oracle conditionals; also the default residual scales.
  std::vector<gauss::AffinePredictor> oracle_steps;
  std::vector<double> oracle_residual_std;
  for (int frame = window; frame < n_frames; ++frame) {
    const int block = n_frames - 1 - frame;
    std::vector<int> context_lags(window);
    std::iota(context_lags.begin(), context_lags.end(), block + 1);
    oracle_steps.push_back(gauss::conditional_of(joint, block, context_lags));
    oracle_residual_std.push_back(
        std::sqrt(std::max(oracle_steps.back().cond_cov.trace() / dim, 0.0)));
  }

  std::vector<predictor::StepPredictor> steps;
  if (predictor_name == "oracle") {
    for (const auto& step : oracle_steps) steps.push_back(predictor::as_step(step));
  } else if (predictor_name == "linear" || predictor_name == "linear-shared") {
    const Eigen::MatrixXd train =
        gauss::sample_chain(source, kind, n_frames, n_train, RngSpec{seed, 1});
    if (predictor_name == "linear-shared") {
      // One predictor fit on the pooled (window, next frame) pairs.
      Eigen::MatrixXd contexts(train.rows() * n_steps, window * dim);
      Eigen::MatrixXd targets(train.rows() * n_steps, dim);
      long long at = 0;
      for (int frame = window; frame < n_frames; ++frame) {
        const int block = n_frames - 1 - frame;
        contexts.middleRows(at, train.rows()) =
            train.middleCols((block + 1) * dim, window * dim);
        targets.middleRows(at, train.rows()) = train.middleCols(block * dim, dim);
        at += train.rows();
      }
      predictor::Dataset pooled{dim, std::move(contexts), std::move(targets)};
      const predictor::LinearPredictor model = predictor::fit_linear(pooled, ridge);
      for (int s = 0; s < n_steps; ++s) steps.push_back(predictor::as_step(model));
    } else {
      for (int frame = window; frame < n_frames; ++frame) {
        const int block = n_frames - 1 - frame;
        predictor::Dataset data{dim, train.middleCols((block + 1) * dim, window * dim),
                                train.middleCols(block * dim, dim)};
        steps.push_back(predictor::as_step(predictor::fit_linear(data, ridge)));
      }
    }
  } else {
    throw ArgumentError("generate: predictor must be oracle, linear or linear-shared");
  }

  if (section.contains("residual_std")) {
    const json& value = section["residual_std"];
    if (value.is_string() && value.get<std::string>() == "oracle")
      gen.residual_std = oracle_residual_std;
    else if (value.is_number())
      gen.residual_std = {value.get<double>()};
    else if (value.is_array())
      gen.residual_std = value.get<std::vector<double>>();
    else
      throw ArgumentError("generate: residual_std must be \"oracle\", a number or an array");
  } else {
    gen.residual_std = gen.teacher_forced ? std::vector<double>{0.0} : oracle_residual_std;
  }

  const Eigen::MatrixXd heldout =
      gauss::sample_chain(source, kind, n_frames, n_heldout, RngSpec{seed, 0});
  const predictor::GenerationResult result =
      predictor::autoregressive_generate(steps, heldout, n_frames, dim, gen,
                                         RngSpec{seed, 2});

  OutputDir outputs(options, config);
  if (write_videos) {
    for (long long j = 0; j < gen.n_videos; ++j) {
      PseudoVideo video;
      video.frames.resize(n_frames);
      for (int frame = 0; frame < n_frames; ++frame) {
        const int block = n_frames - 1 - frame;
        Frame f(1, dim, 1);
        for (int i = 0; i < dim; ++i) f.data[i] = float(result.videos(j, block * dim + i));
        video.frames[frame] = std::move(f);
      }
      char name[32];
      std::snprintf(name, sizeof(name), "gen_%05lld.pvid", j);
      write_video(video, outputs.path(name).string());
      outputs.note_external(name);
    }
  }

  std::vector<int> last_lags(window);
  std::iota(last_lags.begin(), last_lags.end(), 1);
  EvalRow row;
  row.chain_kind = gauss::chain_kind_name(kind.order);
  row.n_frames = n_frames;
  row.dim = dim;
  row.context_size = window;
  row.n_train = predictor_name == "oracle" ? 0 : n_train;
  row.n_test = gen.n_videos;
  row.mse = result.last_frame_mse;
  row.oracle_lstar = gauss::conditional_error(joint, last_lags);
  row.psnr_db = result.last_frame_mse == 0.0
                    ? std::numeric_limits<double>::infinity()
                    : 10.0 * std::log10(double(dim) / result.last_frame_mse);
  row.mean_gap = result.mean_gap;
  row.cov_frobenius_gap = result.cov_frobenius_gap;
  row.teacher_forced = gen.teacher_forced;
  row.seed = seed;
  EvalReport eval_report;
  eval_report.rows.push_back(std::move(row));

  outputs.write_text("eval.csv", eval_report.to_csv());
  outputs.finish();
  std::cerr << "[pvlab] generate: " << gen.n_videos << " videos -> " << options.out_dir
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const RunOptions& options) {
  const json config = load_config(options, "verify");
  require_keys(config["verify"], "verify", {});
  const std::uint64_t seed = config["seed"].get<std::uint64_t>();

  OutputDir outputs(options, config);

  // Pinned high-order chain report next to the sweeps.
  {
    gauss::GaussianSource source;
    source.mean = Eigen::VectorXd::Zero(1);
    source.cov = Eigen::MatrixXd::Identity(1, 1);
    gauss::ChainKind kind{gauss::MarkovOrder::kHighOrder, NoiseSchedule{{0.5, 0.5}}};
    OracleReport pinned =
        gauss::theorem_check(gauss::build_joint(source, kind, 3), {{1}, {1, 2}});
    pinned.chain_kind = gauss::chain_kind_name(kind.order);
    outputs.write_text("oracle_pinned.csv", pinned.to_csv());
  }

  struct Item {
    const char* name;
    SweepResult result;
  };
  std::vector<Item> items;
  items.push_back({"(a) gaussian monotonicity sweep",
                   sweep_gauss_monotonicity(seed, options.threads)});
  items.push_back({"(b) first-order equality sweep",
                   sweep_first_order_equality(seed, options.threads)});
  items.push_back({"(c) high-order strict-gap sweep",
                   sweep_high_order_gap(seed, options.threads)});
  items.push_back({"(d) discrete enumeration sweep",
                   sweep_discrete(seed, options.threads, &outputs)});
  items.push_back({"(e) empirical context comparison", sweep_empirical(seed, &outputs)});

  int passed = 0;
  std::string summary_csv = "check,result,detail\n";
  for (const Item& item : items) {
    if (item.result.pass) ++passed;
    std::printf("%-36s %s   %s\n", item.name, item.result.pass ? "PASS" : "FAIL",
                item.result.detail.c_str());
    summary_csv += csv_line({item.name, item.result.pass ? "PASS" : "FAIL",
                             item.result.detail});
  }
  std::printf("verify: %d/%d PASS\n", passed, int(items.size()));
  outputs.write_text("verify_summary.csv", summary_csv);
  outputs.finish();
  return passed == int(items.size()) ? kExitOk : kExitAssertion;
}

int run_command(const char* name, int (*command)(const RunOptions&),
                const RunOptions& options) {
  try {
    return command(options);
  } catch (const ArgumentError& err) {
    std::cerr << "[pvlab] " << name << ": configuration error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& err) {
    std::cerr << "[pvlab] " << name << ": format error: " << err.what() << "\n";
    return kExitIo;
  } catch (const IoError& err) {
    std::cerr << "[pvlab] " << name << ": I/O error: " << err.what() << "\n";
    return kExitIo;
  } catch (const std::exception& err) {
    std::cerr << "[pvlab] " << name << ": " << err.what() << "\n";
    return kExitAssertion;
  }
}

}  // namespace pvlab::cli
