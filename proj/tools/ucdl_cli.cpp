// ucdl: data generation, training, reconstruction, metrics and exports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ucdl/io.hpp"
#include "ucdl/metrics.hpp"
#include "ucdl/network.hpp"
#include "ucdl/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ucdl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    json j = json::parse(io::read_text(path));
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, path + ": top level must be an object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string config, out;
  std::vector<std::size_t> shape;
  std::size_t samples = 8, coils = 0;
  std::string mask;
  double acceleration = 0, sigma = -1;
  std::uint64_t seed = 0;
};

int run_gen_data(CLI::App& cmd, const GenDataArgs& a) {
  const json cfg = load_config(a.config);
  DatasetSpec spec;
  if (cfg.contains("dataset")) {
    spec = cfg.at("dataset").get<DatasetSpec>();
  } else if (cfg.contains("phantom")) {
    spec = cfg.get<DatasetSpec>();
  }
  std::size_t samples = cfg.value("samples", a.samples);

  if (cmd.count("--shape")) spec.phantom.shape = a.shape;
  if (cmd.count("--samples")) samples = a.samples;
  if (cmd.count("--coils")) spec.coils = a.coils;
  if (cmd.count("--mask")) spec.mask_family = parse_mask_family(a.mask);
  if (cmd.count("--acceleration")) spec.acceleration = a.acceleration;
  if (cmd.count("--sigma")) spec.sigma = a.sigma;
  if (cmd.count("--seed")) spec.phantom.seed = a.seed;
  spec.phantom.validate();

  const auto pairs = synth_dataset(spec, samples);
  save_samples(a.out, pairs);
  json manifest{{"dataset", spec}, {"samples", samples}};
  io::write_text(fs::path(a.out) / "dataset.json", manifest.dump(2) + "\n");
  std::cerr << "wrote " << samples << " samples to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- network flags

struct NetworkArgs {
  std::string mode;
  std::size_t K = 0, kf = 0;
  int T = 0, J = 0, ncg = 0;
  bool fixed_filters = false;
};

void add_network_flags(CLI::App& cmd, NetworkArgs& n) {
  cmd.add_option("--mode", n.mode, "Regularizer mode")->check(CLI::IsMember({"2d", "3d"}));
  cmd.add_option("--K", n.K, "Number of filters")->check(CLI::PositiveNumber);
  cmd.add_option("--kf", n.kf, "Kernel side length")->check(CLI::PositiveNumber);
  cmd.add_option("--T", n.T, "Outer iterations")->check(CLI::NonNegativeNumber);
  cmd.add_option("--J", n.J, "ADMM sweeps per outer iteration")->check(CLI::PositiveNumber);
  cmd.add_option("--ncg", n.ncg, "CG iterations per data-consistency step")->check(CLI::PositiveNumber);
  cmd.add_flag("--fixed-filters", n.fixed_filters, "Train lambda, alpha and beta only");
}

// Defaults of the chosen mode (or the --init checkpoint's config), then the
// config file, then explicit flags.
NetworkConfig resolve_network(const CLI::App& cmd, const NetworkArgs& n, const json& cfg,
                              const std::optional<NetworkConfig>& base) {
  const json net = cfg.contains("network") ? cfg.at("network") : cfg;
  std::string mode = net.value("mode", base ? to_string(base->mode) : std::string("3d"));
  if (cmd.count("--mode")) mode = n.mode;
  NetworkConfig c = base && to_string(base->mode) == mode ? *base : NetworkConfig::defaults_for(parse_mode(mode));
  json rest = json::object();
  for (const char* key : {"T", "J", "n_cg", "K", "kf", "train_filters"}) {
    if (net.contains(key)) rest[key] = net.at(key);
  }
  from_json(rest, c);
  if (cmd.count("--K")) c.K = n.K;
  if (cmd.count("--kf")) c.kf = n.kf;
  if (cmd.count("--T")) c.T = n.T;
  if (cmd.count("--J")) c.J = n.J;
  if (cmd.count("--ncg")) c.n_cg = n.ncg;
  if (n.fixed_filters) c.train_filters = false;
  c.validate();
  return c;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, val, out, init;
  int epochs = 16;
  double lr = kDefaultLearningRate;
  double val_fraction = 0.25;
  std::uint64_t seed = 0;
  NetworkArgs net;
};

int run_train(CLI::App& cmd, const TrainArgs& a) {
  const json cfg = load_config(a.config);
  std::optional<Checkpoint> init;
  if (!a.init.empty()) init = load_checkpoint(a.init);
  const NetworkConfig config =
      resolve_network(cmd, a.net, cfg, init ? std::optional<NetworkConfig>(init->config) : std::nullopt);
  if (init && (init->params.filters.count != config.K || init->params.filters.kernel_shape != config.kernel_shape())) {
    throw Error(ErrorCode::InvalidConfig, "--init kernels " + shape_string(init->params.filters.kernel_shape) + " x" +
                                              std::to_string(init->params.filters.count) +
                                              " do not match the requested K and kf");
  }

  TrainOptions opt;
  opt.epochs = cfg.value("epochs", opt.epochs);
  opt.lr = cfg.value("lr", opt.lr);
  opt.seed = cfg.value("seed", opt.seed);
  if (cmd.count("--epochs")) opt.epochs = a.epochs;
  if (cmd.count("--lr")) opt.lr = a.lr;
  if (cmd.count("--seed")) opt.seed = a.seed;
  if (opt.epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
  opt.run_dir = fs::path(a.out);

  auto train_set = load_samples(a.data);
  std::vector<TrainingPair> val_set;
  if (!a.val.empty()) {
    val_set = load_samples(a.val);
  } else {
    auto n_val = static_cast<std::size_t>(std::ceil(a.val_fraction * static_cast<double>(train_set.size())));
    if (n_val >= train_set.size()) throw Error(ErrorCode::InvalidConfig, "too few samples to hold out a validation set");
    val_set.assign(train_set.end() - static_cast<std::ptrdiff_t>(n_val), train_set.end());
    train_set.resize(train_set.size() - n_val);
  }
  if (train_set.empty()) throw Error(ErrorCode::InvalidConfig, "no training samples in " + a.data);

  std::optional<NetworkParams> initial;
  if (init) initial = init->params;

  std::cerr << "training " << to_string(config.mode) << " K=" << config.K << " kf=" << config.kf
            << " T=" << config.T << " J=" << config.J << " n_cg=" << config.n_cg << " on " << train_set.size()
            << " samples (" << val_set.size() << " validation)\n";
  const TrainResult r = train(train_set, val_set, config, opt, initial);
  save_checkpoint(fs::path(a.out) / "final.json", r.params, config);
  for (const auto& e : r.log) {
    std::fprintf(stderr, "epoch %3d  train %.6g  val %.6g\n", e.epoch, e.train_loss, e.val_loss);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- reconstruct

void write_magnitude_frames(const fs::path& dir, const char* stem, const ComplexImage& x) {
  const std::size_t nx = x.shape()[0], ny = x.shape()[1];
  const std::size_t nt = x.ndim() == 3 ? x.shape()[2] : 1;
  double peak = 0.0;
  for (const auto& v : x.data()) peak = std::max(peak, std::abs(v));
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<std::uint8_t> px(nx * ny);
    for (std::size_t p = 0; p < nx * ny; ++p) px[p] = to_byte(peak > 0 ? std::abs(x[p * nt + t]) / peak : 0.0);
    io::write_pgm(dir / indexed(stem, t, ".pgm"), ny, nx, px);
  }
}

struct ReconstructArgs {
  std::string checkpoint, sample, out;
  bool previews = true;
};

int run_reconstruct(const ReconstructArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const TrainingPair pair = load_sample(a.sample);
  const ComplexImage x = forward_reconstruct(pair.sample, ck.params, ck.config);
  const ComplexImage x0 = pair.sample.op().adjoint(pair.sample.y);

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_tensor(out / "recon.ucdl", x);
  io::write_tensor(out / "zero_filled.ucdl", x0);
  if (a.previews) write_magnitude_frames(out, "recon", x);
  std::cerr << "wrote " << (out / "recon.ucdl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string recon, target, out, csv;
  std::vector<std::size_t> roi;
};

int run_evaluate(const EvaluateArgs& a) {
  const ComplexImage x = io::read_tensor(a.recon);
  const ComplexImage ref = io::read_tensor(a.target);
  const std::size_t roi_h = a.roi.empty() ? 0 : a.roi[0];
  const std::size_t roi_w = a.roi.empty() ? 0 : a.roi[1];
  const MetricReport report = evaluate_metrics(x, ref, roi_h, roi_w);

  const std::string text = to_json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    io::write_text(a.out, text);
  }
  if (!a.csv.empty()) {
    const bool fresh = !fs::exists(a.csv) || fs::file_size(a.csv) == 0;
    std::ofstream f(a.csv, std::ios::app);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + a.csv);
    if (fresh) f << csv_header() << "\n";
    f << csv_row(report) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- export-filters

int run_export_filters(const std::string& checkpoint, const std::string& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const FilterBank& bank = ck.params.filters;
  const Shape& ks = bank.kernel_shape;
  const std::size_t kx = ks[0], ky = ks[1];
  const std::size_t kt = ks.size() == 3 ? ks[2] : 1;

  const fs::path out(out_dir);
  fs::create_directories(out);
  Shape all_dims{bank.count};
  all_dims.insert(all_dims.end(), ks.begin(), ks.end());
  ComplexImage all(all_dims);
  for (std::size_t i = 0; i < bank.values.size(); ++i) all[i] = bank.values[i];
  io::write_tensor(out / "filters.ucdl", all);

  // Each tile shows the kernel's temporal slices side by side.
  const std::size_t tile_h = kx, tile_w = ky * kt + (kt - 1);
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(bank.count))));
  const std::size_t rows = (bank.count + cols - 1) / cols;
  const std::size_t width = cols * (tile_w + 1) + 1, height = rows * (tile_h + 1) + 1;
  std::vector<std::uint8_t> grid(width * height, 0);

  for (std::size_t k = 0; k < bank.count; ++k) {
    const auto v = bank.kernel_values(k);
    ComplexImage kernel(ks);
    for (std::size_t i = 0; i < v.size(); ++i) kernel[i] = v[i];
    io::write_tensor(out / indexed("filter", k, ".ucdl"), kernel);

    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double span = *hi - *lo;
    const std::size_t r0 = (k / cols) * (tile_h + 1) + 1, c0 = (k % cols) * (tile_w + 1) + 1;
    for (std::size_t x = 0; x < kx; ++x) {
      for (std::size_t y = 0; y < ky; ++y) {
        for (std::size_t t = 0; t < kt; ++t) {
          const double val = v[(x * ky + y) * kt + t];
          grid[(r0 + x) * width + c0 + t * (ky + 1) + y] = to_byte(span > 0 ? (val - *lo) / span : 0.5);
        }
      }
    }
  }
  io::write_pgm(out / "filters.pgm", width, height, grid);
  std::cerr << "wrote " << bank.count << " filters to " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- export-feature-maps

struct FeatureMapArgs {
  std::string checkpoint, sample, out;
  std::size_t frame = 0;
};

int run_export_feature_maps(const FeatureMapArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (ck.config.T < 1) throw Error(ErrorCode::InvalidConfig, "feature maps need T >= 1");
  const TrainingPair pair = load_sample(a.sample);
  const Reconstruction rec = reconstruct(pair.sample, ck.params, ck.config);

  const bool per_frame = ck.config.mode == RegularizationMode::PerFrame2D;
  const std::size_t item = per_frame ? a.frame : 0;
  if (item >= rec.codes.size()) throw Error(ErrorCode::InvalidConfig, "frame index out of range");
  const auto& maps = rec.codes[item].s;
  const Shape& shape = maps.front().shape();
  const std::size_t nx = shape[0], ny = shape[1];
  const std::size_t nt = shape.size() == 3 ? shape[2] : 1;
  const std::size_t t = per_frame ? 0 : a.frame;
  if (t >= nt) throw Error(ErrorCode::InvalidConfig, "frame index out of range");

  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& m : maps) {
    for (const auto& v : m.data()) {
      sum += v.real();
      sq += v.real() * v.real();
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sigma = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
  const double window = 15.0 * sigma;

  const fs::path out(a.out);
  fs::create_directories(out);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    io::write_tensor(out / indexed("map", k, ".ucdl"), maps[k]);
    std::vector<std::uint8_t> px(nx * ny);
    for (std::size_t p = 0; p < nx * ny; ++p) {
      const double v = maps[k][p * nt + t].real();
      px[p] = to_byte(window > 0 ? (v + window) / (2.0 * window) : 0.5);
    }
    io::write_pgm(out / indexed("map", k, ".pgm"), ny, nx, px);
  }
  json meta{{"frame", a.frame}, {"sigma", sigma}, {"window", {-window, window}}, {"count", maps.size()}};
  io::write_text(out / "maps.json", meta.dump(2) + "\n");
  std::cerr << "wrote " << maps.size() << " feature maps to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unrolled convolutional dictionary learning for dynamic MRI"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Synthesize a phantom dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config, "JSON dataset description")->check(CLI::ExistingFile);
  gen_cmd->add_option("--samples", gen.samples, "Number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--shape", gen.shape, "Image shape Nx Ny Nt")->expected(3)->delimiter(',');
  gen_cmd->add_option("--coils", gen.coils, "Receiver coils")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--mask", gen.mask, "Mask family")->check(CLI::IsMember({"full", "lines", "points"}));
  gen_cmd->add_option("--acceleration", gen.acceleration, "Undersampling factor")->check(CLI::Range(1.0, 1e6));
  gen_cmd->add_option("--sigma", gen.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.seed, "Base seed");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train filters and regularization parameters");
  train_cmd->add_option("--data", tr.data, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--val", tr.val, "Validation dataset directory")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--val-fraction", tr.val_fraction, "Held-out tail of --data when --val is absent")
      ->check(CLI::Range(0.01, 0.9));
  train_cmd->add_option("--out", tr.out, "Run directory")->required();
  train_cmd->add_option("--config", tr.config, "JSON run configuration")->check(CLI::ExistingFile);
  train_cmd->add_option("--init", tr.init, "Start from this checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tr.seed, "Initialization and shuffle seed");
  add_network_flags(*train_cmd, tr.net);

  ReconstructArgs rc;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct a sample with a trained network");
  rec_cmd->add_option("--checkpoint", rc.checkpoint, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  rec_cmd->add_option("--sample", rc.sample, "Sample directory")->required()->check(CLI::ExistingDirectory);
  rec_cmd->add_option("--out", rc.out, "Output directory")->required();
  rec_cmd->add_flag("!--no-previews", rc.previews, "Skip the PGM previews");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR, NRMSE and SSIM over a central ROI");
  eval_cmd->add_option("--recon", ev.recon, "Reconstruction tensor")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--target", ev.target, "Reference tensor")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--roi", ev.roi, "ROI height,width (default: half of each axis)")
      ->expected(2)
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ev.out, "Write the JSON report here instead of stdout");
  eval_cmd->add_option("--csv", ev.csv, "Append a CSV row to this file");

  std::string ef_ckpt, ef_out;
  auto* ef_cmd = app.add_subcommand("export-filters", "Write kernels as tensors and a PGM grid");
  ef_cmd->add_option("--checkpoint", ef_ckpt, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  ef_cmd->add_option("--out", ef_out, "Output directory")->required();

  FeatureMapArgs fm;
  auto* fm_cmd = app.add_subcommand("export-feature-maps", "Write the final sparse codes s_k of a sample");
  fm_cmd->add_option("--checkpoint", fm.checkpoint, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  fm_cmd->add_option("--sample", fm.sample, "Sample directory")->required()->check(CLI::ExistingDirectory);
  fm_cmd->add_option("--out", fm.out, "Output directory")->required();
  fm_cmd->add_option("--frame", fm.frame, "Frame shown in the previews");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(*gen_cmd, gen);
    if (*train_cmd) return run_train(*train_cmd, tr);
    if (*rec_cmd) return run_reconstruct(rc);
    if (*eval_cmd) return run_evaluate(ev);
    if (*ef_cmd) return run_export_filters(ef_ckpt, ef_out);
    if (*fm_cmd) return run_export_feature_maps(fm);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_numerical() ? kExitNumerical : kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
