// hybridflow: generate shapes, add noise, train, filter, evaluate, ablate.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hybridflow/ablation.hpp"
#include "hybridflow/checkpoint.hpp"
#include "hybridflow/filtering.hpp"
#include "hybridflow/io.hpp"
#include "hybridflow/metrics.hpp"
#include "hybridflow/run_config.hpp"
#include "hybridflow/runtime.hpp"
#include "hybridflow/shapes.hpp"

namespace fs = std::filesystem;
using namespace hf;

namespace {

fs::path with_suffix(const fs::path &stem, const std::string &ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

int cmd_gen(const RunConfig &cfg) {
  shapes::ShapeSpec spec = cfg.shape;
  spec.seed = cfg.seed;
  const auto shape = shapes::generate(spec);
  // --out is a stem; ".xyz" and ".off" are appended unless already present.
  fs::path stem = cfg.out;
  if (stem.extension() == ".xyz" || stem.extension() == ".off") stem.replace_extension();
  io::write_xyz(with_suffix(stem, ".xyz"), shape.cloud);
  io::write_off(with_suffix(stem, ".off"), shape.mesh);
  std::cout << "wrote " << shape.cloud.size() << " points and " << shape.mesh.triangles().size()
            << " triangles to " << stem.string() << ".{xyz,off}\n";
  return 0;
}

int cmd_noise(const RunConfig &cfg) {
  const PointCloud cloud(io::read_xyz(cfg.input));
  NoiseSpec spec = cfg.noise;
  spec.seed = cfg.seed;
  io::write_xyz(cfg.out, add_noise(cloud, spec));
  return 0;
}

int cmd_train(const RunConfig &cfg) {
  std::vector<PointCloud> dataset;
  for (const auto &p : cfg.data) dataset.emplace_back(io::read_xyz(p));
  hybrid::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.short_loss = cfg.short_loss();
  hybrid::HybridModel model(cfg.model_config(), cfg.seed);
  std::cout << "training " << hybrid::to_string(cfg.variant) << " model, " << model.parameter_count()
            << " parameters, " << tc.steps << " steps\n";
  const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
  const auto records = hybrid::train(model, dataset, tc, [&](const hybrid::LossRecord &r) {
    if ((r.step + 1) % every == 0 || r.step + 1 == tc.steps) {
      std::cout << "step " << r.step + 1 << "  L_long " << io::format_real(r.long_loss) << "  L_short "
                << io::format_real(r.short_loss) << "  L_hybrid " << io::format_real(r.hybrid_loss) << '\n';
    }
  });
  auto ckpt = model.to_checkpoint();
  ckpt.meta["variant"] = std::string(hybrid::to_string(cfg.variant));
  ckpt.meta["train.steps"] = std::to_string(tc.steps);
  ckpt.meta["train.seed"] = std::to_string(tc.seed);
  ckpt.meta["train.lambda"] = io::format_real(tc.lambda);
  ckpt.meta["train.lr"] = io::format_real(tc.learning_rate);
  ckpt.meta["train.loss"] = std::string(hybrid::to_string(tc.short_loss));
  ckpt.save(cfg.checkpoint);
  const fs::path loss_path = cfg.loss_csv.empty() ? with_suffix(cfg.checkpoint, ".loss.csv") : cfg.loss_csv;
  hybrid::write_loss_csv(loss_path, records);
  std::cout << "wrote " << cfg.checkpoint.string() << " and " << loss_path.string() << '\n';
  return 0;
}

filtering::FilterResult run_filter(const RunConfig &cfg, const PointCloud &input) {
  const auto model = hybrid::HybridModel::from_checkpoint(ad::Checkpoint::load(cfg.checkpoint));
  return filtering::filter_cloud(input, model, cfg.filter);
}

int cmd_filter(const RunConfig &cfg) {
  const PointCloud input(io::read_xyz(cfg.input));
  const auto result = run_filter(cfg, input);
  io::write_xyz(cfg.out, result.cloud);
  if (!cfg.dump_trajectory.empty()) filtering::write_trajectory_csv(cfg.dump_trajectory, result);
  std::cout << "filtered " << input.size() << " points in " << result.patches.size() << " patches\n";
  return 0;
}

int cmd_eval(const RunConfig &cfg) {
  PointCloud evaluated(io::read_xyz(cfg.input));
  // With a checkpoint the input is filtered first.
  if (!cfg.checkpoint.empty()) evaluated = run_filter(cfg, evaluated).cloud;
  const PointCloud clean(io::read_xyz(cfg.clean));
  std::optional<Mesh> mesh;
  if (!cfg.mesh.empty()) mesh = io::read_off(cfg.mesh);
  const auto report = metrics::evaluate(evaluated.points(), clean.points(), mesh ? &*mesh : nullptr);

  const std::string shape = cfg.mesh.empty() ? cfg.clean.stem().string() : cfg.mesh.stem().string();
  const std::string cd = io::format_real(report.cd_scaled());
  const std::string p2m = report.p2m ? io::format_real(*report.p2m_scaled()) : "";
  const std::string emd = report.emd ? io::format_real(*report.emd) : "";
  if (!cfg.out.empty()) {
    std::ofstream out(cfg.out);
    if (!out) throw std::runtime_error("cannot open '" + cfg.out.string() + "' for writing");
    out << "shape,noise_kind,sigma,cd_x1e4,p2m_x1e4,emd\n";
    out << shape << ',' << to_string(cfg.noise.kind) << ',' << io::format_real(cfg.noise.sigma) << ',' << cd
        << ',' << p2m << ',' << emd << '\n';
    if (!out) throw std::runtime_error("failed writing '" + cfg.out.string() + "'");
  }
  std::printf("%-16s %-16s %10s %24s %24s %24s\n", "shape", "noise_kind", "sigma", "CD x1e4", "P2M x1e4", "EMD");
  std::printf("%-16s %-16s %10.4g %24s %24s %24s\n", shape.c_str(), std::string(to_string(cfg.noise.kind)).c_str(),
              cfg.noise.sigma, cd.c_str(), p2m.empty() ? "-" : p2m.c_str(), emd.empty() ? "-" : emd.c_str());
  return 0;
}

int cmd_ablate(const RunConfig &cfg) {
  ablation::AblationConfig ac;
  ac.variants = cfg.ablate_variants;
  ac.n_values = cfg.ablate_n;
  ac.lambdas = cfg.ablate_lambdas;
  ac.train = cfg.train;
  ac.train.seed = cfg.seed;
  ac.filter = cfg.filter;
  ac.resolution = cfg.shape.resolution;
  ac.test_noise = {cfg.noise.kind, cfg.noise.sigma, cfg.seed + 1000};
  ac.seed = cfg.seed;
  const auto rows = ablation::run_ablation(ac, [](const std::string &msg) { std::cout << msg << std::endl; });
  ablation::write_ablation_csv(cfg.out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << cfg.out.string() << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  hf::retain_heap_memory();
  CLI::App app{"Hybrid short/long-range point cloud filtering"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Step size (--alpha): 0.8 for noise up to 2% of the bounding radius; for 3% noise use 1.3 on\n"
             "10K-point clouds and 1.5 on 50K-point clouds. No noise level is estimated automatically.");

  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file (flags override it)");

  // Every config key is also a flag: key "noise_kind" <-> --noise-kind.
  std::map<std::string, std::string> flag_values;
  for (auto key : run_config_keys()) {
    std::string flag = "--" + std::string(key);
    for (auto &c : flag) {
      if (c == '_') c = '-';
    }
    app.add_option(flag, flag_values[std::string(key)], std::string(key));
  }

  const std::map<std::string, std::string> subcommands = {
      {"gen", "generate a procedural shape (.xyz + .off)"},
      {"noise", "perturb a point cloud"},
      {"train", "train a model on clean clouds"},
      {"filter", "filter a noisy cloud with a trained model"},
      {"eval", "compare a cloud against a clean reference"},
      {"ablate", "train and evaluate the ablation grid"},
  };
  for (const auto &[name, help] : subcommands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load(config_path);
    for (auto key : run_config_keys()) {
      std::string flag = "--" + std::string(key);
      for (auto &c : flag) {
        if (c == '_') c = '-';
      }
      if (app.count(flag) > 0) cfg.set(key, flag_values[std::string(key)]);
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    cfg.validate_for(sub);
    if (sub == "gen") return cmd_gen(cfg);
    if (sub == "noise") return cmd_noise(cfg);
    if (sub == "train") return cmd_train(cfg);
    if (sub == "filter") return cmd_filter(cfg);
    if (sub == "eval") return cmd_eval(cfg);
    return cmd_ablate(cfg);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
