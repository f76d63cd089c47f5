#include "hybridflow/ablation.hpp"

#include <fstream>
#include <stdexcept>

#include "hybridflow/io.hpp"
#include "hybridflow/metrics.hpp"

namespace hf::ablation {

std::vector<shapes::Shape> training_corpus(std::size_t resolution, std::uint64_t seed) {
  std::vector<shapes::Shape> out;
  out.push_back(shapes::generate({shapes::ShapeKind::sphere, resolution, 1.0, 0.3, seed + 1}));
  out.push_back(shapes::generate({shapes::ShapeKind::torus, resolution, 1.0, 0.3, seed + 2}));
  return out;
}

std::vector<EvalCase> held_out_cases(std::span<const shapes::ShapeKind> kinds, std::size_t resolution,
                                     const NoiseSpec &noise, std::uint64_t seed) {
  std::vector<EvalCase> out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    shapes::Shape clean = shapes::generate({kinds[i], resolution, 1.0, 0.3, seed + 101 + i});
    NoiseSpec spec = noise;
    spec.seed = noise.seed + i;
    PointCloud noisy = add_noise(clean.cloud, spec);
    out.push_back({std::string(shapes::to_string(kinds[i])), std::move(clean), std::move(noisy)});
  }
  return out;
}

void AblationConfig::validate() const {
  if (variants.empty() || n_values.empty() || lambdas.empty()) {
    throw std::invalid_argument("ablate: variants, n_values and lambdas must be non-empty");
  }
  for (std::size_t n : n_values) {
    if (n == 0) throw std::invalid_argument("ablate: N must be at least 1");
  }
  if (test_shapes.empty()) throw std::invalid_argument("ablate: no test shapes");
  train.validate();
  filter.validate();
}

std::vector<AblationRow> run_ablation(const AblationConfig &config, const Logger &log) {
  config.validate();
  auto say = [&](const std::string &msg) {
    if (log) log(msg);
  };
  const auto corpus = training_corpus(config.resolution, config.seed);
  std::vector<PointCloud> clouds;
  for (const auto &s : corpus) clouds.push_back(s.cloud);
  const auto cases = held_out_cases(config.test_shapes, config.resolution, config.test_noise, config.seed);

  double cd_noisy = 0.0;
  for (const auto &c : cases) cd_noisy += metrics::chamfer(c.noisy.points(), c.clean.cloud.points());
  cd_noisy /= static_cast<double>(cases.size());

  std::size_t max_n = 0;
  for (std::size_t n : config.n_values) max_n = std::max(max_n, n);

  std::vector<AblationRow> rows;
  for (const auto variant : config.variants) {
    for (const double lambda : config.lambdas) {
      hybrid::HybridModel model(hybrid::model_config_for(variant), config.seed);
      hybrid::TrainConfig tc = config.train;
      tc.lambda = lambda;
      tc.short_loss = variant == hybrid::Variant::l2_loss ? hybrid::ShortLoss::l2 : hybrid::ShortLoss::emd;
      say("training " + std::string(hybrid::to_string(variant)) + " lambda=" + io::format_real(lambda) +
          " (" + std::to_string(model.inference_parameter_count()) + " parameters)");
      hybrid::train(model, clouds, tc);

      filtering::FilterConfig fc = config.filter;
      fc.n_steps = max_n;
      std::vector<double> cd(max_n + 1, 0.0);
      std::vector<double> p2m(max_n + 1, 0.0);
      for (const auto &c : cases) {
        const auto result = filtering::filter_cloud(c.noisy, model, fc);
        for (std::size_t n : config.n_values) {
          const PointCloud filtered = filtering::stitch_state(c.noisy, result, n);
          cd[n] += metrics::chamfer(filtered.points(), c.clean.cloud.points());
          p2m[n] += metrics::point2mesh(filtered.points(), c.clean.mesh);
        }
      }
      for (std::size_t n : config.n_values) {
        AblationRow row;
        row.variant = variant;
        row.lambda = lambda;
        row.n_steps = n;
        row.alpha = fc.alpha;
        row.sigma = config.test_noise.sigma;
        row.parameters = model.inference_parameter_count();
        row.cd = cd[n] / static_cast<double>(cases.size());
        row.p2m = p2m[n] / static_cast<double>(cases.size());
        row.cd_noisy = cd_noisy;
        say("  N=" + std::to_string(n) + " CD x1e4 = " + io::format_real(row.cd * 1e4));
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path &path, std::span<const AblationRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "variant,lambda,n_steps,alpha,sigma,parameters,cd_x1e4,p2m_x1e4,cd_noisy_x1e4\n";
  for (const auto &r : rows) {
    out << hybrid::to_string(r.variant) << ',' << io::format_real(r.lambda) << ',' << r.n_steps << ','
        << io::format_real(r.alpha) << ',' << io::format_real(r.sigma) << ',' << r.parameters << ','
        << io::format_real(r.cd * 1e4) << ',' << io::format_real(r.p2m * 1e4) << ','
        << io::format_real(r.cd_noisy * 1e4) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

} // namespace hf::ablation
