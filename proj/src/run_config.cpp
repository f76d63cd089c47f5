#include "hybridflow/run_config.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>

namespace hf {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::invalid_argument bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  return std::invalid_argument("config: " + std::string(key) + " = '" + std::string(value) + "' is not " +
                               std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) throw bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw bad_value(key, v, "a non-negative integer");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

template <class F> auto wrap(std::string_view key, std::string_view value, F &&parse) {
  try {
    return parse(value);
  } catch (const std::invalid_argument &e) {
    throw std::invalid_argument("config: " + std::string(key) + ": " + e.what());
  }
}

void require_file(const fs::path &path, const char *what) {
  if (path.empty()) throw std::invalid_argument(std::string("missing required path: ") + what);
  if (!fs::is_regular_file(path)) {
    throw std::invalid_argument(std::string(what) + " '" + path.string() + "' does not exist");
  }
}

void require_output(const fs::path &path, const char *what) {
  if (path.empty()) throw std::invalid_argument(std::string("missing required path: ") + what);
  const fs::path parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw std::invalid_argument(std::string(what) + " directory '" + parent.string() + "' does not exist");
  }
}

} // namespace

std::vector<std::string_view> run_config_keys() {
  return {"seed",     "input",   "clean",      "mesh",         "data",           "checkpoint",
          "out",      "dump_trajectory",       "loss_csv",     "shape",          "resolution",
          "size",     "minor_radius",          "sigma",        "noise_kind",     "variant",
          "decoder",  "loss",    "lambda",     "sigma_h",      "lr",             "steps",
          "patch_k",  "alpha",   "n_steps",    "threads",      "ablate_variants", "ablate_n",
          "ablate_lambdas"};
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "input") {
    input = fs::path(value);
  } else if (key == "clean") {
    clean = fs::path(value);
  } else if (key == "mesh") {
    mesh = fs::path(value);
  } else if (key == "data") {
    data.clear();
    for (auto item : split_list(value)) {
      if (item.empty()) throw bad_value(key, value, "a comma-separated list of paths");
      data.emplace_back(item);
    }
  } else if (key == "checkpoint") {
    checkpoint = fs::path(value);
  } else if (key == "out") {
    out = fs::path(value);
  } else if (key == "dump_trajectory") {
    dump_trajectory = fs::path(value);
  } else if (key == "loss_csv") {
    loss_csv = fs::path(value);
  } else if (key == "shape") {
    shape.kind = wrap(key, value, shapes::parse_shape_kind);
  } else if (key == "resolution") {
    shape.resolution = parse_uint(key, value);
  } else if (key == "size") {
    shape.size = parse_double(key, value);
  } else if (key == "minor_radius") {
    shape.minor_radius = parse_double(key, value);
  } else if (key == "sigma") {
    noise.sigma = parse_double(key, value);
  } else if (key == "noise_kind") {
    noise.kind = wrap(key, value, parse_noise_kind);
  } else if (key == "variant") {
    variant = wrap(key, value, hybrid::parse_variant);
  } else if (key == "decoder") {
    decoder = wrap(key, value, graph::parse_decoder_kind);
    decoder_set = true;
  } else if (key == "loss") {
    train.short_loss = wrap(key, value, hybrid::parse_short_loss);
    loss_set = true;
  } else if (key == "lambda") {
    train.lambda = parse_double(key, value);
  } else if (key == "sigma_h") {
    train.sigma_h = parse_double(key, value);
  } else if (key == "lr") {
    train.learning_rate = parse_double(key, value);
  } else if (key == "steps") {
    train.steps = parse_uint(key, value);
  } else if (key == "patch_k") {
    train.patch_k = parse_uint(key, value);
    filter.patch_k = train.patch_k;
  } else if (key == "alpha") {
    filter.alpha = parse_double(key, value);
  } else if (key == "n_steps") {
    filter.n_steps = parse_uint(key, value);
  } else if (key == "threads") {
    filter.threads = parse_uint(key, value);
  } else if (key == "ablate_variants") {
    ablate_variants.clear();
    for (auto item : split_list(value)) ablate_variants.push_back(wrap(key, item, hybrid::parse_variant));
  } else if (key == "ablate_n") {
    ablate_n.clear();
    for (auto item : split_list(value)) ablate_n.push_back(parse_uint(key, item));
  } else if (key == "ablate_lambdas") {
    ablate_lambdas.clear();
    for (auto item : split_list(value)) ablate_lambdas.push_back(parse_double(key, item));
  } else {
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  }
}

void RunConfig::load(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    view = trim(view.substr(0, view.find('#')));
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const std::invalid_argument &e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

hybrid::ModelConfig RunConfig::model_config() const {
  if (decoder_set && variant != hybrid::Variant::baseline_score) {
    return hybrid::hybrid_model_config(decoder);
  }
  return hybrid::model_config_for(variant);
}

hybrid::ShortLoss RunConfig::short_loss() const {
  if (loss_set) return train.short_loss;
  return variant == hybrid::Variant::l2_loss ? hybrid::ShortLoss::l2 : hybrid::ShortLoss::emd;
}

void RunConfig::validate_for(std::string_view subcommand) const {
  if (subcommand == "gen") {
    shape.validate();
    require_output(out, "--out");
  } else if (subcommand == "noise") {
    if (!(noise.sigma >= 0.0)) throw std::invalid_argument("--sigma must be non-negative");
    require_file(input, "--input");
    require_output(out, "--out");
  } else if (subcommand == "train") {
    train.validate();
    if (data.empty()) throw std::invalid_argument("missing required path: --data");
    for (const auto &p : data) require_file(p, "--data");
    require_output(checkpoint, "--checkpoint");
    if (!loss_csv.empty()) require_output(loss_csv, "--loss-csv");
  } else if (subcommand == "filter") {
    filter.validate();
    require_file(checkpoint, "--checkpoint");
    require_file(input, "--input");
    require_output(out, "--out");
    if (!dump_trajectory.empty()) require_output(dump_trajectory, "--dump-trajectory");
  } else if (subcommand == "eval") {
    if (!checkpoint.empty()) require_file(checkpoint, "--checkpoint");
    require_file(input, "--input");
    require_file(clean, "--clean");
    if (!mesh.empty()) require_file(mesh, "--mesh");
    if (!out.empty()) require_output(out, "--out");
  } else if (subcommand == "ablate") {
    train.validate();
    filter.validate();
    require_output(out, "--out");
  } else {
    throw std::invalid_argument("unknown subcommand '" + std::string(subcommand) + "'");
  }
}

} // namespace hf
