#include "hybridflow/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hybridflow/io.hpp"

namespace hf::ad {

namespace {

[[noreturn]] void malformed(const std::filesystem::path &path, const std::string &what) {
  throw std::runtime_error("checkpoint '" + path.string() + "': " + what);
}

} // namespace

void Checkpoint::save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  out << "hybridflow-checkpoint " << kVersion << '\n';
  for (const auto &[key, value] : meta) {
    if (key.find_first_of(" \t\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint: metadata key/value not representable: " + key);
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto &[name, tensor] : tensors) {
    out << "tensor " << name << ' ' << tensor.rank();
    for (std::size_t d : tensor.shape) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
      if (i > 0) out << ' ';
      out << io::format_real(tensor.values[i]);
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) {
    throw std::runtime_error("failed writing '" + path.string() + "'");
  }
}

Checkpoint Checkpoint::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  }
  Checkpoint ckpt;
  std::string line;
  if (!std::getline(in, line)) malformed(path, "empty file");
  {
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != "hybridflow-checkpoint") malformed(path, "bad magic");
    if (version != kVersion) malformed(path, "unsupported version " + std::to_string(version));
  }
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream rec(line);
    std::string kind;
    rec >> kind;
    if (kind == "meta") {
      std::string key;
      rec >> key;
      std::string value;
      std::getline(rec, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rank = 0;
      rec >> name >> rank;
      Shape shape(rank);
      for (auto &d : shape) rec >> d;
      if (!rec) malformed(path, "bad tensor header for '" + name + "'");
      std::string values_line;
      if (!std::getline(in, values_line)) malformed(path, "missing values for '" + name + "'");
      std::vector<double> values;
      values.reserve(element_count(shape));
      const char *p = values_line.data();
      const char *end = p + values_line.size();
      while (p < end) {
        while (p < end && *p == ' ') ++p;
        if (p >= end) break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) malformed(path, "bad value in '" + name + "'");
        values.push_back(v);
        p = next;
      }
      if (values.size() != element_count(shape)) {
        malformed(path, "tensor '" + name + "' has " + std::to_string(values.size()) +
                            " values, shape " + shape_string(shape));
      }
      ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(values)));
    } else if (!kind.empty()) {
      malformed(path, "unknown record '" + kind + "'");
    }
  }
  if (!ended) malformed(path, "truncated (missing 'end')");
  return ckpt;
}

} // namespace hf::ad
