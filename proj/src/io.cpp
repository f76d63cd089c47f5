#include "hybridflow/io.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace hf::io {

namespace {

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

// Splits on whitespace, dropping blank lines and '#' comments.
std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    if (out.empty() && line[i] == '#') break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_real(std::string_view token, const std::filesystem::path &path, std::size_t line) {
  double value = 0.0;
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || end != token.data() + token.size()) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": malformed number '" +
                             std::string(token) + "'");
  }
  return value;
}

std::size_t parse_index(std::string_view token, const std::filesystem::path &path,
                        std::size_t line) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || end != token.data() + token.size()) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                             ": malformed integer '" + std::string(token) + "'");
  }
  return value;
}

} // namespace

std::string format_real(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw std::runtime_error("format_real: conversion failed");
  }
  return std::string(buf, end);
}

PointCloud read_xyz(const std::filesystem::path &path) {
  auto in = open_input(path);
  Points points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    if (tok.size() != 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 3 coordinates, found " + std::to_string(tok.size()));
    }
    points.push_back(Vec3{parse_real(tok[0], path, line_no), parse_real(tok[1], path, line_no),
                          parse_real(tok[2], path, line_no)});
  }
  if (points.empty()) {
    throw std::runtime_error(path.string() + ": empty point cloud");
  }
  return PointCloud(std::move(points));
}

void write_xyz(const std::filesystem::path &path, const PointCloud &cloud) {
  auto out = open_output(path);
  for (const auto &p : cloud.points()) {
    out << format_real(p.x) << ' ' << format_real(p.y) << ' ' << format_real(p.z) << '\n';
  }
  if (!out) {
    throw std::runtime_error("failed writing '" + path.string() + "'");
  }
}

Mesh read_off(const std::filesystem::path &path) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  auto next_tokens = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      auto tok = tokens(line);
      if (!tok.empty()) return tok;
    }
    throw std::runtime_error(path.string() + ": unexpected end of file");
  };

  auto header = next_tokens();
  if (header.empty() || header[0] != "OFF") {
    throw std::runtime_error(path.string() + ": missing OFF header");
  }
  // Counts may share the header line.
  std::vector<std::string_view> counts(header.begin() + 1, header.end());
  if (counts.empty()) {
    counts = next_tokens();
  }
  if (counts.size() < 2) {
    throw std::runtime_error(path.string() + ": malformed OFF counts");
  }
  const std::size_t nv = parse_index(counts[0], path, line_no);
  const std::size_t nf = parse_index(counts[1], path, line_no);

  Points vertices;
  vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    const auto tok = next_tokens();
    if (tok.size() < 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed vertex");
    }
    vertices.push_back(Vec3{parse_real(tok[0], path, line_no), parse_real(tok[1], path, line_no),
                            parse_real(tok[2], path, line_no)});
  }
  std::vector<Triangle> triangles;
  triangles.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto tok = next_tokens();
    if (tok.size() < 4 || parse_index(tok[0], path, line_no) != 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": only triangle faces are supported");
    }
    triangles.push_back(Triangle{parse_index(tok[1], path, line_no),
                                 parse_index(tok[2], path, line_no),
                                 parse_index(tok[3], path, line_no)});
  }
  return Mesh(std::move(vertices), std::move(triangles));
}

void write_off(const std::filesystem::path &path, const Mesh &mesh) {
  auto out = open_output(path);
  out << "OFF\n" << mesh.vertices().size() << ' ' << mesh.triangles().size() << " 0\n";
  for (const auto &v : mesh.vertices()) {
    out << format_real(v.x) << ' ' << format_real(v.y) << ' ' << format_real(v.z) << '\n';
  }
  for (const auto &t : mesh.triangles()) {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) {
    throw std::runtime_error("failed writing '" + path.string() + "'");
  }
}

} // namespace hf::io
