#pragma once

#include <filesystem>
#include <string>

#include "hybridflow/geometry.hpp"

namespace hf::io {

// XYZ: one point per line as three whitespace-separated reals; lines whose
// first non-blank character is '#' are comments.
PointCloud read_xyz(const std::filesystem::path &path);
void write_xyz(const std::filesystem::path &path, const PointCloud &cloud);

// OFF: "OFF" header, "<vertices> <faces> <edges>", vertex lines, then
// triangle faces written as "3 i j k".
Mesh read_off(const std::filesystem::path &path);
void write_off(const std::filesystem::path &path, const Mesh &mesh);

// Shortest decimal representation that round-trips the double exactly.
std::string format_real(double value);

} // namespace hf::io
