#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "hybridflow/io.hpp"
#include "hybridflow/random.hpp"
#include "hybridflow/shapes.hpp"

using namespace hf;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "hybridflow_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  out << text;
}

} // namespace

TEST_CASE("xyz round trip is exact") {
  Rng rng(5);
  Points pts(500);
  for (auto &p : pts) p = {rng.normal() * 1e-7, rng.normal() * 1e5, rng.uniform()};
  pts.push_back({std::numeric_limits<double>::min(), -0.0, 1.0 / 3.0});
  const PointCloud cloud(pts);
  const fs::path path = temp_file("round.xyz");
  io::write_xyz(path, cloud);
  CHECK(io::read_xyz(path) == cloud);
}

TEST_CASE("xyz parsing") {
  const fs::path path = temp_file("comments.xyz");
  write_text(path, "# header\n1 2 3\n\n  # indented comment\n4.5\t-6e-1 7\n");
  const PointCloud cloud = io::read_xyz(path);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud[1] == Vec3{4.5, -0.6, 7});

  write_text(path, "1 2\n");
  CHECK_THROWS(io::read_xyz(path));
  write_text(path, "1 2 abc\n");
  CHECK_THROWS(io::read_xyz(path));
  write_text(path, "# nothing\n");
  CHECK_THROWS(io::read_xyz(path));
  write_text(path, "1 2 nan\n");
  CHECK_THROWS(io::read_xyz(path));
  CHECK_THROWS(io::read_xyz(temp_file("missing.xyz")));
}

TEST_CASE("off round trip") {
  const auto shape = shapes::generate({shapes::ShapeKind::torus, 100, 1.0, 0.3, 1});
  const fs::path path = temp_file("torus.off");
  io::write_off(path, shape.mesh);
  const Mesh back = io::read_off(path);
  CHECK(back.vertices() == shape.mesh.vertices());
  CHECK(back.triangles() == shape.mesh.triangles());
}

TEST_CASE("off parsing") {
  const fs::path path = temp_file("tri.off");
  write_text(path, "OFF\n# comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  CHECK(io::read_off(path).triangles().size() == 1);
  write_text(path, "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  CHECK(io::read_off(path).vertices().size() == 3);

  write_text(path, "PLY\n3 1 0\n");
  CHECK_THROWS(io::read_off(path));
  write_text(path, "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 2 3\n");
  CHECK_THROWS(io::read_off(path));
  write_text(path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
  CHECK_THROWS(io::read_off(path));
  write_text(path, "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n");
  CHECK_THROWS(io::read_off(path));
  write_text(path, "OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  CHECK_THROWS(io::read_off(path));
}

TEST_CASE("format_real") {
  CHECK(io::format_real(0.5) == "0.5");
  CHECK(io::format_real(1.0 / 3.0) == "0.33333333333333331");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(io::format_real(v)) == v);
}
