#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cot3d/geometry.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cot3d;

namespace {

// Recomputes every min-distance from scratch at every step.
std::vector<std::size_t> brute_force_fps(const std::vector<Vec3>& pts, std::size_t k,
                                         std::size_t start) {
  std::vector<std::size_t> chosen{start};
  while (chosen.size() < k) {
    std::size_t best = pts.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double dmin = INFINITY;
      for (std::size_t c : chosen) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += (pts[i][a] - pts[c][a]) * (pts[i][a] - pts[c][a]);
        dmin = std::min(dmin, s);
      }
      if (dmin > best_d) {
        best_d = dmin;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

PointCloud cloud(std::vector<Vec3> pts) { return PointCloud{std::move(pts), "c"}; }

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  auto dir = std::filesystem::temp_directory_path() / "cot3d_geometry_tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("normalize_to_unit_sphere examples") {
  auto a = normalize_to_unit_sphere(cloud({{0, 0, 0}, {2, 0, 0}}));
  CHECK(a.points[0] == Vec3{-1, 0, 0});
  CHECK(a.points[1] == Vec3{1, 0, 0});

  auto b = normalize_to_unit_sphere(cloud({{5, 5, 5}}));
  CHECK(b.points[0] == Vec3{0, 0, 0});

  std::vector<Vec3> cube;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cube.push_back({double(x), double(y), double(z)});
  auto c = normalize_to_unit_sphere(cloud(cube));
  const double s = 1.0 / std::sqrt(3.0);  // 0.5 / (sqrt(3)/2)
  for (std::size_t i = 0; i < cube.size(); ++i) {
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(std::abs(c.points[i][ax] - (cube[i][ax] - 0.5) * 2.0 * s) < 1e-12);
    }
  }

  CHECK_THROWS_AS(normalize_to_unit_sphere(cloud({{NAN, 0, 0}})), DataError);
}

TEST_CASE("normalize is idempotent and yields centroid 0, max norm 1") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto pc = testing::random_cloud(50, rng);
    for (auto& p : pc.points) p[0] = p[0] * 7.0 + 3.0;
    auto n1 = normalize_to_unit_sphere(pc);
    Vec3 cen{0, 0, 0};
    double mx = 0;
    for (auto& p : n1.points) {
      for (int a = 0; a < 3; ++a) cen[a] += p[a] / 50.0;
      mx = std::max(mx, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    for (double v : cen) CHECK(std::abs(v) < 1e-9);
    CHECK(std::abs(mx - 1.0) < 1e-9);
    auto n2 = normalize_to_unit_sphere(n1);
    for (std::size_t i = 0; i < 50; ++i)
      for (int a = 0; a < 3; ++a) CHECK(std::abs(n1.points[i][a] - n2.points[i][a]) < 1e-9);
  }
}

TEST_CASE("farthest_point_sample examples") {
  CHECK(farthest_point_sample(cloud({{1, 2, 3}}), 1, 0).indices == std::vector<std::size_t>{0});
  auto sq = cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
  CHECK(farthest_point_sample(sq, 2, 0).indices == std::vector<std::size_t>{0, 3});
  auto all = farthest_point_sample(sq, 4, 2).indices;
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 4);
  CHECK_THROWS_AS(farthest_point_sample(sq, 5, 0), CapacityError);
  CHECK_THROWS_AS(farthest_point_sample(sq, 2, 9), RangeError);
}

TEST_CASE("farthest_point_sample equals brute force on small clouds") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    auto pc = testing::random_cloud(n, rng);
    // Quantize some clouds so ties actually occur.
    if (trial % 3 == 0) {
      for (auto& p : pc.points)
        for (auto& v : p) v = std::round(v * 2.0);
    }
    const std::size_t k = 1 + rng() % n;
    const std::size_t start = rng() % n;
    auto got = farthest_point_sample(pc, k, start);
    CHECK(got.indices == brute_force_fps(pc.points, k, start));
    CHECK(got.indices.front() == start);
    for (std::size_t i = 0; i < k; ++i) CHECK(got.coords[i] == pc.points[got.indices[i]]);
  }
}

TEST_CASE("knn_group examples") {
  auto line = cloud({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  auto keys = farthest_point_sample(line, 1, 0);
  auto g = knn_group(line, keys, 2);
  REQUIRE(g.offsets.rows() == 2);
  CHECK(g.offset(0, 0)[0] == 0.0);
  CHECK(g.offset(0, 1)[0] == 1.0);

  std::mt19937_64 rng(5);
  auto pc = testing::random_cloud(30, rng);
  auto ks = farthest_point_sample(pc, 6, 0);
  auto g1 = knn_group(pc, ks, 1);
  for (std::size_t k = 0; k < 6; ++k)
    for (int a = 0; a < 3; ++a) CHECK(g1.offset(k, 0)[a] == 0.0);
  auto g5 = knn_group(pc, ks, 5);
  CHECK(g5.offsets.rows() == 30);
  for (std::size_t k = 0; k < 6; ++k) {
    bool has_zero = false;
    for (std::size_t j = 0; j < 5; ++j) {
      auto o = g5.offset(k, j);
      has_zero |= (o[0] == 0.0 && o[1] == 0.0 && o[2] == 0.0);
    }
    CHECK(has_zero);
  }
  CHECK_THROWS_AS(knn_group(pc, ks, 31), CapacityError);
}

TEST_CASE("fourier_encode examples") {
  Tensor zero = fourier_encode(std::vector<Vec3>{{0, 0, 0}}, 3);
  CHECK(zero.cols() == 18);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(zero(0, a * 6 + 2 * j) == 0.0);
      CHECK(zero(0, a * 6 + 2 * j + 1) == 1.0);
    }
  }
  Tensor half = fourier_encode(std::vector<Vec3>{{0.5, 0, 0}}, 1);
  CHECK(half(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(half(0, 1)) < 1e-15);
  CHECK_THROWS(fourier_encode(std::vector<Vec3>{{0, 0, 0}}, 0));
}

TEST_CASE("load_point_cloud formats") {
  auto xyz = load_point_cloud(temp_file("a.xyz", "0 0 0\n1 0 0\n"), PointFormat::kXyz);
  CHECK(xyz.size() == 2);

  auto obj = load_point_cloud(temp_file("a.obj", "# mesh\nv 1 2 3\nvn 0 0 1\nf 1 1 1\n"),
                              PointFormat::kObj);
  REQUIRE(obj.size() == 1);
  CHECK(obj.points[0] == Vec3{1, 2, 3});

  const std::string ply_head =
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
      "property float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n";
  auto ok = load_point_cloud(temp_file("ok.ply", ply_head + "0 0 0\n1 0 0\n0 1 0\n"),
                             PointFormat::kPlyAscii);
  CHECK(ok.size() == 3);
  try {
    load_point_cloud(temp_file("short.ply", ply_head + "0 0 0\n1 0 0\n"), PointFormat::kPlyAscii);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    std::string msg = e.what();
    CHECK(msg.find("expected 3") != std::string::npos);
    CHECK(msg.find("found 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_point_cloud("0 0 x\n", PointFormat::kXyz), ParseError);
  CHECK_THROWS_AS(parse_point_cloud("0 0\n", PointFormat::kXyz), ParseError);
  CHECK_THROWS_AS(parse_point_cloud("ply\nformat binary_little_endian 1.0\nend_header\n",
                                    PointFormat::kPlyAscii),
                  ParseError);
  try {
    parse_point_cloud("1 2 3\n4 5 6\n7 8 nope\n", PointFormat::kXyz);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("xyz round trip preserves coordinates") {
  std::mt19937_64 rng(99);
  auto pc = testing::random_cloud(40, rng);
  auto path = std::filesystem::temp_directory_path() / "cot3d_geometry_tests" / "rt.xyz";
  std::filesystem::create_directories(path.parent_path());
  write_xyz(pc, path);
  auto back = load_point_cloud(path, PointFormat::kXyz);
  REQUIRE(back.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int a = 0; a < 3; ++a) CHECK(std::abs(back.points[i][a] - pc.points[i][a]) < 1e-9);
}
