#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "cot3d/dataset.hpp"
#include "cot3d/errors.hpp"
#include "cot3d/io.hpp"
#include "doctest.h"

using namespace cot3d;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cot3d_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetConfig small_config(std::size_t n, FormatMix mix = {}, std::size_t points = 64) {
  DatasetConfig cfg;
  cfg.n_per_subset = n;
  cfg.mix = mix;
  cfg.points_per_shape = points;
  return cfg;
}

}  // namespace

TEST_CASE("build_dataset fills both subsets with unique ids") {
  const auto recs = build_dataset(small_config(100));
  REQUIRE(recs.size() == 200);
  std::set<std::string> ids;
  std::map<Subset, int> per_subset;
  for (const auto& r : recs) {
    ids.insert(r.shape_id);
    ++per_subset[r.subset];
    CHECK(family_from_shape_id(r.shape_id) == kAllFamilies[(ids.size() - 1) % 100 % 5]);
  }
  CHECK(ids.size() == 200);
  CHECK(per_subset[Subset::kCap3dLike] == 100);
  CHECK(per_subset[Subset::kGapartnetLike] == 100);
  CHECK(regeneration_audit(recs).empty());
}

TEST_CASE("format mix controls the drawn renderings") {
  for (const auto& r : build_dataset(small_config(20, {0, 1, 0}))) {
    CHECK(r.format == AnnotationFormat::kUnmarked);
  }
  // Multinomial: each count ~ Bin(300, 1/3), sigma = sqrt(300 * 1/3 * 2/3).
  DatasetConfig cfg = small_config(150, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 16);
  std::map<AnnotationFormat, int> counts;
  for (const auto& r : build_dataset(cfg)) ++counts[r.format];
  const double sigma = std::sqrt(300.0 / 3.0 * 2.0 / 3.0);
  for (auto f : {AnnotationFormat::kTagged, AnnotationFormat::kUnmarked, AnnotationFormat::kNone}) {
    CHECK(std::abs(counts[f] - 100.0) <= 2 * sigma);
  }
  CHECK_THROWS_AS(build_dataset(small_config(20, {0.5, 0.6, 0})), ConfigError);
  CHECK_THROWS_AS(build_dataset(small_config(9)), ConfigError);
}

TEST_CASE("build_dataset output does not depend on the worker count") {
  DatasetConfig cfg = small_config(15, {0.3, 0.3, 0.4}, 32);
  const auto a = build_dataset(cfg);
  cfg.workers = 4;
  CHECK(build_dataset(cfg) == a);
  cfg.seed = 43;
  CHECK_FALSE(build_dataset(cfg) == a);
}

TEST_CASE("split sizes follow largest-remainder rounding") {
  CHECK(split_sizes(10, kDefaultRatios) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(split_sizes(1000, kDefaultRatios) == std::array<std::size_t, 3>{800, 100, 100});
  // 0.8*13 = 10.4, 1.3, 1.3: floors 10/1/1, one left over goes to the first
  // largest remainder (train).
  CHECK(split_sizes(13, kDefaultRatios) == std::array<std::size_t, 3>{11, 1, 1});
  // 0.8*17 = 13.6, 1.7, 1.7: floors 13/1/1, two left over to val and test.
  CHECK(split_sizes(17, kDefaultRatios) == std::array<std::size_t, 3>{13, 2, 2});
  CHECK_THROWS_AS(split_sizes(10, {0.5, 0.5, 0.5}), ConfigError);
}

TEST_CASE("splits are shape-disjoint and cover the dataset") {
  auto recs = build_dataset(small_config(500, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 8));
  REQUIRE(recs.size() == 1000);
  const auto split = split_dataset(recs, kDefaultRatios, 7);
  REQUIRE(split.size() == recs.size());
  std::map<Split, std::set<std::string>> by;
  for (std::size_t i = 0; i < split.size(); ++i) {
    CHECK(split[i].shape_id == recs[i].shape_id);
    CHECK(split[i].split != Split::kUnassigned);
    by[split[i].split].insert(split[i].shape_id);
  }
  CHECK(by[Split::kTrain].size() == 800);
  CHECK(by[Split::kVal].size() == 100);
  CHECK(by[Split::kTest].size() == 100);
  for (const auto& id : by[Split::kTrain]) {
    CHECK(by[Split::kVal].count(id) == 0);
    CHECK(by[Split::kTest].count(id) == 0);
  }
  CHECK(split_dataset(recs, kDefaultRatios, 7) == split);
  CHECK_FALSE(split_dataset(recs, kDefaultRatios, 8) == split);
}

TEST_CASE("all renderings of one shape land in one split") {
  auto base = build_dataset(small_config(10, {}, 8));
  std::vector<DatasetRecord> recs;
  for (const auto& r : base) {
    for (auto f : {AnnotationFormat::kTagged, AnnotationFormat::kUnmarked, AnnotationFormat::kNone}) {
      DatasetRecord c = r;
      c.format = f;
      c.text = render(c.gold, f);
      recs.push_back(c);
    }
  }
  const auto split = split_dataset(recs, kDefaultRatios, 3);
  std::map<std::string, std::set<Split>> seen;
  for (const auto& r : split) seen[r.shape_id].insert(r.split);
  CHECK(seen.size() == 20);
  for (const auto& [id, s] : seen) CHECK(s.size() == 1);
  CHECK(select_split(split, Split::kTrain).size() == 16 * 3);

  std::vector<DatasetRecord> two(base.begin(), base.begin() + 2);
  CHECK_THROWS_AS(split_dataset(two, kDefaultRatios, 1), DataError);
}

TEST_CASE("JSONL round trip is the identity") {
  const fs::path dir = temp_dir("jsonl");
  auto recs = split_dataset(build_dataset(small_config(500, {0.4, 0.3, 0.3}, 8)), kDefaultRatios, 1);
  recs[0].text = "line one\nline two \"quoted\" \\ and ünïcode";
  recs[0].gold.conclusion = "tab\there";
  recs[1].points = {{0.1, -1e-300, 1.0 / 3.0}, {1e300, -0.0, 5e-324}};
  write_records(recs, dir / "all.jsonl");
  const std::string raw = read_file(dir / "all.jsonl");
  CHECK(std::count(raw.begin(), raw.end(), '\n') == 1000);
  const auto back = read_records(dir / "all.jsonl");
  CHECK(back == recs);
  CHECK(records_to_jsonl(back) == raw);
}

TEST_CASE("large clouds are stored by file reference") {
  const fs::path dir = temp_dir("points_file");
  auto recs = build_dataset(small_config(10, {}, 2000));
  recs.resize(2);
  recs[1].points.resize(100);
  write_records(recs, dir / "big.jsonl");
  const std::string raw = read_file(dir / "big.jsonl");
  CHECK(raw.find("\"points_file\":\"big_points/cap3d_like-box-00000.xyz\"") != std::string::npos);
  CHECK(fs::exists(dir / "big_points" / "cap3d_like-box-00000.xyz"));
  CHECK(read_records(dir / "big.jsonl") == recs);
}

TEST_CASE("malformed JSONL lines report line and field") {
  const auto recs = build_dataset(small_config(10, {}, 4));
  std::string good = records_to_jsonl({recs[0]});
  good.pop_back();

  try {
    parse_records(good + "\n{not json\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::string no_gold = good;
  const auto g = no_gold.find(",\"gold\"");
  const auto p = no_gold.find(",\"points\"");
  no_gold.erase(g, p - g);
  try {
    parse_records(good + "\n\n" + no_gold + "\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("'gold'") != std::string::npos);
  }

  std::string bad_format = good;
  bad_format.replace(bad_format.find("\"format\":\"tagged\""), 17, "\"format\":\"fancy\"");
  CHECK_THROWS_AS(parse_records(bad_format), ParseError);
  CHECK_THROWS_AS(read_records("/nonexistent/x.jsonl"), DataError);
}

TEST_CASE("review manifest samples round(fraction * n) ids") {
  const auto recs = build_dataset(small_config(50, {}, 4));
  const auto m = sample_review_manifest(recs, 0.20, 42);
  CHECK(m.size() == 20);
  CHECK(std::set<std::string>(m.begin(), m.end()).size() == 20);
  CHECK(sample_review_manifest(recs, 0.20, 42) == m);
  CHECK_FALSE(sample_review_manifest(recs, 0.20, 41) == m);
  const auto all = sample_review_manifest(recs, 1.0, 1);
  REQUIRE(all.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == recs[i].shape_id);
  CHECK_THROWS_AS(sample_review_manifest(recs, 0.0, 1), RangeError);
  CHECK_THROWS_AS(sample_review_manifest(recs, 1.5, 1), RangeError);

  // Each record is selected with probability k/n.
  std::map<std::string, int> hits;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    for (const auto& id : sample_review_manifest(recs, 0.2, s)) ++hits[id];
  }
  const double sigma = std::sqrt(2000 * 0.2 * 0.8);
  for (const auto& r : recs) CHECK(std::abs(hits[r.shape_id] - 400.0) < 5 * sigma);

  const fs::path dir = temp_dir("manifest");
  write_manifest(m, dir / "review.txt");
  CHECK(read_file(dir / "review.txt").size() > 0);
}
