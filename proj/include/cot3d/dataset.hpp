#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cot3d/cotformat.hpp"
#include "cot3d/geometry.hpp"
#include "cot3d/layers.hpp"
#include "cot3d/shapes.hpp"

namespace cot3d {

enum class Split { kUnassigned, kTrain, kVal, kTest };

std::string_view split_name(Split s);  // "unassigned" | "train" | "val" | "test"
Split parse_split(std::string_view name);

struct DatasetRecord {
  std::string shape_id;
  Subset subset = Subset::kCap3dLike;
  Split split = Split::kUnassigned;
  AnnotationFormat format = AnnotationFormat::kTagged;
  std::string text;  // render(gold, format)
  CoTAnnotation gold;
  std::vector<Vec3> points;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

// "<subset>-<family>-<index>", e.g. "cap3d_like-mug-00007".
std::string make_shape_id(Subset subset, Family family, std::size_t index);
// Recovers the family from a shape id; throws DataError if it has none.
Family family_from_shape_id(const std::string& shape_id);

struct FormatMix {
  double tagged = 1.0;
  double unmarked = 0.0;
  double none = 0.0;

  friend bool operator==(const FormatMix&, const FormatMix&) = default;
};

// Throws ConfigError for negative weights or a sum differing from 1 by more
// than 1e-9.
void validate_mix(const FormatMix& mix);
AnnotationFormat draw_format(const FormatMix& mix, Rng& rng);

struct DatasetConfig {
  std::size_t n_per_subset = 100;
  FormatMix mix;
  std::uint64_t seed = 42;
  std::size_t points_per_shape = kDefaultPointsPerShape;
  std::size_t workers = 1;
};

// Both subsets, families assigned round-robin. Record g (global index) draws
// its spec, format and point seed from mix_seed(seed, g), so the output does
// not depend on the worker count. Throws ConfigError when n_per_subset < 10.
std::vector<DatasetRecord> build_dataset(const DatasetConfig& cfg);

// Re-renders gold and compares with text; returns shape ids that differ.
std::vector<std::string> regeneration_audit(const std::vector<DatasetRecord>& records);

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultRatios{0.8, 0.1, 0.1};

// Largest-remainder sizes for n items; remainders tie toward the earlier split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

// Groups records by shape_id, shuffles the groups with the seed and assigns
// train/val/test by split_sizes over the number of distinct shapes. Record
// order is preserved. Throws DataError with fewer than three distinct shapes.
std::vector<DatasetRecord> split_dataset(std::vector<DatasetRecord> records,
                                         const SplitRatios& ratios, std::uint64_t seed);

std::vector<DatasetRecord> select_split(const std::vector<DatasetRecord>& records, Split s);

// Point clouds above this size are stored in a side file instead of inline.
inline constexpr std::size_t kInlinePointLimit = 1024;

// JSONL, one record per line. Large clouds go to "<stem>_points/<id>.xyz"
// next to the output file and are referenced by `points_file`.
std::string records_to_jsonl(const std::vector<DatasetRecord>& records,
                             const std::filesystem::path& points_dir = {});
void write_records(const std::vector<DatasetRecord>& records, const std::filesystem::path& path);

// Malformed JSON throws ParseError with the line number; a missing or
// ill-typed field throws ParseError naming the field.
std::vector<DatasetRecord> parse_records(std::string_view jsonl,
                                         const std::filesystem::path& base_dir = {});
std::vector<DatasetRecord> read_records(const std::filesystem::path& path);

// round(fraction·n) ids drawn uniformly without replacement, listed in
// dataset order. Throws RangeError unless 0 < fraction ≤ 1.
std::vector<std::string> sample_review_manifest(const std::vector<DatasetRecord>& records,
                                                double fraction, std::uint64_t seed);
void write_manifest(const std::vector<std::string>& ids, const std::filesystem::path& path);

// In-place Fisher-Yates with a portable bounded draw, so shuffles agree across
// standard libraries.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);
std::size_t bounded_draw(Rng& rng, std::size_t n);

}  // namespace cot3d
