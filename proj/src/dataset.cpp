#include "cot3d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cot3d/errors.hpp"
#include "cot3d/io.hpp"
#include "json.hpp"

namespace cot3d {

using json = nlohmann::ordered_json;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
    case Split::kUnassigned:
      break;
  }
  return "unassigned";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "unassigned") return Split::kUnassigned;
  throw DataError("unknown split '" + std::string(name) + "'");
}

std::string make_shape_id(Subset subset, Family family, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return std::string(subset_name(subset)) + "-" + std::string(family_name(family)) + "-" + buf;
}

Family family_from_shape_id(const std::string& shape_id) {
  const auto a = shape_id.find('-');
  const auto b = shape_id.find('-', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw DataError("shape id '" + shape_id + "' does not encode a family");
  }
  return parse_family(std::string_view(shape_id).substr(a + 1, b - a - 1));
}

std::size_t bounded_draw(Rng& rng, std::size_t n) {
  if (n == 0) throw RangeError("bounded_draw: empty range");
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[bounded_draw(rng, i)]);
}

namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void validate_mix(const FormatMix& mix) {
  if (mix.tagged < 0 || mix.unmarked < 0 || mix.none < 0) {
    throw ConfigError("format mix weights must be non-negative");
  }
  const double sum = mix.tagged + mix.unmarked + mix.none;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("format mix weights must sum to 1, got " + std::to_string(sum));
  }
}

AnnotationFormat draw_format(const FormatMix& mix, Rng& rng) {
  const double u = uniform01(rng);
  if (u < mix.tagged) return AnnotationFormat::kTagged;
  if (u < mix.tagged + mix.unmarked) return AnnotationFormat::kUnmarked;
  if (mix.none > 0) return AnnotationFormat::kNone;
  // Rounding left u above the sum; fall back to the last non-zero weight.
  return mix.unmarked > 0 ? AnnotationFormat::kUnmarked : AnnotationFormat::kTagged;
}

std::vector<DatasetRecord> build_dataset(const DatasetConfig& cfg) {
  if (cfg.n_per_subset < 10) {
    throw ConfigError("build_dataset needs at least 10 shapes per subset, got " +
                      std::to_string(cfg.n_per_subset));
  }
  validate_mix(cfg.mix);
  const Subset subsets[] = {Subset::kCap3dLike, Subset::kGapartnetLike};
  const std::size_t total = 2 * cfg.n_per_subset;
  std::vector<DatasetRecord> out(total);

  auto make = [&](std::size_t g) {
    const Subset subset = subsets[g / cfg.n_per_subset];
    const std::size_t i = g % cfg.n_per_subset;
    const Family family = kAllFamilies[i % std::size(kAllFamilies)];
    Rng rng(mix_seed(cfg.seed, g));
    const ShapeSpec spec = sample_spec(family, rng);
    const AnnotationFormat fmt = draw_format(cfg.mix, rng);
    const std::uint64_t point_seed = rng();
    GeneratedShape shape = generate_shape(spec, point_seed, subset, cfg.points_per_shape);
    DatasetRecord& r = out[g];
    r.shape_id = make_shape_id(subset, family, i);
    r.subset = subset;
    r.format = fmt;
    r.gold = std::move(shape.gold);
    r.text = render(r.gold, fmt);
    r.points = std::move(shape.cloud.points);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, total));
  if (workers == 1) {
    for (std::size_t g = 0; g < total; ++g) make(g);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t g = w; g < total; g += workers) make(g);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<std::string> regeneration_audit(const std::vector<DatasetRecord>& records) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    try {
      if (render(r.gold, r.format) != r.text) bad.push_back(r.shape_id);
    } catch (const ValidationError&) {
      bad.push_back(r.shape_id);
    }
  }
  return bad;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double q = ratios[k] * static_cast<double>(n);
    // Guard against 0.1 * 10 evaluating to 0.9999999.
    const double fl = std::floor(q + 1e-9);
    sizes[k] = static_cast<std::size_t>(fl);
    rem[k] = q - fl;
    assigned += sizes[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (rem[k] > rem[best] + 1e-12) best = k;
    }
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

std::vector<DatasetRecord> split_dataset(std::vector<DatasetRecord> records,
                                         const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> group;
  for (const auto& r : records) {
    if (group.emplace(r.shape_id, ids.size()).second) ids.push_back(r.shape_id);
  }
  if (ids.size() < 3) {
    throw DataError("cannot split " + std::to_string(ids.size()) +
                    " distinct shapes into three partitions");
  }
  const auto sizes = split_sizes(ids.size(), ratios);
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5311ull));
  shuffle_indices(order, rng);
  std::vector<Split> assignment(ids.size());
  std::size_t pos = 0;
  const Split names[] = {Split::kTrain, Split::kVal, Split::kTest};
  for (int k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < sizes[k]; ++j) assignment[order[pos++]] = names[k];
  }
  for (auto& r : records) r.split = assignment[group.at(r.shape_id)];
  return records;
}

std::vector<DatasetRecord> select_split(const std::vector<DatasetRecord>& records, Split s) {
  std::vector<DatasetRecord> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(r);
  }
  return out;
}

// ---- JSONL ----

namespace {

json gold_to_json(const CoTAnnotation& g) {
  json j;
  j["object_recognition"] = g.object_recognition;
  j["functional_inference"] = g.functional_inference;
  j["causal_reasoning"] = g.causal_reasoning;
  j["conclusion"] = g.conclusion;
  return j;
}

std::string safe_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + name + "'", line);
  return *it;
}

std::string string_field(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_string()) throw ParseError(std::string("field '") + name + "' must be a string", line);
  return v.get<std::string>();
}

}  // namespace

std::string records_to_jsonl(const std::vector<DatasetRecord>& records,
                             const std::filesystem::path& points_dir) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["shape_id"] = r.shape_id;
    j["subset"] = subset_name(r.subset);
    j["split"] = split_name(r.split);
    j["format"] = format_name(r.format);
    j["text"] = r.text;
    j["gold"] = gold_to_json(r.gold);
    if (r.points.size() > kInlinePointLimit && !points_dir.empty()) {
      const std::string name = safe_file_stem(r.shape_id) + ".xyz";
      PointCloud pc{r.points, r.shape_id};
      write_xyz(pc, points_dir / name);
      j["points_file"] = (points_dir.filename() / name).generic_string();
    } else {
      json pts = json::array();
      for (const auto& p : r.points) pts.push_back({p[0], p[1], p[2]});
      j["points"] = std::move(pts);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_records(const std::vector<DatasetRecord>& records, const std::filesystem::path& path) {
  std::filesystem::path points_dir = path.parent_path() / (path.stem().string() + "_points");
  write_file_atomic(path, records_to_jsonl(records, points_dir));
}

std::vector<DatasetRecord> parse_records(std::string_view jsonl,
                                         const std::filesystem::path& base_dir) {
  std::vector<DatasetRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object", line_no);

    DatasetRecord r;
    r.shape_id = string_field(j, "shape_id", line_no);
    try {
      r.subset = parse_subset(string_field(j, "subset", line_no));
      r.split = parse_split(string_field(j, "split", line_no));
      r.format = parse_format(string_field(j, "format", line_no));
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(e.what(), line_no);
    }
    r.text = string_field(j, "text", line_no);
    const json& g = field(j, "gold", line_no);
    if (!g.is_object()) throw ParseError("field 'gold' must be an object", line_no);
    r.gold.object_recognition = string_field(g, "object_recognition", line_no);
    r.gold.functional_inference = string_field(g, "functional_inference", line_no);
    r.gold.causal_reasoning = string_field(g, "causal_reasoning", line_no);
    r.gold.conclusion = string_field(g, "conclusion", line_no);

    if (auto it = j.find("points"); it != j.end()) {
      if (!it->is_array()) throw ParseError("field 'points' must be an array", line_no);
      for (const auto& p : *it) {
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
            !p[2].is_number()) {
          throw ParseError("field 'points' must hold [x, y, z] number triples", line_no);
        }
        r.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
    } else if (auto pf = j.find("points_file"); pf != j.end()) {
      if (!pf->is_string()) throw ParseError("field 'points_file' must be a string", line_no);
      try {
        r.points = load_point_cloud(base_dir / pf->get<std::string>(), PointFormat::kXyz).points;
      } catch (const Error& e) {
        throw ParseError(std::string("field 'points_file': ") + e.what(), line_no);
      }
    } else {
      throw ParseError("missing field 'points' (or 'points_file')", line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> read_records(const std::filesystem::path& path) {
  return parse_records(read_file(path), path.parent_path());
}

std::vector<std::string> sample_review_manifest(const std::vector<DatasetRecord>& records,
                                                double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw RangeError("review fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = records.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x2e71ull));
  // Partial Fisher-Yates: the first k slots are a uniform sample.
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + bounded_draw(rng, n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> ids;
  for (std::size_t i : idx) ids.push_back(records[i].shape_id);
  return ids;
}

void write_manifest(const std::vector<std::string>& ids, const std::filesystem::path& path) {
  std::string out;
  for (const auto& id : ids) out += id + "\n";
  write_file_atomic(path, out);
}

}  // namespace cot3d
