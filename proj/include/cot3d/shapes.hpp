#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cot3d/cotformat.hpp"
#include "cot3d/geometry.hpp"
#include "cot3d/layers.hpp"

namespace cot3d {

enum class Family { kBox, kCylinder, kMug, kPot, kCabinet };
inline constexpr Family kAllFamilies[] = {Family::kBox, Family::kCylinder, Family::kMug,
                                          Family::kPot, Family::kCabinet};

enum class Affordance { kGraspable, kOpenable, kContainable, kSupportive };

// Which template emphasis a record uses: category-level descriptions or
// part-level, causal-heavy ones.
enum class Subset { kCap3dLike, kGapartnetLike };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);
std::string_view affordance_name(Affordance a);
Affordance parse_affordance(std::string_view name);
std::string_view subset_name(Subset s);
Subset parse_subset(std::string_view name);

struct Part {
  std::string label;
  std::vector<Affordance> affordances;

  friend bool operator==(const Part&, const Part&) = default;
};

// Sizes are in arbitrary units. Boxes and cabinets use width/height/depth;
// cylinders, mugs and pots use radius/height. Handles are torus arcs with
// major radius handle_radius and tube radius handle_thickness. `side` is +1
// for a handle (or a cabinet hinge) on the +x side and -1 for -x.
struct ShapeSpec {
  Family family = Family::kBox;
  double width = 1.0;
  double height = 1.0;
  double depth = 1.0;
  double radius = 0.5;
  double handle_radius = 0.25;
  double handle_thickness = 0.05;
  int side = 1;
  std::vector<Part> parts;

  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

// Default part list and affordance tags for a family.
std::vector<Part> default_parts(Family f);

// Nominal spec for a family (used when only the family is known).
ShapeSpec default_spec(Family f);

// Draws a spec whose proportions fall clearly inside one descriptor bucket.
ShapeSpec sample_spec(Family f, Rng& rng);

// Throws ConfigError for non-positive sizes, an empty part list or a bad side.
void validate_spec(const ShapeSpec& spec);

// Proportion word derived from the sizes ("tall", "flat", ...).
std::string_view proportion_descriptor(const ShapeSpec& spec);

// Gold reasoning from templates: stage 1 names the family and parts, stage 2
// maps affordance tags to function sentences, stage 3 links a structural
// attribute to an interaction, and the conclusion names the category and
// its primary function.
CoTAnnotation template_annotation(const ShapeSpec& spec, Subset subset);

struct GeneratedShape {
  PointCloud cloud;
  CoTAnnotation gold;
};

inline constexpr std::size_t kDefaultPointsPerShape = 512;

// Points are drawn uniformly by area over the union of part surfaces.
GeneratedShape generate_shape(const ShapeSpec& spec, std::uint64_t seed,
                              Subset subset = Subset::kCap3dLike,
                              std::size_t n_points = kDefaultPointsPerShape);

}  // namespace cot3d
