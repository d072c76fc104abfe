#include "cot3d/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <variant>

#include "cot3d/errors.hpp"

namespace cot3d {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kBox:
      return "box";
    case Family::kCylinder:
      return "cylinder";
    case Family::kMug:
      return "mug";
    case Family::kPot:
      return "pot";
    case Family::kCabinet:
      return "cabinet";
  }
  return "box";
}

Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw DataError("unknown shape family '" + std::string(name) + "'");
}

std::string_view affordance_name(Affordance a) {
  switch (a) {
    case Affordance::kGraspable:
      return "graspable";
    case Affordance::kOpenable:
      return "openable";
    case Affordance::kContainable:
      return "containable";
    case Affordance::kSupportive:
      return "supportive";
  }
  return "graspable";
}

Affordance parse_affordance(std::string_view name) {
  for (Affordance a : {Affordance::kGraspable, Affordance::kOpenable, Affordance::kContainable,
                       Affordance::kSupportive}) {
    if (affordance_name(a) == name) return a;
  }
  throw DataError("unknown affordance tag '" + std::string(name) + "'");
}

std::string_view subset_name(Subset s) {
  return s == Subset::kCap3dLike ? "cap3d_like" : "gapartnet_like";
}

Subset parse_subset(std::string_view name) {
  if (name == "cap3d_like") return Subset::kCap3dLike;
  if (name == "gapartnet_like") return Subset::kGapartnetLike;
  throw DataError("unknown subset '" + std::string(name) + "'");
}

std::vector<Part> default_parts(Family f) {
  using A = Affordance;
  switch (f) {
    case Family::kBox:
      return {{"body", {A::kSupportive}}};
    case Family::kCylinder:
      return {{"body", {A::kGraspable}}};
    case Family::kMug:
      return {{"body", {A::kContainable}}, {"handle", {A::kGraspable}}};
    case Family::kPot:
      return {{"body", {A::kContainable}}, {"lid", {A::kOpenable}}, {"handle", {A::kGraspable}}};
    case Family::kCabinet:
      return {{"body", {A::kContainable, A::kSupportive}},
              {"door", {A::kOpenable}},
              {"knob", {A::kGraspable}}};
  }
  return {};
}

ShapeSpec default_spec(Family f) {
  ShapeSpec s;
  s.family = f;
  s.parts = default_parts(f);
  switch (f) {
    case Family::kBox:
      s.width = s.height = s.depth = 1.0;
      break;
    case Family::kCylinder:
      s.radius = 0.5;
      s.height = 1.0;
      break;
    case Family::kMug:
      s.radius = 0.4;
      s.height = 1.0;
      s.handle_radius = 0.3;
      s.handle_thickness = 0.06;
      break;
    case Family::kPot:
      s.radius = 0.8;
      s.height = 0.6;
      s.handle_radius = 0.25;
      s.handle_thickness = 0.06;
      break;
    case Family::kCabinet:
      s.width = 1.0;
      s.height = 1.8;
      s.depth = 0.6;
      break;
  }
  return s;
}

ShapeSpec sample_spec(Family f, Rng& rng) {
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  ShapeSpec s = default_spec(f);
  switch (f) {
    case Family::kBox: {
      const double base = U(0.8, 1.2);
      switch (pick(4)) {
        case 0:  // tall
          s.width = base * U(0.9, 1.1);
          s.depth = base * U(0.9, 1.1);
          s.height = std::max(s.width, s.depth) * U(1.6, 2.2);
          break;
        case 1:  // flat
          s.width = base * U(0.9, 1.1);
          s.depth = base * U(0.9, 1.1);
          s.height = std::max(s.width, s.depth) * U(0.25, 0.45);
          break;
        case 2:  // long
          s.depth = base;
          s.width = s.depth * U(1.8, 2.4);
          s.height = s.width * U(0.7, 0.9);
          break;
        default:  // cubic
          s.width = base * U(0.9, 1.1);
          s.depth = base * U(0.9, 1.1);
          s.height = base * U(0.9, 1.1);
          break;
      }
      break;
    }
    case Family::kCylinder: {
      s.radius = U(0.3, 0.6);
      const double q = pick(3) == 0 ? U(1.8, 2.5) : (pick(2) == 0 ? U(0.3, 0.5) : U(0.85, 1.15));
      s.height = 2.0 * s.radius * q;
      break;
    }
    case Family::kMug: {
      s.radius = U(0.3, 0.5);
      const double q = pick(2) == 0 ? U(1.2, 1.5) : U(0.6, 0.85);
      s.height = 2.0 * s.radius * q;
      s.handle_radius = s.height * U(0.28, 0.36);
      s.handle_thickness = s.handle_radius * U(0.18, 0.25);
      s.side = pick(2) == 0 ? 1 : -1;
      break;
    }
    case Family::kPot: {
      s.radius = U(0.6, 0.9);
      const double q = pick(2) == 0 ? U(0.7, 0.9) : U(0.3, 0.45);
      s.height = 2.0 * s.radius * q;
      s.handle_radius = s.radius * U(0.25, 0.35);
      s.handle_thickness = s.handle_radius * U(0.2, 0.25);
      s.side = pick(2) == 0 ? 1 : -1;
      break;
    }
    case Family::kCabinet: {
      s.width = U(0.8, 1.2);
      s.height = s.width * (pick(2) == 0 ? U(1.6, 2.2) : U(0.5, 0.75));
      s.depth = s.width * U(0.5, 0.7);
      s.side = pick(2) == 0 ? 1 : -1;
      break;
    }
  }
  return s;
}

void validate_spec(const ShapeSpec& spec) {
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("invalid shape spec: ") + name + " must be positive, got " +
                        std::to_string(v));
    }
  };
  switch (spec.family) {
    case Family::kBox:
    case Family::kCabinet:
      positive(spec.width, "width");
      positive(spec.height, "height");
      positive(spec.depth, "depth");
      break;
    case Family::kCylinder:
      positive(spec.radius, "radius");
      positive(spec.height, "height");
      break;
    case Family::kMug:
    case Family::kPot:
      positive(spec.radius, "radius");
      positive(spec.height, "height");
      positive(spec.handle_radius, "handle_radius");
      positive(spec.handle_thickness, "handle_thickness");
      if (spec.handle_thickness >= spec.handle_radius) {
        throw ConfigError("invalid shape spec: handle_thickness must be below handle_radius");
      }
      break;
  }
  if (spec.side != 1 && spec.side != -1) throw ConfigError("invalid shape spec: side must be +1 or -1");
  if (spec.parts.empty()) throw ConfigError("invalid shape spec: part list is empty");
}

std::string_view proportion_descriptor(const ShapeSpec& s) {
  switch (s.family) {
    case Family::kBox: {
      const double a = s.height / std::max(s.width, s.depth);
      if (a >= 1.4) return "tall";
      if (a <= 0.6) return "flat";
      if (s.width / s.depth >= 1.5) return "long";
      return "cubic";
    }
    case Family::kCylinder: {
      const double q = s.height / (2.0 * s.radius);
      if (q >= 1.5) return "tall";
      if (q <= 0.6) return "squat";
      return "medium";
    }
    case Family::kMug:
      return s.height / (2.0 * s.radius) >= 1.0 ? "tall" : "short";
    case Family::kPot:
      return s.height / (2.0 * s.radius) >= 0.6 ? "deep" : "shallow";
    case Family::kCabinet:
      return s.height / s.width >= 1.3 ? "tall" : "wide";
  }
  return "";
}

// ---- annotation templates ----

namespace {

std::string side_word(int side) { return side > 0 ? "right" : "left"; }

std::string primary_function(Family f) {
  switch (f) {
    case Family::kBox:
      return "supporting stacked items";
    case Family::kCylinder:
      return "being held in one hand";
    case Family::kMug:
      return "holding liquid";
    case Family::kPot:
      return "cooking food";
    case Family::kCabinet:
      return "storing items";
  }
  return "";
}

std::string affordance_sentence(const std::string& label, Affordance a) {
  switch (a) {
    case Affordance::kGraspable:
      return "The " + label + " can be grasped by a hand.";
    case Affordance::kOpenable:
      return "The " + label + " can be opened to reach the interior.";
    case Affordance::kContainable:
      return "The " + label + " forms a cavity that holds contents.";
    case Affordance::kSupportive:
      return "The " + label + " offers a flat top that supports other objects.";
  }
  return "";
}

std::string join_parts(const std::vector<Part>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i].label;
  }
  return out;
}

std::string object_stage(const ShapeSpec& s, Subset subset) {
  const std::string desc(proportion_descriptor(s));
  const std::string side = side_word(s.side);
  std::string out = "The object is a " + desc + " " + std::string(family_name(s.family)) + ".";
  if (subset == Subset::kGapartnetLike) {
    out += " It consists of " + std::to_string(s.parts.size()) +
           (s.parts.size() == 1 ? " part: the " : " parts: the ") + join_parts(s.parts) + ".";
  }
  switch (s.family) {
    case Family::kBox:
      out += " It has six flat rectangular faces.";
      break;
    case Family::kCylinder:
      out += " It has a round cross section and two flat circular ends.";
      break;
    case Family::kMug:
      out += " It has a cylindrical body and a curved handle on the " + side + " side.";
      break;
    case Family::kPot:
      out += " It has a round body, a lid with a small knob, and a looped handle on the " + side +
             " side.";
      break;
    case Family::kCabinet:
      out += " It has a box-shaped body, a front door hinged on the " + side +
             " edge, and a round knob.";
      break;
  }
  return out;
}

std::string function_stage(const ShapeSpec& s, Subset subset) {
  std::string out;
  if (subset == Subset::kCap3dLike) {
    // Category level: one sentence per distinct affordance.
    std::vector<Affordance> seen;
    for (const auto& p : s.parts) {
      for (Affordance a : p.affordances) {
        if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
        seen.push_back(a);
        if (!out.empty()) out += " ";
        out += affordance_sentence(p.label, a);
      }
    }
  } else {
    for (const auto& p : s.parts) {
      for (Affordance a : p.affordances) {
        if (!out.empty()) out += " ";
        out += affordance_sentence(p.label, a);
        out += " This part is tagged " + std::string(affordance_name(a)) + ".";
      }
    }
  }
  out += " Its primary function is " + primary_function(s.family) + ".";
  return out;
}

std::string causal_stage(const ShapeSpec& s, Subset subset) {
  const std::string side = side_word(s.side);
  const std::string other = side_word(-s.side);
  const bool parts = subset == Subset::kGapartnetLike;
  switch (s.family) {
    case Family::kBox:
      return parts ? "Because the top face is flat and the four walls are rigid, a load placed on "
                     "the body spreads evenly into the walls, so items can be stacked on the box "
                     "without tipping it."
                   : "Because the top face is flat and the walls are rigid, the box bears weight "
                     "evenly, so items can be stacked on it.";
    case Family::kCylinder:
      return parts ? "Because the curved side of the body keeps a constant radius, fingers wrap "
                     "around it evenly, so the cylinder can be held firmly or rolled along a "
                     "surface on its side."
                   : "Because the curved side has a constant radius, the cylinder fits the palm, "
                     "so it can be held or rolled.";
    case Family::kMug:
      return parts ? "The handle is a loop attached to the " + side +
                         " wall of the body. Because the loop leaves a gap wider than a finger, "
                         "a grasp on the handle carries the weight of the body, so the mug can "
                         "be lifted and tilted while the liquid stays inside."
                   : "Because the handle forms a closed loop beside the body, fingers pass "
                     "through it, so the mug can be lifted without touching the hot body.";
    case Family::kPot:
      return parts ? "The lid rests on the rim of the body and carries a knob. Because the knob "
                     "rises above the lid, it can be pinched to lift the lid off, while the " +
                         side + " handle keeps the pot steady during stirring."
                   : "Because the lid rests on the rim and carries a knob, it can be lifted off "
                     "while the handle keeps the pot steady.";
    case Family::kCabinet:
      return parts ? "The door is hinged on the " + side + " edge of the body and the knob sits "
                         "near the " + other + " edge. Because the knob is far from the hinge, "
                         "a small pull on the knob produces a large torque, so the door swings "
                         "open and exposes the shelves inside."
                   : "Because the door is hinged on the " + side + " edge and the knob sits near "
                         "the " + other + " edge, pulling the knob swings the door open.";
  }
  return "";
}

std::string conclusion(const ShapeSpec& s) {
  const std::string desc(proportion_descriptor(s));
  const std::string side = side_word(s.side);
  const std::string fn = primary_function(s.family);
  switch (s.family) {
    case Family::kBox:
      return "A " + desc + " box for " + fn + ".";
    case Family::kCylinder:
      return "A " + desc + " cylinder for " + fn + ".";
    case Family::kMug:
      return "A " + desc + " mug with a handle on the " + side + " side for " + fn + ".";
    case Family::kPot:
      return "A " + desc + " pot with a lid and a " + side + " handle for " + fn + ".";
    case Family::kCabinet:
      return "A " + desc + " cabinet with a door hinged on the " + side + " for " + fn + ".";
  }
  return "";
}

}  // namespace

CoTAnnotation template_annotation(const ShapeSpec& spec, Subset subset) {
  validate_spec(spec);
  return {object_stage(spec, subset), function_stage(spec, subset), causal_stage(spec, subset),
          conclusion(spec)};
}

// ---- surface sampling ----

namespace {

constexpr double kPi = std::numbers::pi;

struct Rect {
  Vec3 origin, a, b;
};
struct CylinderSide {
  Vec3 base;  // centre of the bottom circle, axis +y
  double radius, height;
};
struct Disk {
  Vec3 centre;  // normal +y
  double radius;
};
struct Sphere {
  Vec3 centre;
  double radius;
};
// Torus arc: centre, axis along `axis` (1 = y, 2 = z); major angle u in
// [-pi/2, pi/2] around the outward direction `side`·x.
struct TorusArc {
  Vec3 centre;
  int axis;
  int side;
  double major, minor;
};

using Surface = std::variant<Rect, CylinderSide, Disk, Sphere, TorusArc>;

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

double area(const Surface& s) {
  struct {
    double operator()(const Rect& r) const { return norm3(r.a) * norm3(r.b); }
    double operator()(const CylinderSide& c) const { return 2 * kPi * c.radius * c.height; }
    double operator()(const Disk& d) const { return kPi * d.radius * d.radius; }
    double operator()(const Sphere& s) const { return 4 * kPi * s.radius * s.radius; }
    double operator()(const TorusArc& t) const { return kPi * t.major * 2 * kPi * t.minor; }
  } visitor;
  return std::visit(visitor, s);
}

Vec3 sample(const Surface& surf, Rng& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  if (auto* r = std::get_if<Rect>(&surf)) {
    const double u = U(rng), v = U(rng);
    return {r->origin[0] + u * r->a[0] + v * r->b[0], r->origin[1] + u * r->a[1] + v * r->b[1],
            r->origin[2] + u * r->a[2] + v * r->b[2]};
  }
  if (auto* c = std::get_if<CylinderSide>(&surf)) {
    const double th = 2 * kPi * U(rng);
    return {c->base[0] + c->radius * std::cos(th), c->base[1] + c->height * U(rng),
            c->base[2] + c->radius * std::sin(th)};
  }
  if (auto* d = std::get_if<Disk>(&surf)) {
    const double rr = d->radius * std::sqrt(U(rng));
    const double th = 2 * kPi * U(rng);
    return {d->centre[0] + rr * std::cos(th), d->centre[1], d->centre[2] + rr * std::sin(th)};
  }
  if (auto* s = std::get_if<Sphere>(&surf)) {
    std::normal_distribution<double> N(0.0, 1.0);
    Vec3 v{N(rng), N(rng), N(rng)};
    double n = norm3(v);
    while (n < 1e-12) {
      v = {N(rng), N(rng), N(rng)};
      n = norm3(v);
    }
    return {s->centre[0] + s->radius * v[0] / n, s->centre[1] + s->radius * v[1] / n,
            s->centre[2] + s->radius * v[2] / n};
  }
  const auto& t = std::get<TorusArc>(surf);
  const double u = -kPi / 2 + kPi * U(rng);
  // Tube angle by rejection: the area element grows with major + minor·cos v.
  double v = 0.0;
  while (true) {
    v = 2 * kPi * U(rng);
    if (U(rng) * (t.major + t.minor) <= t.major + t.minor * std::cos(v)) break;
  }
  const double ring = t.major + t.minor * std::cos(v);
  const double radial_x = t.side * std::cos(u) * ring;
  const double tangent = std::sin(u) * ring;
  const double along_axis = t.minor * std::sin(v);
  if (t.axis == 2) {  // loop in the xy-plane
    return {t.centre[0] + radial_x, t.centre[1] + tangent, t.centre[2] + along_axis};
  }
  // loop in the xz-plane
  return {t.centre[0] + radial_x, t.centre[1] + along_axis, t.centre[2] + tangent};
}

void add_box(std::vector<Surface>& out, double w, double h, double d, Vec3 c = {0, 0, 0}) {
  const double x0 = c[0] - w / 2, y0 = c[1] - h / 2, z0 = c[2] - d / 2;
  out.push_back(Rect{{x0, y0, z0}, {w, 0, 0}, {0, h, 0}});
  out.push_back(Rect{{x0, y0, z0 + d}, {w, 0, 0}, {0, h, 0}});
  out.push_back(Rect{{x0, y0, z0}, {0, 0, d}, {0, h, 0}});
  out.push_back(Rect{{x0 + w, y0, z0}, {0, 0, d}, {0, h, 0}});
  out.push_back(Rect{{x0, y0, z0}, {w, 0, 0}, {0, 0, d}});
  out.push_back(Rect{{x0, y0 + h, z0}, {w, 0, 0}, {0, 0, d}});
}

std::vector<Surface> surfaces(const ShapeSpec& s) {
  std::vector<Surface> out;
  switch (s.family) {
    case Family::kBox:
      add_box(out, s.width, s.height, s.depth);
      break;
    case Family::kCylinder:
      out.push_back(CylinderSide{{0, -s.height / 2, 0}, s.radius, s.height});
      out.push_back(Disk{{0, -s.height / 2, 0}, s.radius});
      out.push_back(Disk{{0, s.height / 2, 0}, s.radius});
      break;
    case Family::kMug:
      out.push_back(CylinderSide{{0, -s.height / 2, 0}, s.radius, s.height});
      out.push_back(Disk{{0, -s.height / 2, 0}, s.radius});
      out.push_back(TorusArc{{s.side * s.radius, 0, 0}, 2, s.side, s.handle_radius,
                             s.handle_thickness});
      break;
    case Family::kPot: {
      out.push_back(CylinderSide{{0, -s.height / 2, 0}, s.radius, s.height});
      out.push_back(Disk{{0, -s.height / 2, 0}, s.radius});
      out.push_back(Disk{{0, s.height / 2, 0}, s.radius});
      out.push_back(Sphere{{0, s.height / 2, 0}, 0.12 * s.radius});
      out.push_back(TorusArc{{s.side * s.radius, 0.3 * s.height, 0}, 1, s.side, s.handle_radius,
                             s.handle_thickness});
      break;
    }
    case Family::kCabinet: {
      add_box(out, s.width, s.height, s.depth);
      const double margin = 0.05 * std::min(s.width, s.height);
      const double gap = 0.02 * s.depth;
      const double zf = s.depth / 2 + gap;
      out.push_back(Rect{{-s.width / 2 + margin, -s.height / 2 + margin, zf},
                         {s.width - 2 * margin, 0, 0},
                         {0, s.height - 2 * margin, 0}});
      const double knob = 0.04 * std::min(s.width, s.height);
      out.push_back(Sphere{{-s.side * (s.width / 2 - 3 * margin), 0, zf + knob}, knob});
      break;
    }
  }
  return out;
}

}  // namespace

GeneratedShape generate_shape(const ShapeSpec& spec, std::uint64_t seed, Subset subset,
                              std::size_t n_points) {
  validate_spec(spec);
  if (n_points == 0) throw ConfigError("generate_shape: n_points must be positive");
  const auto surfs = surfaces(spec);
  std::vector<double> weights;
  for (const auto& s : surfs) weights.push_back(area(s));
  Rng rng(seed);
  std::discrete_distribution<std::size_t> choose(weights.begin(), weights.end());

  GeneratedShape out;
  out.cloud.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) out.cloud.points.push_back(sample(surfs[choose(rng)], rng));
  out.gold = template_annotation(spec, subset);
  return out;
}

}  // namespace cot3d
