#include "crda/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crda {

DomainStyle source_style() {
  return DomainStyle{{0.20, 0.22, 0.35}, 0.05, 1.0, 0.0, 0.0, 0.0, 0.85};
}

DomainStyle target_style() {
  return DomainStyle{{0.24, 0.19, 0.14}, 0.05, 2.0, 0.5, 0.05, 0.04, 0.70};
}

namespace {

struct GlyphClass {
  int vertices;
  bool star;
  bool hollow;
};

GlyphClass glyph_for(std::size_t c) {
  static constexpr std::array<GlyphClass, 10> kBase = {{
      {3, false, false}, {4, false, false}, {5, false, false}, {6, false, false}, {3, true, false},
      {4, true, false}, {5, true, false}, {6, true, false}, {8, false, false}, {8, true, false},
  }};
  GlyphClass g = kBase[c % kBase.size()];
  g.hollow = c >= kBase.size();
  return g;
}

struct Point {
  double x, y;
};

bool inside_polygon(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

double boundary_distance(const std::vector<Point>& poly, double x, double y) {
  double best = 1e300;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[j];
    const Point& b = poly[i];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = a.x + t * dx - x, py = a.y + t * dy - y;
    best = std::min(best, std::sqrt(px * px + py * py));
  }
  return best;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

void render_glyph(Rng& rng, std::size_t cls, std::size_t classes, const DomainStyle& style, std::size_t channels,
                  std::size_t height, std::size_t width, double* out) {
  const GlyphClass g = glyph_for(cls);
  const double scale = static_cast<double>(std::min(height, width)) / 32.0;
  const double cx = 0.5 * static_cast<double>(width) + rng.uniform(-3.0, 3.0) * scale;
  const double cy = 0.5 * static_cast<double>(height) + rng.uniform(-3.0, 3.0) * scale;
  const double radius = 10.5 * scale * rng.uniform(0.85, 1.05);
  const double rotation = rng.uniform(-0.2, 0.2) - std::numbers::pi / 2;

  const int points = g.star ? 2 * g.vertices : g.vertices;
  std::vector<Point> poly;
  for (int i = 0; i < points; ++i) {
    const double r = radius * ((g.star && i % 2 == 1) ? 0.5 : 1.0) * rng.uniform(0.94, 1.06);
    const double a = rotation + 2.0 * std::numbers::pi * i / points;
    poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }

  // Each class owns a hue band; the jitter keeps neighbouring bands apart.
  const double band = 1.0 / static_cast<double>(classes);
  const double hue = (static_cast<double>(cls) + rng.uniform(-0.3, 0.3)) * band + 1.0;
  const auto fill = hsv_to_rgb(hue, style.glyph_saturation, rng.uniform(0.75, 0.95));
  std::array<double, 3> bg{};
  for (int c = 0; c < 3; ++c)
    bg[c] = style.background[c] + rng.uniform(-style.background_jitter, style.background_jitter);
  std::array<double, 3> stroke{};
  for (int c = 0; c < 3; ++c) stroke[c] = fill[c] * (1.0 - style.stroke_darkness);

  const double fx = rng.uniform(0.6, 1.2), fy = rng.uniform(0.6, 1.2), phase = rng.uniform(0.0, 6.3);
  const double half_stroke = 0.5 * style.stroke_width * scale;
  const double hollow_width = 2.5 * scale;

  const std::size_t plane = height * width;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      std::array<double, 3> acc{};
      // 2x2 supersampling for anti-aliased edges.
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double px = static_cast<double>(x) + 0.25 + 0.5 * sx;
          const double py = static_cast<double>(y) + 0.25 + 0.5 * sy;
          const bool in = inside_polygon(poly, px, py);
          const double d = boundary_distance(poly, px, py);
          const std::array<double, 3>* colour = &bg;
          if (d <= half_stroke) {
            colour = &stroke;
          } else if (in && (!g.hollow || d <= hollow_width)) {
            colour = &fill;
          }
          for (int c = 0; c < 3; ++c) acc[c] += 0.25 * (*colour)[c];
        }
      }
      const double grain =
          style.texture_amplitude * std::sin(fx * static_cast<double>(x) + fy * static_cast<double>(y) + phase);
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = acc[c % 3] + style.brightness + grain;
        out[c * plane + y * width + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
}

}  // namespace

LabeledDataset render_domain(Rng& rng, const SynthSpec& spec, const DomainStyle& style,
                             std::size_t count, const std::string& tag) {
  if (spec.classes < 2 || spec.classes > 16) throw std::invalid_argument("class count must be in [2, 16]");
  if (count == 0) throw std::invalid_argument("sample count must be positive");
  if (spec.channels == 0 || spec.height < 8 || spec.width < 8) {
    throw std::invalid_argument("image must be at least 1 x 8 x 8");
  }
  std::vector<std::uint32_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<std::uint32_t>(i % spec.classes);
  rng.shuffle(std::span<std::uint32_t>(labels));

  Tensor images({count, spec.channels, spec.height, spec.width});
  const std::size_t per = spec.channels * spec.height * spec.width;
  for (std::size_t i = 0; i < count; ++i) {
    render_glyph(rng, labels[i], spec.classes, style, spec.channels, spec.height, spec.width, images.raw() + i * per);
  }
  return LabeledDataset(std::move(images), std::move(labels), spec.classes, tag);
}

DomainPair generate_synthetic_pair(Rng& rng, const SynthSpec& spec) {
  Rng src_rng = rng.derive(1);
  Rng tgt_rng = rng.derive(2);
  DomainPair pair{render_domain(src_rng, spec, source_style(), spec.samples_per_domain, "source"),
                  render_domain(tgt_rng, spec, target_style(), spec.samples_per_domain, "target")};
  pair.validate();
  return pair;
}

}  // namespace crda
