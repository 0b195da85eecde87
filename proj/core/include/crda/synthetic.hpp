#pragma once

#include <cstddef>

#include "crda/dataset.hpp"
#include "crda/rng.hpp"

namespace crda {

/// Rendering style of one domain. The source and target defaults differ in
/// background hue, stroke thickness, global brightness and a faint texture.
struct DomainStyle {
  double background[3];
  double background_jitter;
  double stroke_width;      // pixels
  double stroke_darkness;   // 0 = stroke in glyph colour, 1 = black stroke
  double brightness;        // added to every pixel
  double texture_amplitude; // sinusoidal grain amplitude
  double glyph_saturation;  // 0..1
};

DomainStyle source_style();
DomainStyle target_style();

struct SynthSpec {
  std::size_t classes = 10;
  std::size_t samples_per_domain = 500;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
};

/// Class c is a filled polygon whose vertex count and star/convex profile
/// depend on c; each sample jitters position, scale, rotation and vertex
/// radii. Classes are balanced to within one sample.
DomainPair generate_synthetic_pair(Rng& rng, const SynthSpec& spec);

/// Renders `count` samples of one domain. Exposed for the single-domain
/// order-invariance study.
LabeledDataset render_domain(Rng& rng, const SynthSpec& spec, const DomainStyle& style,
                             std::size_t count, const std::string& tag);

}  // namespace crda
