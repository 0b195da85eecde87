#include "crda/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace crda {

namespace {

constexpr std::array<std::string_view, kCorruptionCount> kNames = {
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "motion_blur",
    "zoom_blur",      "fog",        "frost",         "snow",         "elastic_transform",
    "contrast",       "brightness", "jpeg_compression", "pixelate",  "glass_blur",
};

// Calibrated on the synthetic target corpus so that the average shift grows
// with t for every kind and stays near the 60/255 ball at t = 5.
const SeverityTable kDefaultTable = {{{
    /* gaussian_noise   sigma      */ {{{0.06, 0}, {0.10, 0}, {0.15, 0}, {0.21, 0}, {0.28, 0}}},
    /* shot_noise       lambda     */ {{{60, 0}, {25, 0}, {12, 0}, {6, 0}, {3.5, 0}}},
    /* impulse_noise    prob       */ {{{0.03, 0}, {0.06, 0}, {0.09, 0}, {0.17, 0}, {0.27, 0}}},
    /* defocus_blur     radius     */ {{{1.0, 0}, {1.5, 0}, {2.0, 0}, {2.5, 0}, {3.0, 0}}},
    /* motion_blur      length     */ {{{3, 0}, {5, 0}, {7, 0}, {9, 0}, {11, 0}}},
    /* zoom_blur        max zoom   */ {{{1.06, 0}, {1.11, 0}, {1.16, 0}, {1.21, 0}, {1.26, 0}}},
    /* fog              weight     */ {{{0.15, 0}, {0.25, 0}, {0.35, 0}, {0.45, 0}, {0.55, 0}}},
    /* frost            weight     */ {{{0.15, 0}, {0.25, 0}, {0.35, 0}, {0.42, 0}, {0.50, 0}}},
    /* snow             density    */ {{{0.01, 0.05}, {0.02, 0.10}, {0.035, 0.15}, {0.05, 0.20}, {0.07, 0.25}}},
    /* elastic          amplitude  */ {{{0.6, 0}, {1.0, 0}, {1.5, 0}, {2.0, 0}, {2.6, 0}}},
    /* contrast         factor     */ {{{0.75, 0}, {0.6, 0}, {0.45, 0}, {0.3, 0}, {0.15, 0}}},
    /* brightness       offset     */ {{{0.05, 0}, {0.10, 0}, {0.15, 0}, {0.20, 0}, {0.25, 0}}},
    /* jpeg             quality    */ {{{25, 0}, {18, 0}, {15, 0}, {10, 0}, {7, 0}}},
    /* pixelate         block      */ {{{2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 0}}},
    /* glass_blur       sigma      */ {{{0.4, 1}, {0.55, 2}, {0.7, 3}, {0.85, 4}, {1.0, 5}}},
}}};

// Mirror indexing without repeating the edge sample: -1 -> 1, n -> n-2.
inline std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct Plane {
  std::size_t h, w;
  double* p;
  double at(std::ptrdiff_t y, std::ptrdiff_t x) const {
    return p[reflect(y, static_cast<std::ptrdiff_t>(h)) * static_cast<std::ptrdiff_t>(w) +
             reflect(x, static_cast<std::ptrdiff_t>(w))];
  }
};

struct Kernel {
  std::ptrdiff_t radius;
  std::vector<double> taps;  // (2r+1)^2, row-major, sums to 1
  double tap(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
    const std::ptrdiff_t size = 2 * radius + 1;
    return taps[static_cast<std::size_t>((dy + radius) * size + dx + radius)];
  }
};

void normalise(Kernel& k) {
  double s = 0.0;
  for (double v : k.taps) s += v;
  for (double& v : k.taps) v /= s;
}

// Reflect-padded 2-D convolution applied to every channel.
Tensor convolve(const Tensor& img, const Kernel& k) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  std::vector<double> src(img.data().begin(), img.data().end());
  for (std::size_t ch = 0; ch < c; ++ch) {
    Plane in{h, w, src.data() + ch * h * w};
    double* o = out.raw() + ch * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t dy = -k.radius; dy <= k.radius; ++dy)
          for (std::ptrdiff_t dx = -k.radius; dx <= k.radius; ++dx) {
            const double t = k.tap(dy, dx);
            if (t != 0.0) {
              acc += t * in.at(static_cast<std::ptrdiff_t>(y) + dy, static_cast<std::ptrdiff_t>(x) + dx);
            }
          }
        o[y * w + x] = acc;
      }
  }
  return out;
}

Kernel disk_kernel(double radius) {
  Kernel k{static_cast<std::ptrdiff_t>(std::ceil(radius)), {}};
  const std::ptrdiff_t size = 2 * k.radius + 1;
  k.taps.assign(static_cast<std::size_t>(size * size), 0.0);
  for (std::ptrdiff_t dy = -k.radius; dy <= k.radius; ++dy)
    for (std::ptrdiff_t dx = -k.radius; dx <= k.radius; ++dx)
      if (static_cast<double>(dy * dy + dx * dx) <= radius * radius)
        k.taps[static_cast<std::size_t>((dy + k.radius) * size + dx + k.radius)] = 1.0;
  normalise(k);
  return k;
}

Kernel motion_kernel(int length) {
  // Line through the centre at 45 degrees.
  Kernel k{length / 2, {}};
  const std::ptrdiff_t size = 2 * k.radius + 1;
  k.taps.assign(static_cast<std::size_t>(size * size), 0.0);
  for (std::ptrdiff_t i = -k.radius; i <= k.radius; ++i)
    k.taps[static_cast<std::size_t>((-i + k.radius) * size + i + k.radius)] = 1.0;
  normalise(k);
  return k;
}

Kernel gaussian_kernel(double sigma) {
  Kernel k{std::max<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma))), {}};
  const std::ptrdiff_t size = 2 * k.radius + 1;
  k.taps.resize(static_cast<std::size_t>(size * size));
  for (std::ptrdiff_t dy = -k.radius; dy <= k.radius; ++dy)
    for (std::ptrdiff_t dx = -k.radius; dx <= k.radius; ++dx)
      k.taps[static_cast<std::size_t>((dy + k.radius) * size + dx + k.radius)] =
          std::exp(-static_cast<double>(dy * dy + dx * dx) / (2.0 * sigma * sigma));
  normalise(k);
  return k;
}

// Bilinear sample of one plane at real coordinates, reflect outside.
double bilinear(const Plane& p, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  const double ay = y - fy, ax = x - fx;
  return (1 - ay) * ((1 - ax) * p.at(y0, x0) + ax * p.at(y0, x0 + 1)) +
         ay * ((1 - ax) * p.at(y0 + 1, x0) + ax * p.at(y0 + 1, x0 + 1));
}

// Diamond-square plasma normalised to [0,1], cropped to h x w.
std::vector<double> plasma(std::size_t h, std::size_t w, Rng& rng, double roughness = 0.6) {
  std::size_t n = 1;
  while (n + 1 < std::max(h, w)) n *= 2;
  const std::size_t size = n + 1;
  std::vector<double> g(size * size, 0.0);
  auto at = [&](std::size_t y, std::size_t x) -> double& { return g[y * size + x]; };
  double amp = 1.0;
  for (std::size_t step = n; step > 1; step /= 2) {
    const std::size_t half = step / 2;
    for (std::size_t y = half; y < size; y += step)
      for (std::size_t x = half; x < size; x += step)
        at(y, x) = 0.25 * (at(y - half, x - half) + at(y - half, x + half) + at(y + half, x - half) +
                           at(y + half, x + half)) +
                   amp * rng.uniform(-1.0, 1.0);
    for (std::size_t y = 0; y < size; y += half)
      for (std::size_t x = (y / half) % 2 == 0 ? half : 0; x < size; x += step) {
        double s = 0.0;
        int cnt = 0;
        if (y >= half) { s += at(y - half, x); ++cnt; }
        if (y + half < size) { s += at(y + half, x); ++cnt; }
        if (x >= half) { s += at(y, x - half); ++cnt; }
        if (x + half < size) { s += at(y, x + half); ++cnt; }
        at(y, x) = s / cnt + amp * rng.uniform(-1.0, 1.0);
      }
    amp *= roughness;
  }
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out[y * w + x] = at(y, x);
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double mn = *lo, range = *hi - *lo;
  for (double& v : out) v = range > 0 ? (v - mn) / range : 0.5;
  return out;
}

std::vector<double> blur_plane(const std::vector<double>& src, std::size_t h, std::size_t w, double sigma) {
  Tensor t({1, h, w}, src);
  Tensor b = convolve(t, gaussian_kernel(sigma));
  return std::vector<double>(b.data().begin(), b.data().end());
}

Tensor gaussian_noise(const Tensor& x, double sigma, Rng& rng) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + sigma * rng.normal();
  return out;
}

Tensor shot_noise(const Tensor& x, double lambda, Rng& rng) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<double>(rng.poisson(x[i] * lambda)) / lambda;
  return out;
}

Tensor impulse_noise(const Tensor& x, double prob, Rng& rng) {
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < prob) out[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  return out;
}

Tensor zoom_blur(const Tensor& x, double max_zoom) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> src(x.data().begin(), x.data().end());
  Tensor acc = x;
  int count = 1;
  const double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
  for (int i = 1;; ++i) {
    const double z = 1.0 + 0.01 * i;
    if (z > max_zoom + 1e-9) break;
    for (std::size_t ch = 0; ch < c; ++ch) {
      Plane p{h, w, src.data() + ch * h * w};
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx)
          acc[ch * h * w + y * w + xx] +=
              bilinear(p, cy + (static_cast<double>(y) - cy) / z, cx + (static_cast<double>(xx) - cx) / z);
    }
    ++count;
  }
  for (double& v : acc.data()) v /= count;
  return acc;
}

Tensor fog(const Tensor& x, double weight) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  // The fog field is fixed so the kind is deterministic in (x, t).
  Rng field_rng(0xF06F06F06ULL + h * 1315423911ULL + w);
  const std::vector<double> field = plasma(h, w, field_rng);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p) {
      const double f = 0.45 + 0.55 * field[p];
      out[ch * h * w + p] = (1.0 - weight) * x[ch * h * w + p] + weight * f;
    }
  return out;
}

Tensor frost(const Tensor& x, double weight, Rng& rng) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> noise(h * w);
  for (double& v : noise) v = rng.normal();
  const auto fine = blur_plane(noise, h, w, 0.7);
  const auto coarse = blur_plane(noise, h, w, 2.0);
  std::vector<double> tex(h * w);
  for (std::size_t p = 0; p < h * w; ++p) tex[p] = std::clamp(0.65 + 1.5 * (fine[p] - coarse[p]), 0.0, 1.0);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p) {
      // Slight blue tint in the ice layer for RGB inputs.
      const double tint = (c == 3 && ch == 2) ? 0.1 : 0.0;
      out[ch * h * w + p] = (1.0 - weight) * x[ch * h * w + p] + weight * std::min(1.0, tex[p] + tint);
    }
  return out;
}

Tensor snow(const Tensor& x, double density, double desaturation, Rng& rng) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> layer(h * w, 0.0);
  const int length = 3 + static_cast<int>(rng.below(3));
  const std::ptrdiff_t dir = rng.uniform() < 0.5 ? -1 : 1;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      if (rng.uniform() >= density) continue;
      const double intensity = rng.uniform(0.7, 1.0);
      for (int s = 0; s < length; ++s) {
        const auto yy = static_cast<std::ptrdiff_t>(y) + s;
        const auto xs = static_cast<std::ptrdiff_t>(xx) + dir * (s / 2);
        if (yy >= static_cast<std::ptrdiff_t>(h) || xs < 0 || xs >= static_cast<std::ptrdiff_t>(w)) break;
        double& v = layer[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xs)];
        v = std::max(v, intensity);
      }
    }
  Tensor out(x.shape());
  for (std::size_t p = 0; p < h * w; ++p) {
    double gray = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) gray += x[ch * h * w + p];
    gray /= static_cast<double>(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double v = (1.0 - desaturation) * x[ch * h * w + p] + desaturation * (0.5 * gray + 0.5);
      out[ch * h * w + p] = v + layer[p] * (1.0 - v);
    }
  }
  return out;
}

Tensor elastic(const Tensor& x, double amplitude, Rng& rng) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> dx(h * w), dy(h * w);
  for (double& v : dx) v = rng.uniform(-1.0, 1.0);
  for (double& v : dy) v = rng.uniform(-1.0, 1.0);
  dx = blur_plane(dx, h, w, 3.0);
  dy = blur_plane(dy, h, w, 3.0);
  double peak = 0.0;
  for (std::size_t p = 0; p < h * w; ++p) peak = std::max({peak, std::abs(dx[p]), std::abs(dy[p])});
  const double scale = peak > 0 ? amplitude / peak : 0.0;
  std::vector<double> src(x.data().begin(), x.data().end());
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    Plane pl{h, w, src.data() + ch * h * w};
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::size_t p = y * w + xx;
        out[ch * h * w + p] =
            bilinear(pl, static_cast<double>(y) + scale * dy[p], static_cast<double>(xx) + scale * dx[p]);
      }
  }
  return out;
}

Tensor contrast(const Tensor& x, double factor) {
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0;
    for (std::size_t p = 0; p < plane; ++p) mean += x[ch * plane + p];
    mean /= static_cast<double>(plane);
    // Written so that factor 1 reproduces x bit for bit.
    const double offset = (1.0 - factor) * mean;
    for (std::size_t p = 0; p < plane; ++p) out[ch * plane + p] = factor * x[ch * plane + p] + offset;
  }
  return out;
}

Tensor brightness(const Tensor& x, double offset) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + offset;
  return out;
}

constexpr int kLuminanceTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
};

Tensor jpeg(const Tensor& x, double quality) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const double q = std::clamp(quality, 1.0, 100.0);
  const double scale = q < 50 ? 5000.0 / q : 200.0 - 2.0 * q;
  double table[64];
  for (int i = 0; i < 64; ++i)
    table[i] = std::clamp(std::floor((kLuminanceTable[i] * scale + 50.0) / 100.0), 1.0, 255.0);
  double basis[8][8];
  for (int u = 0; u < 8; ++u)
    for (int p = 0; p < 8; ++p)
      basis[u][p] = (u == 0 ? std::sqrt(0.125) : 0.5) * std::cos((2 * p + 1) * u * std::numbers::pi / 16.0);

  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* in = x.raw() + ch * h * w;
    double* o = out.raw() + ch * h * w;
    for (std::size_t by = 0; by < h; by += 8)
      for (std::size_t bx = 0; bx < w; bx += 8) {
        double block[8][8], coef[8][8], tmp[8][8];
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            const std::size_t yy = std::min(by + i, h - 1), xx = std::min(bx + j, w - 1);
            block[i][j] = 255.0 * in[yy * w + xx] - 128.0;
          }
        for (int u = 0; u < 8; ++u)
          for (int j = 0; j < 8; ++j) {
            double s = 0;
            for (int i = 0; i < 8; ++i) s += basis[u][i] * block[i][j];
            tmp[u][j] = s;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int j = 0; j < 8; ++j) s += basis[v][j] * tmp[u][j];
            const double qv = table[u * 8 + v];
            coef[u][v] = std::round(s / qv) * qv;
          }
        for (int i = 0; i < 8; ++i)
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += basis[u][i] * coef[u][v];
            tmp[i][v] = s;
          }
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            if (by + i >= h || bx + j >= w) continue;
            double s = 0;
            for (int v = 0; v < 8; ++v) s += basis[v][j] * tmp[i][v];
            o[(by + i) * w + bx + j] = (s + 128.0) / 255.0;
          }
      }
  }
  return out;
}

Tensor pixelate(const Tensor& x, std::size_t block) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t by = 0; by < h; by += block)
      for (std::size_t bx = 0; bx < w; bx += block) {
        const std::size_t ey = std::min(by + block, h), ex = std::min(bx + block, w);
        double s = 0.0;
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t xx = bx; xx < ex; ++xx) s += x[ch * h * w + y * w + xx];
        s /= static_cast<double>((ey - by) * (ex - bx));
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t xx = bx; xx < ex; ++xx) out[ch * h * w + y * w + xx] = s;
      }
  return out;
}

Tensor glass_blur(const Tensor& x, double sigma, int rounds, Rng& rng) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = convolve(x, gaussian_kernel(sigma));
  for (int r = 0; r < rounds; ++r)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const auto ny = reflect(static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(rng.below(3)) - 1,
                                static_cast<std::ptrdiff_t>(h));
        const auto nx = reflect(static_cast<std::ptrdiff_t>(xx) + static_cast<std::ptrdiff_t>(rng.below(3)) - 1,
                                static_cast<std::ptrdiff_t>(w));
        for (std::size_t ch = 0; ch < c; ++ch)
          std::swap(out[ch * h * w + y * w + xx],
                    out[ch * h * w + static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)]);
      }
  return out;
}

}  // namespace

std::string_view corruption_name(CorruptionKind kind) { return kNames.at(kind_index(kind)); }

std::optional<CorruptionKind> parse_corruption(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return kAllCorruptions[i];
  return std::nullopt;
}

Severity::Severity(int t) : t_(t) {
  if (t < 0 || t > static_cast<int>(kMaxSeverity)) {
    throw std::invalid_argument("unknown severity " + std::to_string(t) + " (expected 0..5)");
  }
}

const SeverityParams& SeverityTable::at(CorruptionKind kind, Severity t) const {
  if (t.value() == 0) throw std::invalid_argument("severity 0 has no operator parameters");
  return levels[kind_index(kind)][static_cast<std::size_t>(t.value() - 1)];
}

int SeverityTable::direction(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kShotNoise:
    case CorruptionKind::kContrast:
    case CorruptionKind::kJpegCompression:
      return -1;
    default:
      return +1;
  }
}

const SeverityTable& SeverityTable::defaults() { return kDefaultTable; }

bool is_stochastic(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise:
    case CorruptionKind::kShotNoise:
    case CorruptionKind::kImpulseNoise:
    case CorruptionKind::kFrost:
    case CorruptionKind::kSnow:
    case CorruptionKind::kElasticTransform:
    case CorruptionKind::kGlassBlur:
      return true;
    default:
      return false;
  }
}

Tensor apply_corruption(CorruptionKind kind, Severity t, const Tensor& image, Rng& rng,
                        const SeverityTable& table) {
  if (image.rank() != 3) throw DimensionError("corruption expects C x H x W, got " + shape_string(image.shape()));
  for (double v : image.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("corruption input pixel outside [0,1]");
  }
  if (t.value() == 0) return image;
  const SeverityParams& p = table.at(kind, t);
  Tensor out;
  switch (kind) {
    case CorruptionKind::kGaussianNoise: out = gaussian_noise(image, p.primary, rng); break;
    case CorruptionKind::kShotNoise: out = shot_noise(image, p.primary, rng); break;
    case CorruptionKind::kImpulseNoise: out = impulse_noise(image, p.primary, rng); break;
    case CorruptionKind::kDefocusBlur: out = convolve(image, disk_kernel(p.primary)); break;
    case CorruptionKind::kMotionBlur: out = convolve(image, motion_kernel(static_cast<int>(p.primary))); break;
    case CorruptionKind::kZoomBlur: out = zoom_blur(image, p.primary); break;
    case CorruptionKind::kFog: out = fog(image, p.primary); break;
    case CorruptionKind::kFrost: out = frost(image, p.primary, rng); break;
    case CorruptionKind::kSnow: out = snow(image, p.primary, p.secondary, rng); break;
    case CorruptionKind::kElasticTransform: out = elastic(image, p.primary, rng); break;
    case CorruptionKind::kContrast: out = contrast(image, p.primary); break;
    case CorruptionKind::kBrightness: out = brightness(image, p.primary); break;
    case CorruptionKind::kJpegCompression: out = jpeg(image, p.primary); break;
    case CorruptionKind::kPixelate: out = pixelate(image, static_cast<std::size_t>(p.primary)); break;
    case CorruptionKind::kGlassBlur: out = glass_blur(image, p.primary, static_cast<int>(p.secondary), rng); break;
  }
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Tensor corrupt_batch(CorruptionKind kind, Severity t, const Tensor& batch, const Rng& rng,
                     const SeverityTable& table) {
  if (batch.rank() != 4) throw DimensionError("corrupt_batch expects N x C x H x W, got " + shape_string(batch.shape()));
  const Shape img_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
  Tensor out(batch.shape());
  const std::size_t per = batch.row_size();
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    Rng r = rng.derive(i);
    Tensor img(img_shape, std::vector<double>(batch.row(i).begin(), batch.row(i).end()));
    Tensor c = apply_corruption(kind, t, img, r, table);
    std::copy(c.data().begin(), c.data().end(), out.raw() + i * per);
  }
  return out;
}

double average_shift(const Tensor& x, const Tensor& x_corr) {
  if (x.shape() != x_corr.shape()) {
    throw DimensionError("average_shift shape mismatch: " + shape_string(x.shape()) + " vs " +
                         shape_string(x_corr.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - x_corr[i]);
  return s / static_cast<double>(x.size());
}

std::array<double, kMaxSeverity> shift_profile(CorruptionKind kind, const LabeledDataset& corpus,
                                               const Rng& rng, const SeverityTable& table) {
  std::array<double, kMaxSeverity> profile{};
  for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      Rng r = rng.derive(i);
      const Tensor img = corpus.image(i);
      sum += average_shift(img, apply_corruption(kind, Severity(t), img, r, table));
    }
    profile[static_cast<std::size_t>(t - 1)] = sum / static_cast<double>(corpus.size());
  }
  return profile;
}

}  // namespace crda
