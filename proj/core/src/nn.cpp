#include "crda/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace crda {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

Shape layer_output_shape(const Layer& layer, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const Conv3x3& l) -> Shape {
            if (in.size() != 3 || in[0] != l.in_channels) {
              throw DimensionError("conv3x3 expects " + std::to_string(l.in_channels) + " x H x W, got " +
                                   shape_string(in));
            }
            return {l.out_channels, in[1], in[2]};
          },
          [&](const AffineFull& l) -> Shape {
            if (in.size() != 1 || in[0] != l.in_features) {
              throw DimensionError("affine expects [" + std::to_string(l.in_features) + "], got " +
                                   shape_string(in));
            }
            return {l.out_features};
          },
          [&](const ReLU&) -> Shape { return in; },
          [&](const MaxPool2&) -> Shape {
            if (in.size() != 3 || in[1] % 2 || in[2] % 2) {
              throw DimensionError("maxpool2 needs C x even H x even W, got " + shape_string(in));
            }
            return {in[0], in[1] / 2, in[2] / 2};
          },
          [&](const GlobalAvgPool&) -> Shape {
            if (in.size() != 3) throw DimensionError("global average pool needs C x H x W, got " + shape_string(in));
            return {in[0]};
          },
          [&](const L2Normalize&) -> Shape {
            if (in.size() != 1) throw DimensionError("l2 normalize needs a vector, got " + shape_string(in));
            return in;
          },
          [&](const Gain&) -> Shape { return in; },
      },
      layer);
}

Shape batch_shape(std::size_t n, const Shape& per) {
  Shape s{n};
  s.insert(s.end(), per.begin(), per.end());
  return s;
}

// ---- forward kernels ------------------------------------------------------

// Convolutions run over a zero-padded copy of each plane, laid out with row
// stride w + 2. Output position (y, x) lives at y * (w + 2) + x in that
// layout, so every kernel tap is one contiguous multiply-add over the plane.
// The two trailing columns of each padded-layout row are scratch.

void pad_plane(const double* src, std::size_t h, std::size_t w, double* dst) {
  const std::size_t pw = w + 2;
  std::fill(dst, dst + (h + 2) * pw, 0.0);
  for (std::size_t y = 0; y < h; ++y) std::copy(src + y * w, src + (y + 1) * w, dst + (y + 1) * pw + 1);
}

void conv_forward(const Conv3x3& l, const Tensor& x, Tensor& y) {
  const std::size_t n = x.dim(0), cin = l.in_channels, cout = l.out_channels, h = x.dim(2), w = x.dim(3);
  const std::size_t plane = h * w, pw = w + 2, span = h * pw - 2;
  const double* W = l.weight.raw();
  std::vector<double> padded(cin * (h + 2) * pw), acc(h * pw);
  for (std::size_t b = 0; b < n; ++b) {
    const double* in = x.raw() + b * cin * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) pad_plane(in + ci * plane, h, w, padded.data() + ci * (h + 2) * pw);
    double* out = y.raw() + b * cout * plane;
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill(acc.begin(), acc.end(), l.bias[co]);
      double* a = acc.data();
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* ip = padded.data() + ci * (h + 2) * pw;
        const double* wk = W + (co * cin + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double wv = wk[ky * 3 + kx];
            const double* src = ip + ky * pw + kx;
            for (std::size_t p = 0; p < span; ++p) a[p] += wv * src[p];
          }
        }
      }
      double* o = out + co * plane;
      for (std::size_t yy = 0; yy < h; ++yy) std::copy(a + yy * pw, a + yy * pw + w, o + yy * w);
    }
  }
}

void conv_backward(const Conv3x3& l, const Tensor& x, const Tensor& g, Tensor& dW, Tensor& db, Tensor* dx) {
  const std::size_t n = x.dim(0), cin = l.in_channels, cout = l.out_channels, h = x.dim(2), w = x.dim(3);
  const std::size_t plane = h * w, pw = w + 2, padded_plane = (h + 2) * pw, span = h * pw;
  constexpr std::size_t kLanes = 8;
  const std::size_t span8 = (span + kLanes - 1) / kLanes * kLanes;
  const double* W = l.weight.raw();
  // Inputs get kLanes of extra zero tail so the lane-blocked reduction can
  // read past the last row without a remainder loop.
  std::vector<double> padded(cin * padded_plane + 2 * kLanes, 0.0), dpad(dx ? cin * padded_plane + 2 * kLanes : 0);
  std::vector<double> gl(span8, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    const double* in = x.raw() + b * cin * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) pad_plane(in + ci * plane, h, w, padded.data() + ci * padded_plane);
    if (dx) std::fill(dpad.begin(), dpad.end(), 0.0);
    const double* gout = g.raw() + b * cout * plane;
    for (std::size_t co = 0; co < cout; ++co) {
      const double* go = gout + co * plane;
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += go[p];
      db[co] += s;
      // Output gradient in padded-row layout; scratch columns stay zero.
      for (std::size_t yy = 0; yy < h; ++yy) std::copy(go + yy * w, go + (yy + 1) * w, gl.begin() + yy * pw);
      const double* gp = gl.data();
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* ip = padded.data() + ci * padded_plane;
        double* dp = dx ? dpad.data() + ci * padded_plane : nullptr;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::size_t widx = (co * cin + ci) * 9 + ky * 3 + kx;
            const double* src = ip + ky * pw + kx;
            double lanes[kLanes] = {};
            for (std::size_t p = 0; p < span8; p += kLanes)
              for (std::size_t k = 0; k < kLanes; ++k) lanes[k] += gp[p + k] * src[p + k];
            double acc = 0.0;
            for (std::size_t k = 0; k < kLanes; ++k) acc += lanes[k];
            dW[widx] += acc;
            if (dp) {
              const double wv = W[widx];
              double* dst = dp + ky * pw + kx;
              for (std::size_t p = 0; p < span; ++p) dst[p] += wv * gp[p];
            }
          }
        }
      }
    }
    if (dx) {
      double* din = dx->raw() + b * cin * plane;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t yy = 0; yy < h; ++yy) {
          const double* src = dpad.data() + ci * padded_plane + (yy + 1) * pw + 1;
          double* dst = din + ci * plane + yy * w;
          for (std::size_t xx = 0; xx < w; ++xx) dst[xx] += src[xx];
        }
    }
  }
}

void affine_forward(const AffineFull& l, const Tensor& x, Tensor& y) {
  const std::size_t n = x.dim(0), in = l.in_features, out = l.out_features;
  for (std::size_t b = 0; b < n; ++b) {
    const double* xr = x.raw() + b * in;
    double* yr = y.raw() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = l.weight.raw() + o * in;
      double s = l.bias[o];
      for (std::size_t i = 0; i < in; ++i) s += wr[i] * xr[i];
      yr[o] = s;
    }
  }
}

void affine_backward(const AffineFull& l, const Tensor& x, const Tensor& g, Tensor& dW, Tensor& db, Tensor* dx) {
  const std::size_t n = x.dim(0), in = l.in_features, out = l.out_features;
  for (std::size_t b = 0; b < n; ++b) {
    const double* xr = x.raw() + b * in;
    const double* gr = g.raw() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double gv = gr[o];
      db[o] += gv;
      double* dwr = dW.raw() + o * in;
      for (std::size_t i = 0; i < in; ++i) dwr[i] += gv * xr[i];
    }
    if (dx) {
      double* dxr = dx->raw() + b * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double gv = gr[o];
        const double* wr = l.weight.raw() + o * in;
        for (std::size_t i = 0; i < in; ++i) dxr[i] += gv * wr[i];
      }
    }
  }
}

void maxpool_forward(const Tensor& x, Tensor& y) {
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3), oh = h / 2, ow = w / 2;
  for (std::size_t p = 0; p < nc; ++p) {
    const double* ip = x.raw() + p * h * w;
    double* op = y.raw() + p * oh * ow;
    for (std::size_t yy = 0; yy < oh; ++yy)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* a = ip + 2 * yy * w + 2 * xx;
        op[yy * ow + xx] = std::max(std::max(a[0], a[1]), std::max(a[w], a[w + 1]));
      }
  }
}

void maxpool_backward(const Tensor& x, const Tensor& g, Tensor& dx) {
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3), oh = h / 2, ow = w / 2;
  for (std::size_t p = 0; p < nc; ++p) {
    const double* ip = x.raw() + p * h * w;
    const double* gp = g.raw() + p * oh * ow;
    double* dp = dx.raw() + p * h * w;
    for (std::size_t yy = 0; yy < oh; ++yy)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t base = 2 * yy * w + 2 * xx;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (ip[cand[k]] > ip[best]) best = cand[k];
        dp[best] += gp[yy * ow + xx];
      }
  }
}

void l2_forward(const Tensor& x, Tensor& y) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t b = 0; b < n; ++b) {
    const double* xr = x.raw() + b * d;
    double* yr = y.raw() + b * d;
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += xr[i] * xr[i];
    const double norm = std::sqrt(s);
    if (norm < 1e-12) {
      std::fill(yr, yr + d, 1.0 / std::sqrt(static_cast<double>(d)));
    } else {
      for (std::size_t i = 0; i < d; ++i) yr[i] = xr[i] / norm;
    }
  }
}

void l2_backward(const Tensor& x, const Tensor& y, const Tensor& g, Tensor& dx) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t b = 0; b < n; ++b) {
    const double* xr = x.raw() + b * d;
    const double* yr = y.raw() + b * d;
    const double* gr = g.raw() + b * d;
    double* dr = dx.raw() + b * d;
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += xr[i] * xr[i];
    const double norm = std::sqrt(s);
    if (norm < 1e-12) continue;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += yr[i] * gr[i];
    for (std::size_t i = 0; i < d; ++i) dr[i] = (gr[i] - yr[i] * dot) / norm;
  }
}

std::size_t param_count(const Layer& layer) {
  return std::holds_alternative<Conv3x3>(layer) || std::holds_alternative<AffineFull>(layer) ? 2 : 0;
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kTeacher: return "teacher";
    case Role::kStudent: return "student";
    case Role::kReference: return "reference";
    case Role::kDiscriminator: return "discriminator";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view name) {
  for (Role r : {Role::kTeacher, Role::kStudent, Role::kReference, Role::kDiscriminator})
    if (role_name(r) == name) return r;
  return std::nullopt;
}

Conv3x3 make_conv3x3(std::size_t in, std::size_t out, Rng& init) {
  const double std = std::sqrt(2.0 / static_cast<double>(in * 9));
  return Conv3x3{in, out, gaussian(init, {out, in, 3, 3}, 0.0, std), Tensor({out}, 0.0)};
}

AffineFull make_affine(std::size_t in, std::size_t out, Rng& init) {
  const double std = std::sqrt(2.0 / static_cast<double>(in));
  return AffineFull{in, out, gaussian(init, {out, in}, 0.0, std), Tensor({out}, 0.0)};
}

Network::Network(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  shapes_.push_back(input_shape_);
  for (const Layer& l : layers_) shapes_.push_back(layer_output_shape(l, shapes_.back()));
}

Tensor Network::forward(const Tensor& x, std::vector<Tensor>* activations) const {
  if (x.rank() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1)) {
    throw DimensionError("network input mismatch: expected N x " + shape_string(input_shape_) + ", got " +
                         shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  if (activations) {
    activations->clear();
    activations->reserve(layers_.size() + 1);
    activations->push_back(x);
  }
  Tensor cur = x;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Tensor out(batch_shape(n, shapes_[li + 1]));
    std::visit(overloaded{
                   [&](const Conv3x3& l) { conv_forward(l, cur, out); },
                   [&](const AffineFull& l) {
                     affine_forward(l, cur.reshaped({n, l.in_features}), out);
                   },
                   [&](const ReLU&) {
                     for (std::size_t i = 0; i < cur.size(); ++i) out[i] = cur[i] > 0.0 ? cur[i] : 0.0;
                   },
                   [&](const MaxPool2&) { maxpool_forward(cur, out); },
                   [&](const GlobalAvgPool&) {
                     const std::size_t c = cur.dim(1), plane = cur.dim(2) * cur.dim(3);
                     for (std::size_t b = 0; b < n; ++b)
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         const double* p = cur.raw() + (b * c + ch) * plane;
                         double s = 0.0;
                         for (std::size_t i = 0; i < plane; ++i) s += p[i];
                         out[b * c + ch] = s / static_cast<double>(plane);
                       }
                   },
                   [&](const L2Normalize&) { l2_forward(cur, out); },
                   [&](const Gain& l) {
                     for (std::size_t i = 0; i < cur.size(); ++i) out[i] = l.factor * cur[i];
                   },
               },
               layers_[li]);
    cur = std::move(out);
    if (activations) activations->push_back(cur);
  }
  return cur;
}

Tensor Network::backward(const std::vector<Tensor>& acts, Tensor grad, std::span<Tensor> param_grads,
                         bool want_input_grad) const {
  if (acts.size() != layers_.size() + 1) throw std::logic_error("backward without a matching forward pass");
  if (grad.shape() != acts.back().shape()) {
    throw DimensionError("upstream gradient " + shape_string(grad.shape()) + " does not match output " +
                         shape_string(acts.back().shape()));
  }
  std::size_t pidx = 0;
  for (const Layer& l : layers_) pidx += param_count(l);
  if (param_grads.size() != pidx) throw DimensionError("parameter gradient count mismatch");

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Tensor& in = acts[li];
    const Tensor& out = acts[li + 1];
    const bool need_dx = li > 0 || want_input_grad;
    pidx -= param_count(layers_[li]);
    Tensor dx;
    if (need_dx) dx = Tensor(in.shape(), 0.0);
    std::visit(overloaded{
                   [&](const Conv3x3& l) {
                     conv_backward(l, in, grad, param_grads[pidx], param_grads[pidx + 1], need_dx ? &dx : nullptr);
                   },
                   [&](const AffineFull& l) {
                     const std::size_t n = in.dim(0);
                     Tensor flat_dx;
                     if (need_dx) flat_dx = Tensor({n, l.in_features}, 0.0);
                     affine_backward(l, in.reshaped({n, l.in_features}), grad, param_grads[pidx],
                                     param_grads[pidx + 1], need_dx ? &flat_dx : nullptr);
                     if (need_dx) dx = flat_dx.reshaped(in.shape());
                   },
                   [&](const ReLU&) {
                     if (!need_dx) return;
                     // Subgradient at exactly zero is taken as zero.
                     for (std::size_t i = 0; i < in.size(); ++i) dx[i] = in[i] > 0.0 ? grad[i] : 0.0;
                   },
                   [&](const MaxPool2&) {
                     if (need_dx) maxpool_backward(in, grad, dx);
                   },
                   [&](const GlobalAvgPool&) {
                     if (!need_dx) return;
                     const std::size_t nc = in.dim(0) * in.dim(1), plane = in.dim(2) * in.dim(3);
                     for (std::size_t p = 0; p < nc; ++p) {
                       const double v = grad[p] / static_cast<double>(plane);
                       std::fill(dx.raw() + p * plane, dx.raw() + (p + 1) * plane, v);
                     }
                   },
                   [&](const L2Normalize&) {
                     if (need_dx) l2_backward(in, out, grad, dx);
                   },
                   [&](const Gain& l) {
                     if (!need_dx) return;
                     for (std::size_t i = 0; i < grad.size(); ++i) dx[i] = l.factor * grad[i];
                   },
               },
               layers_[li]);
    if (!need_dx) return Tensor();
    grad = std::move(dx);
  }
  return grad;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers_) {
    if (auto* c = std::get_if<Conv3x3>(&l)) {
      out.push_back(&c->weight);
      out.push_back(&c->bias);
    } else if (auto* a = std::get_if<AffineFull>(&l)) {
      out.push_back(&a->weight);
      out.push_back(&a->bias);
    }
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<Network*>(this)->parameters()) out.push_back(t);
  return out;
}

std::string Network::signature() const {
  std::ostringstream os;
  os << "in=" << shape_string(input_shape_);
  for (const Layer& l : layers_) {
    os << '|';
    std::visit(overloaded{
                   [&](const Conv3x3& c) { os << "conv3x3:" << c.in_channels << '>' << c.out_channels; },
                   [&](const AffineFull& a) { os << "affine:" << a.in_features << '>' << a.out_features; },
                   [&](const ReLU&) { os << "relu"; },
                   [&](const MaxPool2&) { os << "maxpool2"; },
                   [&](const GlobalAvgPool&) { os << "gap"; },
                   [&](const L2Normalize&) { os << "l2norm"; },
                   [&](const Gain& g) { os << "gain:" << g.factor; },
               },
               l);
  }
  return os.str();
}

const Tensor& ForwardPass::logits() const {
  if (classifier_acts.empty()) throw std::logic_error("forward pass ran without the classifier head");
  return classifier_acts.back();
}

void Gradients::accumulate(const Gradients& other) {
  if (other.params.size() != params.size()) throw DimensionError("gradient set size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != other.params[i].shape()) {
      throw DimensionError("gradient shape mismatch: " + shape_string(params[i].shape()) + " vs " +
                           shape_string(other.params[i].shape()));
    }
    for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] += other.params[i][j];
  }
}

void Gradients::scale(double factor) {
  for (Tensor& t : params)
    for (double& v : t.data()) v *= factor;
  if (input)
    for (double& v : input->data()) v *= factor;
}

bool Gradients::all_finite() const {
  for (const Tensor& t : params)
    if (!t.all_finite()) return false;
  return !input || input->all_finite();
}

Model::Model(Network features, Network classifier, Role role)
    : features_(std::move(features)), classifier_(std::move(classifier)), role_(role) {
  if (classifier_.input_shape() != features_.output_shape()) {
    throw DimensionError("classifier input " + shape_string(classifier_.input_shape()) +
                         " does not match feature output " + shape_string(features_.output_shape()));
  }
}

Model Model::reference_architecture(std::size_t classes, Rng& init, Shape input, std::size_t feature_dim) {
  if (input.size() != 3) throw DimensionError("reference architecture expects C x H x W input");
  std::vector<Layer> f;
  f.emplace_back(make_conv3x3(input[0], 8, init));
  f.emplace_back(ReLU{});
  f.emplace_back(MaxPool2{});
  f.emplace_back(make_conv3x3(8, 16, init));
  f.emplace_back(ReLU{});
  f.emplace_back(MaxPool2{});
  f.emplace_back(GlobalAvgPool{});
  f.emplace_back(make_affine(16, feature_dim, init));
  f.emplace_back(L2Normalize{});
  std::vector<Layer> c;
  c.emplace_back(make_affine(feature_dim, classes, init));
  return Model(Network(std::move(input), std::move(f)), Network({feature_dim}, std::move(c)), Role::kReference);
}

Model Model::discriminator(std::size_t feature_dim, std::size_t hidden, Rng& init) {
  std::vector<Layer> f;
  f.emplace_back(make_affine(feature_dim, hidden, init));
  f.emplace_back(ReLU{});
  std::vector<Layer> c;
  c.emplace_back(make_affine(hidden, 1, init));
  return Model(Network({feature_dim}, std::move(f)), Network({hidden}, std::move(c)), Role::kDiscriminator);
}

namespace {

// Inference over a large batch in cache-sized chunks. Samples are
// independent, so the result is identical to a single pass.
template <typename Fn>
Tensor chunked(const Tensor& x, Fn&& fn) {
  constexpr std::size_t kChunk = 64;
  if (x.rank() == 0 || x.dim(0) <= kChunk) return fn(x);
  Tensor out;
  for (std::size_t b = 0; b < x.dim(0); b += kChunk) {
    Tensor part = fn(x.slice_rows(b, std::min(x.dim(0), b + kChunk)));
    if (out.empty()) {
      Shape shape = part.shape();
      shape[0] = x.dim(0);
      out = Tensor(std::move(shape));
    }
    std::copy(part.data().begin(), part.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * out.row_size()));
  }
  return out;
}

}  // namespace

Tensor Model::forward_features(const Tensor& x) const {
  return chunked(x, [&](const Tensor& part) { return features_.forward(part); });
}

Tensor Model::forward_logits(const Tensor& x) const {
  return chunked(x, [&](const Tensor& part) { return classifier_.forward(features_.forward(part)); });
}

ForwardPass Model::forward(const Tensor& x, bool with_logits) const {
  ForwardPass pass;
  pass.arch_hash = architecture_hash();
  features_.forward(x, &pass.feature_acts);
  if (with_logits) classifier_.forward(pass.feature_acts.back(), &pass.classifier_acts);
  return pass;
}

Gradients Model::zero_gradients() const {
  Gradients g;
  for (const Tensor* p : parameters()) g.params.emplace_back(p->shape(), 0.0);
  return g;
}

Gradients Model::backward(const ForwardPass& pass, const Tensor* grad_features, const Tensor* grad_logits,
                          bool want_input_grad) const {
  if (!pass.valid()) throw std::logic_error("backward called without a forward pass");
  if (pass.arch_hash != architecture_hash()) throw std::logic_error("forward pass belongs to a different architecture");
  Gradients g = zero_gradients();
  const std::size_t nf = features_.parameters().size();
  std::span<Tensor> fgrads(g.params.data(), nf);
  std::span<Tensor> cgrads(g.params.data() + nf, g.params.size() - nf);

  Tensor dfeat(pass.features().shape(), 0.0);
  if (grad_logits) {
    if (pass.classifier_acts.empty()) throw std::logic_error("logit gradient given but forward skipped the classifier");
    dfeat = classifier_.backward(pass.classifier_acts, *grad_logits, cgrads, true);
  }
  if (grad_features) {
    if (grad_features->shape() != dfeat.shape()) {
      throw DimensionError("feature gradient " + shape_string(grad_features->shape()) + " does not match " +
                           shape_string(dfeat.shape()));
    }
    for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] += (*grad_features)[i];
  }
  Tensor dx = features_.backward(pass.feature_acts, std::move(dfeat), fgrads, want_input_grad);
  if (want_input_grad) g.input = std::move(dx);
  return g;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out = features_.parameters();
  for (Tensor* t : classifier_.parameters()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> Model::parameters() const {
  std::vector<const Tensor*> out = features_.parameters();
  for (const Tensor* t : classifier_.parameters()) out.push_back(t);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

std::uint64_t Model::architecture_hash() const {
  const std::string sig = features_.signature() + "||" + classifier_.signature();
  return fnv1a(sig.data(), sig.size());
}

std::uint64_t Model::parameter_hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const Tensor* t : parameters()) h = fnv1a(t->raw(), t->size() * sizeof(double), h);
  return h;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

std::vector<std::size_t> predict(const Model& model, const Tensor& batch) {
  const Tensor logits = model.forward_logits(batch);
  std::vector<std::size_t> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax(logits.row(i));
  return out;
}

Sgd::Sgd(double lr, double momentum, double weight_decay) : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd: learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight decay must be non-negative");
}

void Sgd::step(Model& model, const Gradients& grads) {
  std::vector<Tensor*> params = model.parameters();
  if (grads.params.size() != params.size()) throw DimensionError("sgd: gradient count does not match model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.params[i].shape() != params[i]->shape()) {
      throw DimensionError("sgd: gradient " + shape_string(grads.params[i].shape()) + " vs parameter " +
                           shape_string(params[i]->shape()));
    }
  }
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (Tensor* p : params) velocity_.emplace_back(p->shape(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* theta = params[i]->raw();
    double* v = velocity_[i].raw();
    const double* g = grads.params[i].raw();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      const double step = g[j] + weight_decay_ * theta[j];
      v[j] = momentum_ * v[j] + step;
      theta[j] -= lr_ * v[j];
    }
  }
}

}  // namespace crda
