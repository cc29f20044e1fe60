#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's engine; the forward recurrence, convolution and losses are
// re-derived with plain loops in long double.

#include <cmath>
#include <cstddef>
#include <variant>
#include <vector>

#include "fedleak/nn/network.h"
#include "fedleak/nn/tensor.h"
#include "fedleak/nn/spn.h"

namespace oracle {

using Vec = std::vector<long double>;

inline long double act(fedleak::nn::Activation a, long double z) {
  using fedleak::nn::Activation;
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kSigmoid: return 1.0L / (1.0L + std::exp(-z));
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0 ? z : 0.0L;
  }
  return z;
}

// out[co][oy][ox] = sum_{ci,ky,kx} w[co][ci][ky][kx] * in[ci][oy*s+ky-p][ox*s+kx-p]
inline Vec conv(const fedleak::nn::Conv2d& c, std::size_t h, std::size_t w, const Vec& in,
                const std::vector<double>& kernel, const std::vector<double>& bias) {
  const long k = static_cast<long>(c.kernel_size);
  const long s = static_cast<long>(c.stride);
  const long p = static_cast<long>(c.padding);
  const long oh = (static_cast<long>(h) + 2 * p - k) / s + 1;
  const long ow = (static_cast<long>(w) + 2 * p - k) / s + 1;
  Vec out(c.out_channels * oh * ow, 0.0L);
  for (std::size_t co = 0; co < c.out_channels; ++co) {
    for (long oy = 0; oy < oh; ++oy) {
      for (long ox = 0; ox < ow; ++ox) {
        long double acc = bias[co];
        for (std::size_t ci = 0; ci < c.in_channels; ++ci) {
          for (long ky = 0; ky < k; ++ky) {
            for (long kx = 0; kx < k; ++kx) {
              const long iy = oy * s + ky - p;
              const long ix = ox * s + kx - p;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) {
                continue;
              }
              acc += static_cast<long double>(
                         kernel[((co * c.in_channels + ci) * k + ky) * k + kx]) *
                     in[(ci * h + iy) * w + ix];
            }
          }
        }
        out[(co * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

struct Forward {
  Vec logits;
  Vec feature;  // input of the final layer
};

inline Forward forward(const fedleak::nn::NetworkSpec& net, const fedleak::nn::Params& params,
                       const std::vector<double>& x) {
  Vec cur(x.begin(), x.end());
  Forward out;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& layer = net.layers()[i];
    if (i + 1 == net.depth()) out.feature = cur;
    if (const auto* d = std::get_if<fedleak::nn::Dense>(&layer)) {
      Vec next(d->out_dim);
      const auto& w = params.layers[i].weight.data();
      const auto& b = params.layers[i].bias.data();
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        long double acc = b[r];
        for (std::size_t c = 0; c < d->in_dim; ++c) acc += w[r * d->in_dim + c] * cur[c];
        next[r] = act(d->activation, acc);
      }
      cur = std::move(next);
    } else if (const auto* c = std::get_if<fedleak::nn::Conv2d>(&layer)) {
      const auto& shape = net.layer_input_shape(i);
      Vec z = conv(*c, shape[1], shape[2], cur, params.layers[i].weight.data(),
                   params.layers[i].bias.data());
      for (auto& v : z) v = act(c->activation, v);
      cur = std::move(z);
    }
  }
  out.logits = cur;
  return out;
}

inline long double ce(const Vec& u, std::size_t y) {
  long double m = u[0];
  for (auto v : u) m = std::max(m, v);
  long double s = 0;
  for (auto v : u) s += std::exp(v - m);
  return m + std::log(s) - u[y];
}

inline long double polarization(const Vec& v, const std::vector<int>& t, long double m) {
  long double s = 0;
  for (std::size_t k = 0; k < v.size(); ++k) s += std::max(m - v[k] * t[k], 0.0L);
  return s;
}

// alpha1 * CE + alpha2 * polarization of one example, or plain CE without spn.
inline long double loss(const fedleak::nn::NetworkSpec& net, const fedleak::nn::Params& params,
                        const std::vector<double>& x, std::size_t y,
                        const fedleak::nn::SpnConfig* spn) {
  const Forward f = forward(net, params, x);
  if (spn == nullptr) return ce(f.logits, y);
  Vec v(spn->bits);
  const std::size_t d = f.feature.size();
  for (std::size_t r = 0; r < spn->bits; ++r) {
    long double acc = spn->head.bias[r];
    for (std::size_t c = 0; c < d; ++c) acc += spn->head.weight[r * d + c] * f.feature[c];
    v[r] = acc;
  }
  return spn->alpha1 * ce(f.logits, y) + spn->alpha2 * polarization(v, spn->codes[y], spn->margin);
}

// Central differences of the oracle loss for every parameter.
inline fedleak::nn::GradientVector fd_gradient(const fedleak::nn::NetworkSpec& net,
                                               const fedleak::nn::Params& params,
                                               const fedleak::nn::Tensor& x, std::size_t y,
                                               const fedleak::nn::SpnConfig* spn,
                                               double h = 1e-6) {
  fedleak::nn::GradientVector g = fedleak::nn::zero_gradient(params);
  fedleak::nn::Params p = params;
  auto probe = [&](double& slot, double& out) {
    const double keep = slot;
    slot = keep + h;
    const long double up = loss(net, p, x.data(), y, spn);
    slot = keep - h;
    const long double down = loss(net, p, x.data(), y, spn);
    slot = keep;
    out = static_cast<double>((up - down) / (2.0L * h));
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t i = 0; i < p.layers[l].weight.size(); ++i) {
      probe(p.layers[l].weight[i], g.layers[l].weight[i]);
    }
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) {
      probe(p.layers[l].bias[i], g.layers[l].bias[i]);
    }
  }
  return g;
}

}  // namespace oracle
