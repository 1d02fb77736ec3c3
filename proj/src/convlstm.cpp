#include "tacl/convlstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tacl/errors.hpp"
#include "tacl/persistence.hpp"
#include "tacl/rng.hpp"

namespace tacl {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// out[oc](y,x) += sum_{ic,dy,dx} W[oc][ic][dy][dx] * in[ic](y+dy-r, x+dx-r)
// with zero padding; kernel dims {c_out, c_in, k, k}.
void conv_same(const double* in, int c_in, int h, int w, const Tensor& kern,
               int c_out, double* out) {
  const int k = kern.dims[2];
  const int r = k / 2;
  for (int oc = 0; oc < c_out; ++oc) {
    double* dst = out + static_cast<std::size_t>(oc) * h * w;
    for (int ic = 0; ic < c_in; ++ic) {
      const double* src = in + static_cast<std::size_t>(ic) * h * w;
      const double* wk =
          kern.data.data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < k; ++dy) {
            int yy = y + dy - r;
            if (yy < 0 || yy >= h) continue;
            for (int dx = 0; dx < k; ++dx) {
              int xx = x + dx - r;
              if (xx < 0 || xx >= w) continue;
              acc += wk[dy * k + dx] * src[yy * w + xx];
            }
          }
          dst[y * w + x] += acc;
        }
      }
    }
  }
}

// dW[oc][ic][dy][dx] += sum_{y,x} dout[oc](y,x) * in[ic](y+dy-r, x+dx-r)
void conv_weight_grad(const double* in, int c_in, int h, int w,
                      const double* dout, int c_out, int k, Tensor& dkern) {
  const int r = k / 2;
  for (int oc = 0; oc < c_out; ++oc) {
    const double* dd = dout + static_cast<std::size_t>(oc) * h * w;
    for (int ic = 0; ic < c_in; ++ic) {
      const double* src = in + static_cast<std::size_t>(ic) * h * w;
      double* dw =
          dkern.data.data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          double acc = 0.0;
          for (int y = 0; y < h; ++y) {
            int yy = y + dy - r;
            if (yy < 0 || yy >= h) continue;
            for (int x = 0; x < w; ++x) {
              int xx = x + dx - r;
              if (xx < 0 || xx >= w) continue;
              acc += dd[y * w + x] * src[yy * w + xx];
            }
          }
          dw[dy * k + dx] += acc;
        }
      }
    }
  }
}

// din[ic](y+dy-r, x+dx-r) += W[oc][ic][dy][dx] * dout[oc](y,x)
void conv_input_grad(const Tensor& kern, int c_in, int c_out, int h, int w,
                     const double* dout, double* din) {
  const int k = kern.dims[2];
  const int r = k / 2;
  for (int oc = 0; oc < c_out; ++oc) {
    const double* dd = dout + static_cast<std::size_t>(oc) * h * w;
    for (int ic = 0; ic < c_in; ++ic) {
      double* dst = din + static_cast<std::size_t>(ic) * h * w;
      const double* wk =
          kern.data.data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double d = dd[y * w + x];
          if (d == 0.0) continue;
          for (int dy = 0; dy < k; ++dy) {
            int yy = y + dy - r;
            if (yy < 0 || yy >= h) continue;
            for (int dx = 0; dx < k; ++dx) {
              int xx = x + dx - r;
              if (xx < 0 || xx >= w) continue;
              dst[yy * w + xx] += wk[dy * k + dx] * d;
            }
          }
        }
      }
    }
  }
}

struct StepCache {
  std::vector<double> x;                          // input slice, H*W
  std::array<std::vector<double>, kGateCount> gate;  // post-activation
  std::vector<double> c;
  std::vector<double> tanh_c;
  std::vector<double> h;
  std::vector<double> p;  // sigmoid(head(h)), H*W
};

std::vector<StepCache> forward_cached(const ConvLSTMParams& params,
                                      const SliceStack& stack) {
  if (!params.initialized()) {
    throw ShapeError("forward: parameters are uninitialized");
  }
  const int hc = params.hidden_channels;
  const int h = stack.height(), w = stack.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t l = stack.slice_count();

  std::vector<StepCache> steps(l);
  std::vector<double> h_prev(hc * hw, 0.0);
  std::vector<double> c_prev(hw * hc, 0.0);

  for (std::size_t t = 0; t < l; ++t) {
    StepCache& sc = steps[t];
    const auto vals = stack.slice(t).values();
    sc.x.assign(vals.begin(), vals.end());

    for (int g = 0; g < kGateCount; ++g) {
      std::vector<double> pre(hc * hw);
      for (int oc = 0; oc < hc; ++oc) {
        std::fill_n(pre.begin() + static_cast<std::size_t>(oc) * hw, hw,
                    params.bias[g][oc]);
      }
      conv_same(sc.x.data(), 1, h, w, params.w_x[g], hc, pre.data());
      conv_same(h_prev.data(), hc, h, w, params.w_h[g], hc, pre.data());
      sc.gate[g].resize(hc * hw);
      if (g == 3) {
        for (std::size_t i = 0; i < pre.size(); ++i)
          sc.gate[g][i] = std::tanh(pre[i]);
      } else {
        for (std::size_t i = 0; i < pre.size(); ++i)
          sc.gate[g][i] = sigmoid(pre[i]);
      }
    }

    sc.c.resize(hc * hw);
    sc.tanh_c.resize(hc * hw);
    sc.h.resize(hc * hw);
    for (std::size_t i = 0; i < sc.c.size(); ++i) {
      sc.c[i] = sc.gate[1][i] * c_prev[i] + sc.gate[0][i] * sc.gate[3][i];
      sc.tanh_c[i] = std::tanh(sc.c[i]);
      sc.h[i] = sc.gate[2][i] * sc.tanh_c[i];
    }

    sc.p.resize(hw);
    for (std::size_t px = 0; px < hw; ++px) {
      double logit = params.head_b;
      for (int ch = 0; ch < hc; ++ch) logit += params.head_w[ch] * sc.h[ch * hw + px];
      sc.p[px] = sigmoid(logit);
    }

    h_prev = sc.h;
    c_prev = sc.c;
  }
  return steps;
}

ConvLSTMParams zero_like(const ConvLSTMParams& params) {
  ConvLSTMParams g;
  g.hidden_channels = params.hidden_channels;
  g.kernel = params.kernel;
  for (int i = 0; i < kGateCount; ++i) {
    g.w_x[i] = Tensor(params.w_x[i].dims);
    g.w_h[i] = Tensor(params.w_h[i].dims);
    g.bias[i] = Tensor(params.bias[i].dims);
  }
  g.head_w = Tensor(params.head_w.dims);
  g.head_b = 0.0;
  g.attention_weight = 0.0;
  return g;
}

}  // namespace

Tensor::Tensor(std::vector<int> d) : dims(std::move(d)) {
  std::size_t n = 1;
  for (int x : dims) n *= static_cast<std::size_t>(x);
  data.assign(n, 0.0);
}

ConvLSTMParams ConvLSTMParams::init(int hidden_channels, int kernel,
                                    std::uint64_t seed) {
  if (hidden_channels < 1) throw ParameterError("hidden_channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) {
    throw ParameterError("kernel size must be odd and positive");
  }
  ConvLSTMParams p;
  p.hidden_channels = hidden_channels;
  p.kernel = kernel;
  Rng rng(seed);
  auto fill_uniform = [&](Tensor& t, double bound) {
    for (double& v : t.data) v = rng.uniform(-bound, bound);
  };
  const int k2 = kernel * kernel;
  for (int g = 0; g < kGateCount; ++g) {
    p.w_x[g] = Tensor({hidden_channels, 1, kernel, kernel});
    fill_uniform(p.w_x[g], std::sqrt(6.0 / (k2 + hidden_channels * k2)));
  }
  for (int g = 0; g < kGateCount; ++g) {
    p.w_h[g] = Tensor({hidden_channels, hidden_channels, kernel, kernel});
    fill_uniform(p.w_h[g], std::sqrt(6.0 / (2.0 * hidden_channels * k2)));
  }
  for (int g = 0; g < kGateCount; ++g) {
    p.bias[g] = Tensor({hidden_channels});
    if (g == 1) std::fill(p.bias[g].data.begin(), p.bias[g].data.end(), 1.0);
  }
  p.head_w = Tensor({hidden_channels});
  fill_uniform(p.head_w, std::sqrt(6.0 / (hidden_channels + 1.0)));
  p.head_b = 0.0;
  p.attention_weight = 0.0;
  return p;
}

std::size_t ConvLSTMParams::parameter_count() const {
  std::size_t n = 0;
  for (int g = 0; g < kGateCount; ++g) {
    n += w_x[g].size() + w_h[g].size() + bias[g].size();
  }
  return n + head_w.size() + 2;  // head_b, attention_weight
}

std::vector<double> ConvLSTMParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (int g = 0; g < kGateCount; ++g)
    flat.insert(flat.end(), w_x[g].data.begin(), w_x[g].data.end());
  for (int g = 0; g < kGateCount; ++g)
    flat.insert(flat.end(), w_h[g].data.begin(), w_h[g].data.end());
  for (int g = 0; g < kGateCount; ++g)
    flat.insert(flat.end(), bias[g].data.begin(), bias[g].data.end());
  flat.insert(flat.end(), head_w.data.begin(), head_w.data.end());
  flat.push_back(head_b);
  flat.push_back(attention_weight);
  return flat;
}

void ConvLSTMParams::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("unflatten: flat vector length mismatch");
  }
  std::size_t at = 0;
  auto take = [&](Tensor& t) {
    std::copy_n(flat.begin() + at, t.size(), t.data.begin());
    at += t.size();
  };
  for (int g = 0; g < kGateCount; ++g) take(w_x[g]);
  for (int g = 0; g < kGateCount; ++g) take(w_h[g]);
  for (int g = 0; g < kGateCount; ++g) take(bias[g]);
  take(head_w);
  head_b = flat[at++];
  attention_weight = flat[at++];
}

SliceStack forward(const ConvLSTMParams& params, const SliceStack& stack) {
  std::vector<StepCache> steps = forward_cached(params, stack);
  std::vector<ScalarField2D> out;
  out.reserve(steps.size());
  for (const StepCache& sc : steps) {
    out.emplace_back(stack.width(), stack.height(), sc.p);
  }
  return SliceStack(std::move(out));
}

double bce_loss(const SliceStack& preds, const std::vector<BinaryMask2D>& gts) {
  if (preds.slice_count() != gts.size()) {
    throw ShapeError("bce_loss: slice counts differ");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < gts.size(); ++t) {
    const ScalarField2D& p = preds.slice(t);
    const BinaryMask2D& y = gts[t];
    if (p.width() != y.width() || p.height() != y.height()) {
      throw ShapeError("bce_loss: prediction/ground-truth shapes differ");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double v = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
      total += y[i] ? -std::log(v) : -std::log(1.0 - v);
    }
    count += p.size();
  }
  return total / static_cast<double>(count);
}

namespace {

BackwardResult backward_impl(const ConvLSTMParams& params,
                             const SliceStack& stack,
                             const std::vector<BinaryMask2D>& gts,
                             const StaContext* sta) {
  const std::size_t l = stack.slice_count();
  if (gts.size() != l) throw ShapeError("backward: slice counts differ");
  const int hc = params.hidden_channels;
  const int h = stack.height(), w = stack.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t center = stack.center_index();
  const double inv_m = 1.0 / (static_cast<double>(l) * hw);

  std::vector<StepCache> steps = forward_cached(params, stack);

  BackwardResult result;
  result.grads = zero_like(params);

  // Assemble the outputs the loss sees and d(loss)/d(probability map).
  std::vector<ScalarField2D> outputs;
  outputs.reserve(l);
  for (std::size_t t = 0; t < l; ++t) {
    outputs.emplace_back(w, h, steps[t].p);
  }

  std::vector<std::vector<double>> dlogit(l, std::vector<double>(hw, 0.0));

  std::vector<double> o_blend(hw, 0.0);
  if (sta != nullptr) {
    const ScalarField2D& p_center = outputs[center];
    ScalarField2D o_curr = attend(p_center, sta->sm);
    const bool has_prev = sta->o_prev.has_value();
    const double beta_eff = has_prev ? sta->beta : 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      o_blend[i] = has_prev
                       ? sta->beta * (*sta->o_prev)[i] + (1.0 - sta->beta) * o_curr[i]
                       : o_curr[i];
    }
    const double aw = params.attention_weight;
    std::vector<double> phat(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      phat[i] = std::clamp(aw * o_blend[i] + p_center[i], 0.0, 1.0);
    }
    result.o_blend = ScalarField2D(w, h, o_blend);

    // dL/dPhat with the clamp as a hard gate; gradients flow through the
    // probability map both directly and through the attention term, with the
    // similarity map held constant.
    const BinaryMask2D& y = gts[center];
    std::vector<double> g(hw, 0.0);
    double d_aw = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      double pre = aw * o_blend[i] + p_center[i];
      if (pre <= 0.0 || pre >= 1.0) continue;
      double pc = std::clamp(phat[i], 1e-7, 1.0 - 1e-7);
      g[i] = (pc - (y[i] ? 1.0 : 0.0)) / (pc * (1.0 - pc)) * inv_m;
      d_aw += g[i] * o_blend[i];
    }
    result.grads.attention_weight = d_aw;

    // dL/dp_m = g_m + aw*(1-beta_eff) * sum_n g_n * SM[n,m]
    std::vector<double> dp(g);
    const double scale = aw * (1.0 - beta_eff);
    if (scale != 0.0) {
      for (std::size_t n = 0; n < hw; ++n) {
        if (g[n] == 0.0) continue;
        const double gn = g[n] * scale;
        for (std::size_t m = 0; m < hw; ++m) {
          dp[m] += gn * sta->sm.at(static_cast<int>(n), static_cast<int>(m));
        }
      }
    }
    for (std::size_t i = 0; i < hw; ++i) {
      double p = steps[center].p[i];
      dlogit[center][i] = dp[i] * p * (1.0 - p);
    }
    outputs[center] = ScalarField2D(w, h, std::move(phat));
  } else {
    result.o_blend = ScalarField2D(w, h, 0.0);
  }

  for (std::size_t t = 0; t < l; ++t) {
    if (sta != nullptr && t == center) continue;
    const BinaryMask2D& y = gts[t];
    if (y.width() != w || y.height() != h) {
      throw ShapeError("backward: ground-truth shape differs");
    }
    for (std::size_t i = 0; i < hw; ++i) {
      dlogit[t][i] = (steps[t].p[i] - (y[i] ? 1.0 : 0.0)) * inv_m;
    }
  }

  result.loss = bce_loss(SliceStack(outputs), gts);
  result.outputs = SliceStack(std::move(outputs));

  // Reverse sweep through the recurrence.
  std::vector<double> dh_next(hc * hw, 0.0);
  std::vector<double> dc_next(hc * hw, 0.0);
  for (std::size_t ti = l; ti-- > 0;) {
    const StepCache& sc = steps[ti];
    const std::vector<double>* h_prev = (ti > 0) ? &steps[ti - 1].h : nullptr;
    const std::vector<double>* c_prev = (ti > 0) ? &steps[ti - 1].c : nullptr;

    // Head: logit = head_w . h + head_b
    std::vector<double> dh(hc * hw, 0.0);
    for (std::size_t px = 0; px < hw; ++px) {
      const double dl = dlogit[ti][px];
      if (dl == 0.0) continue;
      result.grads.head_b += dl;
      for (int ch = 0; ch < hc; ++ch) {
        result.grads.head_w[ch] += dl * sc.h[ch * hw + px];
        dh[ch * hw + px] += dl * params.head_w[ch];
      }
    }
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh_next[i];

    std::array<std::vector<double>, kGateCount> dpre;
    for (auto& v : dpre) v.assign(hc * hw, 0.0);
    std::vector<double> dc(hc * hw, 0.0);
    std::vector<double> dcp(hc * hw, 0.0);

    for (std::size_t i = 0; i < dh.size(); ++i) {
      const double i_g = sc.gate[0][i], f_g = sc.gate[1][i];
      const double o_g = sc.gate[2][i], g_g = sc.gate[3][i];
      const double d_o = dh[i] * sc.tanh_c[i];
      dc[i] = dh[i] * o_g * (1.0 - sc.tanh_c[i] * sc.tanh_c[i]) + dc_next[i];
      const double d_i = dc[i] * g_g;
      const double d_g = dc[i] * i_g;
      const double cp = c_prev ? (*c_prev)[i] : 0.0;
      const double d_f = dc[i] * cp;
      dcp[i] = dc[i] * f_g;
      dpre[0][i] = d_i * i_g * (1.0 - i_g);
      dpre[1][i] = d_f * f_g * (1.0 - f_g);
      dpre[2][i] = d_o * o_g * (1.0 - o_g);
      dpre[3][i] = d_g * (1.0 - g_g * g_g);
    }

    std::vector<double> dh_prev(hc * hw, 0.0);
    for (int g = 0; g < kGateCount; ++g) {
      conv_weight_grad(sc.x.data(), 1, h, w, dpre[g].data(), hc, params.kernel,
                       result.grads.w_x[g]);
      if (h_prev != nullptr) {
        conv_weight_grad(h_prev->data(), hc, h, w, dpre[g].data(), hc,
                         params.kernel, result.grads.w_h[g]);
        conv_input_grad(params.w_h[g], hc, hc, h, w, dpre[g].data(),
                        dh_prev.data());
      }
      for (int oc = 0; oc < hc; ++oc) {
        double acc = 0.0;
        const double* dd = dpre[g].data() + static_cast<std::size_t>(oc) * hw;
        for (std::size_t px = 0; px < hw; ++px) acc += dd[px];
        result.grads.bias[g][oc] += acc;
      }
    }
    dh_next = std::move(dh_prev);
    dc_next = std::move(dcp);
  }

  return result;
}

}  // namespace

BackwardResult backward(const ConvLSTMParams& params, const SliceStack& stack,
                        const std::vector<BinaryMask2D>& gts) {
  return backward_impl(params, stack, gts, nullptr);
}

BackwardResult backward(const ConvLSTMParams& params, const SliceStack& stack,
                        const std::vector<BinaryMask2D>& gts,
                        const StaContext& sta) {
  return backward_impl(params, stack, gts, &sta);
}

namespace {

double schedule_lr(double base, int epoch, int period) {
  if (period <= 0) return base;
  return base * std::pow(0.5, epoch / period);
}

struct Sgd {
  double momentum;
  std::vector<double> velocity;

  void step(ConvLSTMParams& params, const ConvLSTMGrads& grads, double lr) {
    std::vector<double> flat = params.flatten();
    std::vector<double> gflat = grads.flatten();
    if (velocity.empty()) velocity.assign(flat.size(), 0.0);
    for (std::size_t i = 0; i < flat.size(); ++i) {
      velocity[i] = momentum * velocity[i] - lr * gflat[i];
      flat[i] += velocity[i];
    }
    params.unflatten(flat);
  }
};

// One training pass shared by both stages. In stage 2 each sample keeps its
// previous-epoch attention blend; the similarity map is rebuilt every time
// from the current probability maps (critical points move as the model
// trains) and treated as constant by the gradients.
TrainResult run_stage(const TrainConfig& config, const Dataset& dataset,
                      ConvLSTMParams params, TrainStage stage, double lr_base,
                      int epochs, bool halving) {
  if (dataset.empty()) throw ParameterError("train: dataset is empty");
  if (config.batch < 1) throw ParameterError("train: batch must be >= 1");

  Rng shuffle_rng(config.seed ^ 0x5deece66dull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::optional<ScalarField2D>> o_prev(dataset.size());

  TrainResult result;
  result.params = std::move(params);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr =
        halving ? schedule_lr(lr_base, epoch, config.lr_halving_period) : lr_base;

    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = shuffle_rng.below(i);
      std::swap(order[i - 1], order[j]);
    }

    Sgd sgd{config.momentum, {}};
    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take =
          std::min<std::size_t>(config.batch, order.size() - done);
      ConvLSTMGrads batch_grads = ConvLSTMGrads();
      std::vector<double> acc;
      for (std::size_t b = 0; b < take; ++b) {
        const TrainSample& sample = dataset[order[done + b]];
        BackwardResult br;
        if (stage == TrainStage::backbone) {
          br = backward(result.params, sample.inputs, sample.gts);
        } else {
          SliceStack probs = forward(result.params, sample.inputs);
          std::vector<CriticalPointMap> cps;
          cps.reserve(probs.slice_count());
          for (std::size_t s = 0; s < probs.slice_count(); ++s) {
            cps.push_back(critical_point_map(probs.slice(s), config.epsilon,
                                             config.sigma));
          }
          StaContext ctx{similarity(build_query_key(cps, probs.center_index())),
                         o_prev[order[done + b]], config.beta};
          br = backward(result.params, sample.inputs, sample.gts, ctx);
          o_prev[order[done + b]] = br.o_blend;
        }
        epoch_loss += br.loss;
        std::vector<double> g = br.grads.flatten();
        if (acc.empty()) {
          acc = std::move(g);
        } else {
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
        }
      }
      for (double& v : acc) v /= static_cast<double>(take);
      ConvLSTMGrads grads = zero_like(result.params);
      grads.unflatten(acc);
      sgd.step(result.params, grads, lr);
      done += take;
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("training diverged (non-finite loss) at epoch " +
                              std::to_string(epoch),
                          epoch);
    }
    result.history.push_back({epoch, stage, lr, epoch_loss});
  }
  return result;
}

}  // namespace

TrainResult train_backbone(const TrainConfig& config, const Dataset& dataset) {
  ConvLSTMParams params = ConvLSTMParams::init(config.hidden_channels,
                                               config.kernel, config.seed);
  return run_stage(config, dataset, std::move(params), TrainStage::backbone,
                   config.lr, config.epochs, true);
}

TrainResult train_tacnet(const TrainConfig& config, const Dataset& dataset,
                         ConvLSTMParams params) {
  if (!params.initialized()) {
    throw ShapeError("train_tacnet: needs initialized backbone parameters");
  }
  return run_stage(config, dataset, std::move(params), TrainStage::tacnet,
                   config.fine_tune_lr, config.fine_tune_epochs, false);
}

TrainResult train(const TrainConfig& config, const Dataset& dataset) {
  TrainResult stage1 = train_backbone(config, dataset);
  TrainResult stage2 = train_tacnet(config, dataset, std::move(stage1.params));
  TrainResult result;
  result.params = std::move(stage2.params);
  result.history = std::move(stage1.history);
  result.history.insert(result.history.end(), stage2.history.begin(),
                        stage2.history.end());
  return result;
}

}  // namespace tacl
