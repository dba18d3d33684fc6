#pragma once

// Transformer regressor over one order's element rows plus a learnable
// header token. Element features and propagated embeddings are concatenated
// and zero-padded to a common width; the header row's encoder output feeds
// a layer norm and a single-layer head that emits hours.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "igt/errors.hpp"
#include "igt/optim.hpp"
#include "igt/rng.hpp"
#include "igt/tensor.hpp"

namespace igt {

inline constexpr std::size_t kSeqLen = 5;  // header + 4 order elements

// Multi-head dot-product scores with 1/sqrt(d_head) folded in.
// q, k: (batch*seq, w) -> (batch*heads*seq, seq).
inline Tensor attention_scores(const Tensor& q, const Tensor& k, std::size_t batch, std::size_t seq,
                               std::size_t heads) {
  detail::check_rank2(q, "attention_scores q");
  if (q.shape() != k.shape())
    throw TensorError("attention_scores: q " + shape_str(q.shape()) + " vs k " + shape_str(k.shape()));
  const std::size_t w = q.shape()[1];
  if (q.shape()[0] != batch * seq || w % heads != 0)
    throw TensorError("attention_scores: bad geometry for " + shape_str(q.shape()));
  const std::size_t dh = w / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> out(batch * heads * seq * seq);
  const double* pq = q.values().data();
  const double* pk = k.values().data();
#pragma omp parallel for schedule(static) if (batch * heads > 8)
  for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
    const std::size_t b = bh / heads, h = bh % heads;
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j < seq; ++j) {
        double s = 0.0;
        const double* qr = pq + (b * seq + i) * w + h * dh;
        const double* kr = pk + (b * seq + j) * w + h * dh;
        for (std::size_t d = 0; d < dh; ++d) s += qr[d] * kr[d];
        out[(bh * seq + i) * seq + j] = s * sc;
      }
  }
  const bool traced = detail::tracing({&q, &k});
  Tensor r = make_op_output({batch * heads * seq, seq}, std::move(out), traced);
  detail::record_if(traced, r, [qd = q.data_ptr(), kd = k.data_ptr(), batch, seq, heads, w, dh,
                                sc](const std::vector<double>& g) {
    if (qd->requires_grad && qd->grad.empty()) qd->grad.assign(qd->values.size(), 0.0);
    if (kd->requires_grad && kd->grad.empty()) kd->grad.assign(kd->values.size(), 0.0);
#pragma omp parallel for schedule(static) if (batch * heads > 8)
    for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
      const std::size_t b = bh / heads, h = bh % heads;
      for (std::size_t i = 0; i < seq; ++i)
        for (std::size_t j = 0; j < seq; ++j) {
          const double gij = g[(bh * seq + i) * seq + j] * sc;
          if (gij == 0.0) continue;
          const double* qr = qd->values.data() + (b * seq + i) * w + h * dh;
          const double* kr = kd->values.data() + (b * seq + j) * w + h * dh;
          if (qd->requires_grad) {
            double* dq = qd->grad.data() + (b * seq + i) * w + h * dh;
            for (std::size_t d = 0; d < dh; ++d) dq[d] += gij * kr[d];
          }
          if (kd->requires_grad) {
            double* dk = kd->grad.data() + (b * seq + j) * w + h * dh;
            for (std::size_t d = 0; d < dh; ++d) dk[d] += gij * qr[d];
          }
        }
    }
  });
  return r;
}

// Applies attention weights to values per head.
// p: (batch*heads*seq, seq), v: (batch*seq, w) -> (batch*seq, w).
inline Tensor attention_mix(const Tensor& p, const Tensor& v, std::size_t batch, std::size_t seq,
                            std::size_t heads) {
  detail::check_rank2(p, "attention_mix p");
  detail::check_rank2(v, "attention_mix v");
  const std::size_t w = v.shape()[1];
  if (p.shape()[0] != batch * heads * seq || p.shape()[1] != seq || v.shape()[0] != batch * seq ||
      w % heads != 0)
    throw TensorError("attention_mix: bad geometry p=" + shape_str(p.shape()) + " v=" + shape_str(v.shape()));
  const std::size_t dh = w / heads;
  std::vector<double> out(batch * seq * w, 0.0);
  const double* pp = p.values().data();
  const double* pv = v.values().data();
#pragma omp parallel for schedule(static) if (batch * heads > 8)
  for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
    const std::size_t b = bh / heads, h = bh % heads;
    for (std::size_t i = 0; i < seq; ++i) {
      double* orow = out.data() + (b * seq + i) * w + h * dh;
      for (std::size_t j = 0; j < seq; ++j) {
        const double pij = pp[(bh * seq + i) * seq + j];
        const double* vr = pv + (b * seq + j) * w + h * dh;
        for (std::size_t d = 0; d < dh; ++d) orow[d] += pij * vr[d];
      }
    }
  }
  const bool traced = detail::tracing({&p, &v});
  Tensor r = make_op_output({batch * seq, w}, std::move(out), traced);
  detail::record_if(traced, r, [pd = p.data_ptr(), vd = v.data_ptr(), batch, seq, heads, w,
                                dh](const std::vector<double>& g) {
    if (pd->requires_grad && pd->grad.empty()) pd->grad.assign(pd->values.size(), 0.0);
    if (vd->requires_grad && vd->grad.empty()) vd->grad.assign(vd->values.size(), 0.0);
#pragma omp parallel for schedule(static) if (batch * heads > 8)
    for (std::ptrdiff_t bh = 0; bh < static_cast<std::ptrdiff_t>(batch * heads); ++bh) {
      const std::size_t b = bh / heads, h = bh % heads;
      for (std::size_t i = 0; i < seq; ++i) {
        const double* grow = g.data() + (b * seq + i) * w + h * dh;
        for (std::size_t j = 0; j < seq; ++j) {
          const double* vr = vd->values.data() + (b * seq + j) * w + h * dh;
          if (pd->requires_grad) {
            double s = 0.0;
            for (std::size_t d = 0; d < dh; ++d) s += grow[d] * vr[d];
            pd->grad[(bh * seq + i) * seq + j] += s;
          }
          if (vd->requires_grad) {
            const double pij = pd->values[(bh * seq + i) * seq + j];
            double* dv = vd->grad.data() + (b * seq + j) * w + h * dh;
            for (std::size_t d = 0; d < dh; ++d) dv[d] += pij * grow[d];
          }
        }
      }
    }
  });
  return r;
}

// Fixed sinusoidal table, seq x width, values in [-1, 1].
inline Tensor positional_encoding(std::size_t seq, std::size_t width) {
  std::vector<double> v(seq * width);
  for (std::size_t pos = 0; pos < seq; ++pos)
    for (std::size_t i = 0; i < width; ++i) {
      const double rate = std::pow(10000.0, -(static_cast<double>(i / 2 * 2) / static_cast<double>(width)));
      const double a = static_cast<double>(pos) * rate;
      v[pos * width + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  return Tensor::from({seq, width}, std::move(v));
}

// Zero-pads each element's [z || h] row block to the common width. Elements
// must supply at least one of the two parts.
inline std::array<Tensor, 4> align_features(const std::array<Tensor, 4>& z, const std::array<Tensor, 4>* h,
                                            std::size_t width) {
  std::array<Tensor, 4> out;
  for (int t = 0; t < 4; ++t) {
    const bool have_z = z[t].defined();
    const bool have_h = h && (*h)[t].defined();
    if (!have_z && !have_h) throw DataError("align_features: element type " + std::to_string(t) +
                                            " supplies neither raw features nor an embedding");
    Tensor row;
    if (have_z && have_h)
      row = concat_cols(z[t], (*h)[t]);
    else
      row = have_z ? z[t] : (*h)[t];
    const std::size_t have = row.cols();
    if (have > width)
      throw TensorError("align_features: row width " + std::to_string(have) + " exceeds target " +
                        std::to_string(width));
    if (have < width)
      row = concat_cols(row, Tensor::zeros({row.rows(), width - have}));
    out[t] = row;
  }
  return out;
}

// Learnable header token: a seed vector refined by a one-hidden-layer MLP,
// independent of the order content.
struct HeaderMlp {
  Tensor seed;    // 1 x W
  Tensor w1, b1;  // W x W, W
  Tensor w2, b2;  // W x W, W

  static HeaderMlp xavier(std::size_t w, Rng& rng) {
    HeaderMlp m;
    m.seed = Tensor::param({1, w}, rng.xavier_uniform(1, w));
    m.w1 = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    m.b1 = Tensor::param({w}, std::vector<double>(w, 0.0));
    m.w2 = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    m.b2 = Tensor::param({w}, std::vector<double>(w, 0.0));
    return m;
  }

  Tensor forward() const {
    return add(matmul(relu(add(matmul(seed, w1), b1)), w2), b2);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".seed", seed});
    out.push_back({prefix + ".w1", w1});
    out.push_back({prefix + ".b1", b1});
    out.push_back({prefix + ".w2", w2});
    out.push_back({prefix + ".b2", b2});
  }
};

// Pre-norm encoder block: x += Wo * Attn(LN(x)); x += FF(LN(x)).
struct EncoderBlock {
  std::size_t heads = 4;
  Tensor wq, wk, wv, wo;      // W x W
  Tensor ln1_gain, ln1_bias;  // W
  Tensor ff1, ff1b;           // W x Hf, Hf
  Tensor ff2, ff2b;           // Hf x W, W
  Tensor ln2_gain, ln2_bias;  // W

  static EncoderBlock xavier(std::size_t w, std::size_t heads, Rng& rng) {
    if (w % heads != 0) throw ConfigError("width " + std::to_string(w) + " not divisible by " +
                                          std::to_string(heads) + " heads");
    const std::size_t hf = 2 * w;
    EncoderBlock b;
    b.heads = heads;
    b.wq = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    b.wk = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    b.wv = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    b.wo = Tensor::param({w, w}, rng.xavier_uniform(w, w));
    b.ln1_gain = Tensor::param({w}, std::vector<double>(w, 1.0));
    b.ln1_bias = Tensor::param({w}, std::vector<double>(w, 0.0));
    b.ff1 = Tensor::param({w, hf}, rng.xavier_uniform(w, hf));
    b.ff1b = Tensor::param({hf}, std::vector<double>(hf, 0.0));
    b.ff2 = Tensor::param({hf, w}, rng.xavier_uniform(hf, w));
    b.ff2b = Tensor::param({w}, std::vector<double>(w, 0.0));
    b.ln2_gain = Tensor::param({w}, std::vector<double>(w, 1.0));
    b.ln2_bias = Tensor::param({w}, std::vector<double>(w, 0.0));
    return b;
  }

  Tensor attend(const Tensor& x, std::size_t batch, std::size_t seq) const {
    Tensor q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
    Tensor p = softmax(attention_scores(q, k, batch, seq, heads));
    return matmul(attention_mix(p, v, batch, seq, heads), wo);
  }

  Tensor forward(const Tensor& x, std::size_t batch, std::size_t seq) const {
    Tensor a = add(mul(layer_norm(x), ln1_gain), ln1_bias);
    Tensor y = add(x, attend(a, batch, seq));
    Tensor f = add(mul(layer_norm(y), ln2_gain), ln2_bias);
    Tensor ff = add(matmul(relu(add(matmul(f, ff1), ff1b)), ff2), ff2b);
    return add(y, ff);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".wq", wq});
    out.push_back({prefix + ".wk", wk});
    out.push_back({prefix + ".wv", wv});
    out.push_back({prefix + ".wo", wo});
    out.push_back({prefix + ".ln1_gain", ln1_gain});
    out.push_back({prefix + ".ln1_bias", ln1_bias});
    out.push_back({prefix + ".ff1", ff1});
    out.push_back({prefix + ".ff1b", ff1b});
    out.push_back({prefix + ".ff2", ff2});
    out.push_back({prefix + ".ff2b", ff2b});
    out.push_back({prefix + ".ln2_gain", ln2_gain});
    out.push_back({prefix + ".ln2_bias", ln2_bias});
  }
};

class EtaFormer {
 public:
  EtaFormer() = default;
  EtaFormer(std::size_t width, std::size_t heads, std::size_t depth, Rng& rng, double head_bias_init = 0.0)
      : width_(width), header_(HeaderMlp::xavier(width, rng)), pe_(positional_encoding(kSeqLen, width)) {
    for (std::size_t i = 0; i < depth; ++i) blocks_.push_back(EncoderBlock::xavier(width, heads, rng));
    final_ln_gain_ = Tensor::param({width}, std::vector<double>(width, 1.0));
    final_ln_bias_ = Tensor::param({width}, std::vector<double>(width, 0.0));
    head_w_ = Tensor::param({width, 1}, rng.xavier_uniform(width, 1));
    head_b_ = Tensor::param({1}, {head_bias_init});
  }

  std::size_t width() const { return width_; }
  std::vector<EncoderBlock>& blocks() { return blocks_; }
  const std::vector<EncoderBlock>& blocks() const { return blocks_; }
  HeaderMlp& header() { return header_; }

  // element_rows: four (batch x W) aligned tensors in the fixed element
  // order; returns (batch x 1) predicted hours.
  Tensor forward(const std::array<Tensor, 4>& element_rows, std::size_t batch) const {
    Tensor head_row = repeat_rows(header_.forward(), batch);
    Tensor x = interleave_rows({head_row, element_rows[0], element_rows[1], element_rows[2], element_rows[3]});
    x = add(x, tiled_pe_(batch));
    for (const EncoderBlock& blk : blocks_) x = blk.forward(x, batch, kSeqLen);
    std::vector<std::size_t> head_idx(batch);
    for (std::size_t b = 0; b < batch; ++b) head_idx[b] = b * kSeqLen;
    Tensor header_out = gather_rows(x, std::move(head_idx));
    Tensor normed = add(mul(layer_norm(header_out), final_ln_gain_), final_ln_bias_);
    Tensor pred = add(matmul(normed, head_w_), head_b_);
    if (!all_finite(pred))
      throw NumericError("etaformer forward produced non-finite activations (batch " +
                         std::to_string(batch) + ")");
    return pred;
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    header_.collect(prefix + ".header", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
    out.push_back({prefix + ".final_ln_gain", final_ln_gain_});
    out.push_back({prefix + ".final_ln_bias", final_ln_bias_});
    out.push_back({prefix + ".head_w", head_w_});
    out.push_back({prefix + ".head_b", head_b_});
  }

  Tensor& head_w() { return head_w_; }
  Tensor& head_b() { return head_b_; }

 private:
  Tensor tiled_pe_(std::size_t batch) const {
    std::vector<double> v(batch * kSeqLen * width_);
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(pe_.values().data(), kSeqLen * width_, v.data() + b * kSeqLen * width_);
    return Tensor::from({batch * kSeqLen, width_}, std::move(v));
  }

  std::size_t width_ = 0;
  HeaderMlp header_;
  std::vector<EncoderBlock> blocks_;
  Tensor final_ln_gain_, final_ln_bias_;
  Tensor head_w_, head_b_;
  Tensor pe_;
};

}  // namespace igt
