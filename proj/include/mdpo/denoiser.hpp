#pragma once

// Tiny bidirectional denoiser with exact reverse-mode gradients.
//
// Architecture: token + learned positional + prompt/completion segment
// embeddings, num_layers pre-LN transformer blocks with full (non-causal)
// attention, a final LayerNorm, and a linear head over ordinary tokens.
// There is no time input: the mask pattern carries all timing information.
// The flat parameter vector additionally holds the threshold-head vector w,
// which is not part of the denoiser body.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdpo/mdm.hpp"
#include "mdpo/rng.hpp"

namespace mdpo {

struct DenoiserConfig {
  Vocab vocab;
  int max_len = 32;
  int embed_dim = 64;
  int num_layers = 2;
  int num_heads = 4;
  std::uint64_t seed = 0;

  int ffn_dim() const { return 4 * embed_dim; }
  void validate() const {
    vocab.validate();
    if (max_len <= 0 || embed_dim <= 0 || num_layers <= 0 || num_heads <= 0)
      throw std::invalid_argument("DenoiserConfig: sizes must be positive");
    if (embed_dim % num_heads != 0)
      throw std::invalid_argument(
          "DenoiserConfig: embed_dim must be divisible by num_heads");
  }
};

// Named offsets into the flat parameter array. Layout is a deterministic
// function of the config; the checkpoint format stores the raw array.
struct ParamLayout {
  struct Block {
    std::size_t ln1_g, ln1_b;
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_g, ln2_b;
    std::size_t w1, b1, w2, b2;
  };
  std::size_t tok_embed = 0;  // (V+1) x D, mask row last
  std::size_t pos_embed = 0;  // max_len x D
  std::size_t seg_embed = 0;  // 2 x D (prompt / completion)
  std::vector<Block> blocks;
  std::size_t lnf_g = 0, lnf_b = 0;
  std::size_t w_out = 0, b_out = 0;  // D x V, V
  std::size_t thresh_w = 0;          // D
  std::size_t total = 0;

  explicit ParamLayout(const DenoiserConfig& cfg) {
    const std::size_t V = static_cast<std::size_t>(cfg.vocab.size);
    const std::size_t D = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t F = static_cast<std::size_t>(cfg.ffn_dim());
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      std::size_t o = off;
      off += n;
      return o;
    };
    tok_embed = take((V + 1) * D);
    pos_embed = take(static_cast<std::size_t>(cfg.max_len) * D);
    seg_embed = take(2 * D);
    blocks.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& b : blocks) {
      b.ln1_g = take(D);
      b.ln1_b = take(D);
      b.wq = take(D * D);
      b.bq = take(D);
      b.wk = take(D * D);
      b.bk = take(D);
      b.wv = take(D * D);
      b.bv = take(D);
      b.wo = take(D * D);
      b.bo = take(D);
      b.ln2_g = take(D);
      b.ln2_b = take(D);
      b.w1 = take(D * F);
      b.b1 = take(F);
      b.w2 = take(F * D);
      b.b2 = take(D);
    }
    lnf_g = take(D);
    lnf_b = take(D);
    w_out = take(D * V);
    b_out = take(V);
    thresh_w = take(D);
    total = off;
  }
};

struct DenoiserParams {
  DenoiserConfig cfg;
  ParamLayout layout;
  std::vector<double> values;

  explicit DenoiserParams(const DenoiserConfig& c) : cfg(c), layout(c) {
    cfg.validate();
    values.assign(layout.total, 0.0);
  }

  std::size_t size() const { return values.size(); }
  const double* at(std::size_t off) const { return values.data() + off; }
  double* at(std::size_t off) { return values.data() + off; }
};

// Deterministic in cfg.seed. LayerNorm gains start at 1, biases at 0,
// matrices and embeddings at N(0, 0.02^2). The threshold head w is all zero
// so the initial adaptive threshold equals the configured global one.
inline DenoiserParams init_params(const DenoiserConfig& cfg) {
  DenoiserParams p(cfg);
  std::mt19937_64 gen(derive_seed(cfg.seed, "init"));
  std::normal_distribution<double> nd(0.0, 0.02);
  const auto& L = p.layout;
  const std::size_t D = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t V = static_cast<std::size_t>(cfg.vocab.size);
  const std::size_t F = static_cast<std::size_t>(cfg.ffn_dim());
  auto fill = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p.values[off + i] = nd(gen);
  };
  auto ones = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p.values[off + i] = 1.0;
  };
  fill(L.tok_embed, (V + 1) * D);
  fill(L.pos_embed, static_cast<std::size_t>(cfg.max_len) * D);
  fill(L.seg_embed, 2 * D);
  for (const auto& b : L.blocks) {
    ones(b.ln1_g, D);
    fill(b.wq, D * D);
    fill(b.wk, D * D);
    fill(b.wv, D * D);
    fill(b.wo, D * D);
    ones(b.ln2_g, D);
    fill(b.w1, D * F);
    fill(b.w2, F * D);
  }
  ones(L.lnf_g, D);
  fill(L.w_out, D * V);
  // thresh_w stays exactly zero
  return p;
}

inline constexpr double kLnEps = 1e-5;

struct LayerCache {
  std::vector<double> a;           // L x D, LN1 output
  std::vector<double> ln1_mu, ln1_inv;
  std::vector<double> q, k, v;     // L x D
  std::vector<double> att;         // H x L x L
  std::vector<double> ctx;         // L x D, attention context (pre-proj)
  std::vector<double> x_attn;      // L x D, residual after attention
  std::vector<double> a2;          // L x D, LN2 output
  std::vector<double> ln2_mu, ln2_inv;
  std::vector<double> z1;          // L x F, FFN preactivation
  std::vector<double> h1;          // L x F, gelu(z1)
  std::vector<double> x_ffn;       // L x D, residual after FFN
};

struct ForwardCache {
  int seq_len = 0;
  std::vector<int> tokens;
  std::vector<std::uint8_t> is_prompt;
  std::vector<double> x0;    // L x D
  std::vector<LayerCache> layers;
  std::vector<double> hfin;  // L x D, final LN output
  std::vector<double> lnf_mu, lnf_inv;
};

struct ForwardOutput {
  int seq_len = 0;
  int vocab = 0;
  std::vector<double> logits;  // L x V
  std::vector<double> pooled;  // D, mean of hfin over positions
};

// Forward-pass accounting used by the likelihood budget checks.
inline long& forward_call_counter() {
  thread_local long counter = 0;
  return counter;
}
inline void reset_forward_calls() { forward_call_counter() = 0; }
inline long forward_calls() { return forward_call_counter(); }

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }
inline double gelu_grad(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / M_SQRT2)) + x * phi;
}

// y = LN(x) * g + b, per row of an L x D matrix.
inline void layernorm(const double* x, const double* g, const double* b, int L,
                      int D, double* y, double* mu, double* inv) {
  for (int l = 0; l < L; ++l) {
    const double* xr = x + static_cast<std::size_t>(l) * D;
    double m = 0.0;
    for (int d = 0; d < D; ++d) m += xr[d];
    m /= D;
    double var = 0.0;
    for (int d = 0; d < D; ++d) var += (xr[d] - m) * (xr[d] - m);
    var /= D;
    double iv = 1.0 / std::sqrt(var + kLnEps);
    mu[l] = m;
    inv[l] = iv;
    double* yr = y + static_cast<std::size_t>(l) * D;
    for (int d = 0; d < D; ++d) yr[d] = (xr[d] - m) * iv * g[d] + b[d];
  }
}

// Backward through y = LN(x) * g + b. Accumulates dg, db; writes dx (adds).
inline void layernorm_backward(const double* x, const double* g, int L, int D,
                               const double* mu, const double* inv,
                               const double* dy, double* dx, double* dg,
                               double* db) {
  for (int l = 0; l < L; ++l) {
    const double* xr = x + static_cast<std::size_t>(l) * D;
    const double* dyr = dy + static_cast<std::size_t>(l) * D;
    double* dxr = dx + static_cast<std::size_t>(l) * D;
    double iv = inv[l], m = mu[l];
    double s1 = 0.0, s2 = 0.0;
    for (int d = 0; d < D; ++d) {
      double ah = (xr[d] - m) * iv;
      double dyg = dyr[d] * g[d];
      s1 += dyg;
      s2 += dyg * ah;
      dg[d] += dyr[d] * ah;
      db[d] += dyr[d];
    }
    s1 /= D;
    s2 /= D;
    for (int d = 0; d < D; ++d) {
      double ah = (xr[d] - m) * iv;
      dxr[d] += iv * (dyr[d] * g[d] - s1 - ah * s2);
    }
  }
}

// y(LxN) = x(LxM) @ W(MxN) + b(N)
inline void linear(const double* x, const double* W, const double* b, int L,
                   int M, int N, double* y) {
  for (int l = 0; l < L; ++l) {
    const double* xr = x + static_cast<std::size_t>(l) * M;
    double* yr = y + static_cast<std::size_t>(l) * N;
    for (int n = 0; n < N; ++n) yr[n] = b ? b[n] : 0.0;
    for (int m = 0; m < M; ++m) {
      double xv = xr[m];
      if (xv == 0.0) continue;
      const double* wr = W + static_cast<std::size_t>(m) * N;
      for (int n = 0; n < N; ++n) yr[n] += xv * wr[n];
    }
  }
}

// Backward of linear: accumulates dW, db and dx (adds into dx).
inline void linear_backward(const double* x, const double* W, int L, int M,
                            int N, const double* dy, double* dx, double* dW,
                            double* db) {
  for (int l = 0; l < L; ++l) {
    const double* xr = x + static_cast<std::size_t>(l) * M;
    const double* dyr = dy + static_cast<std::size_t>(l) * N;
    double* dxr = dx ? dx + static_cast<std::size_t>(l) * M : nullptr;
    if (db)
      for (int n = 0; n < N; ++n) db[n] += dyr[n];
    for (int m = 0; m < M; ++m) {
      const double* wr = W + static_cast<std::size_t>(m) * N;
      double* dwr = dW + static_cast<std::size_t>(m) * N;
      double acc = 0.0;
      double xv = xr[m];
      for (int n = 0; n < N; ++n) {
        dwr[n] += xv * dyr[n];
        acc += wr[n] * dyr[n];
      }
      if (dxr) dxr[m] += acc;
    }
  }
}

}  // namespace detail

inline ForwardOutput forward(const DenoiserParams& p,
                             const std::vector<int>& tokens,
                             const std::vector<std::uint8_t>& is_prompt,
                             ForwardCache* cache = nullptr) {
  const auto& cfg = p.cfg;
  const auto& lay = p.layout;
  const int L = static_cast<int>(tokens.size());
  const int D = cfg.embed_dim;
  const int V = cfg.vocab.size;
  const int H = cfg.num_heads;
  const int Dh = D / H;
  const int F = cfg.ffn_dim();
  if (L == 0 || L > cfg.max_len)
    throw std::invalid_argument("forward: sequence length out of range");
  if (is_prompt.size() != tokens.size())
    throw std::invalid_argument("forward: is_prompt length mismatch");
  for (int tok : tokens)
    if (tok < 0 || tok > cfg.vocab.mask_id)
      throw std::invalid_argument("forward: token id out of range");
  ++forward_call_counter();

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.seq_len = L;
  c.tokens = tokens;
  c.is_prompt = is_prompt;

  const std::size_t LD = static_cast<std::size_t>(L) * D;
  c.x0.assign(LD, 0.0);
  for (int l = 0; l < L; ++l) {
    const double* te = p.at(lay.tok_embed) + static_cast<std::size_t>(tokens[l]) * D;
    const double* pe = p.at(lay.pos_embed) + static_cast<std::size_t>(l) * D;
    const double* se = p.at(lay.seg_embed) + (is_prompt[l] ? 0 : static_cast<std::size_t>(D));
    double* xr = c.x0.data() + static_cast<std::size_t>(l) * D;
    for (int d = 0; d < D; ++d) xr[d] = te[d] + pe[d] + se[d];
  }

  c.layers.assign(static_cast<std::size_t>(cfg.num_layers), LayerCache{});
  std::vector<double> x = c.x0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));

  for (int li = 0; li < cfg.num_layers; ++li) {
    const auto& b = lay.blocks[static_cast<std::size_t>(li)];
    LayerCache& lc = c.layers[static_cast<std::size_t>(li)];
    lc.a.assign(LD, 0.0);
    lc.ln1_mu.assign(static_cast<std::size_t>(L), 0.0);
    lc.ln1_inv.assign(static_cast<std::size_t>(L), 0.0);
    detail::layernorm(x.data(), p.at(b.ln1_g), p.at(b.ln1_b), L, D, lc.a.data(),
                      lc.ln1_mu.data(), lc.ln1_inv.data());
    lc.q.assign(LD, 0.0);
    lc.k.assign(LD, 0.0);
    lc.v.assign(LD, 0.0);
    detail::linear(lc.a.data(), p.at(b.wq), p.at(b.bq), L, D, D, lc.q.data());
    detail::linear(lc.a.data(), p.at(b.wk), p.at(b.bk), L, D, D, lc.k.data());
    detail::linear(lc.a.data(), p.at(b.wv), p.at(b.bv), L, D, D, lc.v.data());

    lc.att.assign(static_cast<std::size_t>(H) * L * L, 0.0);
    lc.ctx.assign(LD, 0.0);
    for (int h = 0; h < H; ++h) {
      const int hd = h * Dh;
      for (int i = 0; i < L; ++i) {
        double* arow = lc.att.data() +
                       (static_cast<std::size_t>(h) * L + i) * L;
        const double* qi = lc.q.data() + static_cast<std::size_t>(i) * D + hd;
        double maxs = -1e300;
        for (int j = 0; j < L; ++j) {
          const double* kj = lc.k.data() + static_cast<std::size_t>(j) * D + hd;
          double s = 0.0;
          for (int d = 0; d < Dh; ++d) s += qi[d] * kj[d];
          s *= scale;
          arow[j] = s;
          if (s > maxs) maxs = s;
        }
        double denom = 0.0;
        for (int j = 0; j < L; ++j) {
          arow[j] = std::exp(arow[j] - maxs);
          denom += arow[j];
        }
        double* ci = lc.ctx.data() + static_cast<std::size_t>(i) * D + hd;
        for (int j = 0; j < L; ++j) {
          arow[j] /= denom;
          const double* vj = lc.v.data() + static_cast<std::size_t>(j) * D + hd;
          double w = arow[j];
          for (int d = 0; d < Dh; ++d) ci[d] += w * vj[d];
        }
      }
    }

    lc.x_attn.assign(LD, 0.0);
    detail::linear(lc.ctx.data(), p.at(b.wo), p.at(b.bo), L, D, D,
                   lc.x_attn.data());
    for (std::size_t i = 0; i < LD; ++i) lc.x_attn[i] += x[i];

    lc.a2.assign(LD, 0.0);
    lc.ln2_mu.assign(static_cast<std::size_t>(L), 0.0);
    lc.ln2_inv.assign(static_cast<std::size_t>(L), 0.0);
    detail::layernorm(lc.x_attn.data(), p.at(b.ln2_g), p.at(b.ln2_b), L, D,
                      lc.a2.data(), lc.ln2_mu.data(), lc.ln2_inv.data());
    lc.z1.assign(static_cast<std::size_t>(L) * F, 0.0);
    detail::linear(lc.a2.data(), p.at(b.w1), p.at(b.b1), L, D, F, lc.z1.data());
    lc.h1.resize(lc.z1.size());
    for (std::size_t i = 0; i < lc.z1.size(); ++i)
      lc.h1[i] = detail::gelu(lc.z1[i]);
    lc.x_ffn.assign(LD, 0.0);
    detail::linear(lc.h1.data(), p.at(b.w2), p.at(b.b2), L, F, D,
                   lc.x_ffn.data());
    for (std::size_t i = 0; i < LD; ++i) lc.x_ffn[i] += lc.x_attn[i];
    x = lc.x_ffn;
  }

  c.hfin.assign(LD, 0.0);
  c.lnf_mu.assign(static_cast<std::size_t>(L), 0.0);
  c.lnf_inv.assign(static_cast<std::size_t>(L), 0.0);
  detail::layernorm(x.data(), p.at(lay.lnf_g), p.at(lay.lnf_b), L, D,
                    c.hfin.data(), c.lnf_mu.data(), c.lnf_inv.data());

  ForwardOutput out;
  out.seq_len = L;
  out.vocab = V;
  out.logits.assign(static_cast<std::size_t>(L) * V, 0.0);
  detail::linear(c.hfin.data(), p.at(lay.w_out), p.at(lay.b_out), L, D, V,
                 out.logits.data());
  out.pooled.assign(static_cast<std::size_t>(D), 0.0);
  for (int l = 0; l < L; ++l)
    for (int d = 0; d < D; ++d)
      out.pooled[static_cast<std::size_t>(d)] +=
          c.hfin[static_cast<std::size_t>(l) * D + d] / L;
  return out;
}

// Accumulate d(objective)/d(params) into grad given d(objective)/d(logits).
// The pooled-feature path is intentionally not differentiated: the only
// consumer of pooled features is the threshold head, whose loss treats them
// as constants (stopgrad).
inline void backward(const DenoiserParams& p, const ForwardCache& c,
                     const std::vector<double>& dlogits,
                     std::vector<double>& grad) {
  const auto& cfg = p.cfg;
  const auto& lay = p.layout;
  const int L = c.seq_len;
  const int D = cfg.embed_dim;
  const int V = cfg.vocab.size;
  const int H = cfg.num_heads;
  const int Dh = D / H;
  const int F = cfg.ffn_dim();
  const std::size_t LD = static_cast<std::size_t>(L) * D;
  if (dlogits.size() != static_cast<std::size_t>(L) * V)
    throw std::invalid_argument("backward: dlogits size mismatch");
  if (grad.size() != p.size()) throw std::invalid_argument("backward: grad size");
  const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));

  std::vector<double> dhfin(LD, 0.0);
  detail::linear_backward(c.hfin.data(), p.at(lay.w_out), L, D, V,
                          dlogits.data(), dhfin.data(), grad.data() + lay.w_out,
                          grad.data() + lay.b_out);

  std::vector<double> dx(LD, 0.0);
  const std::vector<double>& x_last =
      cfg.num_layers > 0 ? c.layers.back().x_ffn : c.x0;
  detail::layernorm_backward(x_last.data(), p.at(lay.lnf_g), L, D,
                             c.lnf_mu.data(), c.lnf_inv.data(), dhfin.data(),
                             dx.data(), grad.data() + lay.lnf_g,
                             grad.data() + lay.lnf_b);

  std::vector<double> dtmp(LD), dh1(static_cast<std::size_t>(L) * F),
      dz1(static_cast<std::size_t>(L) * F), da2(LD), dctx(LD), dq(LD), dk(LD),
      dv(LD), da(LD);
  for (int li = cfg.num_layers - 1; li >= 0; --li) {
    const auto& b = lay.blocks[static_cast<std::size_t>(li)];
    const LayerCache& lc = c.layers[static_cast<std::size_t>(li)];
    const std::vector<double>& x_in =
        li > 0 ? c.layers[static_cast<std::size_t>(li - 1)].x_ffn : c.x0;

    // FFN: x_ffn = x_attn + W2 gelu(W1 a2 + b1) + b2, a2 = LN2(x_attn)
    std::fill(dh1.begin(), dh1.end(), 0.0);
    detail::linear_backward(lc.h1.data(), p.at(b.w2), L, F, D, dx.data(),
                            dh1.data(), grad.data() + b.w2, grad.data() + b.b2);
    for (std::size_t i = 0; i < dz1.size(); ++i)
      dz1[i] = dh1[i] * detail::gelu_grad(lc.z1[i]);
    std::fill(da2.begin(), da2.end(), 0.0);
    detail::linear_backward(lc.a2.data(), p.at(b.w1), L, D, F, dz1.data(),
                            da2.data(), grad.data() + b.w1, grad.data() + b.b1);
    // residual: dx already carries d(x_attn) via the skip connection
    detail::layernorm_backward(lc.x_attn.data(), p.at(b.ln2_g), L, D,
                               lc.ln2_mu.data(), lc.ln2_inv.data(), da2.data(),
                               dx.data(), grad.data() + b.ln2_g,
                               grad.data() + b.ln2_b);

    // Attention: x_attn = x_in + Wo ctx + bo
    std::fill(dctx.begin(), dctx.end(), 0.0);
    detail::linear_backward(lc.ctx.data(), p.at(b.wo), L, D, D, dx.data(),
                            dctx.data(), grad.data() + b.wo, grad.data() + b.bo);
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (int h = 0; h < H; ++h) {
      const int hd = h * Dh;
      for (int i = 0; i < L; ++i) {
        const double* arow =
            lc.att.data() + (static_cast<std::size_t>(h) * L + i) * L;
        const double* dci = dctx.data() + static_cast<std::size_t>(i) * D + hd;
        // dA[j] = dctx_i . v_j ; dv_j += att[j] * dctx_i
        double dot = 0.0;
        std::vector<double> dA(static_cast<std::size_t>(L));
        for (int j = 0; j < L; ++j) {
          const double* vj = lc.v.data() + static_cast<std::size_t>(j) * D + hd;
          double* dvj = dv.data() + static_cast<std::size_t>(j) * D + hd;
          double s = 0.0;
          for (int d = 0; d < Dh; ++d) {
            s += dci[d] * vj[d];
            dvj[d] += arow[j] * dci[d];
          }
          dA[static_cast<std::size_t>(j)] = s;
          dot += s * arow[j];
        }
        // softmax backward, then scores s_ij = scale * q_i . k_j
        const double* qi = lc.q.data() + static_cast<std::size_t>(i) * D + hd;
        double* dqi = dq.data() + static_cast<std::size_t>(i) * D + hd;
        for (int j = 0; j < L; ++j) {
          double ds = arow[j] * (dA[static_cast<std::size_t>(j)] - dot) * scale;
          const double* kj = lc.k.data() + static_cast<std::size_t>(j) * D + hd;
          double* dkj = dk.data() + static_cast<std::size_t>(j) * D + hd;
          for (int d = 0; d < Dh; ++d) {
            dqi[d] += ds * kj[d];
            dkj[d] += ds * qi[d];
          }
        }
      }
    }
    std::fill(da.begin(), da.end(), 0.0);
    detail::linear_backward(lc.a.data(), p.at(b.wq), L, D, D, dq.data(),
                            da.data(), grad.data() + b.wq, grad.data() + b.bq);
    detail::linear_backward(lc.a.data(), p.at(b.wk), L, D, D, dk.data(),
                            da.data(), grad.data() + b.wk, grad.data() + b.bk);
    detail::linear_backward(lc.a.data(), p.at(b.wv), L, D, D, dv.data(),
                            da.data(), grad.data() + b.wv, grad.data() + b.bv);
    detail::layernorm_backward(x_in.data(), p.at(b.ln1_g), L, D,
                               lc.ln1_mu.data(), lc.ln1_inv.data(), da.data(),
                               dx.data(), grad.data() + b.ln1_g,
                               grad.data() + b.ln1_b);
  }

  // Embedding gradients.
  for (int l = 0; l < L; ++l) {
    const double* dxr = dx.data() + static_cast<std::size_t>(l) * D;
    double* gte = grad.data() + lay.tok_embed +
                  static_cast<std::size_t>(c.tokens[static_cast<std::size_t>(l)]) * D;
    double* gpe = grad.data() + lay.pos_embed + static_cast<std::size_t>(l) * D;
    double* gse = grad.data() + lay.seg_embed +
                  (c.is_prompt[static_cast<std::size_t>(l)] ? 0 : static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d) {
      gte[d] += dxr[d];
      gpe[d] += dxr[d];
      gse[d] += dxr[d];
    }
  }
}

// Softmax helpers over logits rows.
inline std::vector<double> softmax_row(const double* logits, int V,
                                       double temperature = 1.0) {
  std::vector<double> p(static_cast<std::size_t>(V));
  double maxv = -1e300;
  for (int v = 0; v < V; ++v) maxv = std::max(maxv, logits[v]);
  double denom = 0.0;
  double invT = temperature > 0.0 ? 1.0 / temperature : 1.0;
  for (int v = 0; v < V; ++v) {
    p[static_cast<std::size_t>(v)] = std::exp((logits[v] - maxv) * invT);
    denom += p[static_cast<std::size_t>(v)];
  }
  for (auto& x : p) x /= denom;
  return p;
}

inline double log_softmax_at(const double* logits, int V, int idx) {
  double maxv = -1e300;
  for (int v = 0; v < V; ++v) maxv = std::max(maxv, logits[v]);
  double denom = 0.0;
  for (int v = 0; v < V; ++v) denom += std::exp(logits[v] - maxv);
  return logits[idx] - maxv - std::log(denom);
}

}  // namespace mdpo
