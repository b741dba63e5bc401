#include "ptrner/layers.hpp"

#include <cmath>

#include "ptrner/kernels.hpp"

namespace ptrner::nn {

namespace {

constexpr double kLayerNormEps = 1e-5;

void add_inplace(Matrix& x, const Matrix& y) {
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
}

Matrix single_row(std::span<const double> r) {
  Matrix m(1, r.size());
  std::copy(r.begin(), r.end(), m.data.begin());
  return m;
}

}  // namespace

Matrix dropout_mask(std::size_t rows, std::size_t cols, RunMode& mode) {
  if (!mode.dropout_active()) return {};
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - mode.dropout);
  const double scale = 1.0 / (1.0 - mode.dropout);
  for (double& m : mask.data) m = keep(*mode.rng) ? scale : 0.0;
  return mask;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] *= mask.data[i];
}

// ---------------------------------------------------------------------------
// Linear

Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out) {
  Linear lin;
  lin.weight = ps.add(name + ".weight", in, out);
  lin.bias = ps.add(name + ".bias", 1, out);
  lin.in = in;
  lin.out = out;
  return lin;
}

Matrix linear_forward(const ParameterSet& ps, const Linear& lin, const Matrix& x) {
  Matrix y(x.rows, lin.out);
  const Matrix& b = ps.value(lin.bias);
  for (std::size_t r = 0; r < y.rows; ++r) std::copy(b.data.begin(), b.data.end(), y.row(r).begin());
  matmul_acc(x, ps.value(lin.weight), y);
  return y;
}

Matrix linear_backward(ParameterSet& ps, const Linear& lin, const Matrix& x, const Matrix& dy) {
  matmul_tn_acc(x, dy, ps.grad(lin.weight));
  Matrix& db = ps.grad(lin.bias);
  for (std::size_t r = 0; r < dy.rows; ++r) axpy(1.0, dy.row(r), db.row(0));
  Matrix dx(x.rows, lin.in);
  matmul_nt_acc(dy, ps.value(lin.weight), dx);
  return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm make_layer_norm(ParameterSet& ps, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.gain = ps.add(name + ".gain", 1, dim);
  ln.bias = ps.add(name + ".bias", 1, dim);
  ln.dim = dim;
  return ln;
}

Matrix layer_norm_forward(const ParameterSet& ps, const LayerNorm& ln, const Matrix& x, LayerNormCache* cache) {
  const std::size_t d = x.cols;
  const auto gain = ps.value(ln.gain).row(0);
  const auto bias = ps.value(ln.bias).row(0);
  Matrix y(x.rows, d);
  if (cache) {
    cache->xhat = Matrix(x.rows, d);
    cache->rstd.assign(x.rows, 0.0);
  }
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (xr[c] - mean) * rstd;
      yr[c] = gain[c] * xh + bias[c];
      if (cache) cache->xhat(r, c) = xh;
    }
    if (cache) cache->rstd[r] = rstd;
  }
  return y;
}

Matrix layer_norm_backward(ParameterSet& ps, const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy) {
  const std::size_t d = dy.cols;
  const auto gain = ps.value(ln.gain).row(0);
  auto dgain = ps.grad(ln.gain).row(0);
  auto dbias = ps.grad(ln.bias).row(0);
  Matrix dx(dy.rows, d);
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const auto dyr = dy.row(r);
    const auto xh = cache.xhat.row(r);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += dyr[c] * xh[c];
      dbias[c] += dyr[c];
      dxhat[c] = dyr[c] * gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xh[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    auto dxr = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) dxr[c] = cache.rstd[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Attention

Attention make_attention(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads) {
  Attention att;
  att.q = make_linear(ps, name + ".q", d, d);
  att.k = make_linear(ps, name + ".k", d, d);
  att.v = make_linear(ps, name + ".v", d, d);
  att.o = make_linear(ps, name + ".o", d, d);
  att.heads = heads;
  return att;
}

void attend_row(const double* q, const Matrix& k, const Matrix& v, std::size_t count, std::size_t heads,
                double* probs, double* ctx) {
  const kernels::KernelTable& kt = kernels::active();
  const std::size_t d = k.cols;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < heads; ++h) {
    double* p = probs + h * count;
    const std::size_t off = h * dh;
    for (std::size_t j = 0; j < count; ++j) p[j] = kt.dot(q + off, k.data.data() + j * d + off, dh) * scale;
    softmax_inplace({p, count});
    double* c = ctx + off;
    std::fill(c, c + dh, 0.0);
    for (std::size_t j = 0; j < count; ++j) kt.axpy(p[j], v.data.data() + j * d + off, c, dh);
  }
}

Matrix attention_forward(const ParameterSet& ps, const Attention& att, const Matrix& q_in, const Matrix& kv_in,
                         bool causal, AttentionCache* cache) {
  Matrix q = linear_forward(ps, att.q, q_in);
  Matrix k = linear_forward(ps, att.k, kv_in);
  Matrix v = linear_forward(ps, att.v, kv_in);
  const std::size_t tq = q.rows, tk = k.rows;
  Matrix ctx(tq, q.cols);
  Matrix probs(tq, att.heads * tk);
  for (std::size_t i = 0; i < tq; ++i) {
    const std::size_t count = causal ? std::min(i + 1, tk) : tk;
    attend_row(q.data.data() + i * q.cols, k, v, count, att.heads, probs.data.data() + i * probs.cols,
               ctx.data.data() + i * ctx.cols);
  }
  Matrix out = linear_forward(ps, att.o, ctx);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->ctx = std::move(ctx);
    cache->probs = std::move(probs);
  }
  return out;
}

AttentionGrads attention_backward(ParameterSet& ps, const Attention& att, const AttentionCache& cache,
                                  const Matrix& q_in, const Matrix& kv_in, const Matrix& d_out, bool causal) {
  const kernels::KernelTable& kt = kernels::active();
  const Matrix d_ctx = linear_backward(ps, att.o, cache.ctx, d_out);
  const std::size_t tq = cache.q.rows, tk = cache.k.rows, d = cache.q.cols;
  const std::size_t dh = d / att.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dq(tq, d), dk(tk, d), dv(tk, d);
  std::vector<double> dp(tk);
  for (std::size_t i = 0; i < tq; ++i) {
    const std::size_t count = causal ? std::min(i + 1, tk) : tk;
    for (std::size_t h = 0; h < att.heads; ++h) {
      const std::size_t off = h * dh;
      const double* p = cache.probs.data.data() + i * cache.probs.cols + h * count;
      const double* dc = d_ctx.data.data() + i * d + off;
      double weighted = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        dp[j] = kt.dot(dc, cache.v.data.data() + j * d + off, dh);
        kt.axpy(p[j], dc, dv.data.data() + j * d + off, dh);
        weighted += p[j] * dp[j];
      }
      for (std::size_t j = 0; j < count; ++j) {
        const double ds = p[j] * (dp[j] - weighted) * scale;
        kt.axpy(ds, cache.k.data.data() + j * d + off, dq.data.data() + i * d + off, dh);
        kt.axpy(ds, cache.q.data.data() + i * d + off, dk.data.data() + j * d + off, dh);
      }
    }
  }
  AttentionGrads g;
  g.d_q_in = linear_backward(ps, att.q, q_in, dq);
  g.d_kv_in = linear_backward(ps, att.k, kv_in, dk);
  add_inplace(g.d_kv_in, linear_backward(ps, att.v, kv_in, dv));
  return g;
}

// ---------------------------------------------------------------------------
// Feed-forward

FeedForward make_feed_forward(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t hidden) {
  return {make_linear(ps, name + ".up", d, hidden), make_linear(ps, name + ".down", hidden, d)};
}

Matrix feed_forward(const ParameterSet& ps, const FeedForward& ff, const Matrix& x, FeedForwardCache* cache) {
  Matrix pre = linear_forward(ps, ff.up, x);
  Matrix hidden = pre;
  for (double& h : hidden.data) h = h > 0.0 ? h : 0.0;
  Matrix out = linear_forward(ps, ff.down, hidden);
  if (cache) {
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Matrix feed_forward_backward(ParameterSet& ps, const FeedForward& ff, const FeedForwardCache& cache, const Matrix& x,
                             const Matrix& dy) {
  Matrix dh = linear_backward(ps, ff.down, cache.hidden, dy);
  for (std::size_t i = 0; i < dh.data.size(); ++i)
    if (cache.pre.data[i] <= 0.0) dh.data[i] = 0.0;
  return linear_backward(ps, ff.up, x, dh);
}

// ---------------------------------------------------------------------------
// Encoder

Encoder make_encoder(ParameterSet& ps, const std::string& name, std::size_t layers, std::size_t d, std::size_t heads,
                     std::size_t ffn) {
  Encoder enc;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    enc.layers.push_back({make_layer_norm(ps, p + ".ln_attn", d), make_attention(ps, p + ".attn", d, heads),
                          make_layer_norm(ps, p + ".ln_ffn", d), make_feed_forward(ps, p + ".ffn", d, ffn)});
  }
  if (layers > 0) enc.final_norm = make_layer_norm(ps, name + ".final_norm", d);
  return enc;
}

Matrix encoder_forward(const ParameterSet& ps, const Encoder& enc, Matrix x, RunMode& mode, EncoderCache* cache) {
  if (cache) cache->layers.assign(enc.layers.size(), {});
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    const EncoderLayer& layer = enc.layers[l];
    EncoderLayerCache local;
    EncoderLayerCache& c = cache ? cache->layers[l] : local;

    c.a = layer_norm_forward(ps, layer.ln_attn, x, &c.ln_attn);
    Matrix s = attention_forward(ps, layer.attn, c.a, c.a, false, &c.attn);
    c.drop_attn = dropout_mask(s.rows, s.cols, mode);
    apply_mask(s, c.drop_attn);
    add_inplace(x, s);

    c.b = layer_norm_forward(ps, layer.ln_ffn, x, &c.ln_ffn);
    Matrix f = feed_forward(ps, layer.ffn, c.b, &c.ffn);
    c.drop_ffn = dropout_mask(f.rows, f.cols, mode);
    apply_mask(f, c.drop_ffn);
    add_inplace(x, f);
  }
  if (enc.layers.empty()) return x;
  return layer_norm_forward(ps, enc.final_norm, x, cache ? &cache->final_norm : nullptr);
}

Matrix encoder_backward(ParameterSet& ps, const Encoder& enc, const EncoderCache& cache, Matrix dh) {
  if (enc.layers.empty()) return dh;
  Matrix dx = layer_norm_backward(ps, enc.final_norm, cache.final_norm, dh);
  for (std::size_t l = enc.layers.size(); l-- > 0;) {
    const EncoderLayer& layer = enc.layers[l];
    const EncoderLayerCache& c = cache.layers[l];

    Matrix df = dx;
    apply_mask(df, c.drop_ffn);
    add_inplace(dx, layer_norm_backward(ps, layer.ln_ffn, c.ln_ffn, feed_forward_backward(ps, layer.ffn, c.ffn, c.b, df)));

    Matrix ds = dx;
    apply_mask(ds, c.drop_attn);
    AttentionGrads g = attention_backward(ps, layer.attn, c.attn, c.a, c.a, ds, false);
    add_inplace(g.d_q_in, g.d_kv_in);
    add_inplace(dx, layer_norm_backward(ps, layer.ln_attn, c.ln_attn, g.d_q_in));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Decoder

Decoder make_decoder(ParameterSet& ps, const std::string& name, std::size_t layers, std::size_t d, std::size_t heads,
                     std::size_t ffn) {
  Decoder dec;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    dec.layers.push_back({make_layer_norm(ps, p + ".ln_self", d), make_attention(ps, p + ".self_attn", d, heads),
                          make_layer_norm(ps, p + ".ln_cross", d), make_attention(ps, p + ".cross_attn", d, heads),
                          make_layer_norm(ps, p + ".ln_ffn", d), make_feed_forward(ps, p + ".ffn", d, ffn)});
  }
  if (layers > 0) dec.final_norm = make_layer_norm(ps, name + ".final_norm", d);
  return dec;
}

Matrix decoder_forward(const ParameterSet& ps, const Decoder& dec, Matrix y, const Matrix& memory, RunMode& mode,
                       DecoderCache* cache) {
  if (cache) cache->layers.assign(dec.layers.size(), {});
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    const DecoderLayer& layer = dec.layers[l];
    DecoderLayerCache local;
    DecoderLayerCache& c = cache ? cache->layers[l] : local;

    c.a = layer_norm_forward(ps, layer.ln_self, y, &c.ln_self);
    Matrix s = attention_forward(ps, layer.self_attn, c.a, c.a, true, &c.self_attn);
    c.drop_self = dropout_mask(s.rows, s.cols, mode);
    apply_mask(s, c.drop_self);
    add_inplace(y, s);

    c.c = layer_norm_forward(ps, layer.ln_cross, y, &c.ln_cross);
    Matrix x = attention_forward(ps, layer.cross_attn, c.c, memory, false, &c.cross_attn);
    c.drop_cross = dropout_mask(x.rows, x.cols, mode);
    apply_mask(x, c.drop_cross);
    add_inplace(y, x);

    c.b = layer_norm_forward(ps, layer.ln_ffn, y, &c.ln_ffn);
    Matrix f = feed_forward(ps, layer.ffn, c.b, &c.ffn);
    c.drop_ffn = dropout_mask(f.rows, f.cols, mode);
    apply_mask(f, c.drop_ffn);
    add_inplace(y, f);
  }
  if (dec.layers.empty()) return y;
  return layer_norm_forward(ps, dec.final_norm, y, cache ? &cache->final_norm : nullptr);
}

DecoderGrads decoder_backward(ParameterSet& ps, const Decoder& dec, const DecoderCache& cache, const Matrix& memory,
                              Matrix dh) {
  DecoderGrads out;
  out.d_memory = Matrix(memory.rows, memory.cols);
  if (dec.layers.empty()) {
    out.d_input = std::move(dh);
    return out;
  }
  Matrix dy = layer_norm_backward(ps, dec.final_norm, cache.final_norm, dh);
  for (std::size_t l = dec.layers.size(); l-- > 0;) {
    const DecoderLayer& layer = dec.layers[l];
    const DecoderLayerCache& c = cache.layers[l];

    Matrix df = dy;
    apply_mask(df, c.drop_ffn);
    add_inplace(dy, layer_norm_backward(ps, layer.ln_ffn, c.ln_ffn, feed_forward_backward(ps, layer.ffn, c.ffn, c.b, df)));

    Matrix dx = dy;
    apply_mask(dx, c.drop_cross);
    AttentionGrads gc = attention_backward(ps, layer.cross_attn, c.cross_attn, c.c, memory, dx, false);
    add_inplace(out.d_memory, gc.d_kv_in);
    add_inplace(dy, layer_norm_backward(ps, layer.ln_cross, c.ln_cross, gc.d_q_in));

    Matrix ds = dy;
    apply_mask(ds, c.drop_self);
    AttentionGrads gs = attention_backward(ps, layer.self_attn, c.self_attn, c.a, c.a, ds, true);
    add_inplace(gs.d_q_in, gs.d_kv_in);
    add_inplace(dy, layer_norm_backward(ps, layer.ln_self, c.ln_self, gs.d_q_in));
  }
  out.d_input = std::move(dy);
  return out;
}

DecoderState decoder_start(const ParameterSet& ps, const Decoder& dec, const Matrix& memory) {
  DecoderState st;
  for (const DecoderLayer& layer : dec.layers) {
    st.cross_k.push_back(linear_forward(ps, layer.cross_attn.k, memory));
    st.cross_v.push_back(linear_forward(ps, layer.cross_attn.v, memory));
    st.self_k.emplace_back(0, memory.cols);
    st.self_v.emplace_back(0, memory.cols);
  }
  return st;
}

namespace {

void append_row(Matrix& m, const Matrix& row) {
  m.data.insert(m.data.end(), row.data.begin(), row.data.end());
  ++m.rows;
}

Matrix attend_single(const ParameterSet& ps, const Attention& att, const Matrix& q_in, const Matrix& k, const Matrix& v) {
  const Matrix q = linear_forward(ps, att.q, q_in);
  Matrix ctx(1, q.cols);
  std::vector<double> probs(att.heads * k.rows);
  attend_row(q.data.data(), k, v, k.rows, att.heads, probs.data(), ctx.data.data());
  return linear_forward(ps, att.o, ctx);
}

}  // namespace

std::vector<double> decoder_step(const ParameterSet& ps, const Decoder& dec, DecoderState& st,
                                 std::span<const double> input_row) {
  Matrix y = single_row(input_row);
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    const DecoderLayer& layer = dec.layers[l];
    const Matrix a = layer_norm_forward(ps, layer.ln_self, y, nullptr);
    append_row(st.self_k[l], linear_forward(ps, layer.self_attn.k, a));
    append_row(st.self_v[l], linear_forward(ps, layer.self_attn.v, a));
    add_inplace(y, attend_single(ps, layer.self_attn, a, st.self_k[l], st.self_v[l]));

    const Matrix c = layer_norm_forward(ps, layer.ln_cross, y, nullptr);
    add_inplace(y, attend_single(ps, layer.cross_attn, c, st.cross_k[l], st.cross_v[l]));

    const Matrix b = layer_norm_forward(ps, layer.ln_ffn, y, nullptr);
    add_inplace(y, feed_forward(ps, layer.ffn, b, nullptr));
  }
  ++st.length;
  if (!dec.layers.empty()) y = layer_norm_forward(ps, dec.final_norm, y, nullptr);
  return y.data;
}

}  // namespace ptrner::nn
