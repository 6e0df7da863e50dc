#include "dialogkit/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "dialogkit/util.hpp"

namespace dialogkit {

void ModelConfig::validate() const {
  if (n_head < 1 || d_model < 1) throw ConfigError("n_head and d_model must be >= 1");
  if (d_model % n_head != 0) throw ConfigError("d_model must be divisible by n_head");
  if (num_buckets < 2) throw ConfigError("num_buckets must be >= 2");
  if (max_distance < 2) throw ConfigError("max_distance must be >= 2");
  if (n_layer != 1) throw ConfigError("the reference implements exactly one layer");
}

namespace {

constexpr double kMaskedLogit = -1e9;

enum ParamTag : uint64_t {
  kEmb = 1,
  kEncWq,
  kEncWk,
  kEncWv,
  kEncWo,
  kDecWq,
  kDecWk,
  kDecWv,
  kDecWo,
  kCrossWq,
  kCrossWk,
  kCrossWv,
  kCrossWo,
  kEncBias,
  kDecBias,
};

double param_unit(uint64_t seed, uint64_t tag, uint64_t a, uint64_t b) {
  Lcg gen(mix64(mix64(mix64(seed ^ (tag * 0x9e3779b97f4a7c15ull)) ^ a) ^ b));
  return gen.unit();
}

// token embedding component; depends only on token id, never on position
double embedding(uint64_t seed, int32_t token, int dim) {
  return (param_unit(seed, kEmb, static_cast<uint64_t>(static_cast<int64_t>(token)),
                     static_cast<uint64_t>(dim)) *
              2.0 -
          1.0) *
         0.1;
}

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> data;
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

Matrix make_weight(uint64_t seed, ParamTag tag, int rows, int cols) {
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data.resize(static_cast<std::size_t>(rows) * cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m.at(r, c) = (param_unit(seed, tag, static_cast<uint64_t>(r),
                               static_cast<uint64_t>(c)) *
                        2.0 -
                    1.0) *
                   scale;
    }
  }
  return m;
}

Matrix make_bias_table(uint64_t seed, ParamTag tag, int num_buckets, int n_head) {
  Matrix m;
  m.rows = num_buckets;
  m.cols = n_head;
  m.data.resize(static_cast<std::size_t>(num_buckets) * n_head);
  for (int b = 0; b < num_buckets; ++b) {
    for (int h = 0; h < n_head; ++h) {
      m.data[static_cast<std::size_t>(b) * n_head + h] =
          (param_unit(seed, tag, static_cast<uint64_t>(b), static_cast<uint64_t>(h)) * 2.0 -
           1.0) *
          0.5;
    }
  }
  return m;
}

// x (len x d) times W (d x d)
std::vector<std::vector<double>> project(const std::vector<std::vector<double>>& x,
                                         const Matrix& w) {
  std::vector<std::vector<double>> out(x.size(), std::vector<double>(w.cols, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int c = 0; c < w.cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < w.rows; ++r) acc += x[i][static_cast<std::size_t>(r)] * w.at(r, c);
      out[i][static_cast<std::size_t>(c)] = acc;
    }
  }
  return out;
}

struct AttentionSpec {
  const Matrix* wq;
  const Matrix* wk;
  const Matrix* wv;
  const Matrix* wo;
  const Matrix* bias;  // nullptr = no position bias
  bool bidirectional = true;
};

// Masked multi-head attention with residual connection. mask(i, j) gates
// whether query position i may read key position j.
template <class MaskFn>
std::vector<std::vector<double>> attend(const std::vector<std::vector<double>>& queries_in,
                                        const std::vector<std::vector<double>>& keys_in,
                                        const ModelConfig& cfg, const AttentionSpec& spec,
                                        MaskFn&& mask) {
  const int d_head = cfg.d_model / cfg.n_head;
  const auto q = project(queries_in, *spec.wq);
  const auto k = project(keys_in, *spec.wk);
  const auto v = project(keys_in, *spec.wv);
  const std::size_t qn = queries_in.size();
  const std::size_t kn = keys_in.size();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

  std::vector<std::vector<double>> concat(qn, std::vector<double>(cfg.d_model, 0.0));
  std::vector<double> logits(kn);
  std::vector<double> weights(kn);
  for (int h = 0; h < cfg.n_head; ++h) {
    const int base = h * d_head;
    for (std::size_t i = 0; i < qn; ++i) {
      for (std::size_t j = 0; j < kn; ++j) {
        if (!mask(static_cast<int>(i), static_cast<int>(j))) {
          logits[j] = kMaskedLogit;
          continue;
        }
        double dot = 0.0;
        for (int d = 0; d < d_head; ++d)
          dot += q[i][static_cast<std::size_t>(base + d)] *
                 k[j][static_cast<std::size_t>(base + d)];
        double logit = dot * inv_sqrt;
        if (spec.bias != nullptr) {
          const int bucket =
              relative_bucket(static_cast<int>(i), static_cast<int>(j), spec.bidirectional,
                              cfg.num_buckets, cfg.max_distance);
          logit += spec.bias->at(bucket, h);
        }
        logits[j] = logit;
      }
      double mx = kMaskedLogit;
      for (std::size_t j = 0; j < kn; ++j) mx = std::max(mx, logits[j]);
      double denom = 0.0;
      for (std::size_t j = 0; j < kn; ++j) {
        weights[j] = std::exp(logits[j] - mx);
        denom += weights[j];
      }
      for (int d = 0; d < d_head; ++d) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kn; ++j)
          acc += weights[j] * v[j][static_cast<std::size_t>(base + d)];
        concat[i][static_cast<std::size_t>(base + d)] = acc / denom;
      }
    }
  }

  auto out = project(concat, *spec.wo);
  for (std::size_t i = 0; i < qn; ++i) {
    for (int d = 0; d < cfg.d_model; ++d)
      out[i][static_cast<std::size_t>(d)] += queries_in[i][static_cast<std::size_t>(d)];
  }
  return out;
}

std::vector<std::vector<double>> embed(const std::vector<int32_t>& ids, uint64_t seed,
                                       int d_model) {
  std::vector<std::vector<double>> x(ids.size(), std::vector<double>(d_model));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int d = 0; d < d_model; ++d) x[i][static_cast<std::size_t>(d)] = embedding(seed, ids[i], d);
  }
  return x;
}

}  // namespace

AttentionOutputs reference_attention(const PackedSample& sample, const ModelConfig& config,
                                     uint64_t seed) {
  config.validate();
  if (sample.enc_ids.size() != sample.enc_seg.size() ||
      sample.dec_ids.size() != sample.dec_seg.size() || sample.enc_ids.empty() ||
      sample.dec_ids.empty()) {
    throw ConfigError("sample id/segment arrays disagree");
  }

  const Matrix enc_wq = make_weight(seed, kEncWq, config.d_model, config.d_model);
  const Matrix enc_wk = make_weight(seed, kEncWk, config.d_model, config.d_model);
  const Matrix enc_wv = make_weight(seed, kEncWv, config.d_model, config.d_model);
  const Matrix enc_wo = make_weight(seed, kEncWo, config.d_model, config.d_model);
  const Matrix dec_wq = make_weight(seed, kDecWq, config.d_model, config.d_model);
  const Matrix dec_wk = make_weight(seed, kDecWk, config.d_model, config.d_model);
  const Matrix dec_wv = make_weight(seed, kDecWv, config.d_model, config.d_model);
  const Matrix dec_wo = make_weight(seed, kDecWo, config.d_model, config.d_model);
  const Matrix cross_wq = make_weight(seed, kCrossWq, config.d_model, config.d_model);
  const Matrix cross_wk = make_weight(seed, kCrossWk, config.d_model, config.d_model);
  const Matrix cross_wv = make_weight(seed, kCrossWv, config.d_model, config.d_model);
  const Matrix cross_wo = make_weight(seed, kCrossWo, config.d_model, config.d_model);
  const Matrix enc_bias = make_bias_table(seed, kEncBias, config.num_buckets, config.n_head);
  const Matrix dec_bias = make_bias_table(seed, kDecBias, config.num_buckets, config.n_head);

  const auto enc_x = embed(sample.enc_ids, seed, config.d_model);
  const auto dec_x = embed(sample.dec_ids, seed, config.d_model);

  AttentionSpec enc_spec{&enc_wq, &enc_wk, &enc_wv, &enc_wo, &enc_bias, true};
  const auto enc_h = attend(enc_x, enc_x, config, enc_spec,
                            [&](int i, int j) { return enc_self_mask(sample, i, j); });

  AttentionSpec dec_spec{&dec_wq, &dec_wk, &dec_wv, &dec_wo, &dec_bias, false};
  const auto dec_h = attend(dec_x, dec_x, config, dec_spec,
                            [&](int i, int j) { return dec_self_mask(sample, i, j); });

  AttentionSpec cross_spec{&cross_wq, &cross_wk, &cross_wv, &cross_wo, nullptr, true};
  const auto dec_out = attend(dec_h, enc_h, config, cross_spec,
                              [&](int i, int j) { return cross_mask(sample, i, j); });

  AttentionOutputs out;
  for (std::size_t i = 0; i < enc_h.size(); ++i) {
    if (sample.enc_seg[i] != 0) out.enc.emplace_back(static_cast<int>(i), enc_h[i]);
  }
  for (std::size_t i = 0; i < dec_out.size(); ++i) {
    if (sample.dec_seg[i] != 0) out.dec.emplace_back(static_cast<int>(i), dec_out[i]);
  }
  return out;
}

}  // namespace dialogkit
