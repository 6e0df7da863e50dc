#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "dialogkit/attention.hpp"
#include "dialogkit/util.hpp"
#include "doctest.h"

using namespace dialogkit;

namespace {

ContextResponsePair random_pair(Lcg& rng, int max_enc, int max_dec) {
  ContextResponsePair p;
  const std::size_t c = 1 + rng.below(static_cast<uint64_t>(max_enc));
  const std::size_t r = 1 + rng.below(static_cast<uint64_t>(max_dec));
  for (std::size_t i = 0; i < c; ++i)
    p.context_ids.push_back(static_cast<int32_t>(5 + rng.below(995)));
  for (std::size_t i = 0; i < r; ++i)
    p.response_ids.push_back(static_cast<int32_t>(5 + rng.below(995)));
  return p;
}

// packed sample holding exactly one pair, for per-pair recomputation
PackedSample single_pair_sample(const ContextResponsePair& pair, int max_enc, int max_dec) {
  auto samples = pack({pair}, max_enc, max_dec, nullptr);
  REQUIRE(samples.size() == 1);
  return samples[0];
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg;
  cfg.d_model = 30;
  cfg.n_head = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("mismatched sample arrays are rejected") {
  PackedSample s;
  s.enc_ids = {1, 2};
  s.enc_seg = {1};  // wrong length
  s.dec_ids = {3};
  s.dec_seg = {1};
  ModelConfig cfg;
  CHECK_THROWS_AS(reference_attention(s, cfg, 1), ConfigError);
}

TEST_CASE("outputs cover exactly the non-padding positions") {
  Lcg rng(1);
  auto sample = single_pair_sample(random_pair(rng, 10, 10), 16, 16);
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_head = 2;
  auto out = reference_attention(sample, cfg, 42);

  std::size_t enc_nonpad = 0, dec_nonpad = 0;
  for (int v : sample.enc_seg) enc_nonpad += v != 0;
  for (int v : sample.dec_seg) dec_nonpad += v != 0;
  CHECK(out.enc.size() == enc_nonpad);
  CHECK(out.dec.size() == dec_nonpad);
  for (const auto& [pos, vec] : out.enc) {
    CHECK(sample.enc_seg[static_cast<std::size_t>(pos)] != 0);
    CHECK(vec.size() == static_cast<std::size_t>(cfg.d_model));
  }
}

TEST_CASE("same seed reproduces outputs, different seed does not") {
  Lcg rng(2);
  auto sample = single_pair_sample(random_pair(rng, 8, 8), 16, 16);
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_head = 4;
  auto a = reference_attention(sample, cfg, 7);
  auto b = reference_attention(sample, cfg, 7);
  auto c = reference_attention(sample, cfg, 8);
  REQUIRE(a.enc.size() == b.enc.size());
  for (std::size_t i = 0; i < a.enc.size(); ++i) {
    CHECK(max_abs_diff(a.enc[i].second, b.enc[i].second) == 0.0);
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < a.enc.size(); ++i) {
    diff = std::max(diff, max_abs_diff(a.enc[i].second, c.enc[i].second));
  }
  CHECK(diff > 0.0);
}

TEST_CASE("a packed pair matches its own single-pair computation") {
  // k = 1: the packed sample IS the single-pair sample
  Lcg rng(3);
  auto pair = random_pair(rng, 12, 12);
  auto sample = single_pair_sample(pair, 16, 16);
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.n_head = 4;
  auto a = reference_attention(sample, cfg, 99);
  auto b = reference_attention(sample, cfg, 99);
  for (std::size_t i = 0; i < a.dec.size(); ++i) {
    CHECK(max_abs_diff(a.dec[i].second, b.dec[i].second) == 0.0);
  }
}

TEST_CASE("two packed pairs are isolated: outputs equal per-pair recomputation") {
  Lcg rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto p1 = random_pair(rng, 14, 14);
    auto p2 = random_pair(rng, 14, 14);
    auto packed = pack({p1, p2}, 32, 32, nullptr);
    REQUIRE(packed.size() == 1);
    REQUIRE(packed[0].k == 2);

    ModelConfig cfg;
    cfg.d_model = 32;
    cfg.n_head = 4;
    const uint64_t seed = 1000 + static_cast<uint64_t>(trial);
    auto whole = reference_attention(packed[0], cfg, seed);

    std::map<int, const std::vector<double>*> enc_by_pos, dec_by_pos;
    for (const auto& [pos, vec] : whole.enc) enc_by_pos[pos] = &vec;
    for (const auto& [pos, vec] : whole.dec) dec_by_pos[pos] = &vec;

    const ContextResponsePair* pairs[2] = {&p1, &p2};
    int enc_base = 0;
    int dec_base = 0;
    for (int p = 0; p < 2; ++p) {
      auto alone = reference_attention(single_pair_sample(*pairs[p], 32, 32), cfg, seed);
      for (const auto& [pos, vec] : alone.enc) {
        const auto* packed_vec = enc_by_pos.at(enc_base + pos);
        CHECK(max_abs_diff(*packed_vec, vec) <= 1e-6);
      }
      for (const auto& [pos, vec] : alone.dec) {
        const auto* packed_vec = dec_by_pos.at(dec_base + pos);
        CHECK(max_abs_diff(*packed_vec, vec) <= 1e-6);
      }
      enc_base += static_cast<int>(pairs[p]->context_ids.size());
      dec_base += static_cast<int>(pairs[p]->response_ids.size());
    }
  }
}

TEST_CASE("causality: a future response token never changes earlier outputs") {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_head = 2;
  ContextResponsePair a;
  a.context_ids = {10, 11, 12};
  a.response_ids = {20, 21, 22};
  ContextResponsePair b = a;
  b.response_ids[2] = 999;  // only the last decoder position differs

  auto sa = single_pair_sample(a, 8, 8);
  auto sb = single_pair_sample(b, 8, 8);
  auto oa = reference_attention(sa, cfg, 5);
  auto ob = reference_attention(sb, cfg, 5);
  // decoder positions 0 and 1 must be identical
  CHECK(max_abs_diff(oa.dec[0].second, ob.dec[0].second) == 0.0);
  CHECK(max_abs_diff(oa.dec[1].second, ob.dec[1].second) == 0.0);
  CHECK(max_abs_diff(oa.dec[2].second, ob.dec[2].second) > 0.0);
}
