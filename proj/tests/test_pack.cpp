#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dialogkit/pack.hpp"
#include "dialogkit/util.hpp"
#include "doctest.h"

using namespace dialogkit;

namespace {

ContextResponsePair make_pair(int enc_len, int dec_len, int32_t fill = 7) {
  ContextResponsePair p;
  p.context_ids.assign(static_cast<std::size_t>(enc_len), fill);
  p.response_ids.assign(static_cast<std::size_t>(dec_len), fill + 1);
  return p;
}

// reference bucket computation, written independently as a straight-line
// transcription of the log-spaced bucketing rule
int bucket_oracle(int offset, bool bidirectional, int num_buckets, int max_distance) {
  int result = 0;
  int n = num_buckets;
  if (bidirectional) {
    n = num_buckets / 2;
    if (offset > 0) result += n;
    if (offset < 0) offset = -offset;
  } else {
    offset = offset < 0 ? -offset : 0;
  }
  int max_exact = n / 2;
  if (offset < max_exact) return result + offset;
  double ratio = std::log(static_cast<double>(offset) / static_cast<double>(max_exact)) /
                 std::log(static_cast<double>(max_distance) / static_cast<double>(max_exact));
  int idx = max_exact + static_cast<int>(ratio * static_cast<double>(n - max_exact));
  if (idx > n - 1) idx = n - 1;
  return result + idx;
}

}  // namespace

TEST_CASE("exact-fit pairs pack one per sample") {
  std::vector<ContextResponsePair> pairs = {make_pair(128, 128), make_pair(128, 128)};
  PackStats stats;
  auto samples = pack(pairs, 128, 128, &stats);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].k == 1);
  CHECK(samples[1].k == 1);
  CHECK(stats.rejected == 0);
  CHECK(stats.pad_fraction(128, 128) == 0.0);
}

TEST_CASE("greedy first fit: 60+60 fits, third pair opens a new sample") {
  std::vector<ContextResponsePair> pairs = {make_pair(60, 40), make_pair(60, 40),
                                            make_pair(60, 40)};
  PackStats stats;
  auto samples = pack(pairs, 128, 128, &stats);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].k == 2);
  CHECK(samples[1].k == 1);
  CHECK(stats.pairs_in == 3);
  CHECK(stats.pairs_packed == 3);
}

TEST_CASE("empty input packs to nothing") {
  PackStats stats;
  CHECK(pack({}, 128, 128, &stats).empty());
  CHECK(stats.samples == 0);
}

TEST_CASE("oversized or empty pairs are rejected and counted") {
  std::vector<ContextResponsePair> pairs = {make_pair(129, 10), make_pair(10, 129),
                                            make_pair(0, 10), make_pair(40, 40)};
  PackStats stats;
  auto samples = pack(pairs, 128, 128, &stats);
  REQUIRE(samples.size() == 1);
  CHECK(stats.rejected == 3);
  CHECK(stats.pairs_packed == 1);
  CHECK(stats.pairs_in == 4);
}

TEST_CASE("segment layout: contiguous non-decreasing blocks then padding") {
  Lcg rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ContextResponsePair> pairs;
    std::size_t n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back(make_pair(1 + static_cast<int>(rng.below(128)),
                                1 + static_cast<int>(rng.below(128)),
                                static_cast<int32_t>(rng.below(500))));
    }
    PackStats stats;
    auto samples = pack(pairs, 128, 128, &stats);

    uint64_t k_total = 0;
    for (const auto& s : samples) {
      k_total += static_cast<uint64_t>(s.k);
      REQUIRE(s.enc_ids.size() == 128);
      REQUIRE(s.enc_seg.size() == 128);
      for (const auto* seg : {&s.enc_seg, &s.dec_seg}) {
        int prev = 1;
        bool in_padding = false;
        std::vector<int> block_sizes(static_cast<std::size_t>(s.k) + 1, 0);
        for (int v : *seg) {
          if (v == 0) {
            in_padding = true;
            continue;
          }
          CHECK_FALSE(in_padding);  // no data after padding starts
          CHECK(v >= prev);
          CHECK(v <= s.k);
          CHECK(v - prev <= 1);  // segments are consecutive
          prev = v;
          ++block_sizes[static_cast<std::size_t>(v)];
        }
        for (int p = 1; p <= s.k; ++p) CHECK(block_sizes[static_cast<std::size_t>(p)] > 0);
      }
    }
    // conservation
    CHECK(k_total == stats.pairs_packed);
    CHECK(stats.pairs_packed == stats.pairs_in - stats.rejected);
  }
}

TEST_CASE("mask predicates follow the segment ids") {
  std::vector<ContextResponsePair> pairs = {make_pair(3, 2), make_pair(2, 3)};
  auto samples = pack(pairs, 8, 8, nullptr);
  REQUIRE(samples.size() == 1);
  const auto& s = samples[0];
  // enc: [1 1 1 2 2 0 0 0], dec: [1 1 2 2 2 0 0 0]

  SUBCASE("encoder self attention") {
    CHECK(enc_self_mask(s, 0, 2));       // same pair
    CHECK(enc_self_mask(s, 3, 4));       // same pair
    CHECK_FALSE(enc_self_mask(s, 0, 3)); // across pairs
    CHECK_FALSE(enc_self_mask(s, 3, 0));
    CHECK_FALSE(enc_self_mask(s, 0, 6)); // padding
    CHECK_FALSE(enc_self_mask(s, 6, 6)); // padding row
  }
  SUBCASE("decoder self attention is causal within a pair") {
    CHECK(dec_self_mask(s, 1, 1));       // i == j
    CHECK(dec_self_mask(s, 1, 0));       // j < i same pair
    CHECK_FALSE(dec_self_mask(s, 0, 1)); // future
    CHECK(dec_self_mask(s, 4, 2));
    CHECK_FALSE(dec_self_mask(s, 2, 1)); // pair 2 cannot see pair 1
    CHECK_FALSE(dec_self_mask(s, 1, 2));
  }
  SUBCASE("cross attention pairs decoder and encoder blocks") {
    CHECK(cross_mask(s, 0, 0));
    CHECK(cross_mask(s, 1, 2));
    CHECK(cross_mask(s, 2, 3));
    CHECK_FALSE(cross_mask(s, 0, 3));  // dec pair 1, enc pair 2
    CHECK_FALSE(cross_mask(s, 2, 0));  // dec pair 2, enc pair 1
    CHECK_FALSE(cross_mask(s, 0, 7));  // enc padding
    CHECK_FALSE(cross_mask(s, 7, 0));  // dec padding
  }
  SUBCASE("symmetry and self-attendance") {
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        CHECK(enc_self_mask(s, i, j) == enc_self_mask(s, j, i));
      }
      if (s.enc_seg[static_cast<std::size_t>(i)] != 0) CHECK(enc_self_mask(s, i, i));
      if (s.dec_seg[static_cast<std::size_t>(i)] != 0) CHECK(dec_self_mask(s, i, i));
    }
  }
}

TEST_CASE("relative bucket: spot values") {
  CHECK(relative_bucket(5, 5, true) == 0);
  CHECK(relative_bucket(5, 5, false) == 0);
  CHECK(relative_bucket(0, 1, true) == 17);   // offset +1
  CHECK(relative_bucket(1, 0, true) == 1);    // offset -1
  // beyond max_distance clamps to the same bucket as max_distance - 1
  CHECK(relative_bucket(0, 500, true) == relative_bucket(0, 127, true));
  CHECK(relative_bucket(500, 0, true) == relative_bucket(127, 0, true));
  CHECK(relative_bucket(500, 0, false) == relative_bucket(127, 0, false));
  // unidirectional mode ignores future offsets
  CHECK(relative_bucket(3, 9, false) == 0);
}

TEST_CASE("relative bucket matches the straight-line oracle over all offsets") {
  for (int offset = -128; offset <= 128; ++offset) {
    CHECK(relative_bucket(0, offset, true, 32, 128) == bucket_oracle(offset, true, 32, 128));
    CHECK(relative_bucket(0, offset, false, 32, 128) ==
          bucket_oracle(offset, false, 32, 128));
    CHECK(relative_bucket(0, offset, true, 16, 64) == bucket_oracle(offset, true, 16, 64));
  }
}

TEST_CASE("relative bucket depends only on the offset") {
  Lcg rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    int i = static_cast<int>(rng.below(128));
    int j = static_cast<int>(rng.below(128));
    int shift = static_cast<int>(rng.below(64));
    CHECK(relative_bucket(i, j, true) == relative_bucket(i + shift, j + shift, true));
    CHECK(relative_bucket(i, j, false) == relative_bucket(i + shift, j + shift, false));
  }
}

TEST_CASE("binary format round trip") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "dialogkit_packed.bin").string();

  std::vector<ContextResponsePair> pairs = {make_pair(5, 3, 11), make_pair(4, 6, 21),
                                            make_pair(120, 120, 31)};
  auto samples = pack(pairs, 128, 128, nullptr);

  {
    PackedWriter writer(path, 128, 128);
    for (const auto& s : samples) writer.write(s);
    writer.close();
  }
  {
    PackedReader reader(path);
    CHECK(reader.max_enc_len() == 128);
    CHECK(reader.max_dec_len() == 128);
    std::vector<PackedSample> back;
    PackedSample s;
    while (reader.next(s)) back.push_back(s);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].k == samples[i].k);
      CHECK(back[i].enc_ids == samples[i].enc_ids);
      CHECK(back[i].dec_ids == samples[i].dec_ids);
      CHECK(back[i].enc_seg == samples[i].enc_seg);
      CHECK(back[i].dec_seg == samples[i].dec_seg);
    }
  }
  SUBCASE("corrupt header is rejected") {
    std::ofstream bad(path, std::ios::binary);
    bad << "NOPE";
    bad.close();
    CHECK_THROWS_AS(PackedReader{path}, DataError);
  }
  fs::remove(path);
}

TEST_CASE("sample json mirror carries all arrays") {
  auto samples = pack({make_pair(2, 2)}, 4, 4, nullptr);
  REQUIRE(samples.size() == 1);
  auto j = packed_sample_to_json(samples[0]);
  CHECK(j["k"] == 1);
  CHECK(j["enc_ids"].size() == 4);
  CHECK(j["dec_seg"].size() == 4);
}
