#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dialogkit {

// One training instance: context token ids (utterances joined with sep, sep
// terminated) and response ids (eos terminated).
struct ContextResponsePair {
  std::vector<int32_t> context_ids;
  std::vector<int32_t> response_ids;
};

// Several pairs concatenated into fixed-length encoder/decoder buffers.
// Segment id 0 marks padding; pair p occupies one contiguous block of
// segment id p on each side. The segment arrays are the single source all
// attention masks derive from.
struct PackedSample {
  std::vector<int32_t> enc_ids;
  std::vector<int32_t> dec_ids;
  std::vector<int32_t> enc_seg;
  std::vector<int32_t> dec_seg;
  int k = 0;  // pairs in this sample
};

struct PackStats {
  uint64_t samples = 0;
  uint64_t pairs_in = 0;
  uint64_t pairs_packed = 0;
  uint64_t rejected = 0;  // pairs that could not fit even alone
  uint64_t enc_pad = 0;
  uint64_t dec_pad = 0;

  double pad_fraction(int max_enc_len, int max_dec_len) const;
  nlohmann::json to_json(int max_enc_len, int max_dec_len) const;
};

// Greedy first-fit packing in input order: a pair joins the open sample only
// when both sides fit, otherwise the sample is flushed. No reordering.
class Packer {
 public:
  Packer(int max_enc_len, int max_dec_len, int pad_id = 0);

  // Returns a completed sample whenever adding this pair forced a flush.
  std::optional<PackedSample> add(const ContextResponsePair& pair);
  // Closes the open sample, if any.
  std::optional<PackedSample> flush();

  const PackStats& stats() const { return stats_; }

 private:
  PackedSample finish();

  int max_enc_len_;
  int max_dec_len_;
  int pad_id_;
  PackedSample current_;
  PackStats stats_;
};

std::vector<PackedSample> pack(const std::vector<ContextResponsePair>& pairs,
                               int max_enc_len, int max_dec_len,
                               PackStats* stats = nullptr);

// Attention mask predicates, straight from the segment ids.
bool enc_self_mask(const PackedSample& s, int i, int j);
bool dec_self_mask(const PackedSample& s, int i, int j);  // causal within a pair
bool cross_mask(const PackedSample& s, int i_dec, int j_enc);

// Logarithmic bucketing of the relative offset j - i: exact buckets near
// zero, log-spaced out to max_distance, clamped beyond. Bidirectional mode
// spends half the buckets on each sign and requires an even bucket count.
int relative_bucket(int i, int j, bool bidirectional, int num_buckets = 32,
                    int max_distance = 128);

// Binary sample files: magic/version header then length-prefixed
// little-endian records. A JSONL mirror exists for debugging.
class PackedWriter {
 public:
  PackedWriter(const std::string& path, int max_enc_len, int max_dec_len);
  ~PackedWriter();
  void write(const PackedSample& s);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class PackedReader {
 public:
  explicit PackedReader(const std::string& path);  // throws DataError on bad header
  ~PackedReader();
  bool next(PackedSample& s);
  int max_enc_len() const;
  int max_dec_len() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

nlohmann::json packed_sample_to_json(const PackedSample& s);

}  // namespace dialogkit
