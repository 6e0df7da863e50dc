#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dialogkit/pack.hpp"

namespace dialogkit {

// Shape of the reference transformer layer. Kept tiny in tests; the bucket
// parameters feed relative_bucket().
struct ModelConfig {
  uint64_t n_param = 0;  // informational
  int n_layer = 1;
  int n_head = 4;
  int d_model = 32;
  int d_ff = 128;  // unused by the attention reference, kept for completeness
  int num_buckets = 32;
  int max_distance = 128;

  void validate() const;  // throws ConfigError unless d_model % n_head == 0
};

// Output vectors for every non-padding position, keyed by position index.
struct AttentionOutputs {
  std::vector<std::pair<int, std::vector<double>>> enc;
  std::vector<std::pair<int, std::vector<double>>> dec;
};

// One layer of masked multi-head attention over a packed sample: encoder
// self-attention, causal decoder self-attention, then cross attention against
// the encoder output. Self-attention logits carry additive biases indexed by
// relative_bucket (bidirectional on the encoder side); cross attention has no
// position bias, which is what keeps packed relative offsets meaningful on
// both sides. Masked logits are set to -1e9 before the softmax. Weights and
// embeddings derive deterministically from `seed` through a fixed linear
// congruential scheme, so identical seeds reproduce identical outputs
// anywhere.
AttentionOutputs reference_attention(const PackedSample& sample, const ModelConfig& config,
                                     uint64_t seed);

}  // namespace dialogkit
