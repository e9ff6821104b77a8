#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gearformer::model {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline constexpr int kRequirementFeatures = 11;

namespace detail {
struct TransformerLayout;
}

struct Hyperparams {
  int d_model = 128;
  int heads = 4;
  int encoder_layers = 4;
  int decoder_layers = 4;
  int ffn_multiplier = 4;
  int context_length = 64;
  // The requirement vector is projected into this many encoder positions.
  int memory_slots = 4;

  // Throws Error(kBadRequest) for non-positive sizes or heads not dividing d_model.
  void check() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// One teacher-forced sequence. inputs[t] predicts targets[t]; masks holds
// targets.size() rows of vocab_size admissibility flags.
struct TokenExample {
  std::vector<double> features;
  std::vector<int> inputs;
  std::vector<int> targets;
  std::vector<std::uint8_t> masks;
};

struct LossStats {
  double masked_ce = 0.0;  // sum over tokens of -log p_masked(target)
  double validity = 0.0;   // sum over tokens of -log(unmasked mass on admissible tokens)
  int tokens = 0;
};

// Named parameter tensors in a fixed order; gradients share the layout.
template <typename T>
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Matrix<T>> values;

  std::size_t count() const;
  std::vector<Matrix<T>> zeros_like() const;
};

// Pre-norm encoder-decoder transformer.
//
// Encoder: requirement features -> memory_slots positions (one linear map),
// plus learned slot embeddings, then encoder_layers of self-attention + FFN.
// Decoder: token + learned position embeddings, decoder_layers of causal
// self-attention, cross-attention to the memory, and FFN; final norm and an
// untied output projection to vocabulary logits.
template <typename T>
class Transformer {
 public:
  Transformer(const Hyperparams& hp, int vocab_size, std::uint64_t seed);

  const Hyperparams& hyperparams() const { return hp_; }
  int vocab_size() const { return vocab_size_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // Teacher-forced pass over a batch. Fills `grads` (same layout as params,
  // accumulated, scaled by 1/tokens) when non-null. `validity_weight` adds
  // weight * -log(sum of unmasked probability on admissible tokens).
  LossStats forward_backward(std::span<const TokenExample* const> batch, double validity_weight,
                             std::vector<Matrix<T>>* grads) const;

  // Logits of every position for one sequence, via the batched path.
  Matrix<T> sequence_logits(std::span<const double> features, std::span<const int> inputs) const;

  // Encoded requirements plus per-layer cross-attention keys and values.
  struct Memory {
    Matrix<T> states;
    std::vector<Matrix<T>> keys;
    std::vector<Matrix<T>> values;
  };

  // Cached self-attention keys/values of the tokens fed so far.
  struct DecoderState {
    std::vector<Matrix<T>> keys;
    std::vector<Matrix<T>> values;
    int length = 0;

    void truncate(int new_length) { length = new_length; }
  };

  Memory encode(std::span<const double> features) const;
  DecoderState start_decoding() const;
  // Feeds one token at position state.length and returns next-token logits.
  // Throws Error(kContextLimit) when the context is full.
  RowVector<T> step(const Memory& memory, DecoderState& state, int token) const;

 private:
  Hyperparams hp_;
  int vocab_size_;
  ParamSet<T> params_;
  std::shared_ptr<const detail::TransformerLayout> layout_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace gearformer::model
