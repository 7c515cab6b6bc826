#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "npad/model.hpp"
#include "npad/tasks.hpp"

namespace npad {

// d(loss)/d(theta), one tensor per ModelParams tensor.
class GradientBuffer {
 public:
  static GradientBuffer zeros_like(const ModelParams& params);

  ModelParams& tensors() { return tensors_; }
  const ModelParams& tensors() const { return tensors_; }

  double global_norm() const;
  void scale(double factor);
  void add(const GradientBuffer& other);
  bool all_finite() const;

  friend bool operator==(const GradientBuffer&, const GradientBuffer&) = default;

 private:
  ModelParams tensors_;
};

struct LossAndGradient {
  double loss = 0.0;        // mean over the batch of per-sentence NLL
  std::size_t tokens = 0;   // target tokens in the batch, </s> included
  GradientBuffer grad;
};

// Mean sentence NLL of `batch` and its gradient by backpropagation through
// time. Per-pair gradients are reduced in batch order, so the result does not
// depend on `workers`.
LossAndGradient nll_loss(const ModelParams& params, std::span<const SequencePair> batch,
                         std::size_t workers = 1);

// -log p(target | source), no gradient.
double pair_nll(const ModelParams& params, const SequencePair& pair);

// Mean NLL per target token over a dataset.
double token_nll(const ModelParams& params, std::span<const SequencePair> data,
                 std::size_t workers = 1);

// Rescales every tensor by clip_norm / norm when the global L2 norm exceeds
// clip_norm; otherwise returns the input unchanged.
GradientBuffer clip_gradients(GradientBuffer grad, double clip_norm);

enum class Optimizer { sgd, adam };

Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.01;
  double lr_decay = 1.0;  // multiplied into the learning rate after each epoch
  Optimizer optimizer = Optimizer::adam;
  double clip_norm = 1.0;
  int epochs = 10;
  std::size_t batch_size = 16;
  int patience = 0;  // epochs without validation improvement before stopping; 0 = never
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_nll = 0.0;  // per token, averaged over the epoch's batches
  double valid_nll = 0.0;  // per token, after the epoch
};

struct TrainResult {
  ModelParams params;  // checkpoint with the best validation NLL
  std::vector<EpochStats> trace;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Minibatch training with global-norm clipping. Each epoch shuffles the data,
// buckets it by target length into batches and visits the batches in random
// order. Deterministic in (init, data, cfg) and independent of cfg.workers.
TrainResult train(const ModelParams& init, std::span<const SequencePair> train_set,
                  std::span<const SequencePair> valid_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// CSV with header `epoch,train_nll,valid_nll`.
void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace);

struct TensorCheck {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Element relative error |a - n| / max(|a|, |n|, floor). Both zero gives 0.
inline constexpr double kGradCheckFloor = 1e-6;

// Compares `analytic` against central differences of the pair NLL with step
// `step`. Tensors with no elements report 0.
GradCheckReport compare_gradients(const ModelParams& params, const SequencePair& pair,
                                  const GradientBuffer& analytic, double tolerance,
                                  double step = 1e-5);

GradCheckReport grad_check(const ModelParams& params, const SequencePair& pair, double tolerance,
                           double step = 1e-5);

}  // namespace npad
