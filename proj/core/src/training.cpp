#include "npad/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>
#include <utility>

#include "cells.hpp"
#include "npad/errors.hpp"
#include "npad/model_io.hpp"
#include "npad/parallel.hpp"

namespace npad {

namespace {

std::vector<Mat*> tensor_list(ModelParams& p) {
  std::vector<Mat*> out;
  p.for_each_tensor([&](const std::string&, Mat& m) { out.push_back(&m); });
  return out;
}

std::vector<const Mat*> tensor_list(const ModelParams& p) {
  std::vector<const Mat*> out;
  p.for_each_tensor([&](const std::string&, const Mat& m) { out.push_back(&m); });
  return out;
}

// Unscaled NLL of one pair; adds its gradient into `grad`.
double pair_backprop(const ModelParams& params, const SequencePair& pair, ModelParams& grad) {
  require(!pair.target.empty() && pair.target.back() == Vocab::kEos,
          "nll_loss: target must end with </s>");
  const std::size_t H = params.dims.d_hid;
  const std::size_t E = params.dims.d_emb;
  const std::size_t A = params.dims.d_annotation();

  detail::EncoderTrace enc_trace;
  const EncodedSource enc = detail::encode_traced(params, pair.source, &enc_trace);
  const std::size_t n = enc.source_len();

  Vec mean(A);
  for (const Vec& a : enc.annotations) axpy(1.0, a.span(), mean.span());
  for (double& x : mean) x /= static_cast<double>(n);
  const DecoderState init = initial_state(params, enc);

  const Vec zero_noise(H);
  std::vector<detail::StepTrace> steps(pair.target.size());
  double loss = 0.0;
  Vec h = init.h;
  TokenId prev = Vocab::kBos;
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    detail::step_forward(params, enc, h.span(), prev, zero_noise.span(), steps[t]);
    loss -= steps[t].log_probs[static_cast<std::size_t>(pair.target[t])];
    h = steps[t].gru.h;
    prev = pair.target[t];
  }

  std::vector<Vec> dann(n, Vec(A));
  Vec dh(H);
  Vec dlogits(params.dims.tgt_vocab);
  for (std::size_t t = steps.size(); t-- > 0;) {
    const auto& tr = steps[t];
    for (std::size_t j = 0; j < dlogits.dim(); ++j) dlogits[j] = std::exp(tr.log_probs[j]);
    dlogits[static_cast<std::size_t>(pair.target[t])] -= 1.0;

    axpy(1.0, dlogits.span(), grad.out_bias.flat());
    outer_accumulate(grad.out_hidden, dlogits.span(), tr.gru.h.span());
    outer_accumulate(grad.out_context, dlogits.span(), tr.attention.context.span());
    matvec_transposed_accumulate(params.out_hidden, dlogits.span(), dh.span());

    Vec dx(E + A);
    matvec_transposed_accumulate(params.out_context, dlogits.span(), std::span(dx.data() + E, A));
    Vec dquery(H);
    detail::gru_backward(params.dec, tr.gru, dh.span(), grad.dec, dx.span(), dquery.span());
    axpy(1.0, std::span<const double>(dx.data(), E),
         grad.tgt_embed.row(static_cast<std::size_t>(tr.prev_token)));
    detail::attention_backward(params, tr.attention, enc, std::span<const double>(dx.data() + E, A),
                               grad, dquery.span(), dann);
    dh = std::move(dquery);
  }

  // h_0 = tanh(init_w * mean + init_bias)
  Vec dpre(H);
  for (std::size_t i = 0; i < H; ++i) dpre[i] = dh[i] * (1.0 - init.h[i] * init.h[i]);
  axpy(1.0, dpre.span(), grad.init_bias.flat());
  outer_accumulate(grad.init_w, dpre.span(), mean.span());
  Vec dmean(A);
  matvec_transposed_accumulate(params.init_w, dpre.span(), dmean.span());
  for (Vec& d : dann) axpy(1.0 / static_cast<double>(n), dmean.span(), d.span());

  Vec dstate(H);
  for (std::size_t i = n; i-- > 0;) {
    axpy(1.0, std::span<const double>(dann[i].data(), H), dstate.span());
    Vec dx(E), dprev(H);
    detail::gru_backward(params.enc_fwd, enc_trace.fwd[i], dstate.span(), grad.enc_fwd, dx.span(),
                         dprev.span());
    axpy(1.0, dx.span(), grad.src_embed.row(static_cast<std::size_t>(pair.source[i])));
    dstate = std::move(dprev);
  }
  dstate = Vec(H);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, std::span<const double>(dann[i].data() + H, H), dstate.span());
    Vec dx(E), dprev(H);
    detail::gru_backward(params.enc_bwd, enc_trace.bwd[i], dstate.span(), grad.enc_bwd, dx.span(),
                         dprev.span());
    axpy(1.0, dx.span(), grad.src_embed.row(static_cast<std::size_t>(pair.source[i])));
    dstate = std::move(dprev);
  }
  return loss;
}

std::string format_double(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

GradientBuffer GradientBuffer::zeros_like(const ModelParams& params) {
  GradientBuffer g;
  g.tensors_ = ModelParams::zeros(params.dims);
  return g;
}

double GradientBuffer::global_norm() const {
  double sq = 0.0;
  tensors_.for_each_tensor([&](const std::string&, const Mat& m) {
    for (double x : m.flat()) sq += x * x;
  });
  return std::sqrt(sq);
}

void GradientBuffer::scale(double factor) {
  tensors_.for_each_tensor([&](const std::string&, Mat& m) {
    for (double& x : m.flat()) x *= factor;
  });
}

void GradientBuffer::add(const GradientBuffer& other) {
  require(tensors_.dims == other.tensors_.dims, "GradientBuffer::add: shape mismatch");
  auto mine = tensor_list(tensors_);
  auto theirs = tensor_list(other.tensors_);
  for (std::size_t k = 0; k < mine.size(); ++k) axpy(1.0, theirs[k]->flat(), mine[k]->flat());
}

bool GradientBuffer::all_finite() const {
  bool ok = true;
  tensors_.for_each_tensor([&](const std::string&, const Mat& m) { ok = ok && m.all_finite(); });
  return ok;
}

LossAndGradient nll_loss(const ModelParams& params, std::span<const SequencePair> batch,
                         std::size_t workers) {
  require(!batch.empty(), "nll_loss: empty batch");
  std::vector<GradientBuffer> per_pair(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    per_pair[i] = GradientBuffer::zeros_like(params);
    losses[i] = pair_backprop(params, batch[i], per_pair[i].tensors());
  });

  LossAndGradient out{0.0, 0, std::move(per_pair[0])};
  double total = losses[0];
  out.tokens = batch[0].target.size();
  for (std::size_t i = 1; i < batch.size(); ++i) {
    out.grad.add(per_pair[i]);
    total += losses[i];
    out.tokens += batch[i].target.size();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss = total * inv;
  out.grad.scale(inv);
  if (!std::isfinite(out.loss) || !out.grad.all_finite()) {
    throw TrainingDivergence("non-finite loss or gradient (loss = " + format_double(out.loss) + ")");
  }
  return out;
}

double pair_nll(const ModelParams& params, const SequencePair& pair) {
  return -score_sequence(params, pair.source, pair.target);
}

double token_nll(const ModelParams& params, std::span<const SequencePair> data,
                 std::size_t workers) {
  require(!data.empty(), "token_nll: empty dataset");
  std::vector<double> nll(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) { nll[i] = pair_nll(params, data[i]); });
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += nll[i];
    tokens += data[i].target.size();
  }
  return total / static_cast<double>(tokens);
}

GradientBuffer clip_gradients(GradientBuffer grad, double clip_norm) {
  require(clip_norm > 0.0, "clip_gradients: clip_norm must be positive");
  const double norm = grad.global_norm();
  if (norm > clip_norm) grad.scale(clip_norm / norm);
  return grad;
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

TrainResult train(const ModelParams& init, std::span<const SequencePair> train_set,
                  std::span<const SequencePair> valid_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.clip_norm <= 0.0) throw ConfigError("train: clip_norm must be positive");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.learning_rate < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (train_set.empty() || valid_set.empty()) throw ConfigError("train: empty train or valid set");
  {
    std::vector<SequencePair> sorted_train(train_set.begin(), train_set.end());
    auto by_value = [](const SequencePair& a, const SequencePair& b) {
      return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    };
    std::sort(sorted_train.begin(), sorted_train.end(), by_value);
    for (const auto& pair : valid_set) {
      if (std::binary_search(sorted_train.begin(), sorted_train.end(), pair, by_value)) {
        throw ConfigError("train: train and valid sets are not disjoint");
      }
    }
  }
  init.validate();

  ModelParams params = init;
  ModelParams adam_m = ModelParams::zeros(init.dims);
  ModelParams adam_v = ModelParams::zeros(init.dims);
  auto weights = tensor_list(params);
  auto first = tensor_list(adam_m);
  auto second = tensor_list(adam_v);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  long long update_count = 0;

  TrainResult result;
  result.params = params;
  double best_valid = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  double lr = cfg.learning_rate;

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)));
      std::swap(order[i - 1], order[j]);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return train_set[a].target.size() < train_set[b].target.size();
    });
    std::vector<std::vector<SequencePair>> batches;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<SequencePair> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(train_set[order[k]]);
      }
      batches.push_back(std::move(batch));
    }
    for (std::size_t i = batches.size(); i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)));
      std::swap(batches[i - 1], batches[j]);
    }

    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      LossAndGradient lg;
      try {
        lg = nll_loss(params, batches[b], cfg.workers);
      } catch (const TrainingDivergence& e) {
        throw TrainingDivergence("epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + ": " + e.what());
      }
      epoch_loss += lg.loss * static_cast<double>(batches[b].size());
      epoch_tokens += lg.tokens;
      GradientBuffer g = clip_gradients(std::move(lg.grad), cfg.clip_norm);
      auto grads = tensor_list(std::as_const(g.tensors()));
      ++update_count;
      const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(update_count));
      const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(update_count));
      for (std::size_t k = 0; k < weights.size(); ++k) {
        auto w = weights[k]->flat();
        auto d = grads[k]->flat();
        if (cfg.optimizer == Optimizer::sgd) {
          for (std::size_t e = 0; e < w.size(); ++e) w[e] -= lr * d[e];
          continue;
        }
        auto m = first[k]->flat();
        auto v = second[k]->flat();
        for (std::size_t e = 0; e < w.size(); ++e) {
          m[e] = kBeta1 * m[e] + (1.0 - kBeta1) * d[e];
          v[e] = kBeta2 * v[e] + (1.0 - kBeta2) * d[e] * d[e];
          w[e] -= lr * (m[e] / bias1) / (std::sqrt(v[e] / bias2) + kEps);
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_nll = epoch_loss / static_cast<double>(epoch_tokens);
    stats.valid_nll = token_nll(params, valid_set, cfg.workers);
    if (!std::isfinite(stats.valid_nll)) {
      throw TrainingDivergence("epoch " + std::to_string(epoch) + ": non-finite validation NLL");
    }
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stats.valid_nll < best_valid) {
      best_valid = stats.valid_nll;
      result.params = params;
      result.best_epoch = epoch;
      stale_epochs = 0;
    } else if (cfg.patience > 0 && ++stale_epochs >= cfg.patience) {
      break;
    }
    lr *= cfg.lr_decay;
  }
  return result;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  write_file_atomically(path, [&](std::ostream& out) {
    out << "epoch,train_nll,valid_nll\n";
    for (const auto& s : trace) {
      out << s.epoch << ',' << format_double(s.train_nll) << ',' << format_double(s.valid_nll)
          << '\n';
    }
  });
}

GradCheckReport compare_gradients(const ModelParams& params, const SequencePair& pair,
                                  const GradientBuffer& analytic, double tolerance, double step) {
  require(analytic.tensors().dims == params.dims, "compare_gradients: shape mismatch");
  ModelParams probe = params;
  auto probe_tensors = tensor_list(probe);
  auto grad_tensors = tensor_list(analytic.tensors());
  std::vector<std::string> names;
  params.for_each_tensor([&](const std::string& name, const Mat&) { names.push_back(name); });

  GradCheckReport report;
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    TensorCheck check{names[k], probe_tensors[k]->size(), 0.0};
    auto w = probe_tensors[k]->flat();
    auto a = grad_tensors[k]->flat();
    for (std::size_t e = 0; e < w.size(); ++e) {
      const double saved = w[e];
      w[e] = saved + step;
      const double up = pair_nll(probe, pair);
      w[e] = saved - step;
      const double down = pair_nll(probe, pair);
      w[e] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double diff = std::abs(a[e] - numeric);
      if (diff == 0.0) continue;
      const double denom = std::max({std::abs(a[e]), std::abs(numeric), kGradCheckFloor});
      check.max_rel_error = std::max(check.max_rel_error, diff / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

GradCheckReport grad_check(const ModelParams& params, const SequencePair& pair, double tolerance,
                           double step) {
  const std::span<const SequencePair> batch(&pair, 1);
  const auto lg = nll_loss(params, batch);
  return compare_gradients(params, pair, lg.grad, tolerance, step);
}

}  // namespace npad
