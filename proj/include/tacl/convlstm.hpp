#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tacl/attention.hpp"
#include "tacl/field.hpp"

namespace tacl {

struct Tensor {
  std::vector<int> dims;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d);

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

// Gate order everywhere: input, forget, output, cell candidate.
inline constexpr int kGateCount = 4;
inline constexpr const char* kGateNames[kGateCount] = {"i", "f", "o", "g"};

struct ConvLSTMParams {
  int hidden_channels = 0;
  int kernel = 0;
  std::array<Tensor, kGateCount> w_x;  // {H_c, 1, k, k}
  std::array<Tensor, kGateCount> w_h;  // {H_c, H_c, k, k}
  std::array<Tensor, kGateCount> bias; // {H_c}
  Tensor head_w;                       // {H_c}; 1x1 conv to one logit
  double head_b = 0.0;
  double attention_weight = 0.0;       // learned residual weight, starts at 0

  bool initialized() const { return hidden_channels > 0 && kernel > 0; }

  // Glorot-uniform kernels, zero biases, forget bias 1.
  static ConvLSTMParams init(int hidden_channels, int kernel,
                             std::uint64_t seed);

  // Flat parameter vector (w_x, w_h, biases, head, attention_weight); the
  // same layout is used by gradients, SGD and the finite-difference check.
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
};

// Gradients share the parameter layout.
using ConvLSTMGrads = ConvLSTMParams;

SliceStack forward(const ConvLSTMParams& params, const SliceStack& stack);

double bce_loss(const SliceStack& preds, const std::vector<BinaryMask2D>& gts);

// Constant attention context for stage-2 gradients: the similarity map and
// the previous-epoch blend are held fixed; gradients flow through the
// current probability map in both terms of the residual combine.
struct StaContext {
  SimilarityMap sm;
  std::optional<ScalarField2D> o_prev;
  double beta = 0.5;
};

struct BackwardResult {
  double loss = 0.0;
  ConvLSTMGrads grads;
  SliceStack outputs;        // probability maps as seen by the loss
  ScalarField2D o_blend;     // stage 2: the ITA-blended attention output
};

// Exact reverse-mode gradients of bce_loss(forward(params, stack), gts).
BackwardResult backward(const ConvLSTMParams& params, const SliceStack& stack,
                        const std::vector<BinaryMask2D>& gts);

// Stage-2 variant: the center slice's output is replaced by
// clamp(attention_weight * o_T + P, 0, 1) with o_T = beta*o_prev +
// (1-beta)*attend(P, sm) before the loss.
BackwardResult backward(const ConvLSTMParams& params, const SliceStack& stack,
                        const std::vector<BinaryMask2D>& gts,
                        const StaContext& sta);

enum class TrainStage { backbone, tacnet };

struct TrainConfig {
  double lr = 0.001;
  int lr_halving_period = 50;
  int epochs = 50;
  int batch = 15;
  std::uint64_t seed = 0;
  int slice_count = 3;
  int patch = 39;
  double beta = 0.5;        // iterative rate
  double sigma = 1.0;       // CP map smoothing
  double epsilon = 0.01;    // persistence threshold
  double fine_tune_lr = 1e-5;
  int fine_tune_epochs = 15;
  int hidden_channels = 8;
  int kernel = 3;
  double momentum = 0.0;
};

struct TrainSample {
  SliceStack inputs;
  std::vector<BinaryMask2D> gts;
};
using Dataset = std::vector<TrainSample>;

struct EpochRecord {
  int epoch = 0;
  TrainStage stage = TrainStage::backbone;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ConvLSTMParams params;
  std::vector<EpochRecord> history;
};

// Stage 1: backbone alone with the halving schedule, fresh seeded init.
TrainResult train_backbone(const TrainConfig& config, const Dataset& dataset);

// Stage 2: attach STA(+ITA when beta > 0) to the center slice and fine-tune
// for fine_tune_epochs at fine_tune_lr, starting from the given parameters.
TrainResult train_tacnet(const TrainConfig& config, const Dataset& dataset,
                         ConvLSTMParams params);

// Both stages back to back.
TrainResult train(const TrainConfig& config, const Dataset& dataset);

}  // namespace tacl
