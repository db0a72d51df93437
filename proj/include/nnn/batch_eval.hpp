#pragma once

// Batched evaluation of the network together with its first and second chart
// derivatives, plus the hand-written reverse pass of the residual loss.
//
// Every activation carries a 5-component jet (value, d/dp, d/dq, d2/dp2,
// d2/dq2) with respect to the chart coordinates of its point. The reverse pass
// differentiates that jet computation in the weights, which gives the same
// parameter gradient as nesting the tape but at dense-matrix speed.
//
// Batches are split into fixed chunks of kChunkSize points that are reduced
// in order, so results do not depend on the worker count.

#include <span>
#include <vector>

#include "nnn/autodiff.hpp"
#include "nnn/conformal_net.hpp"

namespace nnn {

inline constexpr std::size_t kChunkSize = 50;

struct CurvatureEval {
  std::vector<double> u;
  std::vector<double> laplacian;
  std::vector<double> curvature;  // R_g
};

CurvatureEval evaluate_batch(const NetworkParams& params, std::span<const SamplePoint> points);

struct LossGradient {
  double loss = 0.0;
  ad::ParameterVector grad;
};

/// Mean over the batch of (R_g - 2K)^2 / N and its gradient in params.theta.
/// k_values[i] is K at points[i]. Throws NonFiniteDerivative if the loss or
/// any gradient entry is non-finite.
LossGradient loss_and_gradient(const NetworkParams& params, std::span<const SamplePoint> points,
                               std::span<const double> k_values, double normalisation);

/// Loss only.
double batch_loss_value(const NetworkParams& params, std::span<const SamplePoint> points,
                        std::span<const double> k_values, double normalisation);

}  // namespace nnn
