#pragma once

#include "aoba/nn/tensor.hpp"

#include <functional>
#include <span>

namespace aoba::nn {

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Central differences (f(theta + eps) - f(theta - eps)) / 2 eps against the
// analytic gradient; returns the worst relative error over all coordinates.
double grad_check(const std::function<double(std::span<const double>)> &loss, std::span<const double> theta,
                  std::span<const double> analytic, double eps);

// Same check over model parameters: `loss` re-runs the forward pass reading
// Param::value, and Param::grad must already hold the analytic gradient.
// Values are restored afterwards.
double grad_check(const std::function<double()> &loss, const ParamList &params, double eps);

} // namespace aoba::nn
