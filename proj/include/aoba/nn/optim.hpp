#pragma once

#include "aoba/nn/tensor.hpp"

#include <span>
#include <vector>

namespace aoba::nn {

struct AdamConfig {
	double learning_rate = 1e-3;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double epsilon = 1e-8;
};

struct AdamState {
	AdamState() = default;
	AdamState(const ParamList &params, const AdamConfig &cfg);

	AdamConfig config;
	long step_count = 0;
	std::vector<Tensor> first_moment;
	std::vector<Tensor> second_moment;
};

// Bias-corrected Adam update of every parameter from its accumulated grad.
void adam_step(AdamState &state, const ParamList &params);

} // namespace aoba::nn
