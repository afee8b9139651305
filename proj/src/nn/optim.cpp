#include "aoba/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace aoba::nn {

AdamState::AdamState(const ParamList &params, const AdamConfig &cfg) : config(cfg) {
	first_moment.reserve(params.size());
	second_moment.reserve(params.size());
	for (const Param *p : params) {
		first_moment.emplace_back(p->value.shape());
		second_moment.emplace_back(p->value.shape());
	}
}

void adam_step(AdamState &state, const ParamList &params) {
	if (params.size() != state.first_moment.size()) {
		throw std::invalid_argument("adam_step: parameter count does not match optimizer state");
	}
	for (std::size_t k = 0; k < params.size(); ++k) {
		if (!params[k]->value.same_shape(state.first_moment[k]) || !params[k]->grad.same_shape(params[k]->value)) {
			throw std::invalid_argument("adam_step: shape mismatch for " + params[k]->name);
		}
	}
	++state.step_count;
	const auto &c = state.config;
	const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
	const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
	for (std::size_t k = 0; k < params.size(); ++k) {
		Param &p = *params[k];
		Tensor &m = state.first_moment[k];
		Tensor &v = state.second_moment[k];
		for (std::size_t i = 0; i < p.value.size(); ++i) {
			const double g = p.grad[i];
			m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
			v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
			const double m_hat = m[i] / correction1;
			const double v_hat = v[i] / correction2;
			p.value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
		}
	}
}

} // namespace aoba::nn
