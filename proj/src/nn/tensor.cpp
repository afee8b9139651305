#include "aoba/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace aoba::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
	std::size_t n = 1;
	for (std::size_t d : shape_) {
		if (d == 0) {
			throw std::invalid_argument("tensor dimensions must be positive");
		}
		n *= d;
	}
	data_.assign(n, fill);
}

void Tensor::fill(double value) {
	std::fill(data_.begin(), data_.end(), value);
}

std::string Tensor::shape_string() const {
	std::string s = "[";
	for (std::size_t i = 0; i < shape_.size(); ++i) {
		s += (i ? "x" : "") + std::to_string(shape_[i]);
	}
	return s + "]";
}

void zero_grads(const ParamList &params) {
	for (Param *p : params) {
		p->zero_grad();
	}
}

double grad_norm(const ParamList &params) {
	double sq = 0.0;
	for (const Param *p : params) {
		for (double g : p->grad.values()) {
			sq += g * g;
		}
	}
	return std::sqrt(sq);
}

double clip_grad_norm(const ParamList &params, double max_norm) {
	const double norm = grad_norm(params);
	if (max_norm > 0.0 && norm > max_norm) {
		const double scale = max_norm / norm;
		for (Param *p : params) {
			for (double &g : p->grad.values()) {
				g *= scale;
			}
		}
	}
	return norm;
}

} // namespace aoba::nn
