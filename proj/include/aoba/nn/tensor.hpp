#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aoba::nn {

// Dense row-major array of doubles.
class Tensor {
public:
	Tensor() = default;
	explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

	const std::vector<std::size_t> &shape() const { return shape_; }
	std::size_t rank() const { return shape_.size(); }
	std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
	std::size_t size() const { return data_.size(); }

	double *data() { return data_.data(); }
	const double *data() const { return data_.data(); }
	std::span<double> values() { return data_; }
	std::span<const double> values() const { return data_; }

	double &operator[](std::size_t i) { return data_[i]; }
	double operator[](std::size_t i) const { return data_[i]; }
	// Rank-2 access.
	double &operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
	double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

	void fill(double value);
	bool same_shape(const Tensor &other) const { return shape_ == other.shape_; }
	std::string shape_string() const;

	bool operator==(const Tensor &) const = default;

private:
	std::vector<std::size_t> shape_;
	std::vector<double> data_;
};

struct Param {
	Param() = default;
	Param(std::string param_name, std::vector<std::size_t> shape)
	    : name(std::move(param_name)), value(shape), grad(std::move(shape)) {}

	std::string name;
	Tensor value;
	Tensor grad;

	void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<Param *>;

void zero_grads(const ParamList &params);
double grad_norm(const ParamList &params);
// Rescales gradients so their global L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(const ParamList &params, double max_norm);

} // namespace aoba::nn
