#pragma once

// Hand-differentiated layers for the continuous-time recurrent predictor.
// Forward passes are const and return whatever the matching backward pass
// needs; backward passes accumulate into Param::grad.

#include "aoba/nn/tensor.hpp"
#include "aoba/rng.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aoba::nn {

using Vec = std::vector<double>;

// Same-padded 1-D cross-correlation over the width axis. Input [in x W], output [out x W].
class Conv1d {
public:
	Conv1d() = default;
	Conv1d(const std::string &prefix, int in_channels, int out_channels, int kernel_size);

	int in_channels() const { return static_cast<int>(weight.value.dim(1)); }
	int out_channels() const { return static_cast<int>(weight.value.dim(0)); }
	int kernel_size() const { return static_cast<int>(weight.value.dim(2)); }

	Tensor forward(const Tensor &input) const;
	// Returns d(loss)/d(input).
	Tensor backward(const Tensor &input, const Tensor &grad_output);

	ParamList parameters() { return {&weight, &bias}; }
	void init_uniform(Rng &rng);

	Param weight; // [out, in, k]
	Param bias;   // [out]
};

Tensor relu(const Tensor &x);
// Zeroes grad where the ReLU output was not positive.
void relu_backward(const Tensor &output, Tensor &grad);

struct LstmStep {
	Vec x, h, c;          // inputs
	Vec i, f, o, g;       // gate activations
	Vec c_new, tanh_c, h_new;
};

// Gates: i, f, o (sigmoid) and candidate g (tanh), each with its own W, U, b.
class LstmCell {
public:
	LstmCell() = default;
	LstmCell(const std::string &prefix, int input_size, int hidden_size);

	int input_size() const { return static_cast<int>(w[0].value.dim(1)); }
	int hidden_size() const { return static_cast<int>(w[0].value.dim(0)); }

	LstmStep forward(std::span<const double> x, std::span<const double> h, std::span<const double> c) const;

	struct Grads {
		Vec dx, dh, dc;
	};
	Grads backward(const LstmStep &step, std::span<const double> dh_new, std::span<const double> dc_new);

	ParamList parameters();
	// Uniform(+-1/sqrt(hidden)) for weights, forget bias +1.
	void init_uniform(Rng &rng);

	// Gate order in each array: input, forget, output, candidate.
	Param w[4]; // [hidden, input]
	Param u[4]; // [hidden, hidden]
	Param b[4]; // [hidden]
};

// (h', c') for one step.
std::pair<Vec, Vec> lstm_cell_step(const LstmCell &cell, std::span<const double> x, std::span<const double> h,
                                   std::span<const double> c);

// Autonomous derivative ds/dt = W2 tanh(W1 s + b1) + b2.
class OdeDerivativeNet {
public:
	OdeDerivativeNet() = default;
	OdeDerivativeNet(const std::string &prefix, int state_size, int hidden_width);

	int state_size() const { return static_cast<int>(w1.value.dim(1)); }
	int hidden_width() const { return static_cast<int>(w1.value.dim(0)); }

	// Writes f(s) into out and the hidden tanh activations into act.
	void derivative(std::span<const double> s, std::span<double> out, std::span<double> act) const;

	ParamList parameters() { return {&w1, &b1, &w2, &b2}; }
	void init_uniform(Rng &rng);

	Param w1; // [hidden, state]
	Param b1; // [hidden]
	Param w2; // [state, hidden]
	Param b2; // [state]
};

// Explicit Euler record: states[0..steps], activations[0..steps-1].
struct OdeTrace {
	double dt = 0.0;
	std::vector<Vec> states;
	std::vector<Vec> activations;

	const Vec &final_state() const { return states.back(); }
};

// s <- s + (elapsed/steps) * f(s), `steps` times. elapsed == 0 returns s0 exactly.
Vec ode_evolve(const OdeDerivativeNet &net, std::span<const double> s0, double elapsed, int steps);
OdeTrace ode_evolve_traced(const OdeDerivativeNet &net, std::span<const double> s0, double elapsed, int steps);
// Backpropagates d(loss)/d(final state) to d(loss)/d(s0), accumulating parameter grads.
Vec ode_backward(OdeDerivativeNet &net, const OdeTrace &trace, std::span<const double> d_final);

// Fully connected layer producing logits.
class Dense {
public:
	Dense() = default;
	Dense(const std::string &prefix, int in_features, int out_features);

	int in_features() const { return static_cast<int>(weight.value.dim(1)); }
	int out_features() const { return static_cast<int>(weight.value.dim(0)); }

	Vec forward(std::span<const double> x) const;
	// Returns d(loss)/d(x).
	Vec backward(std::span<const double> x, std::span<const double> d_logits);

	ParamList parameters() { return {&weight, &bias}; }
	void init_uniform(Rng &rng);

	Param weight; // [out, in]
	Param bias;   // [out]
};

Vec softmax(std::span<const double> logits);
Vec fc_softmax(const Dense &head, std::span<const double> s);

inline constexpr double kProbabilityFloor = 1e-12;

// -ln(probs[label]) with label 1-based; probability floored at 1e-12.
double cross_entropy(std::span<const double> probs, int label);

// Fused softmax + cross-entropy backward through the head for a 1-based label,
// scaled by `weight`. Returns d(loss)/d(s).
Vec fc_softmax_cross_entropy_backward(Dense &head, std::span<const double> s, std::span<const double> probs,
                                      int label, double weight = 1.0);

// Index of the largest entry; ties resolve to the smallest index. 0-based.
std::size_t argmax(std::span<const double> values);

} // namespace aoba::nn
