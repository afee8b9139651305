#include "aoba/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aoba::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap as_matrix(const Param &p) {
	return {p.value.data(), static_cast<Eigen::Index>(p.value.dim(0)), static_cast<Eigen::Index>(p.value.dim(1))};
}

MatMap grad_matrix(Param &p) {
	return {p.grad.data(), static_cast<Eigen::Index>(p.grad.dim(0)), static_cast<Eigen::Index>(p.grad.dim(1))};
}

ConstVecMap as_vector(std::span<const double> v) {
	return {v.data(), static_cast<Eigen::Index>(v.size())};
}

VecMap as_vector(std::span<double> v) {
	return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void fill_uniform(Tensor &t, double bound, Rng &rng) {
	std::uniform_real_distribution<double> dist(-bound, bound);
	for (double &v : t.values()) {
		v = dist(rng);
	}
}

void require(bool ok, const std::string &what) {
	if (!ok) {
		throw std::invalid_argument(what);
	}
}

double sigmoid(double z) {
	return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(const std::string &prefix, int in_channels, int out_channels, int kernel_size)
    : weight(prefix + ".weight",
             {static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels),
              static_cast<std::size_t>(kernel_size)}),
      bias(prefix + ".bias", {static_cast<std::size_t>(out_channels)}) {
	require(kernel_size % 2 == 1, "conv1d kernel size must be odd for same padding");
}

void Conv1d::init_uniform(Rng &rng) {
	const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels() * kernel_size()));
	fill_uniform(weight.value, bound, rng);
	fill_uniform(bias.value, bound, rng);
}

Tensor Conv1d::forward(const Tensor &input) const {
	const int cin = in_channels();
	const int cout = out_channels();
	const int k = kernel_size();
	require(input.rank() == 2 && static_cast<int>(input.dim(0)) == cin,
	        "conv1d input shape " + input.shape_string() + " does not match " + std::to_string(cin) + " channels");
	const int width = static_cast<int>(input.dim(1));
	require(width >= k / 2 + 1, "conv1d input narrower than kernel half-width");
	const int pad = k / 2;

	Tensor out({static_cast<std::size_t>(cout), static_cast<std::size_t>(width)});
	const double *w = weight.value.data();
	for (int o = 0; o < cout; ++o) {
		double *row = out.data() + static_cast<std::size_t>(o) * width;
		std::fill(row, row + width, bias.value[o]);
		for (int c = 0; c < cin; ++c) {
			const double *in = input.data() + static_cast<std::size_t>(c) * width;
			const double *kern = w + (static_cast<std::size_t>(o) * cin + c) * k;
			for (int j = 0; j < k; ++j) {
				const int shift = j - pad;
				const int lo = std::max(0, -shift);
				const int hi = std::min(width, width - shift);
				for (int x = lo; x < hi; ++x) {
					row[x] += kern[j] * in[x + shift];
				}
			}
		}
	}
	return out;
}

Tensor Conv1d::backward(const Tensor &input, const Tensor &grad_output) {
	const int cin = in_channels();
	const int cout = out_channels();
	const int k = kernel_size();
	const int width = static_cast<int>(input.dim(1));
	require(grad_output.rank() == 2 && static_cast<int>(grad_output.dim(0)) == cout &&
	            static_cast<int>(grad_output.dim(1)) == width,
	        "conv1d grad_output shape mismatch");
	const int pad = k / 2;

	Tensor grad_in({static_cast<std::size_t>(cin), static_cast<std::size_t>(width)});
	const double *w = weight.value.data();
	double *gw = weight.grad.data();
	for (int o = 0; o < cout; ++o) {
		const double *dy = grad_output.data() + static_cast<std::size_t>(o) * width;
		double db = 0.0;
		for (int x = 0; x < width; ++x) {
			db += dy[x];
		}
		bias.grad[o] += db;
		for (int c = 0; c < cin; ++c) {
			const double *in = input.data() + static_cast<std::size_t>(c) * width;
			double *din = grad_in.data() + static_cast<std::size_t>(c) * width;
			const std::size_t base = (static_cast<std::size_t>(o) * cin + c) * k;
			for (int j = 0; j < k; ++j) {
				const int shift = j - pad;
				const int lo = std::max(0, -shift);
				const int hi = std::min(width, width - shift);
				double acc = 0.0;
				const double kw = w[base + j];
				for (int x = lo; x < hi; ++x) {
					acc += dy[x] * in[x + shift];
					din[x + shift] += kw * dy[x];
				}
				gw[base + j] += acc;
			}
		}
	}
	return grad_in;
}

Tensor relu(const Tensor &x) {
	Tensor y = x;
	for (double &v : y.values()) {
		v = v > 0.0 ? v : 0.0;
	}
	return y;
}

void relu_backward(const Tensor &output, Tensor &grad) {
	for (std::size_t i = 0; i < grad.size(); ++i) {
		if (!(output[i] > 0.0)) {
			grad[i] = 0.0;
		}
	}
}

// ---------------------------------------------------------------- LSTM

LstmCell::LstmCell(const std::string &prefix, int input_size, int hidden_size) {
	static const char *gate_names[4] = {"i", "f", "o", "g"};
	const auto in = static_cast<std::size_t>(input_size);
	const auto hid = static_cast<std::size_t>(hidden_size);
	for (int k = 0; k < 4; ++k) {
		w[k] = Param(prefix + ".w_" + gate_names[k], {hid, in});
		u[k] = Param(prefix + ".u_" + gate_names[k], {hid, hid});
		b[k] = Param(prefix + ".b_" + gate_names[k], {hid});
	}
}

ParamList LstmCell::parameters() {
	ParamList out;
	for (int k = 0; k < 4; ++k) {
		out.push_back(&w[k]);
		out.push_back(&u[k]);
		out.push_back(&b[k]);
	}
	return out;
}

void LstmCell::init_uniform(Rng &rng) {
	const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size()));
	for (int k = 0; k < 4; ++k) {
		fill_uniform(w[k].value, bound, rng);
		fill_uniform(u[k].value, bound, rng);
		fill_uniform(b[k].value, bound, rng);
	}
	b[1].value.fill(1.0);
}

LstmStep LstmCell::forward(std::span<const double> x, std::span<const double> h, std::span<const double> c) const {
	const auto hid = static_cast<std::size_t>(hidden_size());
	require(x.size() == static_cast<std::size_t>(input_size()),
	        "lstm input has " + std::to_string(x.size()) + " features, expected " + std::to_string(input_size()));
	require(h.size() == hid && c.size() == hid, "lstm state dimension mismatch");

	LstmStep s;
	s.x.assign(x.begin(), x.end());
	s.h.assign(h.begin(), h.end());
	s.c.assign(c.begin(), c.end());
	Vec *gates[4] = {&s.i, &s.f, &s.o, &s.g};
	const auto xv = as_vector(x);
	const auto hv = as_vector(h);
	for (int k = 0; k < 4; ++k) {
		Eigen::VectorXd z = as_matrix(w[k]) * xv + as_matrix(u[k]) * hv + as_vector(b[k].value.values());
		Vec &gate = *gates[k];
		gate.resize(hid);
		for (std::size_t j = 0; j < hid; ++j) {
			gate[j] = k == 3 ? std::tanh(z[static_cast<Eigen::Index>(j)]) : sigmoid(z[static_cast<Eigen::Index>(j)]);
		}
	}
	s.c_new.resize(hid);
	s.tanh_c.resize(hid);
	s.h_new.resize(hid);
	for (std::size_t j = 0; j < hid; ++j) {
		s.c_new[j] = s.f[j] * s.c[j] + s.i[j] * s.g[j];
		s.tanh_c[j] = std::tanh(s.c_new[j]);
		s.h_new[j] = s.o[j] * s.tanh_c[j];
	}
	return s;
}

LstmCell::Grads LstmCell::backward(const LstmStep &s, std::span<const double> dh_new, std::span<const double> dc_new) {
	const auto hid = s.h_new.size();
	require(dh_new.size() == hid && dc_new.size() == hid, "lstm backward dimension mismatch");
	Eigen::VectorXd dz[4];
	for (auto &v : dz) {
		v.resize(static_cast<Eigen::Index>(hid));
	}
	Grads g;
	g.dc.resize(hid);
	for (std::size_t j = 0; j < hid; ++j) {
		const auto e = static_cast<Eigen::Index>(j);
		const double d_o = dh_new[j] * s.tanh_c[j];
		const double dc = dc_new[j] + dh_new[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
		dz[0][e] = dc * s.g[j] * s.i[j] * (1.0 - s.i[j]);
		dz[1][e] = dc * s.c[j] * s.f[j] * (1.0 - s.f[j]);
		dz[2][e] = d_o * s.o[j] * (1.0 - s.o[j]);
		dz[3][e] = dc * s.i[j] * (1.0 - s.g[j] * s.g[j]);
		g.dc[j] = dc * s.f[j];
	}
	const auto xv = as_vector(std::span<const double>(s.x));
	const auto hv = as_vector(std::span<const double>(s.h));
	Eigen::VectorXd dx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.x.size()));
	Eigen::VectorXd dh = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hid));
	for (int k = 0; k < 4; ++k) {
		grad_matrix(w[k]).noalias() += dz[k] * xv.transpose();
		grad_matrix(u[k]).noalias() += dz[k] * hv.transpose();
		as_vector(b[k].grad.values()) += dz[k];
		dx.noalias() += as_matrix(w[k]).transpose() * dz[k];
		dh.noalias() += as_matrix(u[k]).transpose() * dz[k];
	}
	g.dx.assign(dx.data(), dx.data() + dx.size());
	g.dh.assign(dh.data(), dh.data() + dh.size());
	return g;
}

std::pair<Vec, Vec> lstm_cell_step(const LstmCell &cell, std::span<const double> x, std::span<const double> h,
                                   std::span<const double> c) {
	LstmStep s = cell.forward(x, h, c);
	return {std::move(s.h_new), std::move(s.c_new)};
}

// ---------------------------------------------------------------- ODE block

OdeDerivativeNet::OdeDerivativeNet(const std::string &prefix, int state_size, int hidden_width)
    : w1(prefix + ".w1", {static_cast<std::size_t>(hidden_width), static_cast<std::size_t>(state_size)}),
      b1(prefix + ".b1", {static_cast<std::size_t>(hidden_width)}),
      w2(prefix + ".w2", {static_cast<std::size_t>(state_size), static_cast<std::size_t>(hidden_width)}),
      b2(prefix + ".b2", {static_cast<std::size_t>(state_size)}) {}

void OdeDerivativeNet::init_uniform(Rng &rng) {
	const double b_in = 1.0 / std::sqrt(static_cast<double>(state_size()));
	const double b_hid = 1.0 / std::sqrt(static_cast<double>(hidden_width()));
	fill_uniform(w1.value, b_in, rng);
	fill_uniform(b1.value, b_in, rng);
	fill_uniform(w2.value, b_hid, rng);
	fill_uniform(b2.value, b_hid, rng);
}

void OdeDerivativeNet::derivative(std::span<const double> s, std::span<double> out, std::span<double> act) const {
	auto a = as_vector(act);
	a.noalias() = as_matrix(w1) * as_vector(s);
	a += as_vector(b1.value.values());
	a = a.array().tanh();
	auto o = as_vector(out);
	o.noalias() = as_matrix(w2) * a;
	o += as_vector(b2.value.values());
}

OdeTrace ode_evolve_traced(const OdeDerivativeNet &net, std::span<const double> s0, double elapsed, int steps) {
	require(steps >= 1, "ode_evolve: steps must be >= 1");
	require(elapsed >= 0.0, "ode_evolve: elapsed must be >= 0");
	require(s0.size() == static_cast<std::size_t>(net.state_size()), "ode_evolve: state dimension mismatch");
	OdeTrace tr;
	tr.states.emplace_back(s0.begin(), s0.end());
	if (elapsed == 0.0) {
		return tr;
	}
	tr.dt = elapsed / steps;
	const auto n = s0.size();
	const auto p = static_cast<std::size_t>(net.hidden_width());
	Vec deriv(n);
	tr.states.reserve(static_cast<std::size_t>(steps) + 1);
	tr.activations.reserve(static_cast<std::size_t>(steps));
	for (int k = 0; k < steps; ++k) {
		Vec act(p);
		const Vec &cur = tr.states.back();
		net.derivative(cur, deriv, act);
		Vec next(n);
		for (std::size_t j = 0; j < n; ++j) {
			next[j] = cur[j] + tr.dt * deriv[j];
		}
		tr.activations.push_back(std::move(act));
		tr.states.push_back(std::move(next));
	}
	return tr;
}

Vec ode_evolve(const OdeDerivativeNet &net, std::span<const double> s0, double elapsed, int steps) {
	require(steps >= 1, "ode_evolve: steps must be >= 1");
	require(elapsed >= 0.0, "ode_evolve: elapsed must be >= 0");
	require(s0.size() == static_cast<std::size_t>(net.state_size()), "ode_evolve: state dimension mismatch");
	Vec s(s0.begin(), s0.end());
	if (elapsed == 0.0) {
		return s;
	}
	const double dt = elapsed / steps;
	Vec deriv(s.size());
	Vec act(static_cast<std::size_t>(net.hidden_width()));
	for (int k = 0; k < steps; ++k) {
		net.derivative(s, deriv, act);
		for (std::size_t j = 0; j < s.size(); ++j) {
			s[j] += dt * deriv[j];
		}
	}
	return s;
}

Vec ode_backward(OdeDerivativeNet &net, const OdeTrace &trace, std::span<const double> d_final) {
	Eigen::VectorXd ds = as_vector(d_final);
	const double dt = trace.dt;
	auto w1 = as_matrix(net.w1);
	auto w2 = as_matrix(net.w2);
	auto gw1 = grad_matrix(net.w1);
	auto gw2 = grad_matrix(net.w2);
	auto gb1 = as_vector(net.b1.grad.values());
	auto gb2 = as_vector(net.b2.grad.values());
	for (std::size_t k = trace.activations.size(); k-- > 0;) {
		const auto a = as_vector(std::span<const double>(trace.activations[k]));
		const auto s = as_vector(std::span<const double>(trace.states[k]));
		const Eigen::VectorXd d_out = dt * ds;
		gw2.noalias() += d_out * a.transpose();
		gb2 += d_out;
		Eigen::VectorXd d_pre = w2.transpose() * d_out;
		d_pre.array() *= 1.0 - a.array().square();
		gw1.noalias() += d_pre * s.transpose();
		gb1 += d_pre;
		ds.noalias() += w1.transpose() * d_pre;
	}
	return {ds.data(), ds.data() + ds.size()};
}

// ---------------------------------------------------------------- Dense / softmax

Dense::Dense(const std::string &prefix, int in_features, int out_features)
    : weight(prefix + ".weight", {static_cast<std::size_t>(out_features), static_cast<std::size_t>(in_features)}),
      bias(prefix + ".bias", {static_cast<std::size_t>(out_features)}) {}

void Dense::init_uniform(Rng &rng) {
	const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
	fill_uniform(weight.value, bound, rng);
	fill_uniform(bias.value, bound, rng);
}

Vec Dense::forward(std::span<const double> x) const {
	require(x.size() == static_cast<std::size_t>(in_features()), "dense input dimension mismatch");
	Vec out(static_cast<std::size_t>(out_features()));
	auto o = as_vector(std::span<double>(out));
	o.noalias() = as_matrix(weight) * as_vector(x);
	o += as_vector(bias.value.values());
	return out;
}

Vec Dense::backward(std::span<const double> x, std::span<const double> d_logits) {
	const auto dl = as_vector(d_logits);
	grad_matrix(weight).noalias() += dl * as_vector(x).transpose();
	as_vector(bias.grad.values()) += dl;
	Eigen::VectorXd dx = as_matrix(weight).transpose() * dl;
	return {dx.data(), dx.data() + dx.size()};
}

Vec softmax(std::span<const double> logits) {
	Vec p(logits.begin(), logits.end());
	if (p.empty()) {
		return p;
	}
	const double mx = *std::max_element(p.begin(), p.end());
	double sum = 0.0;
	for (double &v : p) {
		v = std::exp(v - mx);
		sum += v;
	}
	for (double &v : p) {
		v /= sum;
	}
	return p;
}

Vec fc_softmax(const Dense &head, std::span<const double> s) {
	return softmax(head.forward(s));
}

double cross_entropy(std::span<const double> probs, int label) {
	if (label < 1 || static_cast<std::size_t>(label) > probs.size()) {
		throw std::out_of_range("cross_entropy: label outside [1, K]");
	}
	return -std::log(std::max(probs[static_cast<std::size_t>(label - 1)], kProbabilityFloor));
}

Vec fc_softmax_cross_entropy_backward(Dense &head, std::span<const double> s, std::span<const double> probs,
                                      int label, double weight) {
	if (label < 1 || static_cast<std::size_t>(label) > probs.size()) {
		throw std::out_of_range("cross_entropy: label outside [1, K]");
	}
	Vec d_logits(probs.begin(), probs.end());
	d_logits[static_cast<std::size_t>(label - 1)] -= 1.0;
	for (double &v : d_logits) {
		v *= weight;
	}
	return head.backward(s, d_logits);
}

std::size_t argmax(std::span<const double> values) {
	std::size_t best = 0;
	for (std::size_t i = 1; i < values.size(); ++i) {
		if (values[i] > values[best]) {
			best = i;
		}
	}
	return best;
}

} // namespace aoba::nn
