#include "aoba/predictors/ekf.hpp"

#include "aoba/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aoba::predictors {

using channel::Complex;

void EkfConfig::validate() const {
	if (!(process_noise >= 0.0)) {
		throw ConfigError("ekf.process_noise must be non-negative");
	}
	if (!(initial_angle_std > 0.0) || !(initial_rate_std > 0.0)) {
		throw ConfigError("ekf initial standard deviations must be positive");
	}
	if (reinit_gate_beams < 0) {
		throw ConfigError("ekf.reinit_gate_beams must be non-negative");
	}
}

void check_covariance(const Eigen::Matrix2d &p) {
	if (!p.allFinite()) {
		throw NumericError("EKF covariance is not finite");
	}
	if (std::abs(p(0, 1) - p(1, 0)) > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
		throw NumericError("EKF covariance is not symmetric");
	}
	Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p, Eigen::EigenvaluesOnly);
	if (!(es.eigenvalues().minCoeff() > 0.0)) {
		throw NumericError("EKF covariance lost positive definiteness");
	}
}

EkfState ekf_init(double aod_rad, double rate_rad_s, const EkfConfig &cfg, double time_s) {
	EkfState s;
	s.mean << aod_rad, rate_rad_s;
	s.covariance = Eigen::Vector2d(cfg.initial_angle_std * cfg.initial_angle_std,
	                               cfg.initial_rate_std * cfg.initial_rate_std)
	                   .asDiagonal();
	s.last_time_s = time_s;
	return s;
}

EkfState ekf_predict(const EkfState &state, double time_s, double process_noise) {
	const double dt = time_s - state.last_time_s;
	if (dt < 0.0) {
		throw std::invalid_argument("EKF time update goes backwards");
	}
	Eigen::Matrix2d f;
	f << 1.0, dt, 0.0, 1.0;
	Eigen::Matrix2d q;
	q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
	EkfState out;
	out.mean = f * state.mean;
	out.covariance = f * state.covariance * f.transpose() + process_noise * q;
	out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
	out.last_time_s = time_s;
	return out;
}

namespace {

double clamp_sector(double phi) {
	return std::clamp(phi, -channel::kHalfPi, channel::kHalfPi);
}

} // namespace

EkfState ekf_update(const EkfState &state, std::span<const channel::PilotObservation> pilots,
                    const channel::Codebook &codebook, const EkfConfig &cfg, double time_s) {
	if (pilots.empty()) {
		throw std::invalid_argument("EKF update needs at least one pilot");
	}
	EkfState prior = ekf_predict(state, time_s, cfg.process_noise);
	check_covariance(prior.covariance);

	const auto &array = codebook.array();
	const int m_count = array.num_antennas;
	const double phi = clamp_sector(prior.mean(0));
	const auto a = channel::steering_vector(phi, array);
	const double dstep = 2.0 * channel::kPi * array.element_spacing * std::cos(phi);

	const std::size_t k_count = pilots.size();
	std::vector<Complex> g(k_count), dg(k_count);
	Complex num(0.0, 0.0);
	double den = 0.0;
	double noise = 0.0;
	for (std::size_t k = 0; k < k_count; ++k) {
		auto f = codebook.codeword(pilots[k].beam_index);
		Complex acc(0.0, 0.0), dacc(0.0, 0.0);
		for (int m = 0; m < m_count; ++m) {
			acc += a[m] * f[m];
			dacc += Complex(0.0, dstep * m) * a[m] * f[m];
		}
		g[k] = acc;
		dg[k] = dacc;
		num += std::conj(acc) * pilots[k].value;
		den += std::norm(acc);
		noise += pilots[k].noise_variance;
	}
	noise /= static_cast<double>(k_count);
	if (cfg.measurement_noise >= 0.0) {
		noise = cfg.measurement_noise;
	}
	const double r = std::max(0.5 * noise, 1e-12); // per real component
	const Complex alpha = den > 0.0 ? num / den : Complex(0.0, 0.0);

	// Jacobian of the profiled model alpha(phi) g(phi): the part of dg along g
	// is absorbed by the gain fit.
	Complex along(0.0, 0.0);
	for (std::size_t k = 0; k < k_count; ++k) {
		along += std::conj(g[k]) * dg[k];
	}
	along = den > 0.0 ? along / den : Complex(0.0, 0.0);

	// Information-form update; only the angle column of H is nonzero.
	double info = 0.0;
	double score = 0.0;
	for (std::size_t k = 0; k < k_count; ++k) {
		Complex h = alpha * (dg[k] - along * g[k]);
		Complex resid = pilots[k].value - alpha * g[k];
		info += std::norm(h) / r;
		score += (h.real() * resid.real() + h.imag() * resid.imag()) / r;
	}
	Eigen::Matrix2d p_inv = prior.covariance.inverse();
	p_inv(0, 0) += info;
	Eigen::Matrix2d post = p_inv.inverse();
	post = 0.5 * (post + post.transpose()).eval();
	check_covariance(post);

	EkfState out;
	out.mean = prior.mean + post.col(0) * score;
	out.covariance = post;
	out.last_time_s = time_s;
	return out;
}

PredictionOutput ekf_query(const EkfState &state, double query_time_s, const channel::ArrayConfig &array,
                           const selection::CandidateSet &cs) {
	const double elapsed = query_time_s - state.last_time_s;
	if (elapsed < -1e-12) {
		throw std::invalid_argument("EKF query precedes the last update");
	}
	const double phi = clamp_sector(state.mean(0) + state.mean(1) * std::max(elapsed, 0.0));
	return one_hot_output(query_time_s, channel::nearest_beam(phi, array), cs);
}

EkfPredictor::EkfPredictor(const channel::Codebook &codebook, const EkfConfig &cfg)
    : codebook_(&codebook), cfg_(cfg) {
	cfg_.validate();
}

void EkfPredictor::reset() {
	started_ = false;
	state_ = EkfState{};
}

void EkfPredictor::ingest(const StageObservation &obs) {
	const auto &array = codebook_->array();
	if (!started_) {
		state_ = ekf_init(channel::beam_aod(obs.measured_best, array), 0.0, cfg_, obs.time_s);
		started_ = true;
	} else if (cfg_.reinit_gate_beams > 0) {
		auto prior = ekf_predict(state_, obs.time_s, cfg_.process_noise);
		int predicted = channel::nearest_beam(clamp_sector(prior.mean(0)), array);
		if (std::abs(channel::circular_offset(obs.measured_best, predicted, array.codebook_size)) >
		    cfg_.reinit_gate_beams) {
			state_ = ekf_init(channel::beam_aod(obs.measured_best, array), state_.mean(1), cfg_, obs.time_s);
		}
	}
	state_ = ekf_update(state_, obs.pilots, *codebook_, cfg_, obs.time_s);
	active_ = obs.probed;
}

std::vector<PredictionOutput> EkfPredictor::predict(std::span<const double> times_s) {
	if (!started_) {
		throw std::logic_error("predict called before any stage was ingested");
	}
	std::vector<PredictionOutput> out;
	out.reserve(times_s.size());
	for (double t : times_s) {
		out.push_back(ekf_query(state_, t, codebook_->array(), active_));
	}
	return out;
}

} // namespace aoba::predictors
