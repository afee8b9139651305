#pragma once

// Angle tracker over [aod, aod rate] with a constant-rate motion model and a
// single-path (LOS) pilot measurement model. The complex path gain is not a
// state: each update plugs in the least-squares gain at the predicted angle.

#include "aoba/channel.hpp"
#include "aoba/predictors/predictor.hpp"

#include <Eigen/Dense>

#include <span>

namespace aoba::predictors {

struct EkfConfig {
	// White-acceleration spectral density, rad^2/s^3.
	double process_noise = 0.1;
	// Complex pilot noise variance; negative means "use the pilots' own".
	double measurement_noise = -1.0;
	double initial_angle_std = 0.05;
	double initial_rate_std = 1.0;
	// Re-anchor the angle on the measured optimum when the prediction is more
	// than this many beams off; 0 disables.
	int reinit_gate_beams = 3;

	void validate() const;
};

struct EkfState {
	Eigen::Vector2d mean = Eigen::Vector2d::Zero();       // [aod rad, rate rad/s]
	Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
	double last_time_s = 0.0;
};

void check_covariance(const Eigen::Matrix2d &p);

EkfState ekf_init(double aod_rad, double rate_rad_s, const EkfConfig &cfg, double time_s);

// Time update to `time_s` only.
EkfState ekf_predict(const EkfState &state, double time_s, double process_noise);

// Time update to `time_s`, then measurement update with the pilots.
EkfState ekf_update(const EkfState &state, std::span<const channel::PilotObservation> pilots,
                    const channel::Codebook &codebook, const EkfConfig &cfg, double time_s);

PredictionOutput ekf_query(const EkfState &state, double query_time_s, const channel::ArrayConfig &array,
                           const selection::CandidateSet &cs);

class EkfPredictor : public BeamPredictor {
public:
	EkfPredictor(const channel::Codebook &codebook, const EkfConfig &cfg);

	std::string name() const override { return "ekf"; }
	void reset() override;
	void ingest(const StageObservation &obs) override;
	std::vector<PredictionOutput> predict(std::span<const double> times_s) override;

	const EkfState &state() const { return state_; }

private:
	const channel::Codebook *codebook_;
	EkfConfig cfg_;
	EkfState state_;
	bool started_ = false;
	selection::CandidateSet active_;
};

} // namespace aoba::predictors
