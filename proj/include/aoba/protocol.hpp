#pragma once

// Alignment-period controller: per stage decide scan or track, probe pilots,
// hand them to the predictor, query the intra-period instants and score them
// against the true channel.

#include "aoba/channel.hpp"
#include "aoba/mobility.hpp"
#include "aoba/predictors/odelstm.hpp"
#include "aoba/predictors/predictor.hpp"
#include "aoba/rng.hpp"
#include "aoba/selection.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aoba::protocol {

using predictors::Mode;

enum class SwitchRule { off, periodic, adaptive };
enum class ThresholdPolicy { running_mean, fixed };

std::string to_string(SwitchRule r);
std::string to_string(ThresholdPolicy p);
SwitchRule parse_switch_rule(const std::string &name);
ThresholdPolicy parse_threshold_policy(const std::string &name);

struct ProtocolConfig {
	double period_s = 0.1;
	SwitchRule switch_rule = SwitchRule::adaptive;
	int switch_period_stages = 2;
	int candidate_size = 11;
	int j0 = 2;
	selection::Strategy strategy = selection::Strategy::uneven;
	ThresholdPolicy threshold_policy = ThresholdPolicy::running_mean;
	double fixed_threshold = 0.9;
	// Compare raw instead of normalized gains in the adaptive rule.
	bool adaptive_raw_gain = false;
	int prediction_count = 99;
	double noise_variance = 0.0;

	void validate(int codebook_size) const;
};

struct PredictionRecord {
	double time_s = 0.0;
	double tau = 0.0;
	int predicted = 1;
	int optimal = 1;
	double gain = 0.0;            // |h^T f|^2 of the predicted beam
	double normalized_gain = 0.0; // against the true optimum
};

struct StageLog {
	int stage_index = 0;
	double time_s = 0.0;
	Mode mode = Mode::scan;
	selection::CandidateSet candidates;
	int pilots_sent = 0;
	int measured_best = 1;
	std::vector<PredictionRecord> predictions;
};

struct EpisodeLog {
	std::string predictor;
	int codebook_size = 0;
	double period_s = 0.0;
	std::optional<mobility::TraceMeta> meta;
	std::vector<StageLog> stages;
};

bool decide_periodic(int stage_index, int switch_period_stages);
bool decide_adaptive(double last_gain, double threshold);
// Mean of the history; 0 when empty.
double update_threshold(std::span<const double> gains);

int num_stages(const mobility::ChannelTrace &trace, double period_s);

// Probes the stage at time_s: all beams when scanning, otherwise the
// candidate set built around previous_best.
predictors::StageObservation observe_stage(const mobility::ChannelTrace &trace, int stage_index, double time_s,
                                           Mode mode, std::optional<int> previous_best,
                                           selection::Direction direction, const ProtocolConfig &cfg,
                                           const channel::Codebook &codebook, Rng &rng);

EpisodeLog run_episode(const mobility::ChannelTrace &trace, predictors::BeamPredictor &predictor,
                       const ProtocolConfig &cfg, const channel::Codebook &codebook, Rng &rng);

// Pilots sent per stage relative to a full scan. The initial acquisition
// scan is excluded unless it is the only stage.
double overhead(const EpisodeLog &log, int codebook_size);

// Training sequences: stage 0 scans, later stages scan with probability
// scan_probability (always for the scanning variant) and otherwise track.
std::vector<predictors::TrainingStage> simulate_training_stages(const mobility::ChannelTrace &trace,
                                                                const ProtocolConfig &cfg,
                                                                const channel::Codebook &codebook,
                                                                predictors::Variant variant, double scan_probability,
                                                                Rng &rng);

predictors::StageSimulator make_stage_simulator(const ProtocolConfig &cfg, const channel::Codebook &codebook,
                                                predictors::Variant variant, double scan_probability);

} // namespace aoba::protocol
