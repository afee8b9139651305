#include "aoba/protocol.hpp"

#include "aoba/errors.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace aoba::protocol {

std::string to_string(SwitchRule r) {
	switch (r) {
	case SwitchRule::off:
		return "off";
	case SwitchRule::periodic:
		return "periodic";
	case SwitchRule::adaptive:
		return "adaptive";
	}
	return "?";
}

std::string to_string(ThresholdPolicy p) {
	return p == ThresholdPolicy::running_mean ? "running_mean" : "fixed";
}

SwitchRule parse_switch_rule(const std::string &name) {
	if (name == "off") {
		return SwitchRule::off;
	}
	if (name == "periodic") {
		return SwitchRule::periodic;
	}
	if (name == "adaptive") {
		return SwitchRule::adaptive;
	}
	throw ConfigError("unknown switch rule '" + name + "'");
}

ThresholdPolicy parse_threshold_policy(const std::string &name) {
	if (name == "running_mean") {
		return ThresholdPolicy::running_mean;
	}
	if (name == "fixed") {
		return ThresholdPolicy::fixed;
	}
	throw ConfigError("unknown threshold policy '" + name + "'");
}

void ProtocolConfig::validate(int codebook_size) const {
	if (!(period_s > 0.0)) {
		throw ConfigError("protocol.period_s must be positive");
	}
	if (switch_period_stages < 1) {
		throw ConfigError("protocol.switch_period_stages must be at least 1");
	}
	if (candidate_size < 1 || candidate_size > codebook_size) {
		throw ConfigError("selection.size must lie in [1, Q]");
	}
	if (j0 < 0 || j0 >= candidate_size) {
		throw ConfigError("selection.j0 must lie in [0, selection.size)");
	}
	if (strategy == selection::Strategy::interleaved && 2 * candidate_size > codebook_size) {
		throw ConfigError("interleaved selection needs 2 * selection.size <= Q");
	}
	if (prediction_count < 1) {
		throw ConfigError("protocol.prediction_count must be positive");
	}
	if (!(noise_variance >= 0.0)) {
		throw ConfigError("protocol.noise_variance must be non-negative");
	}
	if (!(fixed_threshold >= 0.0)) {
		throw ConfigError("protocol.fixed_threshold must be non-negative");
	}
}

bool decide_periodic(int stage_index, int switch_period_stages) {
	if (stage_index < 0 || switch_period_stages < 1) {
		throw std::invalid_argument("decide_periodic: bad arguments");
	}
	return stage_index % switch_period_stages == 0;
}

bool decide_adaptive(double last_gain, double threshold) {
	return last_gain < threshold;
}

double update_threshold(std::span<const double> gains) {
	if (gains.empty()) {
		return 0.0;
	}
	return std::accumulate(gains.begin(), gains.end(), 0.0) / static_cast<double>(gains.size());
}

int num_stages(const mobility::ChannelTrace &trace, double period_s) {
	const double span = trace.end_time() - trace.start_time();
	const int n = static_cast<int>(std::floor(span / period_s + 1e-9));
	if (n < 1) {
		throw std::invalid_argument("trace shorter than one alignment period");
	}
	return n;
}

predictors::StageObservation observe_stage(const mobility::ChannelTrace &trace, int stage_index, double time_s,
                                           Mode mode, std::optional<int> previous_best,
                                           selection::Direction direction, const ProtocolConfig &cfg,
                                           const channel::Codebook &codebook, Rng &rng) {
	const int q_count = codebook.size();
	predictors::StageObservation obs;
	obs.stage_index = stage_index;
	obs.time_s = time_s;
	obs.mode = mode;
	obs.previous_best = previous_best;
	if (mode == Mode::scan) {
		obs.probed = selection::full_scan(q_count, previous_best);
	} else {
		if (!previous_best) {
			throw std::logic_error("tracking needs a previous optimum");
		}
		obs.probed = selection::build_candidates(cfg.strategy, *previous_best, cfg.candidate_size, q_count, cfg.j0,
		                                         direction);
	}
	const auto h = channel::channel_vector(trace.at(time_s), trace.array);
	obs.pilots.reserve(obs.probed.global_indices.size());
	double best = -1.0;
	for (int g : obs.probed.global_indices) {
		obs.pilots.push_back(channel::synth_pilot(h, g, codebook, cfg.noise_variance, rng, time_s));
		double p = std::norm(obs.pilots.back().value);
		if (p > best) {
			best = p;
			obs.measured_best = g;
		}
	}
	return obs;
}

namespace {

void check_inputs(const mobility::ChannelTrace &trace, const ProtocolConfig &cfg, const channel::Codebook &codebook) {
	if (!(trace.array == codebook.array())) {
		throw ConfigError("trace array does not match the codebook array");
	}
	cfg.validate(codebook.size());
}

} // namespace

EpisodeLog run_episode(const mobility::ChannelTrace &trace, predictors::BeamPredictor &predictor,
                       const ProtocolConfig &cfg, const channel::Codebook &codebook, Rng &rng) {
	check_inputs(trace, cfg, codebook);
	const int stages = num_stages(trace, cfg.period_s);
	const int q_count = codebook.size();

	EpisodeLog log;
	log.predictor = predictor.name();
	log.codebook_size = q_count;
	log.period_s = cfg.period_s;
	log.meta = trace.meta;
	predictor.reset();

	std::vector<int> optima;
	double gain_sum = 0.0;
	long gain_count = 0;
	double last_gain = 0.0;
	const double t0 = trace.start_time();

	for (int n = 0; n < stages; ++n) {
		const double t_n = t0 + n * cfg.period_s;
		bool scan = n == 0;
		if (!scan) {
			switch (cfg.switch_rule) {
			case SwitchRule::off:
				break;
			case SwitchRule::periodic:
				scan = decide_periodic(n, cfg.switch_period_stages);
				break;
			case SwitchRule::adaptive: {
				double threshold = cfg.threshold_policy == ThresholdPolicy::fixed
				                       ? cfg.fixed_threshold
				                       : (gain_count > 0 ? gain_sum / static_cast<double>(gain_count) : 0.0);
				scan = decide_adaptive(last_gain, threshold);
				break;
			}
			}
		}
		std::optional<int> prev;
		if (!optima.empty()) {
			prev = optima.back();
		}
		auto dir = selection::estimate_direction(optima, q_count);
		auto obs = observe_stage(trace, n, t_n, scan ? Mode::scan : Mode::track, prev, dir, cfg, codebook, rng);
		optima.push_back(obs.measured_best);

		predictor.ingest(obs);
		auto times = mobility::prediction_instants(t_n, cfg.period_s, cfg.prediction_count);
		auto outputs = predictor.predict(times);
		if (outputs.size() != times.size()) {
			throw std::logic_error("predictor returned the wrong number of outputs");
		}

		StageLog stage;
		stage.stage_index = n;
		stage.time_s = t_n;
		stage.mode = obs.mode;
		stage.candidates = obs.probed;
		stage.pilots_sent = static_cast<int>(obs.pilots.size());
		stage.measured_best = obs.measured_best;
		stage.predictions.reserve(outputs.size());
		for (std::size_t i = 0; i < outputs.size(); ++i) {
			const auto h = channel::channel_vector(trace.at(times[i]), trace.array);
			PredictionRecord rec;
			rec.time_s = times[i];
			rec.tau = static_cast<double>(i + 1) / static_cast<double>(cfg.prediction_count + 1);
			rec.predicted = outputs[i].global_index;
			rec.optimal = channel::best_beam(h, codebook);
			rec.gain = channel::beamforming_gain(h, codebook.codeword(rec.predicted));
			rec.normalized_gain = channel::normalized_gain(h, rec.predicted, codebook);
			const double g = cfg.adaptive_raw_gain ? rec.gain : rec.normalized_gain;
			gain_sum += g;
			++gain_count;
			last_gain = g;
			stage.predictions.push_back(rec);
		}
		log.stages.push_back(std::move(stage));
	}
	return log;
}

double overhead(const EpisodeLog &log, int codebook_size) {
	if (log.stages.empty()) {
		throw std::invalid_argument("overhead of an empty log");
	}
	const std::size_t first = log.stages.size() > 1 ? 1 : 0;
	long pilots = 0;
	for (std::size_t n = first; n < log.stages.size(); ++n) {
		pilots += log.stages[n].pilots_sent;
	}
	return static_cast<double>(pilots) /
	       (static_cast<double>(codebook_size) * static_cast<double>(log.stages.size() - first));
}

std::vector<predictors::TrainingStage> simulate_training_stages(const mobility::ChannelTrace &trace,
                                                                const ProtocolConfig &cfg,
                                                                const channel::Codebook &codebook,
                                                                predictors::Variant variant, double scan_probability,
                                                                Rng &rng) {
	check_inputs(trace, cfg, codebook);
	const int stages = num_stages(trace, cfg.period_s);
	const int q_count = codebook.size();
	std::bernoulli_distribution coin(std::clamp(scan_probability, 0.0, 1.0));
	std::vector<predictors::TrainingStage> out;
	std::vector<int> optima;
	const double t0 = trace.start_time();
	for (int n = 0; n < stages; ++n) {
		const double t_n = t0 + n * cfg.period_s;
		bool scan = n == 0 || variant == predictors::Variant::scanning || coin(rng);
		std::optional<int> prev;
		if (!optima.empty()) {
			prev = optima.back();
		}
		auto dir = selection::estimate_direction(optima, q_count);
		predictors::TrainingStage st;
		st.obs = observe_stage(trace, n, t_n, scan ? Mode::scan : Mode::track, prev, dir, cfg, codebook, rng);
		optima.push_back(st.obs.measured_best);
		st.query_times_s = mobility::prediction_instants(t_n, cfg.period_s, cfg.prediction_count);
		for (double t : st.query_times_s) {
			const auto h = channel::channel_vector(trace.at(t), trace.array);
			bool empty = std::all_of(h.begin(), h.end(), [](channel::Complex z) { return z == channel::Complex(0.0, 0.0); });
			st.oracle_best.push_back(empty ? 0 : channel::best_beam(h, codebook));
		}
		st.next_stage_time_s = t_n + cfg.period_s;
		out.push_back(std::move(st));
	}
	return out;
}

predictors::StageSimulator make_stage_simulator(const ProtocolConfig &cfg, const channel::Codebook &codebook,
                                                predictors::Variant variant, double scan_probability) {
	return [cfg, &codebook, variant, scan_probability](const mobility::ChannelTrace &trace, Rng &rng) {
		return simulate_training_stages(trace, cfg, codebook, variant, scan_probability, rng);
	};
}

} // namespace aoba::protocol
