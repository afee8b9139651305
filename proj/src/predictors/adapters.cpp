#include "aoba/predictors/oracle.hpp"
#include "aoba/predictors/predictor.hpp"

namespace aoba::predictors {

std::string to_string(Mode mode) {
	return mode == Mode::scan ? "scan" : "track";
}

PredictionOutput one_hot_output(double time_s, int global_index, const selection::CandidateSet &cs) {
	PredictionOutput out;
	out.time_s = time_s;
	auto local = selection::to_local(global_index, cs);
	out.local_index = local ? *local : selection::nearest_local(global_index, cs, cs.direction);
	out.global_index = selection::to_global(out.local_index, cs);
	out.probabilities.assign(static_cast<std::size_t>(cs.size()), 0.0);
	out.probabilities[static_cast<std::size_t>(out.local_index - 1)] = 1.0;
	return out;
}

OraclePredictor::OraclePredictor(const mobility::ChannelTrace &trace, const channel::Codebook &codebook)
    : trace_(&trace), codebook_(&codebook) {}

std::vector<PredictionOutput> OraclePredictor::predict(std::span<const double> times_s) {
	const auto full = selection::full_scan(codebook_->size());
	std::vector<PredictionOutput> out;
	out.reserve(times_s.size());
	for (double t : times_s) {
		auto h = channel::channel_vector(trace_->at(t), trace_->array);
		out.push_back(one_hot_output(t, channel::best_beam(h, *codebook_), full));
	}
	return out;
}

} // namespace aoba::predictors
