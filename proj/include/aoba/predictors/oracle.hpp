#pragma once

#include "aoba/mobility.hpp"
#include "aoba/predictors/predictor.hpp"

namespace aoba::predictors {

// Debug upper bound: reads the true channel and returns its best beam over
// the whole codebook, ignoring the active set.
class OraclePredictor : public BeamPredictor {
public:
	OraclePredictor(const mobility::ChannelTrace &trace, const channel::Codebook &codebook);

	std::string name() const override { return "oracle"; }
	void reset() override {}
	void ingest(const StageObservation &) override {}
	std::vector<PredictionOutput> predict(std::span<const double> times_s) override;

private:
	const mobility::ChannelTrace *trace_;
	const channel::Codebook *codebook_;
};

} // namespace aoba::predictors
