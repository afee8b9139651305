#pragma once

// Common surface shared by every beam predictor: what the protocol hands over
// after an alignment stage, and what a predictor returns for a query instant.

#include "aoba/channel.hpp"
#include "aoba/selection.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aoba::predictors {

enum class Mode { scan, track };

std::string to_string(Mode mode);

struct StageObservation {
	int stage_index = 0;
	double time_s = 0.0;
	Mode mode = Mode::scan;
	selection::CandidateSet probed;                 // pilots are in its local order
	std::vector<channel::PilotObservation> pilots;
	int measured_best = 1;                          // argmax |y|^2 over probed beams
	std::optional<int> previous_best;               // measured optimum of the previous stage
};

struct PredictionOutput {
	double time_s = 0.0;
	std::vector<double> probabilities; // over the active set, local order
	int local_index = 1;
	int global_index = 1;
};

class BeamPredictor {
public:
	virtual ~BeamPredictor() = default;

	virtual std::string name() const = 0;
	// Forget all episode state.
	virtual void reset() = 0;
	virtual void ingest(const StageObservation &obs) = 0;
	// Query instants must be ascending and not earlier than the last stage.
	virtual std::vector<PredictionOutput> predict(std::span<const double> times_s) = 0;
};

// Degenerate distribution over `cs` concentrated on the member nearest to
// `global_index` (ties toward the set's movement direction).
PredictionOutput one_hot_output(double time_s, int global_index, const selection::CandidateSet &cs);

} // namespace aoba::predictors
