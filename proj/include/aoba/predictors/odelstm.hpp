#pragma once

// Continuous-time recurrent beam predictor: conv front-end over the beam axis,
// LSTM cell per alignment stage, Euler-integrated derivative net between
// stages and query instants, softmax head over the active beam set.
//
// Input packing per beam (4 channels): Re y, Im y, |y|, and a one-hot marker
// at the previous stage optimum when it lies in the window.
//
// Time inside the ODE block is normalized by arch.time_scale_s (the alignment
// period by default), so one period spans unit time.

#include "aoba/mobility.hpp"
#include "aoba/nn/layers.hpp"
#include "aoba/nn/tensor.hpp"
#include "aoba/predictors/predictor.hpp"
#include "aoba/rng.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace aoba::predictors {

enum class Variant { scanning, tracking };

std::string to_string(Variant v);
Variant parse_variant(const std::string &name);

struct OdeLstmArch {
	static constexpr int kInputChannels = 4;

	Variant variant = Variant::tracking;
	bool use_ode = true;    // false gives the one-step LSTM baseline
	int input_width = 11;   // |S| for tracking, Q for scanning; also the output size
	int conv_layers = 2;
	int conv_channels = 10;
	int kernel_size = 3;
	int hidden_size = 32;
	int ode_hidden = 32;
	double time_scale_s = 0.1;
	double ode_step = 0.01; // maximum Euler step in normalized time

	int output_size() const { return input_width; }
	int feature_size() const { return conv_channels * input_width; }
	void validate() const;
	bool operator==(const OdeLstmArch &) const = default;
};

// Defaults: 3 conv layers when scanning, 2 when tracking; one Euler step per
// prediction interval times `substeps`.
OdeLstmArch make_arch(Variant variant, int input_width, double period_s, int prediction_count, int substeps = 1,
                      bool use_ode = true);

class OdeLstmModel {
public:
	// All parameters zero.
	explicit OdeLstmModel(const OdeLstmArch &arch);

	OdeLstmModel(const OdeLstmModel &other);
	OdeLstmModel &operator=(const OdeLstmModel &other);

	// Uniform fan-in init for conv, LSTM (forget bias +1) and the derivative
	// net; the softmax head starts at zero.
	void init_random(Rng &rng);

	const OdeLstmArch &arch() const { return arch_; }
	nn::ParamList parameters();
	std::vector<const nn::Param *> parameters() const;

	std::vector<nn::Conv1d> conv;
	nn::LstmCell lstm;
	nn::OdeDerivativeNet ode;
	nn::Dense head;

private:
	OdeLstmArch arch_;
};

struct PredictorState {
	std::vector<double> h;
	std::vector<double> c;
	double last_stage_time_s = 0.0;
	bool started = false;
	std::optional<selection::CandidateSet> window; // active set; full scan for the scanning variant
};

PredictorState initial_state(const OdeLstmModel &model);

// [4 x |cs|] tensor; pilots must follow the set's local order.
nn::Tensor pack_pilots(std::span<const channel::PilotObservation> pilots, const selection::CandidateSet &cs);

// Conv stack + ReLU, flattened.
std::vector<double> extract_features(const OdeLstmModel &model, const nn::Tensor &input);

// Number of Euler steps for a normalized interval (at least 1).
int ode_steps(const OdeLstmArch &arch, double elapsed_normalized);

// Hidden state carried forward by `elapsed_s` (identity without the ODE block).
std::vector<double> evolve_hidden(const OdeLstmModel &model, std::span<const double> h, double elapsed_s);

PredictorState odelstm_ingest(const OdeLstmModel &model, const PredictorState &state,
                              std::span<const channel::PilotObservation> pilots, const selection::CandidateSet &cs,
                              double stage_time_s);

PredictionOutput odelstm_query(const OdeLstmModel &model, const PredictorState &state, double query_time_s,
                               const selection::CandidateSet &cs);

// Ascending query times, integrated incrementally from the stage time.
std::vector<PredictionOutput> odelstm_query_sweep(const OdeLstmModel &model, const PredictorState &state,
                                                  std::span<const double> query_times_s,
                                                  const selection::CandidateSet &cs);

// One output at stage_start + period/2, returned for every query time.
std::function<PredictionOutput(double)> lstm_onestep_predict(const OdeLstmModel &model, const PredictorState &state,
                                                             double stage_start_s, double period_s,
                                                             const selection::CandidateSet &cs);

// Window the model sees for a stage: the probed set when tracking; on a scan,
// a centred window of the model's width around the scan optimum (tracking
// variant) or the whole codebook (scanning variant).
selection::CandidateSet model_window(const OdeLstmArch &arch, const StageObservation &obs, int codebook_size);
std::vector<channel::PilotObservation> window_pilots(const StageObservation &obs, const selection::CandidateSet &window);

// ------------------------------------------------------------------ training

struct TrainingStage {
	StageObservation obs;
	std::vector<double> query_times_s;
	std::vector<int> oracle_best; // global; 0 when the channel is empty
	double next_stage_time_s = 0.0;
};

using StageSimulator = std::function<std::vector<TrainingStage>(const mobility::ChannelTrace &, Rng &)>;

struct TrainConfig {
	int epochs = 40;
	int batch_size = 8;
	double learning_rate = 3e-3;
	double clip_norm = 5.0;
};

struct StageSample {
	nn::Tensor input;
	std::vector<double> query_tau; // normalized elapsed time since the stage
	std::vector<int> labels;       // 1-based local; 0 = skipped
	double next_tau = 1.0;
};

struct SequenceSample {
	std::vector<StageSample> stages;
	long label_count = 0;
};

// Labels outside the window map to the circularly nearest member.
SequenceSample make_sequence_sample(const OdeLstmArch &arch, std::span<const TrainingStage> stages,
                                    int codebook_size, long *skipped_labels = nullptr);

// Summed cross-entropy over every labelled instant of the sequence.
double sequence_loss(const OdeLstmModel &model, const SequenceSample &sample);
// Same, and accumulates weight * d(loss)/d(params) into Param::grad.
double sequence_loss_and_grad(OdeLstmModel &model, const SequenceSample &sample, double weight);

struct TrainResult {
	OdeLstmModel model;
	std::vector<double> loss_history; // mean cross-entropy per labelled instant, per epoch
	long skipped_labels = 0;
};

using TrainProgress = std::function<void(int epoch, double mean_loss)>;

TrainResult odelstm_train(const OdeLstmModel &initial, std::span<const mobility::ChannelTrace> traces,
                          const StageSimulator &simulate, const TrainConfig &cfg, Rng &rng,
                          const TrainProgress &progress = {});

// ---------------------------------------------------------------- checkpoints

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const OdeLstmModel &model, std::ostream &out);
void save_checkpoint(const OdeLstmModel &model, const std::filesystem::path &path);
// Throws aoba::IoError on format problems and when `expected` differs from the stored architecture.
OdeLstmModel load_checkpoint(std::istream &in, const std::optional<OdeLstmArch> &expected = std::nullopt);
OdeLstmModel load_checkpoint(const std::filesystem::path &path,
                             const std::optional<OdeLstmArch> &expected = std::nullopt);

// Predictor adapter driving the model through the protocol.
class OdeLstmPredictor : public BeamPredictor {
public:
	OdeLstmPredictor(const OdeLstmModel &model, int codebook_size, double period_s);

	std::string name() const override;
	void reset() override;
	void ingest(const StageObservation &obs) override;
	std::vector<PredictionOutput> predict(std::span<const double> times_s) override;

	const PredictorState &state() const { return state_; }

private:
	const OdeLstmModel *model_;
	int codebook_size_;
	double period_s_;
	PredictorState state_;
};

} // namespace aoba::predictors
