#pragma once

#include "aoba/harness/config.hpp"
#include "aoba/harness/metrics.hpp"
#include "aoba/predictors/odelstm.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace aoba::harness {

enum class TraceRole { train, eval };

// Master seed + index; eval indices continue after the training ones.
std::uint64_t trace_seed(const ExperimentConfig &cfg, TraceRole role, int index);

mobility::ChannelTrace make_trace(const ExperimentConfig &cfg, TraceRole role, int index, double velocity_mps);
// Training traces cycle through train.velocities (or mobility.speed_mps).
std::vector<mobility::ChannelTrace> make_traces(const ExperimentConfig &cfg, TraceRole role,
                                                std::optional<double> velocity_mps = std::nullopt);

struct TraceSet {
	std::vector<mobility::ChannelTrace> traces;
	std::vector<int> ids;
	std::vector<double> velocities;
};

// Writes train/ and eval/ trace files plus manifest.json.
void cmd_generate(const ExperimentConfig &cfg, const std::filesystem::path &out_dir);
TraceSet load_trace_set(const std::filesystem::path &dir, TraceRole role);

struct TrainedModels {
	std::optional<predictors::OdeLstmModel> odelstm;
	std::optional<predictors::OdeLstmModel> lstm;
};

predictors::TrainResult train_model(const ExperimentConfig &cfg, std::span<const mobility::ChannelTrace> traces,
                                    bool use_ode, const std::optional<predictors::OdeLstmModel> &resume,
                                    std::ostream *log);

// Trains every model in train.models; writes <name>.bmdl and loss_<name>.csv.
TrainedModels cmd_train(const ExperimentConfig &cfg, const std::optional<std::filesystem::path> &traces_dir,
                        const std::filesystem::path &out_dir,
                        const std::optional<std::filesystem::path> &resume_dir, std::ostream *log);

TrainedModels load_models(const ExperimentConfig &cfg, const std::filesystem::path &dir,
                          const std::vector<std::string> &names);

std::unique_ptr<predictors::BeamPredictor> make_predictor(const std::string &name, const ExperimentConfig &cfg,
                                                          const TrainedModels &models,
                                                          const channel::Codebook &codebook,
                                                          const mobility::ChannelTrace &trace);

// Every predictor x rule x trace; pilot noise is seeded per trace id, so all
// predictors see the same observations.
std::vector<EpisodeRecord> evaluate(const ExperimentConfig &cfg, const TraceSet &traces, const TrainedModels &models,
                                    std::ostream *log);

Metrics cmd_eval(const ExperimentConfig &cfg, const std::optional<std::filesystem::path> &checkpoints_dir,
                 const std::optional<std::filesystem::path> &traces_dir, const std::filesystem::path &out_dir,
                 std::ostream *log);

// Trains first when no checkpoint directory is given.
Metrics cmd_sweep(const ExperimentConfig &cfg, const std::optional<std::filesystem::path> &checkpoints_dir,
                  const std::filesystem::path &out_dir, std::ostream *log);

// Rebuilds the CSVs from a saved episodes.jsonl.
Metrics cmd_aggregate(const std::filesystem::path &logs, const std::string &overhead_predictor,
                      const std::filesystem::path &out_dir);

} // namespace aoba::harness
