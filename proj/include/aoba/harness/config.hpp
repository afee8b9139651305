#pragma once

// Experiment configuration as flat `dotted.key = value` text. Every key has
// a default; unknown keys, malformed values and invalid combinations raise
// aoba::ConfigError naming the field.

#include "aoba/channel.hpp"
#include "aoba/mobility.hpp"
#include "aoba/predictors/arima.hpp"
#include "aoba/predictors/ekf.hpp"
#include "aoba/predictors/odelstm.hpp"
#include "aoba/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace aoba::harness {

struct ModelConfig {
	predictors::Variant variant = predictors::Variant::tracking;
	int conv_layers = 0; // 0 picks the variant default
	int conv_channels = 10;
	int kernel_size = 3;
	int hidden_size = 32;
	int ode_hidden = 32;
	int ode_substeps = 1;
};

struct TrainSettings {
	predictors::TrainConfig optim;
	double scan_probability = 0.3;
	int num_traces = 512;
	std::vector<double> velocities; // empty: mobility.speed_mps
	std::vector<std::string> models{"odelstm", "lstm"};
};

struct EvalSettings {
	int num_traces = 32;
	std::vector<std::string> predictors{"odelstm", "lstm", "ekf", "arima"};
	std::vector<protocol::SwitchRule> rules{protocol::SwitchRule::off, protocol::SwitchRule::periodic,
	                                        protocol::SwitchRule::adaptive};
	std::string overhead_predictor = "odelstm";
	bool save_logs = false;
};

struct ExperimentConfig {
	channel::ArrayConfig array;
	mobility::SceneConfig scene;
	mobility::MobilityConfig mobility;
	protocol::ProtocolConfig protocol;
	ModelConfig model;
	TrainSettings train;
	EvalSettings eval;
	predictors::EkfConfig ekf;
	bool ekf_auto_process_noise = true;
	predictors::ArimaConfig arima;
	std::vector<double> sweep_velocities{5, 10, 15, 20, 25, 30};
	std::uint64_t seed = 1;

	void validate() const;
};

ExperimentConfig parse_config(std::istream &in);
ExperimentConfig parse_config_text(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);

// Applies one `key = value` assignment.
void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value);
std::vector<std::string> config_keys();

// Every key with its current value, sorted by key.
std::map<std::string, std::string> to_key_values(const ExperimentConfig &cfg);
std::string canonical_text(const ExperimentConfig &cfg);
// FNV-1a 64 of canonical_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig &cfg);

std::string format_double(double v);

// Model architecture implied by the config.
predictors::OdeLstmArch model_arch(const ExperimentConfig &cfg, bool use_ode);

// Process noise scaled to the angular dynamics v/r at mid start range.
predictors::EkfConfig effective_ekf(const ExperimentConfig &cfg);

} // namespace aoba::harness
