#include "aoba/harness/experiment.hpp"

#include "aoba/errors.hpp"
#include "aoba/predictors/arima.hpp"
#include "aoba/predictors/ekf.hpp"
#include "aoba/predictors/oracle.hpp"
#include "aoba/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace aoba::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kEpisodeStream = 0x45504953ULL;
constexpr std::uint64_t kTrainStream = 0x5452414eULL;
constexpr std::uint64_t kInitStream = 0x494e4954ULL;

void ensure_dir(const fs::path &dir) {
	std::error_code ec;
	fs::create_directories(dir, ec);
	if (ec || !fs::is_directory(dir)) {
		throw IoError("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
	}
}

std::ofstream open_out(const fs::path &path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw IoError("cannot open " + path.string() + " for writing");
	}
	return out;
}

std::string trace_file_name(int index) {
	char buf[32];
	std::snprintf(buf, sizeof(buf), "trace_%04d.btrc", index);
	return buf;
}

const char *role_name(TraceRole role) {
	return role == TraceRole::train ? "train" : "eval";
}

double train_velocity(const ExperimentConfig &cfg, int index) {
	if (cfg.train.velocities.empty()) {
		return cfg.mobility.speed_mps;
	}
	return cfg.train.velocities[static_cast<std::size_t>(index) % cfg.train.velocities.size()];
}

bool needs_model(const std::vector<std::string> &predictors, const std::string &name) {
	return std::find(predictors.begin(), predictors.end(), name) != predictors.end();
}

} // namespace

std::uint64_t trace_seed(const ExperimentConfig &cfg, TraceRole role, int index) {
	const std::uint64_t offset = role == TraceRole::train ? 0 : static_cast<std::uint64_t>(cfg.train.num_traces);
	return cfg.seed + offset + static_cast<std::uint64_t>(index);
}

mobility::ChannelTrace make_trace(const ExperimentConfig &cfg, TraceRole role, int index, double velocity_mps) {
	auto mob = cfg.mobility;
	mob.speed_mps = velocity_mps;
	return mobility::synthesize_trace(mob, cfg.scene, cfg.array, trace_seed(cfg, role, index));
}

std::vector<mobility::ChannelTrace> make_traces(const ExperimentConfig &cfg, TraceRole role,
                                                std::optional<double> velocity_mps) {
	const int count = role == TraceRole::train ? cfg.train.num_traces : cfg.eval.num_traces;
	std::vector<mobility::ChannelTrace> out;
	out.reserve(static_cast<std::size_t>(count));
	for (int k = 0; k < count; ++k) {
		double v = velocity_mps ? *velocity_mps
		                        : (role == TraceRole::train ? train_velocity(cfg, k) : cfg.mobility.speed_mps);
		out.push_back(make_trace(cfg, role, k, v));
	}
	return out;
}

void cmd_generate(const ExperimentConfig &cfg, const fs::path &out_dir) {
	cfg.validate();
	json manifest;
	manifest["config_hash"] = config_hash(cfg);
	manifest["seed"] = cfg.seed;
	manifest["config"] = canonical_text(cfg);
	for (TraceRole role : {TraceRole::train, TraceRole::eval}) {
		const fs::path dir = out_dir / role_name(role);
		ensure_dir(dir);
		const int count = role == TraceRole::train ? cfg.train.num_traces : cfg.eval.num_traces;
		json entries = json::array();
		for (int k = 0; k < count; ++k) {
			double v = role == TraceRole::train ? train_velocity(cfg, k) : cfg.mobility.speed_mps;
			auto trace = make_trace(cfg, role, k, v);
			const std::string name = trace_file_name(k);
			mobility::save_trace(trace, dir / name);
			entries.push_back({{"file", std::string(role_name(role)) + "/" + name},
			                   {"id", k},
			                   {"seed", trace_seed(cfg, role, k)},
			                   {"velocity_mps", v}});
		}
		manifest[role_name(role)] = std::move(entries);
	}
	auto out = open_out(out_dir / "manifest.json");
	out << manifest.dump(2) << '\n';
}

TraceSet load_trace_set(const fs::path &dir, TraceRole role) {
	std::ifstream in(dir / "manifest.json");
	if (!in) {
		throw IoError("cannot open " + (dir / "manifest.json").string());
	}
	json manifest;
	try {
		manifest = json::parse(in);
	} catch (const json::exception &e) {
		throw IoError("malformed manifest: " + std::string(e.what()));
	}
	TraceSet set;
	try {
		for (const auto &e : manifest.at(role_name(role))) {
			set.traces.push_back(mobility::load_trace(dir / e.at("file").get<std::string>()));
			set.ids.push_back(e.at("id").get<int>());
			set.velocities.push_back(e.at("velocity_mps").get<double>());
		}
	} catch (const json::exception &e) {
		throw IoError("malformed manifest: " + std::string(e.what()));
	}
	return set;
}

predictors::TrainResult train_model(const ExperimentConfig &cfg, std::span<const mobility::ChannelTrace> traces,
                                    bool use_ode, const std::optional<predictors::OdeLstmModel> &resume,
                                    std::ostream *log) {
	const auto arch = model_arch(cfg, use_ode);
	predictors::OdeLstmModel model(arch);
	if (resume) {
		if (!(resume->arch() == arch)) {
			throw ConfigError("resume checkpoint architecture does not match the config");
		}
		model = *resume;
	} else {
		Rng init_rng(derive_seed(cfg.seed, kInitStream));
		model.init_random(init_rng);
	}
	for (const auto &t : traces) {
		if (!(t.array == cfg.array)) {
			throw ConfigError("training trace array does not match array.* settings");
		}
	}
	const channel::Codebook codebook(cfg.array);
	auto simulate = protocol::make_stage_simulator(cfg.protocol, codebook, arch.variant, cfg.train.scan_probability);
	Rng rng(derive_seed(cfg.seed, kTrainStream + (use_ode ? 0 : 1)));
	const std::string name = use_ode ? "odelstm" : "lstm";
	predictors::TrainProgress progress;
	if (log) {
		progress = [log, name](int epoch, double loss) {
			*log << name << " epoch " << epoch << " loss " << loss << '\n';
			log->flush();
		};
	}
	return predictors::odelstm_train(model, traces, simulate, cfg.train.optim, rng, progress);
}

TrainedModels cmd_train(const ExperimentConfig &cfg, const std::optional<fs::path> &traces_dir,
                        const fs::path &out_dir, const std::optional<fs::path> &resume_dir, std::ostream *log) {
	cfg.validate();
	std::vector<mobility::ChannelTrace> traces =
	    traces_dir ? load_trace_set(*traces_dir, TraceRole::train).traces : make_traces(cfg, TraceRole::train);
	if (traces.empty()) {
		throw ConfigError("train.num_traces: no training traces");
	}
	ensure_dir(out_dir);
	TrainedModels models;
	for (const auto &name : cfg.train.models) {
		const bool use_ode = name == "odelstm";
		std::optional<predictors::OdeLstmModel> resume;
		if (resume_dir) {
			resume = predictors::load_checkpoint(*resume_dir / (name + ".bmdl"), model_arch(cfg, use_ode));
		}
		auto result = train_model(cfg, traces, use_ode, resume, log);
		predictors::save_checkpoint(result.model, out_dir / (name + ".bmdl"));
		auto csv = open_out(out_dir / ("loss_" + name + ".csv"));
		csv << "epoch,mean_loss\n";
		for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
			csv << e << ',' << format_double(result.loss_history[e]) << '\n';
		}
		if (log && result.skipped_labels > 0) {
			*log << name << ": skipped " << result.skipped_labels << " labels on empty channels\n";
		}
		(use_ode ? models.odelstm : models.lstm) = std::move(result.model);
	}
	return models;
}

TrainedModels load_models(const ExperimentConfig &cfg, const fs::path &dir, const std::vector<std::string> &names) {
	TrainedModels models;
	if (needs_model(names, "odelstm")) {
		models.odelstm = predictors::load_checkpoint(dir / "odelstm.bmdl", model_arch(cfg, true));
	}
	if (needs_model(names, "lstm")) {
		models.lstm = predictors::load_checkpoint(dir / "lstm.bmdl", model_arch(cfg, false));
	}
	return models;
}

std::unique_ptr<predictors::BeamPredictor> make_predictor(const std::string &name, const ExperimentConfig &cfg,
                                                          const TrainedModels &models,
                                                          const channel::Codebook &codebook,
                                                          const mobility::ChannelTrace &trace) {
	const int q_count = codebook.size();
	if (name == "odelstm" || name == "lstm") {
		const auto &m = name == "odelstm" ? models.odelstm : models.lstm;
		if (!m) {
			throw IoError("no trained " + name + " model available");
		}
		return std::make_unique<predictors::OdeLstmPredictor>(*m, q_count, cfg.protocol.period_s);
	}
	if (name == "ekf") {
		return std::make_unique<predictors::EkfPredictor>(codebook, effective_ekf(cfg));
	}
	if (name == "arima") {
		return std::make_unique<predictors::ArimaPredictor>(q_count, cfg.protocol.period_s, cfg.arima);
	}
	if (name == "oracle") {
		return std::make_unique<predictors::OraclePredictor>(trace, codebook);
	}
	throw ConfigError("unknown predictor '" + name + "'");
}

std::vector<EpisodeRecord> evaluate(const ExperimentConfig &cfg, const TraceSet &traces, const TrainedModels &models,
                                    std::ostream *log) {
	const channel::Codebook codebook(cfg.array);
	std::vector<EpisodeRecord> out;
	for (const auto &pred_name : cfg.eval.predictors) {
		for (auto rule : cfg.eval.rules) {
			auto pcfg = cfg.protocol;
			pcfg.switch_rule = rule;
			for (std::size_t k = 0; k < traces.traces.size(); ++k) {
				auto local = cfg;
				local.mobility.speed_mps = traces.velocities[k];
				auto predictor = make_predictor(pred_name, local, models, codebook, traces.traces[k]);
				Rng rng(derive_seed(cfg.seed, kEpisodeStream + static_cast<std::uint64_t>(traces.ids[k])));
				EpisodeRecord rec;
				rec.predictor = pred_name;
				rec.rule = protocol::to_string(rule);
				rec.velocity_mps = traces.velocities[k];
				rec.trace_id = traces.ids[k];
				rec.log = protocol::run_episode(traces.traces[k], *predictor, pcfg, codebook, rng);
				out.push_back(std::move(rec));
			}
			if (log) {
				*log << "evaluated " << pred_name << " / " << protocol::to_string(rule) << '\n';
				log->flush();
			}
		}
	}
	return out;
}

namespace {

TraceSet synthesized_eval_set(const ExperimentConfig &cfg, double velocity) {
	TraceSet set;
	for (int k = 0; k < cfg.eval.num_traces; ++k) {
		set.traces.push_back(make_trace(cfg, TraceRole::eval, k, velocity));
		set.ids.push_back(k);
		set.velocities.push_back(velocity);
	}
	return set;
}

Metrics finish(const ExperimentConfig &cfg, const std::vector<EpisodeRecord> &records, const fs::path &out_dir) {
	ensure_dir(out_dir);
	auto metrics = aggregate(records, cfg.eval.overhead_predictor);
	write_metrics(out_dir, metrics);
	if (cfg.eval.save_logs) {
		save_episode_logs(out_dir / "episodes.jsonl", records);
	}
	return metrics;
}

} // namespace

Metrics cmd_eval(const ExperimentConfig &cfg, const std::optional<fs::path> &checkpoints_dir,
                 const std::optional<fs::path> &traces_dir, const fs::path &out_dir, std::ostream *log) {
	cfg.validate();
	TrainedModels models;
	const bool learned = needs_model(cfg.eval.predictors, "odelstm") || needs_model(cfg.eval.predictors, "lstm");
	if (learned) {
		if (!checkpoints_dir) {
			throw IoError("eval needs --checkpoints for the learned predictors");
		}
		models = load_models(cfg, *checkpoints_dir, cfg.eval.predictors);
	}
	TraceSet traces = traces_dir ? load_trace_set(*traces_dir, TraceRole::eval)
	                             : synthesized_eval_set(cfg, cfg.mobility.speed_mps);
	return finish(cfg, evaluate(cfg, traces, models, log), out_dir);
}

Metrics cmd_sweep(const ExperimentConfig &cfg, const std::optional<fs::path> &checkpoints_dir, const fs::path &out_dir,
                  std::ostream *log) {
	cfg.validate();
	TrainedModels models;
	const bool learned = needs_model(cfg.eval.predictors, "odelstm") || needs_model(cfg.eval.predictors, "lstm");
	if (learned) {
		if (checkpoints_dir) {
			models = load_models(cfg, *checkpoints_dir, cfg.eval.predictors);
		} else {
			auto train_cfg = cfg;
			train_cfg.train.models.clear();
			for (const char *name : {"odelstm", "lstm"}) {
				if (needs_model(cfg.eval.predictors, name)) {
					train_cfg.train.models.push_back(name);
				}
			}
			models = cmd_train(train_cfg, std::nullopt, out_dir / "checkpoints", std::nullopt, log);
		}
	}
	std::vector<EpisodeRecord> records;
	for (double v : cfg.sweep_velocities) {
		auto part = evaluate(cfg, synthesized_eval_set(cfg, v), models, log);
		records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
	}
	return finish(cfg, records, out_dir);
}

Metrics cmd_aggregate(const fs::path &logs, const std::string &overhead_predictor, const fs::path &out_dir) {
	auto records = load_episode_logs(logs);
	auto metrics = aggregate(std::move(records), overhead_predictor);
	ensure_dir(out_dir);
	write_metrics(out_dir, metrics);
	return metrics;
}

} // namespace aoba::harness
