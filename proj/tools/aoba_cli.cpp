// Command-line front end: generate, train, eval, sweep, aggregate.

#include "aoba/errors.hpp"
#include "aoba/harness/config.hpp"
#include "aoba/harness/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace aoba;

namespace {

struct CommonOptions {
	std::string config;
	std::optional<std::uint64_t> seed;
	std::vector<std::string> overrides;
	std::string out;
	bool quiet = false;
};

void add_common(CLI::App *cmd, CommonOptions &opt) {
	cmd->add_option("--config", opt.config, "Config file (dotted key = value)");
	cmd->add_option("--seed", opt.seed, "Override the master seed");
	cmd->add_option("--set", opt.overrides, "Override a config entry, key=value (repeatable)");
	cmd->add_option("--out", opt.out, "Output directory")->required();
	cmd->add_flag("--quiet", opt.quiet, "No progress output");
}

harness::ExperimentConfig resolve_config(const CommonOptions &opt) {
	harness::ExperimentConfig cfg;
	if (!opt.config.empty()) {
		cfg = harness::load_config(opt.config);
	}
	for (const auto &kv : opt.overrides) {
		auto eq = kv.find('=');
		if (eq == std::string::npos) {
			throw ConfigError("--set expects key=value, got '" + kv + "'");
		}
		auto trim = [](std::string s) {
			s.erase(0, s.find_first_not_of(" \t"));
			s.erase(s.find_last_not_of(" \t") + 1);
			return s;
		};
		harness::set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
	}
	if (opt.seed) {
		cfg.seed = *opt.seed;
	}
	cfg.validate();
	return cfg;
}

std::optional<fs::path> maybe_path(const std::string &s) {
	if (s.empty()) {
		return std::nullopt;
	}
	return fs::path(s);
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"aoba: beam alignment simulator and predictor harness"};
	app.require_subcommand(1);

	CommonOptions gen_opt, train_opt, eval_opt, sweep_opt;
	std::string train_traces, train_resume, eval_checkpoints, eval_traces, sweep_checkpoints;
	std::string agg_logs, agg_out, agg_overhead = "odelstm";

	auto *gen = app.add_subcommand("generate", "Synthesize train and eval traces with a manifest");
	add_common(gen, gen_opt);

	auto *train = app.add_subcommand("train", "Train the learned predictors");
	add_common(train, train_opt);
	train->add_option("--traces", train_traces, "Directory written by generate");
	train->add_option("--resume", train_resume, "Directory with checkpoints to continue from");

	auto *eval = app.add_subcommand("eval", "Run episodes and write the metric CSVs");
	add_common(eval, eval_opt);
	eval->add_option("--checkpoints", eval_checkpoints, "Directory with odelstm.bmdl / lstm.bmdl");
	eval->add_option("--traces", eval_traces, "Directory written by generate");

	auto *sweep = app.add_subcommand("sweep", "Evaluate across the configured velocity list");
	add_common(sweep, sweep_opt);
	sweep->add_option("--checkpoints", sweep_checkpoints, "Directory with checkpoints (trains when absent)");

	auto *agg = app.add_subcommand("aggregate", "Rebuild the CSVs from saved episode logs");
	agg->add_option("--logs", agg_logs, "episodes.jsonl written by eval or sweep")->required();
	agg->add_option("--out", agg_out, "Output directory")->required();
	agg->add_option("--overhead-predictor", agg_overhead, "Predictor whose runs define overhead.csv");

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return 2;
	}

	try {
		if (*gen) {
			auto cfg = resolve_config(gen_opt);
			harness::cmd_generate(cfg, gen_opt.out);
		} else if (*train) {
			auto cfg = resolve_config(train_opt);
			harness::cmd_train(cfg, maybe_path(train_traces), train_opt.out, maybe_path(train_resume),
			                   train_opt.quiet ? nullptr : &std::cerr);
		} else if (*eval) {
			auto cfg = resolve_config(eval_opt);
			harness::cmd_eval(cfg, maybe_path(eval_checkpoints), maybe_path(eval_traces), eval_opt.out,
			                  eval_opt.quiet ? nullptr : &std::cerr);
		} else if (*sweep) {
			auto cfg = resolve_config(sweep_opt);
			harness::cmd_sweep(cfg, maybe_path(sweep_checkpoints), sweep_opt.out,
			                   sweep_opt.quiet ? nullptr : &std::cerr);
		} else if (*agg) {
			harness::cmd_aggregate(agg_logs, agg_overhead, agg_out);
		}
	} catch (const ConfigError &e) {
		std::cerr << "config error: " << e.what() << '\n';
		return 2;
	} catch (const IoError &e) {
		std::cerr << "i/o error: " << e.what() << '\n';
		return 3;
	} catch (const NumericError &e) {
		std::cerr << "numeric failure: " << e.what() << '\n';
		return 4;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
	return 0;
}
