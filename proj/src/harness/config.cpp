#include "aoba/harness/config.hpp"

#include "aoba/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace aoba::harness {

namespace {

std::string trim(const std::string &s) {
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string::npos) {
		return "";
	}
	const auto e = s.find_last_not_of(" \t\r\n");
	return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &value) {
	std::vector<std::string> out;
	std::stringstream ss(value);
	std::string item;
	while (std::getline(ss, item, ',')) {
		item = trim(item);
		if (!item.empty()) {
			out.push_back(item);
		}
	}
	return out;
}

std::string join(const std::vector<std::string> &items) {
	std::string out;
	for (std::size_t k = 0; k < items.size(); ++k) {
		out += (k ? "," : "") + items[k];
	}
	return out;
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const std::string &expected) {
	throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

double parse_double(const std::string &key, const std::string &value) {
	double v = 0.0;
	auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
	if (ec != std::errc() || ptr != value.data() + value.size()) {
		bad_value(key, value, "a number");
	}
	return v;
}

long long parse_int(const std::string &key, const std::string &value) {
	long long v = 0;
	auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
	if (ec != std::errc() || ptr != value.data() + value.size()) {
		bad_value(key, value, "an integer");
	}
	return v;
}

std::uint64_t parse_u64(const std::string &key, const std::string &value) {
	std::uint64_t v = 0;
	auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
	if (ec != std::errc() || ptr != value.data() + value.size()) {
		bad_value(key, value, "an unsigned integer");
	}
	return v;
}

bool parse_bool(const std::string &key, const std::string &value) {
	if (value == "true" || value == "1") {
		return true;
	}
	if (value == "false" || value == "0") {
		return false;
	}
	bad_value(key, value, "true or false");
}

std::vector<double> parse_doubles(const std::string &key, const std::string &value) {
	std::vector<double> out;
	for (const auto &item : split_list(value)) {
		out.push_back(parse_double(key, item));
	}
	return out;
}

std::string format_doubles(const std::vector<double> &values) {
	std::vector<std::string> items;
	for (double v : values) {
		items.push_back(format_double(v));
	}
	return join(items);
}

struct Field {
	std::string key;
	std::function<std::string(const ExperimentConfig &)> get;
	std::function<void(ExperimentConfig &, const std::string &key, const std::string &)> set;
};

#define AOBA_DOUBLE(k, member)                                                                                      \
	Field{k, [](const ExperimentConfig &c) { return format_double(c.member); },                                    \
	      [](ExperimentConfig &c, const std::string &key, const std::string &v) { c.member = parse_double(key, v); }}
#define AOBA_INT(k, member)                                                                                         \
	Field{k, [](const ExperimentConfig &c) { return std::to_string(c.member); },                                   \
	      [](ExperimentConfig &c, const std::string &key, const std::string &v) {                                  \
		      auto x = parse_int(key, v);                                                                           \
		      if (x < -2147483647LL || x > 2147483647LL) {                                                          \
			      bad_value(key, v, "a 32-bit integer");                                                             \
		      }                                                                                                     \
		      c.member = static_cast<int>(x);                                                                       \
	      }}
#define AOBA_BOOL(k, member)                                                                                        \
	Field{k, [](const ExperimentConfig &c) { return std::string(c.member ? "true" : "false"); },                  \
	      [](ExperimentConfig &c, const std::string &key, const std::string &v) { c.member = parse_bool(key, v); }}

const std::vector<Field> &fields() {
	static const std::vector<Field> table = {
	    AOBA_INT("array.num_antennas", array.num_antennas),
	    AOBA_INT("array.codebook_size", array.codebook_size),
	    AOBA_DOUBLE("array.element_spacing", array.element_spacing),

	    AOBA_INT("scene.num_paths", scene.num_paths),
	    AOBA_DOUBLE("scene.nlos_relative_gain_db", scene.nlos_relative_gain_db),
	    AOBA_DOUBLE("scene.nlos_angle_spread_rad", scene.nlos_angle_spread_rad),
	    AOBA_DOUBLE("scene.pathloss_exponent", scene.pathloss_exponent),
	    AOBA_DOUBLE("scene.reference_gain", scene.reference_gain),
	    AOBA_DOUBLE("scene.phase_rotation_hz", scene.phase_rotation_hz),

	    AOBA_DOUBLE("mobility.speed_mps", mobility.speed_mps),
	    AOBA_DOUBLE("mobility.duration_s", mobility.duration_s),
	    AOBA_DOUBLE("mobility.sample_interval_s", mobility.sample_interval_s),
	    AOBA_DOUBLE("mobility.turn_event_rate_hz", mobility.turn_event_rate_hz),
	    AOBA_DOUBLE("mobility.heading_change_std_rad", mobility.heading_change_std_rad),
	    AOBA_DOUBLE("mobility.start_radius_min_m", mobility.start_radius_min_m),
	    AOBA_DOUBLE("mobility.start_radius_max_m", mobility.start_radius_max_m),
	    AOBA_DOUBLE("mobility.min_range_m", mobility.min_range_m),
	    AOBA_DOUBLE("mobility.sector_margin_rad", mobility.sector_margin_rad),

	    AOBA_DOUBLE("protocol.period_s", protocol.period_s),
	    Field{"protocol.switch_rule", [](const ExperimentConfig &c) { return protocol::to_string(c.protocol.switch_rule); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.protocol.switch_rule = protocol::parse_switch_rule(v);
	          }},
	    AOBA_INT("protocol.switch_period_stages", protocol.switch_period_stages),
	    AOBA_INT("selection.size", protocol.candidate_size),
	    AOBA_INT("selection.j0", protocol.j0),
	    Field{"selection.strategy", [](const ExperimentConfig &c) { return selection::to_string(c.protocol.strategy); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.protocol.strategy = selection::parse_strategy(v);
	          }},
	    Field{"protocol.threshold_policy",
	          [](const ExperimentConfig &c) { return protocol::to_string(c.protocol.threshold_policy); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.protocol.threshold_policy = protocol::parse_threshold_policy(v);
	          }},
	    AOBA_DOUBLE("protocol.fixed_threshold", protocol.fixed_threshold),
	    AOBA_BOOL("protocol.adaptive_raw_gain", protocol.adaptive_raw_gain),
	    AOBA_INT("protocol.prediction_count", protocol.prediction_count),
	    AOBA_DOUBLE("protocol.noise_variance", protocol.noise_variance),

	    Field{"model.variant", [](const ExperimentConfig &c) { return predictors::to_string(c.model.variant); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.model.variant = predictors::parse_variant(v);
	          }},
	    AOBA_INT("model.conv_layers", model.conv_layers),
	    AOBA_INT("model.conv_channels", model.conv_channels),
	    AOBA_INT("model.kernel_size", model.kernel_size),
	    AOBA_INT("model.hidden_size", model.hidden_size),
	    AOBA_INT("model.ode_hidden", model.ode_hidden),
	    AOBA_INT("model.ode_substeps", model.ode_substeps),

	    AOBA_INT("train.epochs", train.optim.epochs),
	    AOBA_INT("train.batch_size", train.optim.batch_size),
	    AOBA_DOUBLE("train.learning_rate", train.optim.learning_rate),
	    AOBA_DOUBLE("train.clip_norm", train.optim.clip_norm),
	    AOBA_DOUBLE("train.scan_probability", train.scan_probability),
	    AOBA_INT("train.num_traces", train.num_traces),
	    Field{"train.velocities", [](const ExperimentConfig &c) { return format_doubles(c.train.velocities); },
	          [](ExperimentConfig &c, const std::string &key, const std::string &v) {
		          c.train.velocities = parse_doubles(key, v);
	          }},
	    Field{"train.models", [](const ExperimentConfig &c) { return join(c.train.models); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) { c.train.models = split_list(v); }},

	    AOBA_INT("eval.num_traces", eval.num_traces),
	    Field{"eval.predictors", [](const ExperimentConfig &c) { return join(c.eval.predictors); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.eval.predictors = split_list(v);
	          }},
	    Field{"eval.rules",
	          [](const ExperimentConfig &c) {
		          std::vector<std::string> names;
		          for (auto r : c.eval.rules) {
			          names.push_back(protocol::to_string(r));
		          }
		          return join(names);
	          },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.eval.rules.clear();
		          for (const auto &name : split_list(v)) {
			          c.eval.rules.push_back(protocol::parse_switch_rule(name));
		          }
	          }},
	    Field{"eval.overhead_predictor", [](const ExperimentConfig &c) { return c.eval.overhead_predictor; },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) { c.eval.overhead_predictor = v; }},
	    AOBA_BOOL("eval.save_logs", eval.save_logs),

	    Field{"ekf.process_noise",
	          [](const ExperimentConfig &c) {
		          return c.ekf_auto_process_noise ? std::string("auto") : format_double(c.ekf.process_noise);
	          },
	          [](ExperimentConfig &c, const std::string &key, const std::string &v) {
		          c.ekf_auto_process_noise = v == "auto";
		          if (!c.ekf_auto_process_noise) {
			          c.ekf.process_noise = parse_double(key, v);
		          }
	          }},
	    AOBA_DOUBLE("ekf.measurement_noise", ekf.measurement_noise),
	    AOBA_DOUBLE("ekf.initial_angle_std", ekf.initial_angle_std),
	    AOBA_DOUBLE("ekf.initial_rate_std", ekf.initial_rate_std),
	    AOBA_INT("ekf.reinit_gate_beams", ekf.reinit_gate_beams),

	    Field{"arima.granularity", [](const ExperimentConfig &c) { return predictors::to_string(c.arima.granularity); },
	          [](ExperimentConfig &c, const std::string &, const std::string &v) {
		          c.arima.granularity = predictors::parse_arima_granularity(v);
	          }},
	    AOBA_INT("arima.history_stages", arima.history_stages),
	    AOBA_INT("arima.max_p", arima.grid.max_p),
	    AOBA_INT("arima.max_d", arima.grid.max_d),
	    AOBA_INT("arima.max_q", arima.grid.max_q),

	    Field{"sweep.velocities", [](const ExperimentConfig &c) { return format_doubles(c.sweep_velocities); },
	          [](ExperimentConfig &c, const std::string &key, const std::string &v) {
		          c.sweep_velocities = parse_doubles(key, v);
	          }},
	    Field{"seed", [](const ExperimentConfig &c) { return std::to_string(c.seed); },
	          [](ExperimentConfig &c, const std::string &key, const std::string &v) { c.seed = parse_u64(key, v); }},
	};
	return table;
}

#undef AOBA_DOUBLE
#undef AOBA_INT
#undef AOBA_BOOL

// Shorthand that writes into canonical keys; not listed by to_key_values.
const Field &predictor_alias() {
	static const Field f{"predictor", [](const ExperimentConfig &c) { return c.eval.overhead_predictor; },
	                     [](ExperimentConfig &c, const std::string &, const std::string &v) {
		                     c.eval.predictors = {v};
		                     c.eval.overhead_predictor = v;
	                     }};
	return f;
}

const Field &find_field(const std::string &key) {
	if (key == "predictor") {
		return predictor_alias();
	}
	for (const auto &f : fields()) {
		if (f.key == key) {
			return f;
		}
	}
	throw ConfigError("unknown config key '" + key + "'");
}

const std::array<const char *, 5> kPredictorNames = {"odelstm", "lstm", "ekf", "arima", "oracle"};

bool known_predictor(const std::string &name) {
	return std::find(kPredictorNames.begin(), kPredictorNames.end(), name) != kPredictorNames.end();
}

} // namespace

std::string format_double(double v) {
	char buf[64];
	auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	return std::string(buf, ptr);
}

void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value) {
	const auto &f = find_field(key);
	try {
		f.set(cfg, key, value);
	} catch (const ConfigError &) {
		throw;
	} catch (const std::invalid_argument &e) {
		throw ConfigError(key + ": " + e.what());
	}
}

std::vector<std::string> config_keys() {
	std::vector<std::string> keys;
	for (const auto &f : fields()) {
		keys.push_back(f.key);
	}
	return keys;
}

void ExperimentConfig::validate() const {
	auto field = [](const std::string &name, const auto &check) {
		try {
			check();
		} catch (const ConfigError &e) {
			throw ConfigError(name + ": " + e.what());
		} catch (const std::exception &e) {
			throw ConfigError(name + ": " + e.what());
		}
	};
	field("array", [&] { array.validate(); });
	field("scene", [&] { scene.validate(); });
	field("mobility", [&] { mobility.validate(); });
	field("protocol", [&] { protocol.validate(array.codebook_size); });
	field("ekf", [&] { ekf.validate(); });
	field("arima", [&] { arima.validate(); });
	if (model.conv_layers < 0 || model.conv_channels < 1 || model.kernel_size < 1 || model.kernel_size % 2 == 0 ||
	    model.hidden_size < 1 || model.ode_hidden < 1 || model.ode_substeps < 1) {
		throw ConfigError("model: sizes must be positive and kernel_size odd");
	}
	if (train.optim.epochs < 0 || train.optim.batch_size < 1 || !(train.optim.learning_rate > 0.0) ||
	    !(train.optim.clip_norm > 0.0)) {
		throw ConfigError("train: epochs >= 0, batch_size >= 1, positive learning_rate and clip_norm required");
	}
	if (!(train.scan_probability >= 0.0 && train.scan_probability <= 1.0)) {
		throw ConfigError("train.scan_probability must lie in [0, 1]");
	}
	if (train.num_traces < 0 || eval.num_traces < 0) {
		throw ConfigError("trace counts must be non-negative");
	}
	for (double v : train.velocities) {
		if (!(v > 0.0)) {
			throw ConfigError("train.velocities entries must be positive");
		}
	}
	for (const auto &m : train.models) {
		if (m != "odelstm" && m != "lstm") {
			throw ConfigError("train.models: unknown model '" + m + "'");
		}
	}
	for (const auto &p : eval.predictors) {
		if (!known_predictor(p)) {
			throw ConfigError("eval.predictors: unknown predictor '" + p + "'");
		}
	}
	if (eval.predictors.empty()) {
		throw ConfigError("eval.predictors must not be empty");
	}
	if (eval.rules.empty()) {
		throw ConfigError("eval.rules must not be empty");
	}
	if (!known_predictor(eval.overhead_predictor)) {
		throw ConfigError("eval.overhead_predictor: unknown predictor '" + eval.overhead_predictor + "'");
	}
	if (sweep_velocities.empty()) {
		throw ConfigError("sweep.velocities must not be empty");
	}
	for (double v : sweep_velocities) {
		if (!(v > 0.0)) {
			throw ConfigError("sweep.velocities entries must be positive");
		}
	}
}

ExperimentConfig parse_config(std::istream &in) {
	ExperimentConfig cfg;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		auto hash = line.find('#');
		if (hash != std::string::npos) {
			line.erase(hash);
		}
		line = trim(line);
		if (line.empty()) {
			continue;
		}
		auto eq = line.find('=');
		if (eq == std::string::npos) {
			throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
		}
		set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
	}
	cfg.validate();
	return cfg;
}

ExperimentConfig parse_config_text(const std::string &text) {
	std::istringstream in(text);
	return parse_config(in);
}

ExperimentConfig load_config(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw IoError("cannot open config " + path.string());
	}
	return parse_config(in);
}

std::map<std::string, std::string> to_key_values(const ExperimentConfig &cfg) {
	std::map<std::string, std::string> out;
	for (const auto &f : fields()) {
		out[f.key] = f.get(cfg);
	}
	return out;
}

std::string canonical_text(const ExperimentConfig &cfg) {
	std::string out;
	for (const auto &[k, v] : to_key_values(cfg)) {
		out += k + " = " + v + "\n";
	}
	return out;
}

std::string config_hash(const ExperimentConfig &cfg) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char ch : canonical_text(cfg)) {
		h ^= ch;
		h *= 0x100000001b3ULL;
	}
	char buf[17];
	std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
	return buf;
}

predictors::OdeLstmArch model_arch(const ExperimentConfig &cfg, bool use_ode) {
	const int width =
	    cfg.model.variant == predictors::Variant::scanning ? cfg.array.codebook_size : cfg.protocol.candidate_size;
	auto arch = predictors::make_arch(cfg.model.variant, width, cfg.protocol.period_s, cfg.protocol.prediction_count,
	                                  cfg.model.ode_substeps, use_ode);
	if (cfg.model.conv_layers > 0) {
		arch.conv_layers = cfg.model.conv_layers;
	}
	arch.conv_channels = cfg.model.conv_channels;
	arch.kernel_size = cfg.model.kernel_size;
	arch.hidden_size = cfg.model.hidden_size;
	arch.ode_hidden = cfg.model.ode_hidden;
	arch.validate();
	return arch;
}

predictors::EkfConfig effective_ekf(const ExperimentConfig &cfg) {
	auto ekf = cfg.ekf;
	if (cfg.ekf_auto_process_noise) {
		const double r = 0.5 * (cfg.mobility.start_radius_min_m + cfg.mobility.start_radius_max_m);
		const double rate = cfg.mobility.speed_mps / r;
		ekf.process_noise = rate * rate;
	}
	return ekf;
}

} // namespace aoba::harness
