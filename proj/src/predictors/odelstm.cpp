#include "aoba/predictors/odelstm.hpp"

#include "aoba/binary_io.hpp"
#include "aoba/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace aoba::predictors {

std::string to_string(Variant v) {
	return v == Variant::scanning ? "scanning" : "tracking";
}

Variant parse_variant(const std::string &name) {
	if (name == "scanning") {
		return Variant::scanning;
	}
	if (name == "tracking") {
		return Variant::tracking;
	}
	throw ConfigError("unknown model variant '" + name + "'");
}

void OdeLstmArch::validate() const {
	if (input_width < 1 || conv_layers < 1 || conv_channels < 1 || hidden_size < 1 || ode_hidden < 1) {
		throw ConfigError("model dimensions must be positive");
	}
	if (kernel_size < 1 || kernel_size % 2 == 0) {
		throw ConfigError("model.kernel_size must be odd and positive");
	}
	if (!(time_scale_s > 0.0) || !(ode_step > 0.0)) {
		throw ConfigError("model time scale and ODE step must be positive");
	}
}

OdeLstmArch make_arch(Variant variant, int input_width, double period_s, int prediction_count, int substeps,
                      bool use_ode) {
	OdeLstmArch arch;
	arch.variant = variant;
	arch.use_ode = use_ode;
	arch.input_width = input_width;
	arch.conv_layers = variant == Variant::scanning ? 3 : 2;
	arch.time_scale_s = period_s;
	arch.ode_step = 1.0 / (static_cast<double>(prediction_count + 1) * std::max(substeps, 1));
	arch.validate();
	return arch;
}

OdeLstmModel::OdeLstmModel(const OdeLstmArch &arch) : arch_(arch) {
	arch_.validate();
	int in = OdeLstmArch::kInputChannels;
	for (int l = 0; l < arch_.conv_layers; ++l) {
		conv.emplace_back("conv" + std::to_string(l + 1), in, arch_.conv_channels, arch_.kernel_size);
		in = arch_.conv_channels;
	}
	lstm = nn::LstmCell("lstm", arch_.feature_size(), arch_.hidden_size);
	ode = nn::OdeDerivativeNet("ode", arch_.hidden_size, arch_.ode_hidden);
	head = nn::Dense("head", arch_.hidden_size, arch_.output_size());
}

OdeLstmModel::OdeLstmModel(const OdeLstmModel &other) = default;
OdeLstmModel &OdeLstmModel::operator=(const OdeLstmModel &other) = default;

void OdeLstmModel::init_random(Rng &rng) {
	for (auto &layer : conv) {
		layer.init_uniform(rng);
	}
	lstm.init_uniform(rng);
	ode.init_uniform(rng);
	head.weight.value.fill(0.0);
	head.bias.value.fill(0.0);
}

nn::ParamList OdeLstmModel::parameters() {
	nn::ParamList out;
	for (auto &layer : conv) {
		for (auto *p : layer.parameters()) {
			out.push_back(p);
		}
	}
	for (auto *p : lstm.parameters()) {
		out.push_back(p);
	}
	if (arch_.use_ode) {
		for (auto *p : ode.parameters()) {
			out.push_back(p);
		}
	}
	for (auto *p : head.parameters()) {
		out.push_back(p);
	}
	return out;
}

std::vector<const nn::Param *> OdeLstmModel::parameters() const {
	auto list = const_cast<OdeLstmModel *>(this)->parameters();
	return {list.begin(), list.end()};
}

PredictorState initial_state(const OdeLstmModel &model) {
	PredictorState s;
	s.h.assign(model.arch().hidden_size, 0.0);
	s.c.assign(model.arch().hidden_size, 0.0);
	return s;
}

nn::Tensor pack_pilots(std::span<const channel::PilotObservation> pilots, const selection::CandidateSet &cs) {
	if (static_cast<int>(pilots.size()) != cs.size()) {
		throw std::invalid_argument("pilot count " + std::to_string(pilots.size()) + " does not match set size " +
		                            std::to_string(cs.size()));
	}
	const std::size_t w = pilots.size();
	nn::Tensor t({OdeLstmArch::kInputChannels, w});
	for (std::size_t k = 0; k < w; ++k) {
		if (pilots[k].beam_index != cs.global_indices[k]) {
			throw std::invalid_argument("pilots are not in the candidate set's local order");
		}
		t(0, k) = pilots[k].value.real();
		t(1, k) = pilots[k].value.imag();
		t(2, k) = std::abs(pilots[k].value);
		t(3, k) = (cs.anchor && *cs.anchor == cs.global_indices[k]) ? 1.0 : 0.0;
	}
	return t;
}

std::vector<double> extract_features(const OdeLstmModel &model, const nn::Tensor &input) {
	if (static_cast<int>(input.dim(1)) != model.arch().input_width) {
		throw std::invalid_argument("input width " + std::to_string(input.dim(1)) + " does not match model width " +
		                            std::to_string(model.arch().input_width));
	}
	nn::Tensor x = input;
	for (const auto &layer : model.conv) {
		x = nn::relu(layer.forward(x));
	}
	return {x.values().begin(), x.values().end()};
}

int ode_steps(const OdeLstmArch &arch, double elapsed_normalized) {
	if (elapsed_normalized <= 0.0) {
		return 1;
	}
	return std::max(1, static_cast<int>(std::ceil(elapsed_normalized / arch.ode_step - 1e-9)));
}

std::vector<double> evolve_hidden(const OdeLstmModel &model, std::span<const double> h, double elapsed_s) {
	if (!model.arch().use_ode) {
		return {h.begin(), h.end()};
	}
	double tau = elapsed_s / model.arch().time_scale_s;
	return nn::ode_evolve(model.ode, h, tau, ode_steps(model.arch(), tau));
}

PredictorState odelstm_ingest(const OdeLstmModel &model, const PredictorState &state,
                              std::span<const channel::PilotObservation> pilots, const selection::CandidateSet &cs,
                              double stage_time_s) {
	if (static_cast<int>(pilots.size()) != model.arch().input_width) {
		throw std::invalid_argument("model expects " + std::to_string(model.arch().input_width) + " pilots, got " +
		                            std::to_string(pilots.size()));
	}
	std::vector<double> h = state.h;
	if (state.started) {
		if (stage_time_s < state.last_stage_time_s) {
			throw std::invalid_argument("stage time precedes the previous stage");
		}
		h = evolve_hidden(model, state.h, stage_time_s - state.last_stage_time_s);
	}
	auto x = extract_features(model, pack_pilots(pilots, cs));
	auto [h_new, c_new] = nn::lstm_cell_step(model.lstm, x, h, state.c);
	PredictorState next;
	next.h = std::move(h_new);
	next.c = std::move(c_new);
	next.last_stage_time_s = stage_time_s;
	next.started = true;
	next.window = cs;
	return next;
}

namespace {

PredictionOutput make_output(const OdeLstmModel &model, std::span<const double> s, double time_s,
                             const selection::CandidateSet &cs) {
	if (cs.size() != model.arch().output_size()) {
		throw std::invalid_argument("candidate set size does not match model output size");
	}
	PredictionOutput out;
	out.time_s = time_s;
	out.probabilities = nn::fc_softmax(model.head, s);
	out.local_index = static_cast<int>(nn::argmax(out.probabilities)) + 1;
	out.global_index = selection::to_global(out.local_index, cs);
	return out;
}

} // namespace

PredictionOutput odelstm_query(const OdeLstmModel &model, const PredictorState &state, double query_time_s,
                               const selection::CandidateSet &cs) {
	if (query_time_s < state.last_stage_time_s) {
		throw std::invalid_argument("query time precedes the stage time");
	}
	auto s = evolve_hidden(model, state.h, query_time_s - state.last_stage_time_s);
	return make_output(model, s, query_time_s, cs);
}

std::vector<PredictionOutput> odelstm_query_sweep(const OdeLstmModel &model, const PredictorState &state,
                                                  std::span<const double> query_times_s,
                                                  const selection::CandidateSet &cs) {
	std::vector<PredictionOutput> out;
	out.reserve(query_times_s.size());
	std::vector<double> s = state.h;
	double prev_tau = 0.0;
	for (double t : query_times_s) {
		if (t < state.last_stage_time_s) {
			throw std::invalid_argument("query time precedes the stage time");
		}
		double tau = (t - state.last_stage_time_s) / model.arch().time_scale_s;
		if (tau < prev_tau) {
			throw std::invalid_argument("query times must be ascending");
		}
		if (model.arch().use_ode && tau > prev_tau) {
			s = nn::ode_evolve(model.ode, s, tau - prev_tau, ode_steps(model.arch(), tau - prev_tau));
		}
		prev_tau = tau;
		out.push_back(make_output(model, s, t, cs));
	}
	return out;
}

std::function<PredictionOutput(double)> lstm_onestep_predict(const OdeLstmModel &model, const PredictorState &state,
                                                             double stage_start_s, double period_s,
                                                             const selection::CandidateSet &cs) {
	PredictionOutput mid = make_output(model, state.h, stage_start_s + 0.5 * period_s, cs);
	return [mid](double t) {
		PredictionOutput out = mid;
		out.time_s = t;
		return out;
	};
}

selection::CandidateSet model_window(const OdeLstmArch &arch, const StageObservation &obs, int codebook_size) {
	if (arch.variant == Variant::scanning) {
		if (obs.mode != Mode::scan) {
			throw std::invalid_argument("scanning model needs a full scan stage");
		}
		return selection::full_scan(codebook_size, obs.previous_best);
	}
	if (obs.mode == Mode::track) {
		if (obs.probed.size() != arch.input_width) {
			throw std::invalid_argument("tracking model width " + std::to_string(arch.input_width) +
			                            " does not match candidate set size " + std::to_string(obs.probed.size()));
		}
		return obs.probed;
	}
	auto cs = selection::even_coverage(obs.measured_best, arch.input_width, codebook_size);
	cs.anchor = obs.previous_best;
	return cs;
}

std::vector<channel::PilotObservation> window_pilots(const StageObservation &obs, const selection::CandidateSet &window) {
	std::vector<channel::PilotObservation> out;
	out.reserve(window.global_indices.size());
	for (int g : window.global_indices) {
		auto it = std::find_if(obs.pilots.begin(), obs.pilots.end(),
		                       [g](const channel::PilotObservation &p) { return p.beam_index == g; });
		if (it == obs.pilots.end()) {
			throw std::invalid_argument("beam " + std::to_string(g) + " was not probed");
		}
		out.push_back(*it);
	}
	return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[4] = {'B', 'M', 'D', 'L'};

void put_arch(std::ostream &out, const OdeLstmArch &a) {
	binary::put_u8(out, a.variant == Variant::scanning ? 0 : 1);
	binary::put_u8(out, a.use_ode ? 1 : 0);
	binary::put_u32(out, OdeLstmArch::kInputChannels);
	for (int v : {a.input_width, a.conv_layers, a.conv_channels, a.kernel_size, a.hidden_size, a.ode_hidden,
	              a.output_size()}) {
		binary::put_u32(out, static_cast<std::uint32_t>(v));
	}
	binary::put_f64(out, a.time_scale_s);
	binary::put_f64(out, a.ode_step);
}

[[noreturn]] void bad_checkpoint(const std::string &what) {
	throw IoError("checkpoint: " + what);
}

template <typename U>
U need_uint(std::istream &in) {
	U v{};
	if (!binary::get_uint(in, v)) {
		bad_checkpoint("truncated");
	}
	return v;
}

double need_f64(std::istream &in) {
	double v = 0.0;
	if (!binary::get_f64(in, v)) {
		bad_checkpoint("truncated");
	}
	return v;
}

} // namespace

void save_checkpoint(const OdeLstmModel &model, std::ostream &out) {
	out.write(kMagic, 4);
	binary::put_u16(out, kCheckpointVersion);
	put_arch(out, model.arch());
	auto params = model.parameters();
	binary::put_u32(out, static_cast<std::uint32_t>(params.size()));
	for (const auto *p : params) {
		binary::put_u32(out, static_cast<std::uint32_t>(p->name.size()));
		out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
		binary::put_u32(out, static_cast<std::uint32_t>(p->value.rank()));
		for (auto d : p->value.shape()) {
			binary::put_u32(out, static_cast<std::uint32_t>(d));
		}
		for (double v : p->value.values()) {
			binary::put_f64(out, v);
		}
	}
	if (!out) {
		throw IoError("checkpoint: write failed");
	}
}

void save_checkpoint(const OdeLstmModel &model, const std::filesystem::path &path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw IoError("cannot open " + path.string() + " for writing");
	}
	save_checkpoint(model, out);
}

OdeLstmModel load_checkpoint(std::istream &in, const std::optional<OdeLstmArch> &expected) {
	char magic[4] = {};
	in.read(magic, 4);
	if (in.gcount() == 0) {
		bad_checkpoint("missing header");
	}
	if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) {
		bad_checkpoint("bad magic");
	}
	auto version = need_uint<std::uint16_t>(in);
	if (version != kCheckpointVersion) {
		bad_checkpoint("unsupported version (found " + std::to_string(version) + ", expected " +
		               std::to_string(kCheckpointVersion) + ")");
	}
	OdeLstmArch a;
	auto variant = need_uint<std::uint8_t>(in);
	if (variant > 1) {
		bad_checkpoint("bad variant tag");
	}
	a.variant = variant == 0 ? Variant::scanning : Variant::tracking;
	a.use_ode = need_uint<std::uint8_t>(in) != 0;
	if (need_uint<std::uint32_t>(in) != OdeLstmArch::kInputChannels) {
		bad_checkpoint("input channel count mismatch");
	}
	a.input_width = static_cast<int>(need_uint<std::uint32_t>(in));
	a.conv_layers = static_cast<int>(need_uint<std::uint32_t>(in));
	a.conv_channels = static_cast<int>(need_uint<std::uint32_t>(in));
	a.kernel_size = static_cast<int>(need_uint<std::uint32_t>(in));
	a.hidden_size = static_cast<int>(need_uint<std::uint32_t>(in));
	a.ode_hidden = static_cast<int>(need_uint<std::uint32_t>(in));
	if (static_cast<int>(need_uint<std::uint32_t>(in)) != a.output_size()) {
		bad_checkpoint("output size mismatch");
	}
	a.time_scale_s = need_f64(in);
	a.ode_step = need_f64(in);
	if (expected && !(*expected == a)) {
		bad_checkpoint("architecture does not match the configured model");
	}
	try {
		a.validate();
	} catch (const ConfigError &e) {
		bad_checkpoint(e.what());
	}
	OdeLstmModel model(a);
	auto params = model.parameters();
	if (need_uint<std::uint32_t>(in) != params.size()) {
		bad_checkpoint("parameter count mismatch");
	}
	for (auto *p : params) {
		auto len = need_uint<std::uint32_t>(in);
		if (len > 256) {
			bad_checkpoint("malformed parameter name");
		}
		std::string name(len, '\0');
		in.read(name.data(), len);
		if (static_cast<std::uint32_t>(in.gcount()) != len) {
			bad_checkpoint("truncated");
		}
		if (name != p->name) {
			bad_checkpoint("expected parameter " + p->name + ", found " + name);
		}
		auto rank = need_uint<std::uint32_t>(in);
		if (rank != p->value.rank()) {
			bad_checkpoint("rank mismatch for " + name);
		}
		for (std::size_t d = 0; d < rank; ++d) {
			if (need_uint<std::uint32_t>(in) != p->value.dim(d)) {
				bad_checkpoint("shape mismatch for " + name);
			}
		}
		for (double &v : p->value.values()) {
			v = need_f64(in);
		}
	}
	return model;
}

OdeLstmModel load_checkpoint(const std::filesystem::path &path, const std::optional<OdeLstmArch> &expected) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot open checkpoint " + path.string());
	}
	return load_checkpoint(in, expected);
}

// ------------------------------------------------------------------ adapter

OdeLstmPredictor::OdeLstmPredictor(const OdeLstmModel &model, int codebook_size, double period_s)
    : model_(&model), codebook_size_(codebook_size), period_s_(period_s), state_(initial_state(model)) {}

std::string OdeLstmPredictor::name() const {
	return model_->arch().use_ode ? "odelstm" : "lstm";
}

void OdeLstmPredictor::reset() {
	state_ = initial_state(*model_);
}

void OdeLstmPredictor::ingest(const StageObservation &obs) {
	auto window = model_window(model_->arch(), obs, codebook_size_);
	auto pilots = window_pilots(obs, window);
	state_ = odelstm_ingest(*model_, state_, pilots, window, obs.time_s);
}

std::vector<PredictionOutput> OdeLstmPredictor::predict(std::span<const double> times_s) {
	if (!state_.window) {
		throw std::logic_error("predict called before any stage was ingested");
	}
	if (!model_->arch().use_ode) {
		auto f = lstm_onestep_predict(*model_, state_, state_.last_stage_time_s, period_s_, *state_.window);
		std::vector<PredictionOutput> out;
		out.reserve(times_s.size());
		for (double t : times_s) {
			out.push_back(f(t));
		}
		return out;
	}
	return odelstm_query_sweep(*model_, state_, times_s, *state_.window);
}

} // namespace aoba::predictors
