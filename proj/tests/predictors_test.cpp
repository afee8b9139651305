#include "aoba/errors.hpp"
#include "aoba/nn/grad_check.hpp"
#include "aoba/predictors/arima.hpp"
#include "aoba/predictors/ekf.hpp"
#include "aoba/predictors/odelstm.hpp"
#include "aoba/predictors/oracle.hpp"
#include "aoba/protocol.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace aoba;
using namespace aoba::predictors;
namespace sel = aoba::selection;

namespace {

mobility::ChannelTrace short_trace(std::uint64_t seed, double speed = 10.0, double duration = 0.5) {
	mobility::MobilityConfig mob;
	mob.speed_mps = speed;
	mob.duration_s = duration;
	return mobility::synthesize_trace(mob, mobility::SceneConfig{}, channel::ArrayConfig{}, seed);
}

protocol::ProtocolConfig quiet_protocol() {
	protocol::ProtocolConfig cfg;
	cfg.switch_rule = protocol::SwitchRule::off;
	cfg.noise_variance = 1e-3;
	return cfg;
}

OdeLstmArch small_arch(bool use_ode = true) {
	auto arch = make_arch(Variant::tracking, 11, 0.1, 99, 1, use_ode);
	arch.hidden_size = 8;
	arch.ode_hidden = 8;
	arch.conv_channels = 4;
	return arch;
}

void check_output(const PredictionOutput &o, const sel::CandidateSet &cs, bool strict) {
	double sum = 0.0;
	for (double p : o.probabilities) {
		if (strict) {
			CHECK(p > 0.0);
			CHECK(p < 1.0);
		} else {
			CHECK(p >= 0.0);
			CHECK(p <= 1.0);
		}
		sum += p;
	}
	CHECK(std::abs(sum - 1.0) <= 1e-9);
	CHECK(static_cast<int>(o.probabilities.size()) == cs.size());
	CHECK(cs.contains(o.global_index));
	CHECK(sel::to_local(o.global_index, cs) == o.local_index);
}

StageObservation stage_obs(const mobility::ChannelTrace &trace, const channel::Codebook &cb, int index, Mode mode,
                           std::optional<int> prev, sel::Direction dir, Rng &rng) {
	return protocol::observe_stage(trace, index, 0.1 * index, mode, prev, dir, quiet_protocol(), cb, rng);
}

} // namespace

TEST_CASE("variant names and architecture defaults") {
	CHECK(parse_variant("scanning") == Variant::scanning);
	CHECK(parse_variant("tracking") == Variant::tracking);
	CHECK_THROWS_AS(parse_variant("both"), ConfigError);
	auto scan = make_arch(Variant::scanning, 64, 0.1, 99);
	auto track = make_arch(Variant::tracking, 11, 0.1, 99);
	CHECK(scan.conv_layers == 3);
	CHECK(track.conv_layers == 2);
	CHECK(scan.output_size() == 64);
	CHECK(track.output_size() == 11);
	CHECK(track.time_scale_s == 0.1);
	CHECK(track.ode_step == doctest::Approx(0.01));
	CHECK(ode_steps(track, 0.01) == 1);
	CHECK(ode_steps(track, 1.0) == 100);
	CHECK(ode_steps(track, 0.0) == 1);
}

TEST_CASE("zero model ingest and query") {
	OdeLstmModel model(small_arch());
	channel::Codebook cb(channel::ArrayConfig{});
	auto trace = short_trace(1);
	Rng rng(1);
	auto obs = stage_obs(trace, cb, 0, Mode::scan, std::nullopt, sel::Direction::unknown, rng);
	auto window = model_window(model.arch(), obs, 64);
	CHECK(window.size() == 11);
	CHECK(window.contains(obs.measured_best));
	auto st = odelstm_ingest(model, initial_state(model), window_pilots(obs, window), window, obs.time_s);
	for (double v : st.h) {
		CHECK(v == 0.0);
	}
	CHECK(st.h.size() == 8);
	auto out = odelstm_query(model, st, 0.05, window);
	for (double p : out.probabilities) {
		CHECK(p == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
	}
	CHECK(out.local_index == 1);
	CHECK(out.global_index == sel::to_global(1, window));
	CHECK_THROWS(odelstm_query(model, st, -0.01, window));
	auto short_pilots = window_pilots(obs, window);
	short_pilots.pop_back();
	CHECK_THROWS(odelstm_ingest(model, st, short_pilots, window, 0.1));
}

TEST_CASE("random model outputs and the zero-elapsed identity") {
	channel::Codebook cb(channel::ArrayConfig{});
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		OdeLstmModel model(small_arch());
		Rng init(seed);
		model.init_random(init);
		std::uniform_real_distribution<double> u(-0.5, 0.5);
		for (auto &w : model.head.weight.value.values()) {
			w = u(init);
		}
		auto trace = short_trace(seed + 10);
		Rng rng(seed);
		auto obs0 = stage_obs(trace, cb, 0, Mode::scan, std::nullopt, sel::Direction::unknown, rng);
		auto w0 = model_window(model.arch(), obs0, 64);
		auto st = odelstm_ingest(model, initial_state(model), window_pilots(obs0, w0), w0, obs0.time_s);
		auto again = odelstm_ingest(model, initial_state(model), window_pilots(obs0, w0), w0, obs0.time_s);
		CHECK(st.h == again.h);
		CHECK(st.c == again.c);

		auto obs1 = stage_obs(trace, cb, 1, Mode::track, obs0.measured_best, sel::Direction::increasing, rng);
		auto w1 = model_window(model.arch(), obs1, 64);
		CHECK(w1.global_indices == obs1.probed.global_indices);
		st = odelstm_ingest(model, st, window_pilots(obs1, w1), w1, obs1.time_s);

		auto at_stage = odelstm_query(model, st, obs1.time_s, w1);
		CHECK(at_stage.probabilities == nn::fc_softmax(model.head, st.h));

		auto times = mobility::prediction_instants(obs1.time_s, 0.1, 99);
		auto sweep = odelstm_query_sweep(model, st, times, w1);
		REQUIRE(sweep.size() == 99);
		for (const auto &o : sweep) {
			check_output(o, w1, true);
		}
		auto single = odelstm_query(model, st, times[49], w1);
		for (std::size_t k = 0; k < single.probabilities.size(); ++k) {
			CHECK(single.probabilities[k] == doctest::Approx(sweep[49].probabilities[k]).epsilon(1e-3));
		}

		auto scaled = window_pilots(obs1, w1);
		for (auto &p : scaled) {
			p.value *= 3.0;
		}
		auto x_a = extract_features(model, pack_pilots(window_pilots(obs1, w1), w1));
		auto x_b = extract_features(model, pack_pilots(scaled, w1));
		CHECK(x_a.size() == x_b.size());
		CHECK(x_a.size() == static_cast<std::size_t>(model.arch().feature_size()));
	}
}

TEST_CASE("pilot packing") {
	sel::CandidateSet cs = sel::even_coverage(10, 3, 64);
	std::vector<channel::PilotObservation> pilots(3);
	for (int k = 0; k < 3; ++k) {
		pilots[k].beam_index = cs.global_indices[k];
		pilots[k].value = channel::Complex(3.0 * k, -4.0);
	}
	auto t = pack_pilots(pilots, cs);
	CHECK(t.dim(0) == 4);
	CHECK(t(0, 1) == 3.0);
	CHECK(t(1, 2) == -4.0);
	CHECK(t(2, 1) == doctest::Approx(5.0));
	CHECK(t(3, 1) == 1.0);
	CHECK(t(3, 0) == 0.0);
	std::swap(pilots[0], pilots[1]);
	CHECK_THROWS(pack_pilots(pilots, cs));
}

TEST_CASE("one-step LSTM returns the midpoint output everywhere") {
	OdeLstmModel model(small_arch(false));
	Rng init(3);
	model.init_random(init);
	for (auto &w : model.head.weight.value.values()) {
		w = std::uniform_real_distribution<double>(-1, 1)(init);
	}
	channel::Codebook cb(channel::ArrayConfig{});
	auto trace = short_trace(4);
	Rng rng(4);
	auto obs = stage_obs(trace, cb, 0, Mode::scan, std::nullopt, sel::Direction::unknown, rng);
	OdeLstmPredictor pred(model, 64, 0.1);
	CHECK(pred.name() == "lstm");
	pred.ingest(obs);
	auto times = mobility::prediction_instants(0.0, 0.1, 99);
	auto out = pred.predict(times);
	auto expect = nn::fc_softmax(model.head, pred.state().h);
	for (std::size_t i = 0; i < out.size(); ++i) {
		CHECK(out[i].global_index == out[0].global_index);
		CHECK(out[i].probabilities == expect);
		CHECK(out[i].time_s == times[i]);
	}
	auto mid = lstm_onestep_predict(model, pred.state(), 0.0, 0.1, *pred.state().window);
	CHECK(mid(0.07).probabilities == expect);
	for (const auto *p : model.parameters()) {
		CHECK(p->name.rfind("ode", 0) != 0);
	}
}

// Probe 1e-5 for conv parameters, 1e-3 for the rest.
static double stack_grad_error(OdeLstmModel &model, const SequenceSample &sample) {
	double worst = 0.0;
	for (nn::Param *p : model.parameters()) {
		const double eps = p->name.rfind("conv", 0) == 0 ? 1e-5 : 1e-3;
		worst = std::max(worst, nn::grad_check([&] { return sequence_loss(model, sample); }, {p}, eps));
	}
	return worst;
}

TEST_CASE("full stack gradient") {
	channel::Codebook cb(channel::ArrayConfig{});
	auto cfg = quiet_protocol();
	cfg.prediction_count = 4;
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		for (bool use_ode : {true, false}) {
			auto arch = make_arch(Variant::tracking, 11, 0.1, 4, 1, use_ode);
			arch.hidden_size = 8;
			arch.ode_hidden = 8;
			arch.conv_channels = 3;
			OdeLstmModel model(arch);
			Rng init(seed);
			model.init_random(init);
			std::uniform_real_distribution<double> u(-0.5, 0.5);
			for (nn::Param *p : model.parameters()) {
				for (auto &w : p->value.values()) {
					w = u(init);
				}
			}
			auto trace = short_trace(seed + 20, 15.0, 0.2);
			Rng rng(seed);
			auto stages = protocol::simulate_training_stages(trace, cfg, cb, Variant::tracking, 0.0, rng);
			REQUIRE(stages.size() == 2);
			auto sample = make_sequence_sample(arch, stages, 64);
			CHECK(sample.label_count == 8);
			nn::zero_grads(model.parameters());
			double loss = sequence_loss_and_grad(model, sample, 1.0);
			CHECK(loss == doctest::Approx(sequence_loss(model, sample)).epsilon(1e-12));
			CHECK(stack_grad_error(model, sample) <= 1e-4);
		}
	}
}

TEST_CASE("training: initial loss, determinism and overfitting") {
	channel::Codebook cb(channel::ArrayConfig{});
	auto sim = protocol::make_stage_simulator(quiet_protocol(), cb, Variant::tracking, 0.3);
	std::vector<mobility::ChannelTrace> one{short_trace(7, 10.0, 0.3)};
	OdeLstmModel init(make_arch(Variant::tracking, 11, 0.1, 99));
	Rng r0(1);
	init.init_random(r0);
	TrainConfig tc;
	tc.epochs = 200;
	tc.learning_rate = 1e-2;
	Rng rng_a(5);
	auto a = odelstm_train(init, one, sim, tc, rng_a);
	REQUIRE(a.loss_history.size() == 200);
	CHECK(a.loss_history.front() == doctest::Approx(std::log(11.0)).epsilon(1e-9));
	CHECK(a.loss_history.back() < 0.1 * a.loss_history.front());

	tc.epochs = 5;
	init = OdeLstmModel(small_arch());
	init.init_random(r0);
	std::vector<mobility::ChannelTrace> few{short_trace(1), short_trace(2), short_trace(3)};
	Rng rng_b(9), rng_c(9);
	auto b = odelstm_train(init, few, sim, tc, rng_b);
	auto c = odelstm_train(init, few, sim, tc, rng_c);
	CHECK(b.loss_history == c.loss_history);
	CHECK(b.model.head.weight.value == c.model.head.weight.value);
	CHECK_THROWS_AS(odelstm_train(init, std::span<const mobility::ChannelTrace>{}, sim, tc, rng_b), ConfigError);
}

TEST_CASE("stationary channel: trained one-step LSTM picks the optimum") {
	channel::Codebook cb(channel::ArrayConfig{});
	auto pcfg = quiet_protocol();
	pcfg.noise_variance = 0.0;
	auto sim = protocol::make_stage_simulator(pcfg, cb, Variant::tracking, 0.3);
	std::vector<mobility::ChannelTrace> traces;
	for (std::uint64_t s = 0; s < 24; ++s) {
		traces.push_back(short_trace(100 + s, 0.0, 0.5));
	}
	OdeLstmModel init(small_arch(false));
	Rng r0(2);
	init.init_random(r0);
	TrainConfig tc;
	tc.epochs = 40;
	tc.learning_rate = 1e-2;
	Rng rng(3);
	auto trained = odelstm_train(init, traces, sim, tc, rng);
	for (std::uint64_t s = 0; s < 4; ++s) {
		auto trace = short_trace(500 + s, 0.0, 0.5);
		OdeLstmPredictor pred(trained.model, 64, 0.1);
		Rng erng(s);
		auto log = protocol::run_episode(trace, pred, pcfg, cb, erng);
		for (const auto &stage : log.stages) {
			for (const auto &p : stage.predictions) {
				CHECK(p.normalized_gain == doctest::Approx(1.0));
			}
		}
	}
}

TEST_CASE("checkpoints") {
	for (bool use_ode : {true, false}) {
		OdeLstmModel model(small_arch(use_ode));
		Rng init(11);
		model.init_random(init);
		std::stringstream buf;
		save_checkpoint(model, buf);
		std::string bytes = buf.str();
		CHECK(bytes.substr(0, 4) == "BMDL");
		std::istringstream in(bytes);
		auto back = load_checkpoint(in, model.arch());
		CHECK(back.arch() == model.arch());
		auto pa = model.parameters();
		auto pb = back.parameters();
		REQUIRE(pa.size() == pb.size());
		for (std::size_t k = 0; k < pa.size(); ++k) {
			CHECK(pa[k]->name == pb[k]->name);
			CHECK(pa[k]->value == pb[k]->value);
		}
		std::stringstream again;
		save_checkpoint(back, again);
		CHECK(again.str() == bytes);

		auto other = small_arch(use_ode);
		other.hidden_size = 16;
		std::istringstream in2(bytes);
		CHECK_THROWS_AS(load_checkpoint(in2, other), IoError);
		std::string bad = bytes;
		bad[0] = 'X';
		std::istringstream in3(bad);
		CHECK_THROWS_AS(load_checkpoint(in3), IoError);
		std::istringstream in4(bytes.substr(0, bytes.size() / 2));
		CHECK_THROWS_AS(load_checkpoint(in4), IoError);
		std::string ver = bytes;
		ver[4] = 9;
		std::istringstream in5(ver);
		CHECK_THROWS_AS(load_checkpoint(in5), IoError);
	}
}

TEST_CASE("ekf fixed point and covariance") {
	channel::ArrayConfig arr;
	channel::Codebook cb(arr);
	EkfConfig cfg;
	cfg.process_noise = 0.0;
	cfg.measurement_noise = 0.0;
	const double phi = 0.3;
	channel::ChannelSnapshot snap{0.0, {{channel::Complex(2.0, -1.0), phi}}};
	auto h = channel::channel_vector(snap, arr);
	auto cs = sel::even_coverage(channel::nearest_beam(phi, arr), 11, 64);
	Rng rng(1);
	auto st = ekf_init(phi, 0.0, cfg, 0.0);
	for (int k = 0; k < 5; ++k) {
		std::vector<channel::PilotObservation> pilots;
		for (int g : cs.global_indices) {
			pilots.push_back(channel::synth_pilot(h, g, cb, 0.0, rng, 0.1 * k));
		}
		st = ekf_update(st, pilots, cb, cfg, 0.1 * k);
		CHECK(st.mean(0) == doctest::Approx(phi).epsilon(1e-9));
		CHECK(std::abs(st.mean(1)) <= 1e-9);
		CHECK_NOTHROW(check_covariance(st.covariance));
	}

	auto base = ekf_init(0.1, 0.5, EkfConfig{}, 0.0);
	double prev = base.covariance.trace();
	for (int k = 1; k <= 20; ++k) {
		auto p = ekf_predict(base, 0.05 * k, 0.1);
		CHECK(p.covariance.trace() >= prev);
		CHECK_NOTHROW(check_covariance(p.covariance));
		prev = p.covariance.trace();
	}
	CHECK_THROWS_AS(check_covariance(Eigen::Matrix2d::Zero()), NumericError);
	Eigen::Matrix2d asym;
	asym << 1.0, 0.5, 0.2, 1.0;
	CHECK_THROWS_AS(check_covariance(asym), NumericError);
	CHECK_THROWS(ekf_predict(base, -1.0, 0.1));
}

TEST_CASE("ekf tracks a linear angle ramp") {
	channel::ArrayConfig arr;
	channel::Codebook cb(arr);
	EkfConfig cfg;
	const double rate = 0.4;
	auto angle = [&](double t) { return -0.2 + rate * t; };
	Rng rng(2);
	EkfState st = ekf_init(angle(0.0), 0.0, cfg, 0.0);
	for (int k = 0; k < 20; ++k) {
		const double t = 0.1 * k;
		channel::ChannelSnapshot snap{t, {{channel::Complex(1.5, 0.5), angle(t)}}};
		auto h = channel::channel_vector(snap, arr);
		auto cs = sel::even_coverage(channel::nearest_beam(angle(t), arr), 11, 64);
		std::vector<channel::PilotObservation> pilots;
		for (int g : cs.global_indices) {
			pilots.push_back(channel::synth_pilot(h, g, cb, 0.0, rng, t));
		}
		st = ekf_update(st, pilots, cb, cfg, t);
	}
	CHECK(std::abs(st.mean(1) - rate) <= 0.05 * rate);
	CHECK(st.mean(0) == doctest::Approx(angle(1.9)).epsilon(1e-6));
}

TEST_CASE("ekf query") {
	channel::ArrayConfig arr;
	channel::Codebook cb(arr);
	auto full = sel::full_scan(64);
	auto still = ekf_init(0.2, 0.0, EkfConfig{}, 1.0);
	auto first = ekf_query(still, 1.0, arr, full);
	for (double t : {1.01, 1.05, 1.5, 3.0}) {
		CHECK(ekf_query(still, t, arr, full).global_index == first.global_index);
	}
	check_output(first, full, false);
	CHECK_THROWS(ekf_query(still, 0.5, arr, full));
	Rng rng(3);
	std::uniform_real_distribution<double> u(-1.4, 1.4);
	for (int k = 0; k < 200; ++k) {
		const double phi = u(rng);
		auto st = ekf_init(phi, 0.0, EkfConfig{}, 0.0);
		channel::ChannelSnapshot snap{0.0, {{channel::Complex(1.0, 0.0), phi}}};
		auto h = channel::channel_vector(snap, arr);
		CHECK(ekf_query(st, 0.0, arr, full).global_index == channel::best_beam(h, cb));
	}
	auto runaway = ekf_init(1.5, 10.0, EkfConfig{}, 0.0);
	CHECK(ekf_query(runaway, 1.0, arr, full).global_index == channel::nearest_beam(channel::kHalfPi, arr));
}

TEST_CASE("ekf predictor through the protocol") {
	channel::Codebook cb(channel::ArrayConfig{});
	EkfPredictor pred(cb, EkfConfig{});
	auto trace = short_trace(8, 10.0, 1.0);
	Rng rng(8);
	auto log = protocol::run_episode(trace, pred, quiet_protocol(), cb, rng);
	CHECK(log.predictor == "ekf");
	for (const auto &s : log.stages) {
		CHECK(s.predictions.size() == 99);
		for (const auto &p : s.predictions) {
			CHECK(s.candidates.contains(p.predicted));
		}
	}
	CHECK_NOTHROW(check_covariance(pred.state().covariance));
}

TEST_CASE("arima fits") {
	std::vector<double> constant(20, 7.0);
	auto m = arima_fit(constant);
	CHECK(m.order.d == 0);
	CHECK(m.order == ArimaOrder{0, 0, 0});
	for (double v : arima_forecast(m, constant, 5)) {
		CHECK(v == doctest::Approx(7.0).epsilon(1e-9));
	}

	std::vector<double> ramp;
	for (int k = 0; k < 20; ++k) {
		ramp.push_back(3.0 + 2.0 * k);
	}
	auto r = arima_fit(ramp);
	CHECK(r.order == ArimaOrder{0, 1, 0});
	CHECK(r.rss <= 1e-12);
	auto f = arima_forecast(r, ramp, 4);
	for (int k = 0; k < 4; ++k) {
		CHECK(f[k] == doctest::Approx(3.0 + 2.0 * (20 + k)).epsilon(1e-9));
	}
	auto ramp_d1 = arima_fit_order(ramp, {1, 1, 1});
	for (double e : ramp_d1.residuals) {
		CHECK(std::abs(e) <= 1e-6);
	}

	Rng rng(12);
	std::normal_distribution<double> n(0.0, 1.0);
	std::vector<double> noise(60);
	for (auto &v : noise) {
		v = n(rng);
	}
	auto plain = arima_fit_order(noise, {0, 0, 0});
	auto rich = arima_fit_order(noise, {3, 1, 2});
	CHECK(plain.aic < rich.aic);
	auto best = arima_fit(noise);
	for (const auto &cand : arima_candidates(noise)) {
		CHECK(best.aic <= cand.aic);
	}
	CHECK(arima_candidates(noise).size() == 24);

	CHECK_THROWS(arima_fit(std::vector<double>(7, 1.0)));
}

TEST_CASE("arima forecast recursion") {
	ArimaModel ar1;
	ar1.order = {1, 0, 0};
	ar1.ar = {0.5};
	ar1.intercept = 0.0;
	std::vector<double> hist{1.0, 3.0, 8.0};
	auto f = arima_forecast(ar1, hist, 2);
	REQUIRE(f.size() == 2);
	CHECK(f[0] == doctest::Approx(4.0));
	CHECK(f[1] == doctest::Approx(2.0));
	CHECK(arima_forecast(ar1, hist, 0).empty());
	CHECK(beam_from_forecast(3.4, 64) == 3);
	CHECK(beam_from_forecast(0.0, 64) == 64);
	CHECK(beam_from_forecast(65.2, 64) == 1);
	CHECK(beam_from_forecast(-1.0, 64) == 63);
	CHECK_THROWS_AS(beam_from_forecast(NAN, 64), NumericError);
	CHECK(parse_arima_granularity("stage") == ArimaGranularity::stage);
	CHECK_THROWS(parse_arima_granularity("hourly"));
}

TEST_CASE("arima predictor") {
	channel::Codebook cb(channel::ArrayConfig{});
	for (auto gran : {ArimaGranularity::instant, ArimaGranularity::stage}) {
		ArimaConfig cfg;
		cfg.granularity = gran;
		ArimaPredictor pred(64, 0.1, cfg);
		auto still = short_trace(30, 0.0, 1.0);
		Rng rng(1);
		auto log = protocol::run_episode(still, pred, quiet_protocol(), cb, rng);
		for (const auto &s : log.stages) {
			for (const auto &p : s.predictions) {
				CHECK(p.predicted == s.measured_best);
			}
		}
		auto moving = short_trace(31, 20.0, 1.0);
		Rng rng2(2);
		auto log2 = protocol::run_episode(moving, pred, quiet_protocol(), cb, rng2);
		for (const auto &s : log2.stages) {
			for (const auto &p : s.predictions) {
				CHECK(s.candidates.contains(p.predicted));
			}
		}
	}
}

TEST_CASE("oracle predictor matches the true optimum") {
	channel::Codebook cb(channel::ArrayConfig{});
	auto trace = short_trace(40, 25.0, 0.5);
	OraclePredictor pred(trace, cb);
	Rng rng(4);
	auto log = protocol::run_episode(trace, pred, quiet_protocol(), cb, rng);
	for (const auto &s : log.stages) {
		for (const auto &p : s.predictions) {
			CHECK(p.predicted == p.optimal);
			CHECK(p.normalized_gain == 1.0);
		}
	}
}
