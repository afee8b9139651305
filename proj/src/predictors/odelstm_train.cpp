#include "aoba/predictors/odelstm.hpp"

#include "aoba/errors.hpp"
#include "aoba/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace aoba::predictors {

SequenceSample make_sequence_sample(const OdeLstmArch &arch, std::span<const TrainingStage> stages,
                                    int codebook_size, long *skipped_labels) {
	SequenceSample sample;
	sample.stages.reserve(stages.size());
	for (const auto &st : stages) {
		auto window = model_window(arch, st.obs, codebook_size);
		StageSample ss;
		ss.input = pack_pilots(window_pilots(st.obs, window), window);
		ss.next_tau = (st.next_stage_time_s - st.obs.time_s) / arch.time_scale_s;
		if (st.oracle_best.size() != st.query_times_s.size()) {
			throw std::invalid_argument("one oracle label per query instant is required");
		}
		for (std::size_t i = 0; i < st.query_times_s.size(); ++i) {
			ss.query_tau.push_back((st.query_times_s[i] - st.obs.time_s) / arch.time_scale_s);
			int g = st.oracle_best[i];
			if (g <= 0) {
				ss.labels.push_back(0);
				if (skipped_labels) {
					++*skipped_labels;
				}
				continue;
			}
			auto local = selection::to_local(g, window);
			ss.labels.push_back(local ? *local : selection::nearest_local(g, window, window.direction));
			++sample.label_count;
		}
		sample.stages.push_back(std::move(ss));
	}
	return sample;
}

namespace {

struct StageCache {
	std::vector<nn::Tensor> conv_in;
	std::vector<nn::Tensor> conv_out; // post-ReLU
	nn::LstmStep lstm;
	std::vector<nn::OdeTrace> segments; // one per query instant
	std::vector<nn::Vec> probs;
	nn::OdeTrace to_next;
};

// Forward pass over the whole sequence. With `caches` null nothing is recorded.
double forward(const OdeLstmModel &model, const SequenceSample &sample, std::vector<StageCache> *caches) {
	const auto &arch = model.arch();
	nn::Vec h(arch.hidden_size, 0.0);
	nn::Vec c(arch.hidden_size, 0.0);
	double loss = 0.0;
	if (caches) {
		caches->assign(sample.stages.size(), {});
	}
	for (std::size_t n = 0; n < sample.stages.size(); ++n) {
		const auto &st = sample.stages[n];
		StageCache local;
		StageCache &cache = caches ? (*caches)[n] : local;

		nn::Tensor x = st.input;
		for (const auto &layer : model.conv) {
			nn::Tensor y = nn::relu(layer.forward(x));
			if (caches) {
				cache.conv_in.push_back(std::move(x));
				cache.conv_out.push_back(y);
			}
			x = std::move(y);
		}
		cache.lstm = model.lstm.forward(x.values(), h, c);
		const nn::Vec &hn = cache.lstm.h_new;

		nn::Vec s = hn;
		double prev = 0.0;
		for (std::size_t i = 0; i < st.query_tau.size(); ++i) {
			if (arch.use_ode) {
				double dt = std::max(0.0, st.query_tau[i] - prev);
				auto trace = nn::ode_evolve_traced(model.ode, s, dt, ode_steps(arch, dt));
				s = trace.final_state();
				prev = std::max(prev, st.query_tau[i]);
				if (caches) {
					cache.segments.push_back(std::move(trace));
				}
			}
			auto p = nn::fc_softmax(model.head, s);
			if (st.labels[i] > 0) {
				loss += nn::cross_entropy(p, st.labels[i]);
			}
			if (caches) {
				cache.probs.push_back(std::move(p));
			}
		}

		c = cache.lstm.c_new;
		if (n + 1 < sample.stages.size()) {
			if (arch.use_ode) {
				double dt = std::max(0.0, st.next_tau - prev);
				cache.to_next = nn::ode_evolve_traced(model.ode, s, dt, ode_steps(arch, dt));
				h = cache.to_next.final_state();
			} else {
				h = hn;
			}
		}
	}
	return loss;
}

void add_into(nn::Vec &acc, const nn::Vec &v) {
	for (std::size_t k = 0; k < acc.size(); ++k) {
		acc[k] += v[k];
	}
}

} // namespace

double sequence_loss(const OdeLstmModel &model, const SequenceSample &sample) {
	return forward(model, sample, nullptr);
}

double sequence_loss_and_grad(OdeLstmModel &model, const SequenceSample &sample, double weight) {
	std::vector<StageCache> caches;
	double loss = forward(model, sample, &caches);
	const auto &arch = model.arch();

	nn::Vec dh_carry(arch.hidden_size, 0.0);
	nn::Vec dc_carry(arch.hidden_size, 0.0);
	for (std::size_t n = sample.stages.size(); n-- > 0;) {
		const auto &st = sample.stages[n];
		auto &cache = caches[n];

		nn::Vec ds;
		if (n + 1 < sample.stages.size() && arch.use_ode) {
			ds = nn::ode_backward(model.ode, cache.to_next, dh_carry);
		} else {
			ds = dh_carry;
		}

		if (arch.use_ode) {
			for (std::size_t i = st.query_tau.size(); i-- > 0;) {
				const auto &seg = cache.segments[i];
				if (st.labels[i] > 0) {
					add_into(ds, nn::fc_softmax_cross_entropy_backward(model.head, seg.final_state(), cache.probs[i],
					                                                   st.labels[i], weight));
				}
				ds = nn::ode_backward(model.ode, seg, ds);
			}
		} else {
			for (std::size_t i = 0; i < st.query_tau.size(); ++i) {
				if (st.labels[i] > 0) {
					add_into(ds, nn::fc_softmax_cross_entropy_backward(model.head, cache.lstm.h_new, cache.probs[i],
					                                                   st.labels[i], weight));
				}
			}
		}

		auto g = model.lstm.backward(cache.lstm, ds, dc_carry);
		nn::Tensor grad(cache.conv_out.back().shape());
		std::copy(g.dx.begin(), g.dx.end(), grad.data());
		for (std::size_t l = model.conv.size(); l-- > 0;) {
			nn::relu_backward(cache.conv_out[l], grad);
			grad = model.conv[l].backward(cache.conv_in[l], grad);
		}
		dh_carry = std::move(g.dh);
		dc_carry = std::move(g.dc);
	}
	return loss;
}

TrainResult odelstm_train(const OdeLstmModel &initial, std::span<const mobility::ChannelTrace> traces,
                          const StageSimulator &simulate, const TrainConfig &cfg, Rng &rng,
                          const TrainProgress &progress) {
	if (traces.empty()) {
		throw ConfigError("training set is empty");
	}
	if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0) || !(cfg.clip_norm > 0.0)) {
		throw ConfigError("invalid training hyperparameters");
	}
	TrainResult result{initial, {}, 0};
	OdeLstmModel &model = result.model;

	std::vector<SequenceSample> samples;
	samples.reserve(traces.size());
	for (const auto &trace : traces) {
		auto stages = simulate(trace, rng);
		samples.push_back(make_sequence_sample(model.arch(), stages, trace.array.codebook_size, &result.skipped_labels));
	}

	auto params = model.parameters();
	nn::AdamConfig adam_cfg;
	adam_cfg.learning_rate = cfg.learning_rate;
	nn::AdamState adam(params, adam_cfg);

	std::vector<std::size_t> order(samples.size());
	std::iota(order.begin(), order.end(), 0);
	for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
		std::shuffle(order.begin(), order.end(), rng);
		double total = 0.0;
		long labels = 0;
		for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
			std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
			long batch_labels = 0;
			for (std::size_t k = start; k < stop; ++k) {
				batch_labels += samples[order[k]].label_count;
			}
			if (batch_labels == 0) {
				continue;
			}
			nn::zero_grads(params);
			double w = 1.0 / static_cast<double>(batch_labels);
			for (std::size_t k = start; k < stop; ++k) {
				total += sequence_loss_and_grad(model, samples[order[k]], w);
			}
			labels += batch_labels;
			double norm = nn::clip_grad_norm(params, cfg.clip_norm);
			if (!std::isfinite(norm)) {
				throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
			}
			nn::adam_step(adam, params);
		}
		double mean = labels > 0 ? total / static_cast<double>(labels) : 0.0;
		result.loss_history.push_back(mean);
		if (progress) {
			progress(epoch, mean);
		}
	}
	return result;
}

} // namespace aoba::predictors
