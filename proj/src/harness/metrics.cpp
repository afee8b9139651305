#include "aoba/harness/metrics.hpp"

#include "aoba/errors.hpp"
#include "aoba/harness/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

namespace aoba::harness {

using nlohmann::json;

namespace {

using GroupKey = std::tuple<std::string, std::string, double>;

GroupKey key_of(const EpisodeRecord &r) {
	return {r.predictor, r.rule, r.velocity_mps};
}

std::ofstream open_out(const std::filesystem::path &path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw IoError("cannot open " + path.string() + " for writing");
	}
	return out;
}

} // namespace

Metrics aggregate(std::vector<EpisodeRecord> records, const std::string &overhead_predictor) {
	std::stable_sort(records.begin(), records.end(), [](const EpisodeRecord &a, const EpisodeRecord &b) {
		return std::tie(a.predictor, a.rule, a.velocity_mps, a.trace_id) <
		       std::tie(b.predictor, b.rule, b.velocity_mps, b.trace_id);
	});

	struct TauAcc {
		std::vector<double> sum;
		std::vector<long> n;
		std::vector<double> tau;
	};
	std::map<GroupKey, TauAcc> by_tau;
	std::map<std::tuple<std::string, double>, std::pair<double, long>> by_overhead;

	std::string oh_pred = overhead_predictor;
	bool present = std::any_of(records.begin(), records.end(),
	                           [&](const EpisodeRecord &r) { return r.predictor == overhead_predictor; });
	if (!present && !records.empty()) {
		oh_pred = records.front().predictor;
	}

	for (const auto &r : records) {
		auto &acc = by_tau[key_of(r)];
		for (const auto &stage : r.log.stages) {
			for (std::size_t i = 0; i < stage.predictions.size(); ++i) {
				if (acc.sum.size() <= i) {
					acc.sum.resize(i + 1, 0.0);
					acc.n.resize(i + 1, 0);
					acc.tau.resize(i + 1, 0.0);
				}
				acc.sum[i] += stage.predictions[i].normalized_gain;
				acc.n[i] += 1;
				acc.tau[i] = stage.predictions[i].tau;
			}
		}
		if (r.predictor == oh_pred && !r.log.stages.empty()) {
			auto &o = by_overhead[{r.rule, r.velocity_mps}];
			o.first += protocol::overhead(r.log, r.log.codebook_size);
			o.second += 1;
		}
	}

	Metrics m;
	for (const auto &[key, acc] : by_tau) {
		const auto &[pred, rule, vel] = key;
		double total = 0.0;
		long count = 0;
		for (std::size_t i = 0; i < acc.sum.size(); ++i) {
			m.gain_vs_tau.push_back({pred, rule, vel, acc.tau[i], acc.sum[i] / static_cast<double>(acc.n[i]), acc.n[i]});
			total += acc.sum[i];
			count += acc.n[i];
		}
		m.gain_vs_velocity.push_back({pred, rule, vel, count ? total / static_cast<double>(count) : 0.0, count});
	}
	for (const auto &[key, o] : by_overhead) {
		m.overhead.push_back({std::get<0>(key), std::get<1>(key), o.first / static_cast<double>(o.second)});
	}
	return m;
}

void write_gain_vs_tau(std::ostream &out, const std::vector<TauRow> &rows) {
	out << "predictor,rule,velocity_mps,tau,mean_norm_gain,n\n";
	for (const auto &r : rows) {
		out << r.predictor << ',' << r.rule << ',' << format_double(r.velocity_mps) << ',' << format_double(r.tau) << ','
		    << format_double(r.mean_norm_gain) << ',' << r.n << '\n';
	}
}

void write_gain_vs_velocity(std::ostream &out, const std::vector<VelocityRow> &rows) {
	out << "predictor,rule,velocity_mps,mean_norm_gain,n\n";
	for (const auto &r : rows) {
		out << r.predictor << ',' << r.rule << ',' << format_double(r.velocity_mps) << ','
		    << format_double(r.mean_norm_gain) << ',' << r.n << '\n';
	}
}

void write_overhead(std::ostream &out, const std::vector<OverheadRow> &rows) {
	out << "rule,velocity_mps,overhead_fraction\n";
	for (const auto &r : rows) {
		out << r.rule << ',' << format_double(r.velocity_mps) << ',' << format_double(r.overhead_fraction) << '\n';
	}
}

void write_metrics(const std::filesystem::path &dir, const Metrics &m) {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec) {
		throw IoError("cannot create " + dir.string() + ": " + ec.message());
	}
	{
		auto out = open_out(dir / "gain_vs_tau.csv");
		write_gain_vs_tau(out, m.gain_vs_tau);
	}
	{
		auto out = open_out(dir / "gain_vs_velocity.csv");
		write_gain_vs_velocity(out, m.gain_vs_velocity);
	}
	{
		auto out = open_out(dir / "overhead.csv");
		write_overhead(out, m.overhead);
	}
}

std::string episode_to_json(const EpisodeRecord &rec) {
	json j;
	j["predictor"] = rec.predictor;
	j["rule"] = rec.rule;
	j["velocity_mps"] = rec.velocity_mps;
	j["trace_id"] = rec.trace_id;
	j["codebook_size"] = rec.log.codebook_size;
	j["period_s"] = rec.log.period_s;
	json stages = json::array();
	for (const auto &s : rec.log.stages) {
		json js;
		js["n"] = s.stage_index;
		js["t"] = s.time_s;
		js["mode"] = predictors::to_string(s.mode);
		js["strategy"] = selection::to_string(s.candidates.strategy);
		js["candidates"] = s.candidates.global_indices;
		js["pilots"] = s.pilots_sent;
		js["measured_best"] = s.measured_best;
		json preds = json::array();
		for (const auto &p : s.predictions) {
			preds.push_back({p.time_s, p.tau, p.predicted, p.optimal, p.gain, p.normalized_gain});
		}
		js["predictions"] = std::move(preds);
		stages.push_back(std::move(js));
	}
	j["stages"] = std::move(stages);
	return j.dump();
}

EpisodeRecord episode_from_json(const std::string &text) {
	try {
		json j = json::parse(text);
		EpisodeRecord rec;
		rec.predictor = j.at("predictor").get<std::string>();
		rec.rule = j.at("rule").get<std::string>();
		rec.velocity_mps = j.at("velocity_mps").get<double>();
		rec.trace_id = j.at("trace_id").get<int>();
		rec.log.predictor = rec.predictor;
		rec.log.codebook_size = j.at("codebook_size").get<int>();
		rec.log.period_s = j.at("period_s").get<double>();
		for (const auto &js : j.at("stages")) {
			protocol::StageLog s;
			s.stage_index = js.at("n").get<int>();
			s.time_s = js.at("t").get<double>();
			s.mode = js.at("mode").get<std::string>() == "scan" ? protocol::Mode::scan : protocol::Mode::track;
			const auto strategy = js.at("strategy").get<std::string>();
			s.candidates.strategy =
			    strategy == "full" ? selection::Strategy::full : selection::parse_strategy(strategy);
			s.candidates.global_indices = js.at("candidates").get<std::vector<int>>();
			s.candidates.ring_size = rec.log.codebook_size;
			s.pilots_sent = js.at("pilots").get<int>();
			s.measured_best = js.at("measured_best").get<int>();
			for (const auto &p : js.at("predictions")) {
				protocol::PredictionRecord r;
				r.time_s = p.at(0).get<double>();
				r.tau = p.at(1).get<double>();
				r.predicted = p.at(2).get<int>();
				r.optimal = p.at(3).get<int>();
				r.gain = p.at(4).get<double>();
				r.normalized_gain = p.at(5).get<double>();
				s.predictions.push_back(r);
			}
			rec.log.stages.push_back(std::move(s));
		}
		return rec;
	} catch (const json::exception &e) {
		throw IoError(std::string("malformed episode log: ") + e.what());
	}
}

void save_episode_logs(const std::filesystem::path &path, const std::vector<EpisodeRecord> &records) {
	auto out = open_out(path);
	for (const auto &r : records) {
		out << episode_to_json(r) << '\n';
	}
}

std::vector<EpisodeRecord> load_episode_logs(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw IoError("cannot open " + path.string());
	}
	std::vector<EpisodeRecord> out;
	std::string line;
	while (std::getline(in, line)) {
		if (!line.empty()) {
			out.push_back(episode_from_json(line));
		}
	}
	return out;
}

double mean_norm_gain(const std::vector<EpisodeRecord> &records) {
	return mean_norm_gain(records, 0.0, 1.0);
}

double mean_norm_gain(const std::vector<EpisodeRecord> &records, double tau_lo, double tau_hi) {
	double sum = 0.0;
	long n = 0;
	for (const auto &r : records) {
		for (const auto &s : r.log.stages) {
			for (const auto &p : s.predictions) {
				if (p.tau >= tau_lo - 1e-12 && p.tau <= tau_hi + 1e-12) {
					sum += p.normalized_gain;
					++n;
				}
			}
		}
	}
	return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace aoba::harness
