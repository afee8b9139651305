#include "aoba/predictors/arima.hpp"

#include "aoba/channel.hpp"
#include "aoba/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aoba::predictors {

namespace {

std::vector<double> difference(std::span<const double> x, int d) {
	std::vector<double> w(x.begin(), x.end());
	for (int k = 0; k < d; ++k) {
		for (std::size_t t = w.size(); t-- > 1;) {
			w[t] -= w[t - 1];
		}
		if (!w.empty()) {
			w.erase(w.begin());
		}
	}
	return w;
}

// CSS residuals of w given coefficients; pre-sample residuals are zero and
// entries before max(p, q) are left at zero.
std::vector<double> css_residuals(const std::vector<double> &w, const ArimaModel &m) {
	const int p = m.order.p;
	const int q = m.order.q;
	std::vector<double> e(w.size(), 0.0);
	for (std::size_t t = static_cast<std::size_t>(p); t < w.size(); ++t) {
		double pred = m.intercept;
		for (int i = 1; i <= p; ++i) {
			pred += m.ar[i - 1] * w[t - i];
		}
		for (int j = 1; j <= q; ++j) {
			if (t >= static_cast<std::size_t>(j)) {
				pred += m.ma[j - 1] * e[t - j];
			}
		}
		e[t] = w[t] - pred;
	}
	return e;
}

// Least squares of w_t on [1, w lags, e lags] for t in [start, n).
void regress(const std::vector<double> &w, const std::vector<double> &e, std::size_t start, ArimaModel &m) {
	const int p = m.order.p;
	const int q = m.order.q;
	const std::size_t rows = w.size() - start;
	Eigen::MatrixXd x(rows, 1 + p + q);
	Eigen::VectorXd y(rows);
	for (std::size_t r = 0; r < rows; ++r) {
		std::size_t t = start + r;
		x(r, 0) = 1.0;
		for (int i = 1; i <= p; ++i) {
			x(r, i) = w[t - i];
		}
		for (int j = 1; j <= q; ++j) {
			x(r, p + j) = e[t - j];
		}
		y(r) = w[t];
	}
	Eigen::VectorXd beta = x.completeOrthogonalDecomposition().solve(y);
	m.intercept = beta(0);
	m.ar.assign(beta.data() + 1, beta.data() + 1 + p);
	m.ma.assign(beta.data() + 1 + p, beta.data() + 1 + p + q);
}

constexpr int kMaIterations = 5;

} // namespace

ArimaModel arima_fit_order(std::span<const double> series, ArimaOrder order, const ArimaGrid &grid) {
	if (series.size() < kArimaMinLength) {
		throw std::invalid_argument("ARIMA needs at least " + std::to_string(kArimaMinLength) + " points, got " +
		                            std::to_string(series.size()));
	}
	if (order.p < 0 || order.d < 0 || order.q < 0 || order.p > grid.max_p || order.d > grid.max_d ||
	    order.q > grid.max_q) {
		throw std::invalid_argument("ARIMA order outside the search grid");
	}
	// Common conditioning window in original-series time.
	const std::size_t t0 = static_cast<std::size_t>(grid.max_d + grid.max_p + grid.max_q);
	if (series.size() <= t0 + 1) {
		throw std::invalid_argument("ARIMA series too short for the search grid");
	}
	auto w = difference(series, order.d);
	const std::size_t start = t0 - static_cast<std::size_t>(order.d); // index into w

	ArimaModel m;
	m.order = order;
	std::vector<double> e(w.size(), 0.0);
	if (order.q == 0) {
		regress(w, e, start, m);
	} else {
		// Long autoregression supplies the first residual estimates.
		ArimaModel longar;
		longar.order = {std::min<int>(static_cast<int>(start), order.p + order.q + 2), 0, 0};
		regress(w, e, static_cast<std::size_t>(longar.order.p), longar);
		e = css_residuals(w, longar);
		for (int it = 0; it < kMaIterations; ++it) {
			regress(w, e, start, m);
			e = css_residuals(w, m);
		}
	}
	e = css_residuals(w, m);
	m.residuals.assign(e.begin() + static_cast<std::ptrdiff_t>(start), e.end());
	m.rss = 0.0;
	for (double r : m.residuals) {
		m.rss += r * r;
	}
	const double n = static_cast<double>(m.residuals.size());
	m.aic = 2.0 * order.parameter_count() + n * std::log(std::max(m.rss / n, 1e-12));
	return m;
}

std::vector<ArimaModel> arima_candidates(std::span<const double> series, const ArimaGrid &grid) {
	std::vector<ArimaModel> out;
	for (int p = 0; p <= grid.max_p; ++p) {
		for (int d = 0; d <= grid.max_d; ++d) {
			for (int q = 0; q <= grid.max_q; ++q) {
				auto m = arima_fit_order(series, {p, d, q}, grid);
				bool finite = std::isfinite(m.aic) && std::isfinite(m.intercept);
				for (double c : m.ar) {
					finite = finite && std::isfinite(c);
				}
				for (double c : m.ma) {
					finite = finite && std::isfinite(c);
				}
				if (finite) {
					out.push_back(std::move(m));
				}
			}
		}
	}
	return out;
}

ArimaModel arima_fit(std::span<const double> series, const ArimaGrid &grid) {
	auto all = arima_candidates(series, grid);
	if (all.empty()) {
		throw NumericError("no ARIMA candidate produced a finite fit");
	}
	constexpr double kTie = 1e-9;
	std::size_t best = 0;
	for (std::size_t k = 1; k < all.size(); ++k) {
		const auto &a = all[k];
		const auto &b = all[best];
		if (a.aic < b.aic - kTie) {
			best = k;
		} else if (std::abs(a.aic - b.aic) <= kTie) {
			int ka = a.order.parameter_count();
			int kb = b.order.parameter_count();
			if (ka < kb || (ka == kb && a.order.d < b.order.d)) {
				best = k;
			}
		}
	}
	return all[best];
}

std::vector<double> arima_forecast(const ArimaModel &model, std::span<const double> history, int steps) {
	if (steps <= 0) {
		return {};
	}
	const int d = model.order.d;
	if (history.size() < static_cast<std::size_t>(d + 1)) {
		throw std::invalid_argument("forecast history shorter than the differencing order");
	}
	auto w = difference(history, d);
	auto e = css_residuals(w, model);
	const int p = model.order.p;
	const int q = model.order.q;
	std::vector<double> out;
	out.reserve(static_cast<std::size_t>(steps));
	double level = history.back();
	for (int s = 0; s < steps; ++s) {
		const std::size_t t = w.size();
		double next = model.intercept;
		for (int i = 1; i <= p; ++i) {
			next += model.ar[i - 1] * (t >= static_cast<std::size_t>(i) ? w[t - i] : 0.0);
		}
		for (int j = 1; j <= q; ++j) {
			next += model.ma[j - 1] * (t >= static_cast<std::size_t>(j) ? e[t - j] : 0.0);
		}
		w.push_back(next);
		e.push_back(0.0);
		if (d == 0) {
			out.push_back(next);
		} else {
			level += next;
			out.push_back(level);
		}
	}
	return out;
}

int beam_from_forecast(double value, int codebook_size) {
	if (!std::isfinite(value)) {
		throw NumericError("non-finite ARIMA forecast");
	}
	const double bounded = std::fmod(value, static_cast<double>(codebook_size) * 1e6);
	return channel::wrap_index(static_cast<int>(std::llround(bounded)), codebook_size);
}

std::string to_string(ArimaGranularity g) {
	return g == ArimaGranularity::instant ? "instant" : "stage";
}

ArimaGranularity parse_arima_granularity(const std::string &name) {
	if (name == "instant") {
		return ArimaGranularity::instant;
	}
	if (name == "stage") {
		return ArimaGranularity::stage;
	}
	throw ConfigError("unknown ARIMA granularity '" + name + "'");
}

void ArimaConfig::validate() const {
	if (history_stages < 1) {
		throw ConfigError("arima.history_stages must be positive");
	}
	if (grid.max_p < 0 || grid.max_d < 0 || grid.max_q < 0) {
		throw ConfigError("ARIMA grid bounds must be non-negative");
	}
}

ArimaPredictor::ArimaPredictor(int codebook_size, double period_s, const ArimaConfig &cfg)
    : codebook_size_(codebook_size), period_s_(period_s), cfg_(cfg) {
	cfg_.validate();
}

void ArimaPredictor::reset() {
	history_.clear();
	period_sizes_.clear();
	started_ = false;
}

double ArimaPredictor::unwrap(int global_index) const {
	if (history_.empty()) {
		return static_cast<double>(global_index);
	}
	const double ref = history_.back();
	const int ref_beam = channel::wrap_index(static_cast<int>(std::llround(ref)), codebook_size_);
	return ref + channel::circular_offset(ref_beam, global_index, codebook_size_);
}

void ArimaPredictor::ingest(const StageObservation &obs) {
	anchor_value_ = unwrap(obs.measured_best);
	stage_time_s_ = obs.time_s;
	active_ = obs.probed;
	started_ = true;
	if (cfg_.granularity == ArimaGranularity::stage) {
		history_.push_back(anchor_value_);
		const std::size_t keep = std::max<std::size_t>(4 * kArimaMinLength, cfg_.history_stages + 1);
		while (history_.size() > keep) {
			history_.pop_front();
		}
	}
}

std::vector<PredictionOutput> ArimaPredictor::predict(std::span<const double> times_s) {
	if (!started_) {
		throw std::logic_error("predict called before any stage was ingested");
	}
	std::vector<double> series(history_.begin(), history_.end());
	if (cfg_.granularity == ArimaGranularity::instant) {
		series.push_back(anchor_value_);
	}

	std::vector<double> values(times_s.size(), anchor_value_);
	const std::size_t t0 = static_cast<std::size_t>(cfg_.grid.max_d + cfg_.grid.max_p + cfg_.grid.max_q);
	if (series.size() >= std::max(kArimaMinLength, t0 + 2) && !times_s.empty()) {
		auto model = arima_fit(series, cfg_.grid);
		if (cfg_.granularity == ArimaGranularity::instant) {
			values = arima_forecast(model, series, static_cast<int>(times_s.size()));
		} else {
			double next = arima_forecast(model, series, 1).front();
			for (std::size_t i = 0; i < times_s.size(); ++i) {
				double tau = (times_s[i] - stage_time_s_) / period_s_;
				values[i] = anchor_value_ + tau * (next - anchor_value_);
			}
		}
	}

	std::vector<PredictionOutput> out;
	out.reserve(times_s.size());
	for (std::size_t i = 0; i < times_s.size(); ++i) {
		out.push_back(one_hot_output(times_s[i], beam_from_forecast(values[i], codebook_size_), active_));
	}

	if (cfg_.granularity == ArimaGranularity::instant) {
		for (const auto &o : out) {
			history_.push_back(unwrap(o.global_index));
		}
		period_sizes_.push_back(static_cast<int>(out.size()));
		while (static_cast<int>(period_sizes_.size()) > cfg_.history_stages) {
			for (int k = 0; k < period_sizes_.front(); ++k) {
				history_.pop_front();
			}
			period_sizes_.pop_front();
		}
	}
	return out;
}

} // namespace aoba::predictors
