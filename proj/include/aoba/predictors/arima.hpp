#pragma once

// ARIMA(p, d, q) with intercept, fitted by conditional sum of squares and
// selected by AIC over a small order grid.
//
// Differenced series w follows
//   w_t = c + sum_i ar_i w_{t-i} + sum_j ma_j e_{t-j} + e_t

#include "aoba/predictors/predictor.hpp"

#include <deque>
#include <span>
#include <string>
#include <vector>

namespace aoba::predictors {

struct ArimaOrder {
	int p = 0;
	int d = 0;
	int q = 0;

	int parameter_count() const { return p + q + 1; }
	bool operator==(const ArimaOrder &) const = default;
};

struct ArimaGrid {
	int max_p = 3;
	int max_d = 1;
	int max_q = 2;
};

struct ArimaModel {
	ArimaOrder order;
	std::vector<double> ar;
	std::vector<double> ma;
	double intercept = 0.0;
	std::vector<double> residuals; // on the differenced series, conditioning window only
	double rss = 0.0;
	double aic = 0.0;
};

inline constexpr std::size_t kArimaMinLength = 8;

// All orders share the same conditioning window so their AICs compare.
ArimaModel arima_fit_order(std::span<const double> series, ArimaOrder order, const ArimaGrid &grid = {});
// Every finite grid candidate, in grid order (p, then d, then q).
std::vector<ArimaModel> arima_candidates(std::span<const double> series, const ArimaGrid &grid = {});
// Lowest AIC; ties go to fewer parameters, then smaller d.
ArimaModel arima_fit(std::span<const double> series, const ArimaGrid &grid = {});

std::vector<double> arima_forecast(const ArimaModel &model, std::span<const double> history, int steps);

// Rounds a forecast onto the beam ring [1, Q].
int beam_from_forecast(double value, int codebook_size);

enum class ArimaGranularity { instant, stage };

std::string to_string(ArimaGranularity g);
ArimaGranularity parse_arima_granularity(const std::string &name);

struct ArimaConfig {
	ArimaGranularity granularity = ArimaGranularity::instant;
	int history_stages = 4;
	ArimaGrid grid;

	void validate() const;
};

class ArimaPredictor : public BeamPredictor {
public:
	ArimaPredictor(int codebook_size, double period_s, const ArimaConfig &cfg);

	std::string name() const override { return "arima"; }
	void reset() override;
	void ingest(const StageObservation &obs) override;
	std::vector<PredictionOutput> predict(std::span<const double> times_s) override;

private:
	double unwrap(int global_index) const;

	int codebook_size_;
	double period_s_;
	ArimaConfig cfg_;
	std::deque<double> history_;   // unwrapped predicted indices, or stage optima
	std::deque<int> period_sizes_; // entries contributed per past stage
	double anchor_value_ = 0.0;    // unwrapped current optimum
	double stage_time_s_ = 0.0;
	bool started_ = false;
	selection::CandidateSet active_;
};

} // namespace aoba::predictors
