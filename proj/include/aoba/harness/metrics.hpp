#pragma once

// Aggregation of episode logs into the three CSV families, and a JSON form
// of the logs from which the CSVs can be rebuilt exactly.

#include "aoba/protocol.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace aoba::harness {

struct EpisodeRecord {
	std::string predictor;
	std::string rule;
	double velocity_mps = 0.0;
	int trace_id = 0;
	protocol::EpisodeLog log;
};

struct TauRow {
	std::string predictor;
	std::string rule;
	double velocity_mps = 0.0;
	double tau = 0.0;
	double mean_norm_gain = 0.0;
	long n = 0;
};

struct VelocityRow {
	std::string predictor;
	std::string rule;
	double velocity_mps = 0.0;
	double mean_norm_gain = 0.0;
	long n = 0;
};

struct OverheadRow {
	std::string rule;
	double velocity_mps = 0.0;
	double overhead_fraction = 0.0;
};

struct Metrics {
	std::vector<TauRow> gain_vs_tau;
	std::vector<VelocityRow> gain_vs_velocity;
	std::vector<OverheadRow> overhead;
};

// Groups by (predictor, rule, velocity); sums run in (group, trace id) order
// so the result does not depend on record order. Overhead rows come from
// `overhead_predictor`'s episodes, or the first predictor present.
Metrics aggregate(std::vector<EpisodeRecord> records, const std::string &overhead_predictor);

void write_gain_vs_tau(std::ostream &out, const std::vector<TauRow> &rows);
void write_gain_vs_velocity(std::ostream &out, const std::vector<VelocityRow> &rows);
void write_overhead(std::ostream &out, const std::vector<OverheadRow> &rows);
void write_metrics(const std::filesystem::path &dir, const Metrics &m);

std::string episode_to_json(const EpisodeRecord &rec);
EpisodeRecord episode_from_json(const std::string &text);

// One JSON document per line.
void save_episode_logs(const std::filesystem::path &path, const std::vector<EpisodeRecord> &records);
std::vector<EpisodeRecord> load_episode_logs(const std::filesystem::path &path);

double mean_norm_gain(const std::vector<EpisodeRecord> &records);
// Mean gain restricted to tau in [tau_lo, tau_hi].
double mean_norm_gain(const std::vector<EpisodeRecord> &records, double tau_lo, double tau_hi);

} // namespace aoba::harness
