#include "aoba/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aoba::mobility {

using channel::kHalfPi;
using channel::kPi;

void MobilityConfig::validate() const {
	if (!(speed_mps >= 0.0)) {
		throw std::invalid_argument("mobility.speed_mps must be >= 0");
	}
	if (!(duration_s > 0.0)) {
		throw std::invalid_argument("mobility.duration_s must be > 0");
	}
	if (!(sample_interval_s > 0.0) || sample_interval_s > duration_s) {
		throw std::invalid_argument("mobility.sample_interval_s must be in (0, duration_s]");
	}
	if (!(turn_event_rate_hz >= 0.0) || !(heading_change_std_rad >= 0.0)) {
		throw std::invalid_argument("mobility turn parameters must be >= 0");
	}
	if (!(start_radius_min_m > 0.0) || start_radius_min_m > start_radius_max_m) {
		throw std::invalid_argument("mobility start radius bounds must satisfy 0 < min <= max");
	}
	if (!(min_range_m > 0.0) || min_range_m > start_radius_min_m) {
		throw std::invalid_argument("mobility.min_range_m must be in (0, start_radius_min_m]");
	}
	if (!(sector_margin_rad >= 0.0) || sector_margin_rad >= kHalfPi) {
		throw std::invalid_argument("mobility.sector_margin_rad must be in [0, pi/2)");
	}
}

void SceneConfig::validate() const {
	if (num_paths < 1) {
		throw std::invalid_argument("scene.num_paths must be >= 1");
	}
	if (!(nlos_angle_spread_rad >= 0.0)) {
		throw std::invalid_argument("scene.nlos_angle_spread_rad must be >= 0");
	}
	if (!(reference_gain > 0.0)) {
		throw std::invalid_argument("scene.reference_gain must be > 0");
	}
	if (!std::isfinite(pathloss_exponent) || !std::isfinite(nlos_relative_gain_db)) {
		throw std::invalid_argument("scene gains must be finite");
	}
	if (!(phase_rotation_hz >= 0.0)) {
		throw std::invalid_argument("scene.phase_rotation_hz must be >= 0");
	}
}

double ChannelTrace::start_time() const {
	return snapshots.empty() ? 0.0 : snapshots.front().time_s;
}

double ChannelTrace::end_time() const {
	return snapshots.empty() ? 0.0 : snapshots.back().time_s;
}

const channel::ChannelSnapshot &ChannelTrace::at(double time_s) const {
	if (snapshots.empty()) {
		throw std::out_of_range("channel trace is empty");
	}
	auto it = std::lower_bound(snapshots.begin(), snapshots.end(), time_s,
	                           [](const channel::ChannelSnapshot &s, double t) { return s.time_s < t; });
	if (it == snapshots.end()) {
		return snapshots.back();
	}
	if (it == snapshots.begin()) {
		return *it;
	}
	auto prev = std::prev(it);
	return (time_s - prev->time_s) <= (it->time_s - time_s) ? *prev : *it;
}

void ChannelTrace::validate() const {
	array.validate();
	for (std::size_t i = 0; i < snapshots.size(); ++i) {
		if (i > 0 && !(snapshots[i].time_s > snapshots[i - 1].time_s)) {
			throw std::invalid_argument("trace snapshot times must be strictly increasing");
		}
		if (snapshots[i].paths.size() != snapshots.front().paths.size()) {
			throw std::invalid_argument("trace snapshots must all have the same number of paths");
		}
		for (const auto &p : snapshots[i].paths) {
			if (!channel::in_sector(p.aod_rad)) {
				throw std::invalid_argument("trace AoD outside [-pi/2, pi/2]");
			}
		}
	}
}

namespace {

struct Velocity {
	double x;
	double y;
};

double bearing(const Point2 &p) {
	return std::atan2(p.y, p.x);
}

bool inside_sector(const Point2 &p, double limit) {
	return p.x > 0.0 && std::abs(bearing(p)) <= limit;
}

// Mirror the velocity about the sector edge it is crossing.
Velocity reflect_at_edge(const Velocity &v, double edge_bearing) {
	const double ux = std::cos(edge_bearing);
	const double uy = std::sin(edge_bearing);
	const double dot = v.x * ux + v.y * uy;
	return {2.0 * dot * ux - v.x, 2.0 * dot * uy - v.y};
}

Velocity reflect_radially(const Velocity &v, const Point2 &p) {
	const double r = std::hypot(p.x, p.y);
	const double nx = p.x / r;
	const double ny = p.y / r;
	const double dot = v.x * nx + v.y * ny;
	if (dot >= 0.0) {
		return v;
	}
	return {v.x - 2.0 * dot * nx, v.y - 2.0 * dot * ny};
}

} // namespace

Trajectory gen_trajectory(const MobilityConfig &cfg, Rng &rng) {
	cfg.validate();
	const double limit = kHalfPi - cfg.sector_margin_rad;
	const auto steps = static_cast<std::size_t>(std::llround(cfg.duration_s / cfg.sample_interval_s));

	std::uniform_real_distribution<double> unit(0.0, 1.0);
	const double r2_min = cfg.start_radius_min_m * cfg.start_radius_min_m;
	const double r2_max = cfg.start_radius_max_m * cfg.start_radius_max_m;
	const double r0 = std::sqrt(r2_min + (r2_max - r2_min) * unit(rng));
	const double b0 = -limit + 2.0 * limit * unit(rng);
	double heading = -kPi + 2.0 * kPi * unit(rng);

	std::exponential_distribution<double> gap(cfg.turn_event_rate_hz > 0.0 ? cfg.turn_event_rate_hz : 1.0);
	std::normal_distribution<double> turn(0.0, cfg.heading_change_std_rad);
	double next_turn = cfg.turn_event_rate_hz > 0.0 ? gap(rng) : std::numeric_limits<double>::infinity();

	Trajectory traj;
	traj.times_s.reserve(steps + 1);
	traj.positions_m.reserve(steps + 1);
	Point2 p{r0 * std::cos(b0), r0 * std::sin(b0)};
	traj.times_s.push_back(0.0);
	traj.positions_m.push_back(p);

	const double step_len = cfg.speed_mps * cfg.sample_interval_s;
	for (std::size_t k = 1; k <= steps; ++k) {
		const double t = static_cast<double>(k) * cfg.sample_interval_s;
		while (next_turn <= t) {
			heading += turn(rng);
			next_turn += gap(rng);
		}
		if (step_len > 0.0) {
			Velocity v{std::cos(heading), std::sin(heading)};
			Point2 next{p.x + step_len * v.x, p.y + step_len * v.y};
			for (int attempt = 0; attempt < 4; ++attempt) {
				bool changed = false;
				if (!inside_sector(next, limit)) {
					v = reflect_at_edge(v, next.y >= 0.0 ? limit : -limit);
					changed = true;
				}
				next = {p.x + step_len * v.x, p.y + step_len * v.y};
				if (std::hypot(next.x, next.y) < cfg.min_range_m) {
					v = reflect_radially(v, p);
					changed = true;
				}
				next = {p.x + step_len * v.x, p.y + step_len * v.y};
				if (!changed) {
					break;
				}
			}
			if (!inside_sector(next, limit) || std::hypot(next.x, next.y) < cfg.min_range_m) {
				v = {-std::cos(heading), -std::sin(heading)};
				next = {p.x + step_len * v.x, p.y + step_len * v.y};
			}
			heading = std::atan2(v.y, v.x);
			p = next;
		}
		traj.times_s.push_back(t);
		traj.positions_m.push_back(p);
	}
	return traj;
}

ChannelTrace channel_trace(const Trajectory &trajectory, const SceneConfig &scene,
                           const channel::ArrayConfig &array, Rng &rng) {
	scene.validate();
	array.validate();
	if (trajectory.positions_m.empty() || trajectory.positions_m.size() != trajectory.times_s.size()) {
		throw std::invalid_argument("channel_trace: trajectory must be nonempty with matching times");
	}

	std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
	std::normal_distribution<double> offset(0.0, scene.nlos_angle_spread_rad);
	std::uniform_real_distribution<double> rate(-1.0, 1.0);

	const auto path_count = static_cast<std::size_t>(scene.num_paths);
	std::vector<double> phases(path_count);
	std::vector<double> offsets(path_count, 0.0);
	std::vector<double> rates(path_count, 0.0);
	phases[0] = phase(rng);
	for (std::size_t l = 1; l < path_count; ++l) {
		offsets[l] = offset(rng);
		phases[l] = phase(rng);
	}
	if (scene.phase_rotation_hz > 0.0) {
		for (auto &r : rates) {
			r = scene.phase_rotation_hz * rate(rng);
		}
	}
	const double nlos_scale = std::pow(10.0, -scene.nlos_relative_gain_db / 20.0);

	ChannelTrace trace;
	trace.array = array;
	trace.snapshots.reserve(trajectory.positions_m.size());
	for (std::size_t k = 0; k < trajectory.positions_m.size(); ++k) {
		const Point2 &p = trajectory.positions_m[k];
		const double t = trajectory.times_s[k];
		const double r = std::hypot(p.x, p.y);
		if (r == 0.0) {
			throw std::invalid_argument("channel_trace: UE at the BS position (r = 0)");
		}
		const double los_aod = std::clamp(bearing(p), -kHalfPi, kHalfPi);
		const double magnitude = scene.reference_gain * std::pow(r, -scene.pathloss_exponent / 2.0);

		channel::ChannelSnapshot snap;
		snap.time_s = t;
		snap.paths.reserve(path_count);
		for (std::size_t l = 0; l < path_count; ++l) {
			const double amp = l == 0 ? magnitude : magnitude * nlos_scale;
			const double ph = phases[l] + 2.0 * kPi * rates[l] * t;
			const double aod = std::clamp(los_aod + offsets[l], -kHalfPi, kHalfPi);
			snap.paths.push_back({std::polar(amp, ph), aod});
		}
		trace.snapshots.push_back(std::move(snap));
	}
	return trace;
}

ChannelTrace synthesize_trace(const MobilityConfig &mobility, const SceneConfig &scene,
                              const channel::ArrayConfig &array, std::uint64_t seed) {
	Rng rng(seed);
	const Trajectory traj = gen_trajectory(mobility, rng);
	ChannelTrace trace = channel_trace(traj, scene, array, rng);
	trace.meta = TraceMeta{mobility, scene, seed};
	return trace;
}

std::vector<double> prediction_instants(double stage_start_s, double period_s, int count) {
	if (count < 1) {
		throw std::invalid_argument("prediction_instants: count must be >= 1");
	}
	if (!(period_s > 0.0)) {
		throw std::invalid_argument("prediction_instants: period must be > 0");
	}
	std::vector<double> out;
	out.reserve(static_cast<std::size_t>(count));
	for (int i = 1; i <= count; ++i) {
		out.push_back(stage_start_s + period_s * static_cast<double>(i) / static_cast<double>(count + 1));
	}
	return out;
}

} // namespace aoba::mobility
