#pragma once

// Synthetic UE mobility in a 2-D scene (BS at the origin, array broadside along
// +x) and conversion of trajectories into time-indexed multipath channel traces.

#include "aoba/channel.hpp"
#include "aoba/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aoba::mobility {

struct MobilityConfig {
	double speed_mps = 10.0;
	double duration_s = 1.0;
	double sample_interval_s = 0.001;
	double turn_event_rate_hz = 0.0;
	double heading_change_std_rad = 0.0;
	double start_radius_min_m = 15.0;
	double start_radius_max_m = 40.0;
	// Keep-out radius around the BS; the heading reflects radially at it.
	double min_range_m = 5.0;
	// Bearings stay inside [-pi/2 + margin, pi/2 - margin].
	double sector_margin_rad = 0.1;

	void validate() const;
	bool operator==(const MobilityConfig &) const = default;
};

struct SceneConfig {
	int num_paths = 3;
	double nlos_relative_gain_db = 10.0;
	double nlos_angle_spread_rad = 0.3;
	double pathloss_exponent = 2.0;
	double reference_gain = 20.0;
	// Per-path phase rotation rates are drawn from [-f, f]; 0 keeps phases fixed.
	double phase_rotation_hz = 0.0;

	void validate() const;
	bool operator==(const SceneConfig &) const = default;
};

struct Point2 {
	double x = 0.0;
	double y = 0.0;
};

struct Trajectory {
	std::vector<double> times_s;
	std::vector<Point2> positions_m;
};

struct TraceMeta {
	MobilityConfig mobility;
	SceneConfig scene;
	std::uint64_t seed = 0;
};

struct ChannelTrace {
	channel::ArrayConfig array;
	std::vector<channel::ChannelSnapshot> snapshots;
	std::optional<TraceMeta> meta; // not persisted by the binary format

	double start_time() const;
	double end_time() const;
	// Nearest-sample lookup; no interpolation.
	const channel::ChannelSnapshot &at(double time_s) const;
	// Checks time ordering and a constant path count.
	void validate() const;
};

Trajectory gen_trajectory(const MobilityConfig &cfg, Rng &rng);

ChannelTrace channel_trace(const Trajectory &trajectory, const SceneConfig &scene,
                           const channel::ArrayConfig &array, Rng &rng);

// Convenience: trajectory then trace from one seed, with meta filled in.
ChannelTrace synthesize_trace(const MobilityConfig &mobility, const SceneConfig &scene,
                              const channel::ArrayConfig &array, std::uint64_t seed);

// start + i * period / (count + 1), i = 1..count.
std::vector<double> prediction_instants(double stage_start_s, double period_s, int count);

} // namespace aoba::mobility
