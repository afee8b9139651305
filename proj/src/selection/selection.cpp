#include "aoba/selection.hpp"

#include "aoba/channel.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace aoba::selection {

using channel::circular_offset;
using channel::wrap_index;

std::string to_string(Strategy s) {
	switch (s) {
	case Strategy::even:
		return "even";
	case Strategy::uneven:
		return "uneven";
	case Strategy::interleaved:
		return "interleaved";
	case Strategy::full:
		return "full";
	}
	return "?";
}

std::string to_string(Direction d) {
	switch (d) {
	case Direction::increasing:
		return "increasing";
	case Direction::decreasing:
		return "decreasing";
	case Direction::unknown:
		return "unknown";
	}
	return "?";
}

Strategy parse_strategy(const std::string &name) {
	if (name == "even") {
		return Strategy::even;
	}
	if (name == "uneven") {
		return Strategy::uneven;
	}
	if (name == "interleaved") {
		return Strategy::interleaved;
	}
	throw std::invalid_argument("unknown selection strategy '" + name + "' (expected even|uneven|interleaved)");
}

bool CandidateSet::contains(int global_index) const {
	return std::find(global_indices.begin(), global_indices.end(), global_index) != global_indices.end();
}

Direction estimate_direction(std::span<const int> recent_optima, int ring_size) {
	if (recent_optima.size() < 2) {
		return Direction::unknown;
	}
	const int first = recent_optima[recent_optima.size() - 2];
	const int last = recent_optima.back();
	const int delta = circular_offset(first, last, ring_size);
	if (delta > 0) {
		return Direction::increasing;
	}
	if (delta < 0) {
		return Direction::decreasing;
	}
	return Direction::unknown;
}

namespace {

void check_common(int q_prev, int size, int ring_size) {
	if (ring_size < 1) {
		throw std::invalid_argument("codebook size must be >= 1");
	}
	if (q_prev < 1 || q_prev > ring_size) {
		throw std::invalid_argument("q_prev outside [1, Q]");
	}
	if (size < 1 || size > ring_size) {
		throw std::invalid_argument("candidate set size " + std::to_string(size) + " outside [1, " +
		                            std::to_string(ring_size) + "]");
	}
}

void check_reserve(int size, int j0) {
	if (j0 < 1 || j0 >= size) {
		throw std::invalid_argument("reserve count j0=" + std::to_string(j0) + " must satisfy 1 <= j0 < size=" +
		                            std::to_string(size));
	}
}

// Offsets lo..lo+size-1 scaled by stride, wrapped onto the ring, in ascending offset order.
CandidateSet window(int q_prev, int size, int ring_size, int lo, int stride) {
	CandidateSet cs;
	cs.ring_size = ring_size;
	cs.anchor = q_prev;
	cs.global_indices.reserve(static_cast<std::size_t>(size));
	for (int k = 0; k < size; ++k) {
		cs.global_indices.push_back(wrap_index(q_prev + (lo + k) * stride, ring_size));
	}
	return cs;
}

// Even sizes put the extra beam on the increasing side.
int centered_low(int size) {
	return -((size - 1) / 2);
}

CandidateSet directional(int q_prev, int size, int ring_size, int j0, Direction dir, int stride, Strategy tag) {
	const int lo = dir == Direction::increasing ? -j0 : -(size - j0 - 1);
	CandidateSet cs = window(q_prev, size, ring_size, lo, stride);
	cs.strategy = tag;
	cs.reserve_count = j0;
	cs.direction = dir;
	return cs;
}

} // namespace

CandidateSet even_coverage(int q_prev, int size, int ring_size) {
	check_common(q_prev, size, ring_size);
	CandidateSet cs = window(q_prev, size, ring_size, centered_low(size), 1);
	cs.strategy = Strategy::even;
	return cs;
}

CandidateSet uneven_coverage(int q_prev, int size, int ring_size, int j0, Direction dir) {
	check_common(q_prev, size, ring_size);
	if (dir == Direction::unknown) {
		if (j0 < 0) {
			throw std::invalid_argument("reserve count j0 must be >= 0");
		}
		return even_coverage(q_prev, size, ring_size);
	}
	check_reserve(size, j0);
	return directional(q_prev, size, ring_size, j0, dir, 1, Strategy::uneven);
}

CandidateSet interleaved_coverage(int q_prev, int size, int ring_size, int j0, Direction dir) {
	check_common(q_prev, size, ring_size);
	if (2 * size > ring_size) {
		throw std::invalid_argument("interleaved coverage needs 2 * size <= Q");
	}
	if (dir == Direction::unknown) {
		if (j0 < 0) {
			throw std::invalid_argument("reserve count j0 must be >= 0");
		}
		CandidateSet cs = window(q_prev, size, ring_size, centered_low(size), 2);
		cs.strategy = Strategy::interleaved;
		return cs;
	}
	check_reserve(size, j0);
	return directional(q_prev, size, ring_size, j0, dir, 2, Strategy::interleaved);
}

CandidateSet full_scan(int ring_size, std::optional<int> anchor) {
	if (ring_size < 1) {
		throw std::invalid_argument("codebook size must be >= 1");
	}
	CandidateSet cs;
	cs.strategy = Strategy::full;
	cs.ring_size = ring_size;
	cs.anchor = anchor;
	cs.global_indices.resize(static_cast<std::size_t>(ring_size));
	for (int q = 1; q <= ring_size; ++q) {
		cs.global_indices[q - 1] = q;
	}
	return cs;
}

CandidateSet build_candidates(Strategy strategy, int q_prev, int size, int ring_size, int j0, Direction dir) {
	switch (strategy) {
	case Strategy::even:
		return even_coverage(q_prev, size, ring_size);
	case Strategy::uneven:
		return uneven_coverage(q_prev, size, ring_size, j0, dir);
	case Strategy::interleaved:
		return interleaved_coverage(q_prev, size, ring_size, j0, dir);
	case Strategy::full:
		return full_scan(ring_size, q_prev);
	}
	throw std::invalid_argument("unknown strategy");
}

int to_global(int local_index, const CandidateSet &cs) {
	if (local_index < 1 || local_index > cs.size()) {
		throw std::out_of_range("local index " + std::to_string(local_index) + " outside [1, " +
		                        std::to_string(cs.size()) + "]");
	}
	return cs.global_indices[static_cast<std::size_t>(local_index - 1)];
}

std::optional<int> to_local(int global_index, const CandidateSet &cs) {
	auto it = std::find(cs.global_indices.begin(), cs.global_indices.end(), global_index);
	if (it == cs.global_indices.end()) {
		return std::nullopt;
	}
	return static_cast<int>(it - cs.global_indices.begin()) + 1;
}

int nearest_local(int global_index, const CandidateSet &cs, Direction tie) {
	if (cs.global_indices.empty()) {
		throw std::invalid_argument("nearest_local: empty candidate set");
	}
	const int ring = cs.ring_size;
	int best_local = 1;
	int best_dist = ring + 1;
	int best_sign = 0;
	for (int k = 0; k < cs.size(); ++k) {
		const int off = circular_offset(global_index, cs.global_indices[k], ring);
		const int dist = std::abs(off);
		const int sign = off > 0 ? 1 : (off < 0 ? -1 : 0);
		bool better = dist < best_dist;
		if (dist == best_dist) {
			const int preferred = tie == Direction::decreasing ? -1 : 1;
			better = sign == preferred && best_sign != preferred;
		}
		if (better) {
			best_dist = dist;
			best_local = k + 1;
			best_sign = sign;
		}
	}
	return best_local;
}

} // namespace aoba::selection
