#pragma once

// Candidate-beam sets for tracking mode. Index space is the ring [1, Q]
// (the DFT codebook is periodic in its phase slope). "Increasing" is the
// direction of growing codeword index.
//
// Local order of a set is ascending circular offset from the anchor
// (previous optimum), so local positions always follow codebook adjacency.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aoba::selection {

enum class Strategy { even, uneven, interleaved, full };
enum class Direction { increasing, decreasing, unknown };

std::string to_string(Strategy s);
std::string to_string(Direction d);
Strategy parse_strategy(const std::string &name);

struct CandidateSet {
	std::vector<int> global_indices; // order defines the 1-based local index
	Strategy strategy = Strategy::even;
	int reserve_count = 0;
	int ring_size = 0;
	std::optional<int> anchor; // previous optimum the set was built around
	Direction direction = Direction::unknown;

	int size() const { return static_cast<int>(global_indices.size()); }
	bool contains(int global_index) const;
};

// Sign of the circular drift between the last two entries.
Direction estimate_direction(std::span<const int> recent_optima, int ring_size);

CandidateSet even_coverage(int q_prev, int size, int ring_size);
CandidateSet uneven_coverage(int q_prev, int size, int ring_size, int j0, Direction dir);
CandidateSet interleaved_coverage(int q_prev, int size, int ring_size, int j0, Direction dir);

// All beams 1..Q in codebook order, as probed by a scan.
CandidateSet full_scan(int ring_size, std::optional<int> anchor = std::nullopt);

CandidateSet build_candidates(Strategy strategy, int q_prev, int size, int ring_size, int j0, Direction dir);

int to_global(int local_index, const CandidateSet &cs);
std::optional<int> to_local(int global_index, const CandidateSet &cs);

// Local index of the member circularly closest to global_index; equal
// distances resolve toward `tie` (increasing when unknown).
int nearest_local(int global_index, const CandidateSet &cs, Direction tie);

} // namespace aoba::selection
