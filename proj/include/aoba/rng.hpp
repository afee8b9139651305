#pragma once

#include <cstdint>
#include <random>

namespace aoba {

using Rng = std::mt19937_64;

// Independent stream for (base seed, stream tag); used to keep e.g. pilot noise
// decoupled from trajectory generation for the same trace seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
	std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
	                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
	std::uint32_t out[2];
	seq.generate(out, out + 2);
	return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

} // namespace aoba
