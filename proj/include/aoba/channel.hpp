#pragma once

// Geometric narrowband channel for a BS-side uniform linear array, the DFT
// codebook, and beamforming-gain evaluation.
//
// Sign convention: received signal is h^T f (plain transpose, no conjugate).
// With steering phase +2*pi*m*(d/lambda)*sin(phi) and codeword phase
// +2*pi*m*q/Q, the matched codeword for AoD phi satisfies
//     q/Q == -(d/lambda) * sin(phi)  (mod 1).
// Beam indices are 1-based at every interface.

#include "aoba/rng.hpp"

#include <complex>
#include <span>
#include <vector>

namespace aoba::channel {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;

struct ArrayConfig {
	int num_antennas = 16;
	double element_spacing = 0.5; // d / lambda
	int codebook_size = 64;

	void validate() const;
	bool operator==(const ArrayConfig &) const = default;
};

struct Path {
	Complex gain;
	double aod_rad = 0.0;

	bool operator==(const Path &) const = default;
};

struct ChannelSnapshot {
	double time_s = 0.0;
	std::vector<Path> paths;

	bool operator==(const ChannelSnapshot &) const = default;
};

class Codebook {
public:
	explicit Codebook(const ArrayConfig &array);

	const ArrayConfig &array() const { return array_; }
	int size() const { return array_.codebook_size; }
	int dimension() const { return array_.num_antennas; }

	// q is 1-based.
	std::span<const Complex> codeword(int q) const;

private:
	ArrayConfig array_;
	std::vector<Complex> words_; // row-major Q x M
};

struct PilotObservation {
	int beam_index = 1;
	Complex value;
	double noise_variance = 0.0;
	double time_s = 0.0;
};

bool in_sector(double aod_rad);

CVector steering_vector(double aod_rad, const ArrayConfig &array);
Codebook build_codebook(const ArrayConfig &array);
CVector channel_vector(const ChannelSnapshot &snapshot, const ArrayConfig &array);

double beamforming_gain(std::span<const Complex> h, std::span<const Complex> f);
int best_beam(std::span<const Complex> h, const Codebook &codebook);
double normalized_gain(std::span<const Complex> h, int predicted_index, const Codebook &codebook);

PilotObservation synth_pilot(std::span<const Complex> h, int beam_index, const Codebook &codebook,
                             double noise_variance, Rng &rng, double time_s = 0.0);

// Codeword whose phase slope is circularly nearest to -(d/lambda) sin(aod).
int nearest_beam(double aod_rad, const ArrayConfig &array);

// Inverse of nearest_beam: the in-sector AoD whose matched phase slope is q/Q.
// Clamped to the sector when d/lambda makes the slope unreachable.
double beam_aod(int q, const ArrayConfig &array);

// Signed circular distance b - a on a ring of size Q, in [-Q/2, Q/2).
int circular_offset(int from, int to, int ring_size);

// Maps any integer onto the 1-based ring [1, Q].
int wrap_index(int q, int ring_size);

} // namespace aoba::channel
