#include "aoba/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aoba::channel {

void ArrayConfig::validate() const {
	if (num_antennas < 1) {
		throw std::invalid_argument("array.num_antennas must be >= 1");
	}
	if (codebook_size < 1) {
		throw std::invalid_argument("array.codebook_size must be >= 1");
	}
	if (!(element_spacing > 0.0) || !std::isfinite(element_spacing)) {
		throw std::invalid_argument("array.element_spacing must be > 0");
	}
}

Codebook::Codebook(const ArrayConfig &array) : array_(array) {
	array_.validate();
	const int m_count = array_.num_antennas;
	const int q_count = array_.codebook_size;
	const double amplitude = 1.0 / std::sqrt(static_cast<double>(m_count));
	words_.resize(static_cast<std::size_t>(m_count) * q_count);
	for (int q = 1; q <= q_count; ++q) {
		for (int m = 0; m < m_count; ++m) {
			// m*q mod Q first: q == Q gives an exact zero phase.
			const long long cycles = (static_cast<long long>(m) * q) % q_count;
			const double phase = 2.0 * kPi * static_cast<double>(cycles) / q_count;
			words_[static_cast<std::size_t>(q - 1) * m_count + m] = std::polar(amplitude, phase);
		}
	}
}

std::span<const Complex> Codebook::codeword(int q) const {
	if (q < 1 || q > array_.codebook_size) {
		throw std::out_of_range("beam index " + std::to_string(q) + " outside [1, " +
		                        std::to_string(array_.codebook_size) + "]");
	}
	const auto m_count = static_cast<std::size_t>(array_.num_antennas);
	return {words_.data() + static_cast<std::size_t>(q - 1) * m_count, m_count};
}

bool in_sector(double aod_rad) {
	return aod_rad >= -kHalfPi && aod_rad <= kHalfPi;
}

CVector steering_vector(double aod_rad, const ArrayConfig &array) {
	if (!in_sector(aod_rad)) {
		throw std::domain_error("AoD " + std::to_string(aod_rad) + " rad outside [-pi/2, pi/2]");
	}
	const int m_count = array.num_antennas;
	const double amplitude = 1.0 / std::sqrt(static_cast<double>(m_count));
	const double step = 2.0 * kPi * array.element_spacing * std::sin(aod_rad);
	CVector a(static_cast<std::size_t>(m_count));
	for (int m = 0; m < m_count; ++m) {
		a[m] = std::polar(amplitude, step * m);
	}
	return a;
}

Codebook build_codebook(const ArrayConfig &array) {
	return Codebook(array);
}

CVector channel_vector(const ChannelSnapshot &snapshot, const ArrayConfig &array) {
	CVector h(static_cast<std::size_t>(array.num_antennas), Complex(0.0, 0.0));
	for (const Path &path : snapshot.paths) {
		const CVector a = steering_vector(path.aod_rad, array);
		for (std::size_t m = 0; m < h.size(); ++m) {
			h[m] += path.gain * a[m];
		}
	}
	return h;
}

double beamforming_gain(std::span<const Complex> h, std::span<const Complex> f) {
	if (h.size() != f.size()) {
		throw std::invalid_argument("beamforming_gain: dimension mismatch (" + std::to_string(h.size()) +
		                            " vs " + std::to_string(f.size()) + ")");
	}
	Complex acc(0.0, 0.0);
	for (std::size_t m = 0; m < h.size(); ++m) {
		acc += h[m] * f[m];
	}
	return std::norm(acc);
}

int best_beam(std::span<const Complex> h, const Codebook &codebook) {
	int best = 1;
	double best_gain = -1.0;
	for (int q = 1; q <= codebook.size(); ++q) {
		const double g = beamforming_gain(h, codebook.codeword(q));
		if (g > best_gain) {
			best_gain = g;
			best = q;
		}
	}
	return best;
}

double normalized_gain(std::span<const Complex> h, int predicted_index, const Codebook &codebook) {
	const double predicted = beamforming_gain(h, codebook.codeword(predicted_index));
	const double optimal = beamforming_gain(h, codebook.codeword(best_beam(h, codebook)));
	if (optimal <= 0.0) {
		return 1.0;
	}
	return predicted / optimal;
}

PilotObservation synth_pilot(std::span<const Complex> h, int beam_index, const Codebook &codebook,
                             double noise_variance, Rng &rng, double time_s) {
	if (noise_variance < 0.0) {
		throw std::invalid_argument("noise variance must be >= 0");
	}
	const auto f = codebook.codeword(beam_index);
	if (h.size() != f.size()) {
		throw std::invalid_argument("synth_pilot: channel dimension does not match codebook");
	}
	Complex y(0.0, 0.0);
	for (std::size_t m = 0; m < h.size(); ++m) {
		y += h[m] * f[m];
	}
	if (noise_variance > 0.0) {
		std::normal_distribution<double> component(0.0, std::sqrt(noise_variance / 2.0));
		const double re = component(rng);
		const double im = component(rng);
		y += Complex(re, im);
	}
	return {beam_index, y, noise_variance, time_s};
}

int nearest_beam(double aod_rad, const ArrayConfig &array) {
	const int q_count = array.codebook_size;
	double theta = -array.element_spacing * std::sin(aod_rad);
	theta -= std::floor(theta);
	const long long q = std::llround(theta * q_count) % q_count;
	return q == 0 ? q_count : static_cast<int>(q);
}

double beam_aod(int q, const ArrayConfig &array) {
	double theta = static_cast<double>(q) / array.codebook_size;
	theta -= std::round(theta); // into [-0.5, 0.5]
	const double s = std::clamp(-theta / array.element_spacing, -1.0, 1.0);
	return std::asin(s);
}

int circular_offset(int from, int to, int ring_size) {
	const int half = ring_size / 2;
	int d = (to - from + half) % ring_size;
	if (d < 0) {
		d += ring_size;
	}
	return d - half;
}

int wrap_index(int q, int ring_size) {
	int r = (q - 1) % ring_size;
	if (r < 0) {
		r += ring_size;
	}
	return r + 1;
}

} // namespace aoba::channel
