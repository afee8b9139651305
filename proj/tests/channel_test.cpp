#include "aoba/channel.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace aoba;
using namespace aoba::channel;

namespace {

ArrayConfig make_array(int m, int q, double d = 0.5) {
	ArrayConfig a;
	a.num_antennas = m;
	a.codebook_size = q;
	a.element_spacing = d;
	return a;
}

double norm2(std::span<const Complex> v) {
	double s = 0.0;
	for (auto z : v) {
		s += std::norm(z);
	}
	return std::sqrt(s);
}

// Straight from the codeword definition, independent of Codebook.
Complex brute_codeword(int q, int m, int big_m, int big_q) {
	const double phase = 2.0 * M_PI * m * static_cast<double>(q) / big_q;
	return std::polar(1.0 / std::sqrt(static_cast<double>(big_m)), phase);
}

int brute_best(const CVector &h, int big_m, int big_q) {
	int best = 1;
	double best_gain = -1.0;
	for (int q = 1; q <= big_q; ++q) {
		Complex acc(0.0, 0.0);
		for (int m = 0; m < big_m; ++m) {
			acc += h[m] * brute_codeword(q, m, big_m, big_q);
		}
		if (std::norm(acc) > best_gain + 1e-12 * std::max(1.0, best_gain)) {
			best_gain = std::norm(acc);
			best = q;
		}
	}
	return best;
}

CVector random_channel(Rng &rng, int m) {
	std::normal_distribution<double> n(0.0, 1.0);
	CVector h(static_cast<std::size_t>(m));
	for (auto &z : h) {
		z = Complex(n(rng), n(rng));
	}
	return h;
}

} // namespace

TEST_CASE("steering vector closed forms") {
	auto a4 = make_array(4, 4);
	auto v = steering_vector(0.0, a4);
	for (auto z : v) {
		CHECK(z.real() == doctest::Approx(0.5).epsilon(1e-15));
		CHECK(std::abs(z.imag()) < 1e-15);
	}
	auto w = steering_vector(M_PI / 6, a4);
	const Complex expected[4] = {{0.5, 0}, {0, 0.5}, {-0.5, 0}, {0, -0.5}};
	for (int m = 0; m < 4; ++m) {
		CHECK(std::abs(w[m] - expected[m]) < 1e-12);
	}
	auto one = steering_vector(0.7, make_array(1, 4));
	REQUIRE(one.size() == 1);
	CHECK(std::abs(one[0] - Complex(1.0, 0.0)) < 1e-15);
}

TEST_CASE("steering vector rejects angles outside the sector") {
	CHECK_THROWS_AS(steering_vector(M_PI / 2 + 1e-6, make_array(4, 4)), std::domain_error);
	CHECK_THROWS_AS(steering_vector(-2.0, make_array(4, 4)), std::domain_error);
}

TEST_CASE("steering vector and codeword norms are one") {
	for (int m : {1, 2, 3, 8, 16, 33}) {
		auto arr = make_array(m, 64);
		for (double phi = -M_PI / 2; phi <= M_PI / 2; phi += 0.01) {
			CHECK(std::abs(norm2(steering_vector(phi, arr)) - 1.0) < 1e-12);
		}
		Codebook cb(arr);
		for (int q = 1; q <= 64; ++q) {
			CHECK(std::abs(norm2(cb.codeword(q)) - 1.0) < 1e-12);
		}
	}
}

TEST_CASE("codebook element formula and index range") {
	auto arr = make_array(8, 16);
	Codebook cb(arr);
	for (int q = 1; q <= 16; ++q) {
		auto f = cb.codeword(q);
		for (int m = 0; m < 8; ++m) {
			CHECK(std::abs(f[m] - brute_codeword(q, m, 8, 16)) < 1e-12);
		}
	}
	for (auto z : cb.codeword(16)) {
		CHECK(z == Complex(1.0 / std::sqrt(8.0), 0.0));
	}
	CHECK_THROWS_AS(cb.codeword(0), std::out_of_range);
	CHECK_THROWS_AS(cb.codeword(17), std::out_of_range);
}

TEST_CASE("two-element codebook is orthogonal") {
	Codebook cb(make_array(2, 2));
	auto f1 = cb.codeword(1);
	auto f2 = cb.codeword(2);
	const double r = 1.0 / std::sqrt(2.0);
	CHECK(std::abs(f1[0] - Complex(r, 0)) < 1e-15);
	CHECK(std::abs(f1[1] - Complex(-r, 0)) < 1e-15);
	CHECK(std::abs(f2[0] - Complex(r, 0)) < 1e-15);
	CHECK(std::abs(f2[1] - Complex(r, 0)) < 1e-15);
	Complex inner = std::conj(f1[0]) * f2[0] + std::conj(f1[1]) * f2[1];
	CHECK(std::abs(inner) < 1e-15);
}

TEST_CASE("square codebook is orthonormal") {
	for (int m : {2, 4, 8, 16, 32}) {
		Codebook cb(make_array(m, m));
		for (int p = 1; p <= m; ++p) {
			for (int q = 1; q <= m; ++q) {
				Complex inner(0.0, 0.0);
				auto fp = cb.codeword(p);
				auto fq = cb.codeword(q);
				for (int k = 0; k < m; ++k) {
					inner += std::conj(fp[k]) * fq[k];
				}
				CHECK(std::abs(std::abs(inner) - (p == q ? 1.0 : 0.0)) < 1e-12);
			}
		}
	}
}

TEST_CASE("channel vector sums paths") {
	auto arr = make_array(4, 8);
	ChannelSnapshot s;
	s.paths.push_back({Complex(1.0, 0.0), 0.0});
	auto h = channel_vector(s, arr);
	for (auto z : h) {
		CHECK(std::abs(z - Complex(0.5, 0.0)) < 1e-15);
	}
	CHECK(channel_vector(ChannelSnapshot{}, arr) == CVector(4, Complex(0.0, 0.0)));
	ChannelSnapshot c;
	c.paths.push_back({Complex(1.0, 0.0), 0.3});
	c.paths.push_back({Complex(-1.0, 0.0), 0.3});
	for (auto z : channel_vector(c, arr)) {
		CHECK(std::abs(z) < 1e-15);
	}
}

TEST_CASE("beamforming gain uses the plain transpose") {
	auto arr = make_array(4, 8);
	auto h = steering_vector(0.4, arr);
	CVector f(h.size());
	for (std::size_t k = 0; k < h.size(); ++k) {
		f[k] = std::conj(h[k]);
	}
	CHECK(beamforming_gain(h, f) == doctest::Approx(1.0).epsilon(1e-12));
	// The conjugate-transpose reading would give |h^H h|^2 = 1 for f = h; here it must not.
	CHECK(beamforming_gain(h, h) < 0.99);
	CHECK(beamforming_gain(CVector(4), f) == 0.0);
	CHECK_THROWS_AS(beamforming_gain(h, CVector(3)), std::invalid_argument);
}

TEST_CASE("matched codeword reaches full gain") {
	auto arr = make_array(16, 64);
	Codebook cb(arr);
	for (int q0 : {1, 5, 17, 32, 33, 48, 64}) {
		const double phi = beam_aod(q0, arr);
		ChannelSnapshot s;
		s.paths.push_back({Complex(1.0, 0.0), phi});
		auto h = channel_vector(s, arr);
		CHECK(beamforming_gain(h, cb.codeword(q0)) == doctest::Approx(1.0).epsilon(1e-12));
		CHECK(best_beam(h, cb) == q0);
		CHECK(nearest_beam(phi, arr) == q0);
	}
}

TEST_CASE("best beam edge cases") {
	Codebook one(make_array(4, 1));
	Rng rng(3);
	CHECK(best_beam(random_channel(rng, 4), one) == 1);
	CHECK(normalized_gain(random_channel(rng, 4), 1, one) == 1.0);
	Codebook cb(make_array(8, 32));
	auto h = random_channel(rng, 8);
	int q = best_beam(h, cb);
	CVector scaled = h;
	for (auto &z : scaled) {
		z *= 3.7;
	}
	CHECK(best_beam(scaled, cb) == q);
	for (auto &z : scaled) {
		z *= Complex(0.3, -2.0);
	}
	CHECK(best_beam(scaled, cb) == q);
	// Zero channel: every beam ties, the smallest index wins.
	CHECK(best_beam(CVector(8), cb) == 1);
	CHECK(normalized_gain(CVector(8), 7, cb) == 1.0);
}

TEST_CASE("best beam agrees with brute force on random channels") {
	Rng rng(20240611);
	for (int trial = 0; trial < 1000; ++trial) {
		const int m = 1 + static_cast<int>(rng() % 16);
		const int q = 1 + static_cast<int>(rng() % 64);
		auto arr = make_array(m, q);
		Codebook cb(arr);
		auto h = random_channel(rng, m);
		const int best = best_beam(h, cb);
		CHECK(best == brute_best(h, m, q));
		CHECK(normalized_gain(h, best, cb) == doctest::Approx(1.0).epsilon(1e-12));
		const int other = 1 + static_cast<int>(rng() % q);
		double num = 0.0, den = 0.0;
		{
			Complex a(0, 0), b(0, 0);
			for (int k = 0; k < m; ++k) {
				a += h[k] * brute_codeword(other, k, m, q);
				b += h[k] * brute_codeword(best, k, m, q);
			}
			num = std::norm(a);
			den = std::norm(b);
		}
		const double ng = normalized_gain(h, other, cb);
		CHECK(ng == doctest::Approx(num / den).epsilon(1e-9));
		CHECK(ng >= 0.0);
		CHECK(ng <= 1.0 + 1e-12);
	}
}

TEST_CASE("noiseless pilot equals the beamforming product") {
	auto arr = make_array(8, 16);
	Codebook cb(arr);
	Rng rng(1);
	auto h = random_channel(rng, 8);
	auto p = synth_pilot(h, 5, cb, 0.0, rng, 0.25);
	Complex expected(0.0, 0.0);
	auto f = cb.codeword(5);
	for (int m = 0; m < 8; ++m) {
		expected += h[m] * f[m];
	}
	CHECK(p.value == expected);
	CHECK(p.beam_index == 5);
	CHECK(p.time_s == 0.25);
	CHECK_THROWS(synth_pilot(h, 0, cb, 0.0, rng));
	CHECK_THROWS(synth_pilot(h, 17, cb, 0.0, rng));
}

TEST_CASE("pilot noise is reproducible and has the requested variance") {
	auto arr = make_array(4, 8);
	Codebook cb(arr);
	CVector zero(4);
	Rng a(77), b(77);
	CHECK(synth_pilot(zero, 2, cb, 1.0, a).value == synth_pilot(zero, 2, cb, 1.0, b).value);

	Rng rng(99);
	double sum_re = 0.0, sum_im = 0.0, sum_sq = 0.0, sum_re_sq = 0.0;
	const int n = 10000;
	for (int k = 0; k < n; ++k) {
		auto y = synth_pilot(zero, 1, cb, 1.0, rng).value;
		sum_re += y.real();
		sum_im += y.imag();
		sum_sq += std::norm(y);
		sum_re_sq += y.real() * y.real();
	}
	const double mean_abs = std::abs(Complex(sum_re, sum_im)) / n;
	const double var = sum_sq / n - mean_abs * mean_abs;
	CHECK(std::abs(var - 1.0) < 0.1);
	CHECK(std::abs(sum_re_sq / n - 0.5) < 0.05);
}

TEST_CASE("beam index helpers") {
	CHECK(circular_offset(10, 12, 64) == 2);
	CHECK(circular_offset(2, 63, 64) == -3);
	CHECK(circular_offset(63, 2, 64) == 3);
	CHECK(circular_offset(1, 33, 64) == -32);
	CHECK(wrap_index(0, 64) == 64);
	CHECK(wrap_index(65, 64) == 1);
	CHECK(wrap_index(-1, 64) == 63);
	auto arr = make_array(16, 64);
	for (int q = 1; q <= 64; ++q) {
		CHECK(nearest_beam(beam_aod(q, arr), arr) == q);
	}
}

TEST_CASE("array config validation") {
	CHECK_THROWS(make_array(0, 4).validate());
	CHECK_THROWS(make_array(4, 0).validate());
	CHECK_THROWS(make_array(4, 4, 0.0).validate());
	CHECK_NOTHROW(make_array(4, 4).validate());
}
