#include "aoba/channel.hpp"
#include "aoba/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace aoba;
using namespace aoba::selection;

namespace {

std::vector<int> sorted(std::vector<int> v) {
	std::sort(v.begin(), v.end());
	return v;
}

std::vector<int> range_incl(int a, int b, int step = 1) {
	std::vector<int> v;
	for (int x = a; x <= b; x += step) {
		v.push_back(x);
	}
	return v;
}

std::vector<int> offsets(const CandidateSet &cs, int q_prev) {
	std::vector<int> out;
	for (int g : cs.global_indices) {
		out.push_back(channel::circular_offset(q_prev, g, cs.ring_size));
	}
	std::sort(out.begin(), out.end());
	return out;
}

} // namespace

TEST_CASE("direction estimate") {
	CHECK(estimate_direction(std::vector<int>{10, 12}, 64) == Direction::increasing);
	CHECK(estimate_direction(std::vector<int>{10, 10}, 64) == Direction::unknown);
	CHECK(estimate_direction(std::vector<int>{2, 63}, 64) == Direction::decreasing);
	CHECK(estimate_direction(std::vector<int>{63, 2}, 64) == Direction::increasing);
	CHECK(estimate_direction(std::vector<int>{5}, 64) == Direction::unknown);
	CHECK(estimate_direction(std::vector<int>{}, 64) == Direction::unknown);
	CHECK(estimate_direction(std::vector<int>{40, 10, 11}, 64) == Direction::increasing);
}

TEST_CASE("even coverage examples") {
	CHECK(sorted(even_coverage(32, 11, 64).global_indices) == range_incl(27, 37));
	CHECK(sorted(even_coverage(5, 64, 64).global_indices) == range_incl(1, 64));
	CHECK(sorted(even_coverage(2, 5, 64).global_indices) == std::vector<int>{1, 2, 3, 4, 64});
	CHECK_THROWS(even_coverage(2, 65, 64));
	CHECK_THROWS(even_coverage(2, 0, 64));
	// Even size: the extra beam sits on the increasing side.
	CHECK(offsets(even_coverage(10, 4, 64), 10) == std::vector<int>{-1, 0, 1, 2});
}

TEST_CASE("uneven coverage examples") {
	auto cs = uneven_coverage(32, 11, 64, 2, Direction::increasing);
	CHECK(sorted(cs.global_indices) == range_incl(30, 40));
	CHECK(cs.reserve_count == 2);
	auto fallback = uneven_coverage(32, 11, 64, 2, Direction::unknown);
	CHECK(sorted(fallback.global_indices) == sorted(even_coverage(32, 11, 64).global_indices));
	CHECK(sorted(uneven_coverage(63, 5, 64, 1, Direction::increasing).global_indices) ==
	      std::vector<int>{1, 2, 62, 63, 64});
	CHECK(sorted(uneven_coverage(32, 11, 64, 2, Direction::decreasing).global_indices) == range_incl(24, 34));
	CHECK_THROWS(uneven_coverage(32, 11, 64, 11, Direction::increasing));
	CHECK_THROWS(uneven_coverage(32, 11, 64, -1, Direction::increasing));
}

TEST_CASE("interleaved coverage examples") {
	auto cs = interleaved_coverage(32, 11, 64, 2, Direction::increasing);
	CHECK(sorted(cs.global_indices) == range_incl(28, 48, 2));
	CHECK_THROWS(interleaved_coverage(32, 1, 64, 0, Direction::increasing));
	CHECK(interleaved_coverage(32, 1, 64, 0, Direction::unknown).global_indices == std::vector<int>{32});
	CHECK(sorted(interleaved_coverage(32, 5, 64, 2, Direction::unknown).global_indices) ==
	      std::vector<int>{28, 30, 32, 34, 36});
	CHECK_THROWS(interleaved_coverage(32, 33, 64, 2, Direction::increasing));
}

TEST_CASE("local and global index mapping") {
	auto cs = uneven_coverage(32, 11, 64, 2, Direction::increasing);
	CHECK(to_global(3, cs) == 32);
	CHECK_FALSE(to_local(50, cs).has_value());
	for (int i = 1; i <= cs.size(); ++i) {
		CHECK(to_local(to_global(i, cs), cs) == i);
	}
	CHECK_THROWS_AS(to_global(0, cs), std::out_of_range);
	CHECK_THROWS_AS(to_global(12, cs), std::out_of_range);
	// Local order follows codebook adjacency.
	CHECK(cs.global_indices == range_incl(30, 40));
	auto wrapped = even_coverage(2, 5, 64);
	CHECK(wrapped.global_indices == std::vector<int>{64, 1, 2, 3, 4});
}

TEST_CASE("nearest member outside the set") {
	auto cs = even_coverage(32, 5, 64); // 30..34
	CHECK(to_global(nearest_local(40, cs, Direction::unknown), cs) == 34);
	CHECK(to_global(nearest_local(20, cs, Direction::unknown), cs) == 30);
	CHECK(to_global(nearest_local(32, cs, Direction::unknown), cs) == 32);
	auto gap = interleaved_coverage(32, 3, 64, 0, Direction::unknown); // 30, 32, 34
	CHECK(to_global(nearest_local(33, gap, Direction::increasing), gap) == 34);
	CHECK(to_global(nearest_local(33, gap, Direction::decreasing), gap) == 32);
}

TEST_CASE("full scan set") {
	auto cs = full_scan(16, 5);
	CHECK(cs.global_indices == range_incl(1, 16));
	CHECK(cs.strategy == Strategy::full);
	CHECK(cs.anchor == 5);
}

TEST_CASE("strategy names") {
	CHECK(parse_strategy("even") == Strategy::even);
	CHECK(parse_strategy("uneven") == Strategy::uneven);
	CHECK(parse_strategy("interleaved") == Strategy::interleaved);
	CHECK_THROWS(parse_strategy("zigzag"));
	CHECK(to_string(Strategy::uneven) == "uneven");
}

TEST_CASE("exhaustive properties on small rings") {
	for (int q_count = 1; q_count <= 16; ++q_count) {
		for (int q_prev = 1; q_prev <= q_count; ++q_prev) {
			for (int size = 1; size <= q_count; ++size) {
				auto even = even_coverage(q_prev, size, q_count);
				std::set<int> uniq(even.global_indices.begin(), even.global_indices.end());
				REQUIRE(even.size() == size);
				REQUIRE(uniq.size() == static_cast<std::size_t>(size));
				REQUIRE(even.contains(q_prev));
				for (int g : even.global_indices) {
					REQUIRE((g >= 1 && g <= q_count));
				}
				if (size % 2 == 1 && size < q_count) {
					auto off = offsets(even, q_prev);
					for (std::size_t k = 0; k < off.size(); ++k) {
						REQUIRE(off[k] == -off[off.size() - 1 - k]);
					}
				}
				for (int j0 = 1; j0 < size; ++j0) {
					for (auto strat : {Strategy::uneven, Strategy::interleaved}) {
						const int stride = strat == Strategy::interleaved ? 2 : 1;
						if (stride * size > q_count) {
							CHECK_THROWS(build_candidates(strat, q_prev, size, q_count, j0, Direction::increasing));
							continue;
						}
						auto inc = build_candidates(strat, q_prev, size, q_count, j0, Direction::increasing);
						auto dec = build_candidates(strat, q_prev, size, q_count, j0, Direction::decreasing);
						for (const auto *cs : {&inc, &dec}) {
							std::set<int> u(cs->global_indices.begin(), cs->global_indices.end());
							REQUIRE(cs->size() == size);
							REQUIRE(u.size() == static_cast<std::size_t>(size));
							REQUIRE(cs->contains(q_prev));
							REQUIRE(cs->reserve_count == j0);
							for (int g : cs->global_indices) {
								REQUIRE((g >= 1 && g <= q_count));
							}
						}
						// Unwrapped offsets: the forward run is q_prev + stride*(0..size-j0-1).
						std::vector<int> want_inc, want_dec;
						for (int k = -j0; k < size - j0; ++k) {
							want_inc.push_back(stride * k);
							want_dec.push_back(-stride * k);
						}
						std::vector<int> got_inc, got_dec;
						for (int g : inc.global_indices) {
							got_inc.push_back(g);
						}
						for (int g : dec.global_indices) {
							got_dec.push_back(g);
						}
						std::vector<int> exp_inc, exp_dec;
						for (int o : want_inc) {
							exp_inc.push_back(channel::wrap_index(q_prev + o, q_count));
						}
						for (int o : want_dec) {
							exp_dec.push_back(channel::wrap_index(q_prev + o, q_count));
						}
						REQUIRE(sorted(got_inc) == sorted(exp_inc));
						REQUIRE(sorted(got_dec) == sorted(exp_dec));
						if (2 * stride * size <= q_count) {
							// No wrap ambiguity: exactly j0 members behind q_prev, and reversing mirrors.
							auto oi = offsets(inc, q_prev);
							auto od = offsets(dec, q_prev);
							REQUIRE(std::count_if(oi.begin(), oi.end(), [](int o) { return o < 0; }) == j0);
							std::vector<int> neg;
							for (int o : oi) {
								neg.push_back(-o);
							}
							REQUIRE(sorted(neg) == od);
						}
						auto unknown = build_candidates(strat, q_prev, size, q_count, j0, Direction::unknown);
						REQUIRE(unknown.contains(q_prev));
						REQUIRE(unknown.size() == size);
					}
				}
			}
		}
	}
}
