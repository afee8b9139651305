#pragma once

// Little-endian primitive encoding shared by the trace and checkpoint formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace aoba::binary {

template <typename U>
void put_uint(std::ostream &out, U value) {
	char bytes[sizeof(U)];
	for (std::size_t i = 0; i < sizeof(U); ++i) {
		bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
	}
	out.write(bytes, sizeof(U));
}

inline void put_f64(std::ostream &out, double value) {
	put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value));
}

inline void put_u8(std::ostream &out, std::uint8_t v) { put_uint(out, v); }
inline void put_u16(std::ostream &out, std::uint16_t v) { put_uint(out, v); }
inline void put_u32(std::ostream &out, std::uint32_t v) { put_uint(out, v); }
inline void put_u64(std::ostream &out, std::uint64_t v) { put_uint(out, v); }

// Returns false on a short read; callers translate that into their own error.
template <typename U>
bool get_uint(std::istream &in, U &value) {
	unsigned char bytes[sizeof(U)];
	if (!in.read(reinterpret_cast<char *>(bytes), sizeof(U))) {
		return false;
	}
	std::uint64_t v = 0;
	for (std::size_t i = 0; i < sizeof(U); ++i) {
		v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
	}
	value = static_cast<U>(v);
	return true;
}

inline bool get_f64(std::istream &in, double &value) {
	std::uint64_t raw = 0;
	if (!get_uint(in, raw)) {
		return false;
	}
	value = std::bit_cast<double>(raw);
	return true;
}

} // namespace aoba::binary
