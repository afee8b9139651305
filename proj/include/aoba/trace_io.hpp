#pragma once

// Versioned binary trace format ("BTRC") and a plain-text tabular importer.
//
// Binary layout, all little-endian:
//   "BTRC" | u16 version | u32 M | u32 Q | f64 d/lambda | u32 L | u64 count
//   count x ( f64 time | L x ( f64 gain_re | f64 gain_im | f64 aod_rad ) )
//
// Text layout: one row per (snapshot, path): time path_index gain_re gain_im aod_rad
// separated by commas and/or whitespace; '#' starts a comment.

#include "aoba/errors.hpp"
#include "aoba/mobility.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace aoba::mobility {

inline constexpr std::uint16_t kTraceFormatVersion = 1;

class TraceFormatError : public IoError {
public:
	enum class Kind { missing_header, bad_magic, unsupported_version, truncated, malformed };

	TraceFormatError(Kind kind, const std::string &message) : IoError(message), kind_(kind) {}
	Kind kind() const { return kind_; }

private:
	Kind kind_;
};

void save_trace(const ChannelTrace &trace, std::ostream &out);
ChannelTrace load_trace(std::istream &in);

void save_trace(const ChannelTrace &trace, const std::filesystem::path &path);
ChannelTrace load_trace(const std::filesystem::path &path);

ChannelTrace import_text_trace(std::istream &in, const channel::ArrayConfig &array);

} // namespace aoba::mobility
