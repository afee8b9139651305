#include "aoba/trace_io.hpp"

#include "aoba/binary_io.hpp"
#include "aoba/errors.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace aoba::mobility {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'R', 'C'};

using Kind = TraceFormatError::Kind;

[[noreturn]] void truncated(const std::string &what) {
	throw TraceFormatError(Kind::truncated, "truncated trace body while reading " + what);
}

} // namespace

void save_trace(const ChannelTrace &trace, std::ostream &out) {
	trace.validate();
	const std::size_t path_count = trace.snapshots.empty() ? 0 : trace.snapshots.front().paths.size();
	out.write(kMagic, 4);
	binary::put_u16(out, kTraceFormatVersion);
	binary::put_u32(out, static_cast<std::uint32_t>(trace.array.num_antennas));
	binary::put_u32(out, static_cast<std::uint32_t>(trace.array.codebook_size));
	binary::put_f64(out, trace.array.element_spacing);
	binary::put_u32(out, static_cast<std::uint32_t>(path_count));
	binary::put_u64(out, trace.snapshots.size());
	for (const auto &snap : trace.snapshots) {
		binary::put_f64(out, snap.time_s);
		for (const auto &path : snap.paths) {
			binary::put_f64(out, path.gain.real());
			binary::put_f64(out, path.gain.imag());
			binary::put_f64(out, path.aod_rad);
		}
	}
	if (!out) {
		throw IoError("failed writing trace stream");
	}
}

ChannelTrace load_trace(std::istream &in) {
	char magic[4] = {};
	in.read(magic, 4);
	if (in.gcount() == 0) {
		throw TraceFormatError(Kind::missing_header, "missing header");
	}
	if (in.gcount() < 4 || !std::equal(magic, magic + 4, kMagic)) {
		throw TraceFormatError(Kind::bad_magic, "bad magic: not a BTRC trace");
	}
	std::uint16_t version = 0;
	if (!binary::get_uint(in, version)) {
		throw TraceFormatError(Kind::missing_header, "missing header: no version field");
	}
	if (version != kTraceFormatVersion) {
		throw TraceFormatError(Kind::unsupported_version,
		                       "unsupported trace version: found " + std::to_string(version) + ", expected " +
		                           std::to_string(kTraceFormatVersion));
	}
	std::uint32_t m = 0;
	std::uint32_t q = 0;
	std::uint32_t l = 0;
	std::uint64_t count = 0;
	double spacing = 0.0;
	if (!binary::get_uint(in, m) || !binary::get_uint(in, q) || !binary::get_f64(in, spacing) ||
	    !binary::get_uint(in, l) || !binary::get_uint(in, count)) {
		throw TraceFormatError(Kind::missing_header, "missing header: incomplete header fields");
	}

	ChannelTrace trace;
	trace.array = {static_cast<int>(m), spacing, static_cast<int>(q)};
	try {
		trace.array.validate();
	} catch (const std::invalid_argument &e) {
		throw TraceFormatError(Kind::malformed, std::string("malformed header: ") + e.what());
	}
	// Guard the reservation against corrupt counts.
	trace.snapshots.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
	for (std::uint64_t k = 0; k < count; ++k) {
		channel::ChannelSnapshot snap;
		if (!binary::get_f64(in, snap.time_s)) {
			truncated("snapshot " + std::to_string(k) + " time");
		}
		snap.paths.resize(l);
		for (std::uint32_t p = 0; p < l; ++p) {
			double re = 0.0;
			double im = 0.0;
			double aod = 0.0;
			if (!binary::get_f64(in, re) || !binary::get_f64(in, im) || !binary::get_f64(in, aod)) {
				truncated("snapshot " + std::to_string(k) + " path " + std::to_string(p));
			}
			snap.paths[p] = {{re, im}, aod};
		}
		trace.snapshots.push_back(std::move(snap));
	}
	try {
		trace.validate();
	} catch (const std::invalid_argument &e) {
		throw TraceFormatError(Kind::malformed, std::string("malformed trace body: ") + e.what());
	}
	return trace;
}

void save_trace(const ChannelTrace &trace, const std::filesystem::path &path) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw IoError("cannot open " + path.string() + " for writing");
	}
	save_trace(trace, out);
}

ChannelTrace load_trace(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot open " + path.string() + " for reading");
	}
	return load_trace(in);
}

ChannelTrace import_text_trace(std::istream &in, const channel::ArrayConfig &array) {
	struct Row {
		int path_index;
		channel::Path path;
	};
	std::map<double, std::vector<Row>> rows;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (auto hash = line.find('#'); hash != std::string::npos) {
			line.erase(hash);
		}
		std::replace(line.begin(), line.end(), ',', ' ');
		std::istringstream fields(line);
		double t = 0.0;
		int idx = 0;
		double re = 0.0;
		double im = 0.0;
		double aod = 0.0;
		if (!(fields >> t)) {
			continue; // blank or comment
		}
		if (!(fields >> idx >> re >> im >> aod)) {
			throw TraceFormatError(Kind::malformed, "line " + std::to_string(line_no) +
			                                            ": expected time path_index gain_re gain_im aod_rad");
		}
		rows[t].push_back({idx, {{re, im}, aod}});
	}
	if (rows.empty()) {
		throw TraceFormatError(Kind::missing_header, "missing header: no data rows in text trace");
	}
	ChannelTrace trace;
	trace.array = array;
	for (auto &[t, paths] : rows) {
		std::stable_sort(paths.begin(), paths.end(),
		                 [](const Row &a, const Row &b) { return a.path_index < b.path_index; });
		channel::ChannelSnapshot snap;
		snap.time_s = t;
		for (const auto &r : paths) {
			snap.paths.push_back(r.path);
		}
		trace.snapshots.push_back(std::move(snap));
	}
	try {
		trace.validate();
	} catch (const std::invalid_argument &e) {
		throw TraceFormatError(Kind::malformed, std::string("malformed text trace: ") + e.what());
	}
	return trace;
}

} // namespace aoba::mobility
