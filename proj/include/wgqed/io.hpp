#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "wgqed/fitting.hpp"
#include "wgqed/spectroscopy.hpp"
#include "wgqed/trace.hpp"

namespace wgqed {

using Header = std::map<std::string, std::string>;

// CSV with "# key=value" comment lines, LF endings, %.12e numbers.
std::string scan_csv(const SpectrumScan& scan, const Header& extra = {});
std::string trace_csv(const TimeTrace& trace, const Header& extra = {});

std::string fit_json(const FitResult& fit);

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t x);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace wgqed
