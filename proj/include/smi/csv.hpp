#pragma once

#include <string>
#include <vector>

#include "smi/analysis.hpp"
#include "smi/phasor.hpp"
#include "smi/resonator.hpp"
#include "smi/trace.hpp"

namespace smi {

/// Shortest decimal rendering that parses back to the same double.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::string csv_xy_trace(const FrequencyTrace& x, const FrequencyTrace& y);
std::string csv_value_trace(const FrequencyTrace& tr, const std::string& value_header);
std::string csv_spectroscopy(const std::vector<SpectroscopyPoint>& pts);
std::string csv_map(const SensitivityMapResult& map);
std::string csv_linecut(const std::vector<double>& x, const std::vector<double>& delta_s,
                        const std::string& x_header);
std::string csv_psd(const PsdEstimate& est);
std::string csv_allan(const AllanEstimate& est);
std::string csv_histogram(const Histogram& h);

} // namespace smi
