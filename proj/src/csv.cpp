#include "smi/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "smi/errors.hpp"

namespace smi {

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

namespace {
void append_row(std::string& s, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) s += ',';
        s += format_double(v);
        first = false;
    }
    s += '\n';
}
} // namespace

std::string csv_xy_trace(const FrequencyTrace& x, const FrequencyTrace& y) {
    std::string s = "t_s,x_v,y_v\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        append_row(s, {x.time_at(i), x.values[i], y.values[i]});
    }
    return s;
}

std::string csv_value_trace(const FrequencyTrace& tr, const std::string& value_header) {
    std::string s = "t_s," + value_header + "\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        append_row(s, {tr.time_at(i), tr.values[i]});
    }
    return s;
}

std::string csv_spectroscopy(const std::vector<SpectroscopyPoint>& pts) {
    std::string s = "f0_hz,x_v,y_v\n";
    for (const auto& p : pts) append_row(s, {p.f0, p.x, p.y});
    return s;
}

std::string csv_map(const SensitivityMapResult& map) {
    std::string s = "a2_v,alpha2_rad,x_v,y_v,delta_s_v\n";
    for (const auto& c : map.cells) append_row(s, {c.a2, c.alpha2, c.x, c.y, c.delta_s});
    return s;
}

std::string csv_linecut(const std::vector<double>& x, const std::vector<double>& delta_s,
                        const std::string& x_header) {
    std::string s = x_header + ",delta_s_v\n";
    for (std::size_t i = 0; i < x.size(); ++i) append_row(s, {x[i], delta_s[i]});
    return s;
}

std::string csv_psd(const PsdEstimate& est) {
    std::string s = "f_hz,psd_hz2_per_hz,bin_count\n";
    for (std::size_t i = 0; i < est.freq.size(); ++i) {
        append_row(s, {est.freq[i], est.value[i], est.count[i]});
    }
    return s;
}

std::string csv_allan(const AllanEstimate& est) {
    std::string s = "tau_s,adev_hz,ci_low_hz,ci_high_hz\n";
    for (std::size_t i = 0; i < est.tau.size(); ++i) {
        append_row(s, {est.tau[i], est.adev[i], est.ci_low[i], est.ci_high[i]});
    }
    return s;
}

std::string csv_histogram(const Histogram& h) {
    std::string s = "bin_center_hz,count\n";
    for (std::size_t i = 0; i < h.center.size(); ++i) append_row(s, {h.center[i], h.count[i]});
    return s;
}

} // namespace smi
