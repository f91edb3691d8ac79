#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace probctl {

/// Stability-column states for steps where the monitor did not produce a
/// usable report.
inline constexpr int stability_not_checked = -1;
inline constexpr int stability_indeterminate = -2;

struct TraceRow {
    int k = 0;
    double r = 0.0;
    double y_d = 0.0;
    double y = 0.0;
    double u = 0.0;
    double e = 0.0; // y - y_d, exactly
    double j_cost = 0.0;
    double nll_forward = std::numeric_limits<double>::quiet_NaN();
    double nll_controller = std::numeric_limits<double>::quiet_NaN();
    double spectral_norm = std::numeric_limits<double>::quiet_NaN();
    double spectral_radius = std::numeric_limits<double>::quiet_NaN();
    int stable_flag = stability_not_checked; // 1 stable, 0 not, -1 unchecked, -2 indeterminate
    std::string method = "mdn";
};

/// Shortest round-trip decimal encoding, locale-independent, so identical
/// runs produce byte-identical files and readers recover the exact doubles.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct SimTrace {
    std::vector<TraceRow> rows;
    bool failed = false;
    int failed_step = -1;
    std::string failure_reason;

    static const char* header() {
        return "k,r,y_d,y,u,e,J,nll_forward,nll_controller,spectral_norm,spectral_radius,stable_flag,method";
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write trace: " + path);
        out << header() << "\n";
        for (const TraceRow& row : rows) {
            out << row.k << ',' << format_double(row.r) << ',' << format_double(row.y_d) << ','
                << format_double(row.y) << ',' << format_double(row.u) << ',' << format_double(row.e)
                << ',' << format_double(row.j_cost) << ',' << format_double(row.nll_forward) << ','
                << format_double(row.nll_controller) << ',' << format_double(row.spectral_norm) << ','
                << format_double(row.spectral_radius) << ',' << row.stable_flag << ',' << row.method
                << "\n";
        }
        if (failed)
            out << "# run_failed step=" << failed_step << " reason=" << failure_reason << "\n";
    }

    static SimTrace read_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read trace: " + path);
        SimTrace trace;
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path);
        if (line != header()) throw std::runtime_error("unexpected trace header in " + path);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                trace.failed = true;
                const auto pos = line.find("step=");
                if (pos != std::string::npos) trace.failed_step = std::atoi(line.c_str() + pos + 5);
                continue;
            }
            std::stringstream ss(line);
            std::string field;
            TraceRow row;
            auto next = [&]() {
                if (!std::getline(ss, field, ',')) throw std::runtime_error("short trace row in " + path);
                return field;
            };
            row.k = std::stoi(next());
            row.r = std::strtod(next().c_str(), nullptr);
            row.y_d = std::strtod(next().c_str(), nullptr);
            row.y = std::strtod(next().c_str(), nullptr);
            row.u = std::strtod(next().c_str(), nullptr);
            row.e = std::strtod(next().c_str(), nullptr);
            row.j_cost = std::strtod(next().c_str(), nullptr);
            row.nll_forward = std::strtod(next().c_str(), nullptr);
            row.nll_controller = std::strtod(next().c_str(), nullptr);
            row.spectral_norm = std::strtod(next().c_str(), nullptr);
            row.spectral_radius = std::strtod(next().c_str(), nullptr);
            row.stable_flag = std::stoi(next());
            row.method = next();
            trace.rows.push_back(std::move(row));
        }
        return trace;
    }
};

struct TraceSummary {
    double mean_e = 0.0;
    double std_e = 0.0;
    double mean_j = 0.0;
    int window = 0;
};

/// Statistics over the trailing `window` rows (or all rows when shorter).
inline TraceSummary summarize(const SimTrace& trace, int window) {
    if (trace.rows.empty()) throw std::invalid_argument("summarize: empty trace");
    const int n = static_cast<int>(trace.rows.size());
    const int w = std::min(window, n);
    TraceSummary s;
    s.window = w;
    for (int i = n - w; i < n; ++i) {
        s.mean_e += trace.rows[i].e;
        s.mean_j += trace.rows[i].j_cost;
    }
    s.mean_e /= w;
    s.mean_j /= w;
    double acc = 0.0;
    for (int i = n - w; i < n; ++i) {
        const double d = trace.rows[i].e - s.mean_e;
        acc += d * d;
    }
    s.std_e = std::sqrt(acc / w);
    return s;
}

} // namespace probctl
