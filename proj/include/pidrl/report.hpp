#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pidrl/errors.hpp"
#include "pidrl/learning.hpp"

namespace pidrl {

/// Shortest round-trip decimal form; identical input bits give identical
/// text, which keeps every emitted file byte-stable.
inline std::string fmt_double(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Per-step mean and standard error over the non-diverged runs of an
/// experiment. Diverged runs are counted but excluded from the statistics.
struct Aggregate {
    std::vector<long long> steps;
    std::vector<double> mean;
    std::vector<double> std_error;
    int n_total = 0;
    int n_diverged = 0;
};

inline Aggregate aggregate_runs(const std::vector<RunResult>& runs) {
    Aggregate agg;
    agg.n_total = static_cast<int>(runs.size());
    const RunResult* first = nullptr;
    int n_used = 0;
    for (const RunResult& r : runs) {
        if (r.diverged) {
            ++agg.n_diverged;
            continue;
        }
        if (!first) first = &r;
        ++n_used;
    }
    if (!first) return agg;
    const std::size_t len = first->error_trace.size();
    agg.steps.resize(len);
    agg.mean.assign(len, 0.0);
    agg.std_error.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) agg.steps[i] = first->error_trace[i].first;
    for (const RunResult& r : runs) {
        if (r.diverged) continue;
        if (r.error_trace.size() != len)
            throw std::logic_error("aggregate_runs: runs disagree on the evaluation grid");
        for (std::size_t i = 0; i < len; ++i) agg.mean[i] += r.error_trace[i].second;
    }
    for (std::size_t i = 0; i < len; ++i) agg.mean[i] /= n_used;
    if (n_used > 1) {
        for (const RunResult& r : runs) {
            if (r.diverged) continue;
            for (std::size_t i = 0; i < len; ++i) {
                const double d = r.error_trace[i].second - agg.mean[i];
                agg.std_error[i] += d * d;
            }
        }
        for (std::size_t i = 0; i < len; ++i)
            agg.std_error[i] = std::sqrt(agg.std_error[i] / (n_used - 1)) / std::sqrt(double(n_used));
    }
    return agg;
}

/// Long-form per-run CSV: step,run,error with kp,ki,kd appended when any run
/// carries a gain trajectory. Empty input yields a header-only file.
inline void emit_csv(const std::vector<RunResult>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    bool with_gains = false;
    for (const RunResult& r : runs)
        if (!r.gain_trace.empty()) with_gains = true;
    out << (with_gains ? "step,run,error,kp,ki,kd\n" : "step,run,error\n");
    for (const RunResult& r : runs) {
        for (std::size_t i = 0; i < r.error_trace.size(); ++i) {
            out << r.error_trace[i].first << ',' << r.run_id << ','
                << fmt_double(r.error_trace[i].second);
            if (with_gains) {
                if (i < r.gain_trace.size()) {
                    out << ',' << fmt_double(r.gain_trace[i].kappa_p) << ','
                        << fmt_double(r.gain_trace[i].kappa_i) << ','
                        << fmt_double(r.gain_trace[i].kappa_d);
                } else {
                    out << ",,,";
                }
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Aggregate CSV: step,mean,stderr.
inline void emit_aggregate_csv(const Aggregate& agg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "step,mean,stderr\n";
    for (std::size_t i = 0; i < agg.steps.size(); ++i)
        out << agg.steps[i] << ',' << fmt_double(agg.mean[i]) << ','
            << fmt_double(agg.std_error[i]) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

/// Minimal SVG line chart of the aggregate: mean curve plus a shaded
/// mean +- stderr band. Deterministic output for identical inputs.
inline void emit_svg(const Aggregate& agg, const std::string& path,
                     const std::string& title = "normalized error") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const double width = 640.0, height = 400.0;
    const double ml = 60.0, mr = 15.0, mt = 30.0, mb = 40.0;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double ymax = 0.0, ymin = 0.0;
    for (std::size_t i = 0; i < agg.steps.size(); ++i) {
        ymax = std::max(ymax, agg.mean[i] + agg.std_error[i]);
        ymin = std::min(ymin, agg.mean[i] - agg.std_error[i]);
    }
    if (ymax == ymin) ymax = ymin + 1.0;
    const double xmax = agg.steps.empty() ? 1.0 : std::max<double>(1.0, double(agg.steps.back()));
    auto sx = [&](double step) { return ml + pw * step / xmax; };
    auto sy = [&](double v) { return mt + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_double(width)
        << "\" height=\"" << fmt_double(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt_double(ml) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";
    // axes
    out << "<line x1=\"" << fmt_double(ml) << "\" y1=\"" << fmt_double(mt) << "\" x2=\""
        << fmt_double(ml) << "\" y2=\"" << fmt_double(mt + ph) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << fmt_double(ml) << "\" y1=\"" << fmt_double(mt + ph) << "\" x2=\""
        << fmt_double(ml + pw) << "\" y2=\"" << fmt_double(mt + ph) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"5\" y=\"" << fmt_double(mt + 5) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt_double(ymax) << "</text>\n";
    out << "<text x=\"5\" y=\"" << fmt_double(mt + ph) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt_double(ymin) << "</text>\n";
    out << "<text x=\"" << fmt_double(ml + pw - 40) << "\" y=\"" << fmt_double(height - 10)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_double(xmax) << "</text>\n";

    if (!agg.steps.empty()) {
        out << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < agg.steps.size(); ++i)
            out << fmt_double(sx(double(agg.steps[i]))) << ','
                << fmt_double(sy(agg.mean[i] + agg.std_error[i])) << ' ';
        for (std::size_t i = agg.steps.size(); i-- > 0;)
            out << fmt_double(sx(double(agg.steps[i]))) << ','
                << fmt_double(sy(agg.mean[i] - agg.std_error[i])) << ' ';
        out << "\"/>\n";
        out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < agg.steps.size(); ++i)
            out << fmt_double(sx(double(agg.steps[i]))) << ',' << fmt_double(sy(agg.mean[i])) << ' ';
        out << "\"/>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace pidrl
