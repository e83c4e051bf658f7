#pragma once

#include "accelpo/harness.hpp"

#include <iomanip>
#include <sstream>

namespace accelpo::harness {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // empty when there is no stderr band
};

struct PlotData {
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
};

namespace detail {

inline bool is_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline std::string svg_num(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace detail

/// Loads trace CSVs (per-episode regret curves, one series per file) or
/// aggregate CSVs (a regret-vs-axis curve with a stderr band per config
/// group). All files must share one schema.
inline PlotData load_plot_data(const std::vector<std::string>& paths) {
    if (paths.empty()) throw ConfigError("plot: no input files");
    PlotData data;
    int kind = 0;  // 1 = trace, 2 = aggregate
    std::string first_header;
    for (const std::string& path : paths) {
        std::ifstream in(path);
        if (!in) throw ConfigError("plot: cannot open '" + path + "'");
        std::string header;
        if (!std::getline(in, header)) throw ConfigError("plot: empty CSV '" + path + "'");
        header = trim(header);
        const int this_kind = header == kTraceHeader ? 1
                              : header.rfind("config_id,", 0) == 0 ? 2
                                                                   : 0;
        if (this_kind == 0) throw ConfigError("plot: unrecognized CSV schema in '" + path + "'");
        if (kind == 0) {
            kind = this_kind;
            first_header = header;
        }
        if (kind != this_kind || header != first_header)
            throw ConfigError("plot: input CSV schemas do not match");

        if (kind == 1) {
            in.seekg(0);
            const RegretTrace trace = parse_trace_csv(in);
            if (trace.episodes.empty())
                throw ConfigError("plot: trace '" + path + "' has no episode records");
            PlotSeries s;
            s.label = trace.algorithm + " seed " + std::to_string(trace.seed);
            for (const RegretRecord& r : trace.episodes) {
                s.x.push_back(static_cast<double>(r.episode));
                s.y.push_back(r.regret);
            }
            data.x_label = "episode";
            data.y_label = "regret";
            data.series.push_back(std::move(s));
            continue;
        }

        // Aggregate schema: config_id, <axes...>, then the four stats + seeds.
        const auto cols = split_csv_line(header);
        if (cols.size() < 6 || cols[cols.size() - 5] != "final_regret_mean" ||
            cols.back() != "seeds")
            throw ConfigError("plot: malformed aggregate header in '" + path + "'");
        const size_t n_axes = cols.size() - 6;
        if (n_axes == 0) throw ConfigError("plot: aggregate CSV has no axis columns");
        std::vector<std::vector<std::string>> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() != cols.size())
                throw ConfigError("plot: malformed aggregate row in '" + path + "'");
            rows.push_back(std::move(f));
        }
        if (rows.empty()) throw ConfigError("plot: aggregate CSV '" + path + "' has no rows");

        // x-axis: the first axis column whose values are all numeric.
        size_t x_col = 0;
        bool found = false;
        for (size_t c = 1; c <= n_axes && !found; ++c) {
            bool numeric = true;
            for (const auto& r : rows) numeric = numeric && detail::is_numeric(r[c]);
            if (numeric) {
                x_col = c;
                found = true;
            }
        }
        if (!found) throw ConfigError("plot: aggregate CSV has no numeric axis to plot against");

        std::map<std::string, PlotSeries> groups;
        for (const auto& r : rows) {
            std::string key;
            for (size_t c = 1; c <= n_axes; ++c) {
                if (c == x_col) continue;
                if (!key.empty()) key += ";";
                key += cols[c] + "=" + r[c];
            }
            if (key.empty()) key = cols[x_col] + " sweep";
            PlotSeries& s = groups[key];
            s.label = key;
            s.x.push_back(parse_double(r[x_col]));
            s.y.push_back(parse_double(r[cols.size() - 3]));      // total_regret_mean
            s.err.push_back(parse_double(r[cols.size() - 2]));    // total_regret_stderr
        }
        for (auto& [key, s] : groups) {
            std::vector<size_t> order(s.x.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return s.x[a] < s.x[b]; });
            PlotSeries sorted;
            sorted.label = s.label;
            for (size_t i : order) {
                sorted.x.push_back(s.x[i]);
                sorted.y.push_back(s.y[i]);
                sorted.err.push_back(s.err[i]);
            }
            data.series.push_back(std::move(sorted));
        }
        data.x_label = cols[x_col];
        data.y_label = "total_regret";
    }
    return data;
}

/// Renders a standalone SVG line chart: axes, ticks, one polyline per series,
/// translucent mean +- stderr bands where available, and a legend.
inline std::string render_svg(const PlotData& data) {
    if (data.series.empty()) throw ConfigError("plot: nothing to draw");
    const double width = 860, height = 520;
    const double ml = 80, mr = 180, mt = 30, mb = 60;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const PlotSeries& s : data.series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            const double e = s.err.empty() ? 0.0 : s.err[i];
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - e);
            ymax = std::max(ymax, s.y[i] + e);
        }
    if (!(xmin < xmax)) { xmin -= 1.0; xmax += 1.0; }
    if (!(ymin < ymax)) { ymin -= 1.0; ymax += 1.0; }
    const double xpad = 0.03 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
    xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    const int n_colors = 8;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Axes and ticks.
    svg << "<g stroke=\"#333\" stroke-width=\"1\">";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\"/>";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\"/></g>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / n_ticks;
        const double fy = ymin + (ymax - ymin) * i / n_ticks;
        svg << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx)
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333\"/>";
        svg << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\">" << detail::svg_num(fx) << "</text>\n";
        svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
            << py(fy) << "\" stroke=\"#333\"/>";
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\">" << detail::svg_num(fy) << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\">" << data.x_label << "</text>\n";
    svg << "<text x=\"20\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << mt + ph / 2 << ")\">"
        << data.y_label << "</text>\n";
    svg << "</g>\n";

    // Bands, then lines on top.
    for (size_t k = 0; k < data.series.size(); ++k) {
        const PlotSeries& s = data.series[k];
        const char* color = palette[k % n_colors];
        if (!s.err.empty() && s.x.size() > 1) {
            svg << "<path fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" d=\"M";
            for (size_t i = 0; i < s.x.size(); ++i)
                svg << (i ? " L" : "") << px(s.x[i]) << " " << py(s.y[i] + s.err[i]);
            for (size_t i = s.x.size(); i-- > 0;)
                svg << " L" << px(s.x[i]) << " " << py(s.y[i] - s.err[i]);
            svg << " Z\"/>\n";
        }
    }
    for (size_t k = 0; k < data.series.size(); ++k) {
        const PlotSeries& s = data.series[k];
        const char* color = palette[k % n_colors];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
            svg << px(s.x[i]) << "," << py(s.y[i]) << " ";
        svg << "\"/>\n";
    }

    // Legend.
    svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
    for (size_t k = 0; k < data.series.size(); ++k) {
        const double ly = mt + 10 + 18 * static_cast<double>(k);
        svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
            << "\" y2=\"" << ly << "\" stroke=\"" << palette[k % n_colors]
            << "\" stroke-width=\"2\"/>";
        svg << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4 << "\" class=\"legend\">"
            << data.series[k].label << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

}  // namespace accelpo::harness
