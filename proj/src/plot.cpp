#include "faultrom/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "faultrom/error.hpp"

namespace faultrom::plot {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Roughly five round tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw ConfigError("CSV header and column count differ");
    const std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (const auto& c : columns)
        if (c.size() != rows) throw ConfigError("CSV columns have different lengths");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << num(columns[j][i]);
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path);
}

std::string render_svg(const LinePlot& plot) {
    constexpr double W = 640, H = 400, left = 70, right = 150, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    auto ty = [&](double y) { return plot.log_y ? std::log10(y) : y; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size()) throw ConfigError("series '" + s.name + "' has mismatched x and y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0.0)) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    if (plot.log_y) y0 = std::floor(y0), y1 = std::ceil(y1);
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ticks(x0, x1))
        o << "<line x1=\"" << px(t) << "\" y1=\"" << top + ph << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph + 4
          << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
          << short_num(t) << "</text>\n";
    const auto yt = plot.log_y ? [&] {
        std::vector<double> d;
        for (double e = y0; e <= y1 + 1e-9; e += std::max(1.0, std::ceil((y1 - y0) / 6.0))) d.push_back(e);
        return d;
    }()
                               : ticks(y0, y1);
    for (double t : yt)
        o << "<line x1=\"" << left - 4 << "\" y1=\"" << py(t) << "\" x2=\"" << left << "\" y2=\"" << py(t)
          << "\" stroke=\"black\"/><text x=\"" << left - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
          << (plot.log_y ? "1e" + short_num(t) : short_num(t)) << "</text>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(plot.xlabel)
      << "</text>\n";
    o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.ylabel) << "</text>\n";

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const char* colour = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0.0)) continue;
            o << px(s.x[i]) << ',' << py(ty(s.y[i])) << ' ';
        }
        o << "\"/>\n";
        const double ly = top + 14 + 16 * static_cast<double>(k);
        o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 34 << "\" y=\"" << ly + 4
          << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_svg(const std::string& path, const LinePlot& plot) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << render_svg(plot);
    if (!out) throw ConfigError("write failed: " + path);
}

FiveNumber five_number(std::vector<double> v) {
    if (v.empty()) throw ConfigError("five-number summary of an empty sample");
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double f = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
    };
    FiveNumber r;
    r.count = v.size();
    r.min = v.front();
    r.max = v.back();
    r.q1 = q(0.25);
    r.median = q(0.5);
    r.q3 = q(0.75);
    const double iqr = r.q3 - r.q1;
    r.whisker_lo = *std::lower_bound(v.begin(), v.end(), r.q1 - 1.5 * iqr);
    r.whisker_hi = *(std::upper_bound(v.begin(), v.end(), r.q3 + 1.5 * iqr) - 1);
    return r;
}

void error_vs_n(const std::string& stem, const std::vector<Eigen::Index>& n, const std::vector<uq::ErrorReport>& reports) {
    if (n.size() != reports.size()) throw ConfigError("error report count differs from mode counts");
    std::vector<double> x, ave, mx, mn;
    for (std::size_t i = 0; i < n.size(); ++i) {
        x.push_back(static_cast<double>(n[i]));
        ave.push_back(reports[i].e_ave);
        mx.push_back(reports[i].e_max);
        mn.push_back(reports[i].e_min);
    }
    write_csv(stem + ".csv", {"n", "e_ave", "e_max", "e_min"}, {x, ave, mx, mn});
    write_svg(stem + ".svg", {"relative error", "n", "error", true, {{"e_ave", x, ave}, {"e_max", x, mx}, {"e_min", x, mn}}});
}

void sigma_decay(const std::string& stem, const pod::PodBasis& basis) {
    static const char* block_names[] = {"p", "p_gamma", "lambda"};
    std::size_t len = 0;
    for (const auto& s : basis.sigma) len = std::max<std::size_t>(len, static_cast<std::size_t>(s.size()));
    std::vector<std::string> header{"k"};
    std::vector<std::vector<double>> cols(1);
    LinePlot plot{"singular value decay", "k", "sigma_k / sigma_1", true, {}};
    for (std::size_t k = 0; k < len; ++k) cols[0].push_back(static_cast<double>(k + 1));
    for (std::size_t b = 0; b < basis.sigma.size(); ++b) {
        const auto& s = basis.sigma[b];
        const std::string name = basis.sigma.size() == 1 ? "sigma" : block_names[b];
        std::vector<double> c(len, std::numeric_limits<double>::quiet_NaN());
        for (Eigen::Index k = 0; k < s.size(); ++k) c[static_cast<std::size_t>(k)] = s[0] > 0 ? s[k] / s[0] : 0.0;
        header.push_back(name);
        plot.series.push_back({name, cols[0], c});
        cols.push_back(std::move(c));
    }
    write_csv(stem + ".csv", header, cols);
    write_svg(stem + ".svg", plot);
}

void training_history(const std::string& stem, const std::vector<dl::EpochRecord>& history) {
    std::vector<double> e, lr, tr, va;
    for (const auto& r : history) {
        e.push_back(r.epoch);
        lr.push_back(r.lr);
        tr.push_back(r.train_loss);
        va.push_back(r.val_loss);
    }
    write_csv(stem + ".csv", {"epoch", "lr", "train_loss", "val_loss"}, {e, lr, tr, va});
    write_svg(stem + ".svg", {"training history", "epoch", "loss", true, {{"train", e, tr}, {"validation", e, va}}});
}

void kde_curves(const std::string& stem, const std::map<std::string, std::vector<double>>& samples, int points) {
    if (samples.empty() || points < 2) throw ConfigError("KDE needs samples and at least two grid points");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, pad = 0.0;
    for (const auto& [name, s] : samples) {
        (void)name;
        for (double v : s) lo = std::min(lo, v), hi = std::max(hi, v);
        pad = std::max(pad, 3.0 * uq::scott_bandwidth(s));
    }
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(lo - pad + (hi - lo + 2 * pad) * i / (points - 1));
    std::vector<std::string> header{"x"};
    std::vector<std::vector<double>> cols{grid};
    LinePlot plot{"kernel density", "value", "density", false, {}};
    for (const auto& [name, s] : samples) {
        auto d = uq::kde(s, grid);
        header.push_back(name);
        plot.series.push_back({name, grid, d});
        cols.push_back(std::move(d));
    }
    write_csv(stem + ".csv", header, cols);
    write_svg(stem + ".svg", plot);
}

void sobol_convergence(const std::string& stem, const std::vector<uq::SobolResult>& study,
                       const std::vector<std::string>& names) {
    std::vector<std::string> header{"base_samples", "mean", "std"};
    std::vector<std::vector<double>> cols(3 + names.size());
    for (const auto& n : names) header.push_back("S_" + n);
    for (const auto& r : study) {
        if (static_cast<std::size_t>(r.first_order.size()) != names.size())
            throw ConfigError("index count differs from parameter names");
        cols[0].push_back(static_cast<double>(r.base_samples));
        cols[1].push_back(r.mean);
        cols[2].push_back(r.std);
        for (std::size_t i = 0; i < names.size(); ++i) cols[3 + i].push_back(r.first_order[static_cast<Eigen::Index>(i)]);
    }
    write_csv(stem + ".csv", header, cols);
    LinePlot plot{"first-order indices", "base samples", "S", false, {}};
    for (std::size_t i = 0; i < names.size(); ++i) plot.series.push_back({names[i], cols[0], cols[3 + i]});
    write_svg(stem + ".svg", plot);
}

void timing_summary(const std::string& path, const std::map<std::string, std::vector<double>>& phases) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "phase,count,min,whisker_lo,q1,median,q3,whisker_hi,max\n";
    for (const auto& [name, v] : phases) {
        if (v.empty()) continue;
        const auto f = five_number(v);
        out << name << ',' << f.count << ',' << num(f.min) << ',' << num(f.whisker_lo) << ',' << num(f.q1) << ','
            << num(f.median) << ',' << num(f.q3) << ',' << num(f.whisker_hi) << ',' << num(f.max) << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace faultrom::plot
