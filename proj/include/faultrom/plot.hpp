#pragma once

#include <map>
#include <string>
#include <vector>

#include "faultrom/dlrom.hpp"
#include "faultrom/rom_pod.hpp"
#include "faultrom/uq.hpp"

namespace faultrom::plot {

/// Column-oriented CSV; every column must have the same length. Values are
/// written with 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct LinePlot {
    std::string title, xlabel, ylabel;
    bool log_y = false;  // non-positive values are dropped
    std::vector<Series> series;
};

/// Static SVG with axes, ticks, one polyline per series and a legend.
std::string render_svg(const LinePlot& plot);
void write_svg(const std::string& path, const LinePlot& plot);

/// Quartiles by linear interpolation between order statistics; whiskers reach
/// the most extreme samples within 1.5 IQR of the box.
struct FiveNumber {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    double whisker_lo = 0, whisker_hi = 0;
    std::size_t count = 0;
};
FiveNumber five_number(std::vector<double> values);

// Report emitters: each writes <stem>.csv and, where a curve makes sense, <stem>.svg.

/// n, e_ave, e_max, e_min.
void error_vs_n(const std::string& stem, const std::vector<Eigen::Index>& n,
                const std::vector<uq::ErrorReport>& reports);
/// k, sigma_k / sigma_1 per block (p, p_gamma, lambda) or for the single monolithic spectrum.
void sigma_decay(const std::string& stem, const pod::PodBasis& basis);
/// epoch, lr, train, val.
void training_history(const std::string& stem, const std::vector<dl::EpochRecord>& history);
/// x, one density column per named sample set.
void kde_curves(const std::string& stem, const std::map<std::string, std::vector<double>>& samples, int points = 256);
/// base samples, mean, std, S_1..S_e.
void sobol_convergence(const std::string& stem, const std::vector<uq::SobolResult>& study,
                       const std::vector<std::string>& names);
/// One row per phase: the five-number summary of its timings.
void timing_summary(const std::string& path, const std::map<std::string, std::vector<double>>& phases);

}  // namespace faultrom::plot
