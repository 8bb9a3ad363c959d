#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odgarch {

/**
 * @brief Tukey box statistics.
 *
 * Quartiles are Tukey hinges (medians of the lower and upper halves, the
 * median included in both when n is odd). Whiskers reach the most extreme
 * observations inside [q1 - 1.5 IQR, q3 + 1.5 IQR]; the rest are outliers.
 */
struct BoxStats {
    std::size_t n = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;
    double whisker_hi = 0.0;
    double mean = 0.0;
    std::vector<double> outliers;
};

/// NaN entries are ignored. Throws std::invalid_argument if nothing finite remains.
BoxStats box_stats(std::vector<double> values);

/// Columns of a replicates.csv file.
struct ReplicateTable {
    std::string model;
    std::vector<std::string> param_names;
    std::vector<std::size_t> sample_sizes;  ///< ascending, distinct
    std::vector<std::size_t> n;
    std::vector<bool> converged;
    std::vector<double> loglik_gap;
    std::vector<std::vector<double>> theta;  ///< theta[row][param]

    /// Values of one column (param index, or -1 for loglik_gap) at one sample size.
    [[nodiscard]] std::vector<double> column(int param, std::size_t sample_size) const;
};

/// Throws std::invalid_argument on missing columns, ragged rows or an empty table.
ReplicateTable read_replicates_csv(std::string_view text);

/// One box per sample size with a solid reference line at 0.
std::string loglik_gap_svg(const ReplicateTable& table);

/// One panel per parameter, one box per sample size, a dashed line at the true
/// value when `truth` is given and an "x" at the Monte Carlo mean.
std::string estimates_svg(const ReplicateTable& table, const std::optional<std::vector<double>>& truth);

}  // namespace odgarch
