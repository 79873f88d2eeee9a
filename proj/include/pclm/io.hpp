#pragma once

#include <string>
#include <vector>

#include "pclm/nd_array.hpp"

namespace pclm::io {

/// Numeric CSV with a header line. Cells must parse as doubles; failures
/// report the line number.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t n_cols() const { return header.size(); }
};

Table read_csv(const std::string& path);

/// Grouping file: one line per dimension with comma-separated group lower
/// bounds in fine-grid coordinates, e.g. "10,15,20" for three groups.
std::vector<std::vector<double>> read_grouping(const std::string& path);

/// Fixed "%.10g" formatting so repeated runs emit identical bytes.
std::string format_double(double v);

/// Writes a table of coordinate columns plus one value column. coords[k] is
/// the coordinate vector of dimension k; values walks the grid first index
/// fastest; value names like "count", "exposure", "eta_true".
void write_grid_csv(const std::string& path, const std::vector<std::vector<double>>& coords,
                    const std::vector<std::string>& coord_names, const NdArray& values,
                    const std::string& value_name, bool as_integer = false);

/// Multi-column variant used for the estimates file.
void write_grid_csv_multi(const std::string& path, const std::vector<std::vector<double>>& coords,
                          const std::vector<std::string>& coord_names,
                          const std::vector<const NdArray*>& columns,
                          const std::vector<std::string>& column_names);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace pclm::io
