#include "pclm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pclm/errors.hpp"

namespace pclm::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, const std::string& path, std::size_t line_no) {
    const std::string t = strip(cell);
    try {
        std::size_t pos = 0;
        double v = std::stod(t, &pos);
        if (pos != t.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": cannot parse '" + t + "' as a number");
    }
}

} // namespace

Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Table table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = strip(line);
        if (t.empty()) continue;
        auto cells = split(t, ',');
        if (table.header.empty()) {
            for (auto& c : cells) table.header.push_back(strip(c));
            continue;
        }
        if (cells.size() != table.header.size())
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.header.size()) + " columns, found " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) row[j] = parse_double(cells[j], path, line_no);
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw IoError(path + ": empty file");
    return table;
}

std::vector<std::vector<double>> read_grouping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> dims;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        auto cells = split(t, ',');
        std::vector<double> bounds;
        bounds.reserve(cells.size());
        for (const auto& c : cells) bounds.push_back(parse_double(c, path, line_no));
        for (std::size_t i = 1; i < bounds.size(); ++i)
            if (bounds[i] <= bounds[i - 1])
                throw IoError(path + ":" + std::to_string(line_no) + ": group lower bounds must be increasing");
        dims.push_back(std::move(bounds));
    }
    if (dims.empty()) throw IoError(path + ": no grouping lines found");
    return dims;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_grid_csv(const std::string& path, const std::vector<std::vector<double>>& coords,
                    const std::vector<std::string>& coord_names, const NdArray& values,
                    const std::string& value_name, bool as_integer) {
    std::vector<const NdArray*> cols{&values};
    std::vector<std::string> names{value_name};
    if (!as_integer) {
        write_grid_csv_multi(path, coords, coord_names, cols, names);
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t k = 0; k < coord_names.size(); ++k) out << coord_names[k] << ",";
    out << value_name << "\n";
    std::vector<std::size_t> idx(coords.size(), 0);
    for (std::size_t flat = 0; flat < values.size(); ++flat) {
        for (std::size_t k = 0; k < coords.size(); ++k) out << format_double(coords[k][idx[k]]) << ",";
        out << static_cast<long long>(values[flat]) << "\n";
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (++idx[k] < coords[k].size()) break;
            idx[k] = 0;
        }
    }
}

void write_grid_csv_multi(const std::string& path, const std::vector<std::vector<double>>& coords,
                          const std::vector<std::string>& coord_names,
                          const std::vector<const NdArray*>& columns,
                          const std::vector<std::string>& column_names) {
    if (columns.empty() || columns.size() != column_names.size())
        throw ValidationError("write_grid_csv_multi: column/name mismatch");
    std::size_t total = 1;
    for (const auto& c : coords) total *= c.size();
    for (const auto* col : columns)
        if (col->size() != total) throw DimensionError("write_grid_csv_multi: column length does not match the grid");

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t k = 0; k < coord_names.size(); ++k) out << coord_names[k] << ",";
    for (std::size_t j = 0; j < column_names.size(); ++j) {
        out << column_names[j];
        out << (j + 1 < column_names.size() ? "," : "\n");
    }
    std::vector<std::size_t> idx(coords.size(), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t k = 0; k < coords.size(); ++k) out << format_double(coords[k][idx[k]]) << ",";
        for (std::size_t j = 0; j < columns.size(); ++j) {
            out << format_double((*columns[j])[flat]);
            out << (j + 1 < columns.size() ? "," : "\n");
        }
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (++idx[k] < coords[k].size()) break;
            idx[k] = 0;
        }
    }
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace pclm::io
