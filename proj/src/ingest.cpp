#include "gex/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gex {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

double parse_double(const std::string& s, long row, std::size_t col) {
    double v;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw validation_error("load_dataset: unparseable value '" + s + "' at data row " +
                               std::to_string(row) + ", column " + std::to_string(col));
    return v;
}

}  // namespace

void validate_dataset(const GridDataset& ds) {
    const int d = ds.n_sites();
    const long n = ds.n_times();
    if (d < 1) throw validation_error("dataset has no sites");
    if (ds.values.rows() != n || ds.values.cols() != d)
        throw validation_error("dataset value matrix shape does not match sites/times");
    for (long t = 1; t < n; ++t)
        if (ds.times[t] <= ds.times[t - 1])
            throw validation_error("day index not strictly increasing at row " + std::to_string(t));
    for (long t = 0; t < n; ++t)
        for (int j = 0; j < d; ++j) {
            const double v = ds.values(t, j);
            if (!std::isfinite(v))
                throw validation_error("non-finite value at row " + std::to_string(t) +
                                       ", site " + std::to_string(j));
            if (v < 0.0)
                throw validation_error("negative precipitation at row " + std::to_string(t) +
                                       ", site " + std::to_string(j));
        }
}

GridDataset load_dataset(const std::string& path, int run_id) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_dataset: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw validation_error("load_dataset: empty file " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "day")
        throw validation_error("load_dataset: first column must be 'day'");

    GridDataset ds;
    ds.run_id = run_id;
    for (std::size_t c = 1; c < header.size(); ++c) {
        int j = 0, k = 0;
        if (std::sscanf(header[c].c_str(), "s_%d_%d", &j, &k) != 2)
            throw validation_error("load_dataset: bad site column name '" + header[c] + "'");
        ds.sites.emplace_back(static_cast<double>(j), static_cast<double>(k));
    }
    const int d = ds.n_sites();
    if (d < 1) throw validation_error("load_dataset: no site columns");

    std::vector<double> cells;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != d + 1)
            throw validation_error("load_dataset: row " + std::to_string(row) + " has " +
                                   std::to_string(fields.size()) + " fields, expected " +
                                   std::to_string(d + 1));
        long day;
        {
            const char* b = fields[0].data();
            auto [ptr, ec] = std::from_chars(b, b + fields[0].size(), day);
            if (ec != std::errc() || ptr != b + fields[0].size())
                throw validation_error("load_dataset: bad day index at row " + std::to_string(row));
        }
        ds.times.push_back(day);
        for (int j = 0; j < d; ++j) cells.push_back(parse_double(fields[j + 1], row, j + 1));
        ++row;
    }
    ds.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), row, d);
    validate_dataset(ds);
    return ds;
}

void save_dataset(const GridDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_dataset: cannot write " + path);
    out << "day";
    for (const auto& s : ds.sites)
        out << ",s_" << static_cast<long>(s.x()) << "_" << static_cast<long>(s.y());
    out << "\n";
    char buf[40];
    for (long t = 0; t < ds.n_times(); ++t) {
        out << ds.times[t];
        for (int j = 0; j < ds.n_sites(); ++j) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", ds.values(t, j));
            out << ',';
            out.write(buf, len);
        }
        out << "\n";
    }
}

std::vector<Eigen::Vector2d> grid_coordinates(int side) {
    if (side <= 0) throw validation_error("grid_coordinates: side must be >= 1");
    std::vector<Eigen::Vector2d> coords;
    coords.reserve(static_cast<std::size_t>(side) * side);
    for (int j = 1; j <= side; ++j)
        for (int k = 1; k <= side; ++k) coords.emplace_back(j, k);
    return coords;
}

Eigen::MatrixXd pairwise_distances(const std::vector<Eigen::Vector2d>& coords) {
    const int d = static_cast<int>(coords.size());
    if (d < 2) throw validation_error("pairwise_distances: need at least 2 coordinates");
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double h = (coords[i] - coords[j]).norm();
            dist(i, j) = h;
            dist(j, i) = h;
        }
    return dist;
}

}  // namespace gex
