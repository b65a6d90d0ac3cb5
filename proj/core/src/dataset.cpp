#include "mdlsr/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace mdlsr {

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
            field.remove_prefix(1);
        }
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        fields.push_back(field);
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

} // namespace

Dataset::Dataset(std::size_t dimension, std::span<const double> rows, std::vector<double> y,
                 std::optional<Provenance> provenance)
    : dimension_(dimension), y_(std::move(y)), provenance_(std::move(provenance))
{
    const std::size_t n = y_.size();
    if (n == 0) {
        throw std::invalid_argument("dataset needs at least one observation");
    }
    if (rows.size() != n * dimension_) {
        throw std::invalid_argument("dataset inputs have " + std::to_string(rows.size()) + " values, expected " +
                                    std::to_string(n * dimension_));
    }
    columns_.resize(rows.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y_[i])) {
            throw std::invalid_argument("dataset target is not finite at row " + std::to_string(i + 1));
        }
        for (std::size_t j = 0; j < dimension_; ++j) {
            const double v = rows[i * dimension_ + j];
            if (!std::isfinite(v)) {
                throw std::invalid_argument("dataset input is not finite at row " + std::to_string(i + 1));
            }
            columns_[j * n + i] = v;
        }
    }
}

std::vector<double> Dataset::row(std::size_t i) const
{
    std::vector<double> out(dimension_);
    for (std::size_t j = 0; j < dimension_; ++j) {
        out[j] = x(i, j);
    }
    return out;
}

Dataset parse_csv(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") != std::string_view::npos) {
            lines.push_back(line);
        }
        start = end + 1;
    }
    if (lines.empty()) {
        throw std::runtime_error("data file is empty");
    }
    const auto header = split_fields(lines.front());
    if (header.size() < 2 || header.back() != "y") {
        throw std::runtime_error("data header must be x1,...,xd,y");
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "x" + std::to_string(j + 1)) {
            throw std::runtime_error("data header column " + std::to_string(j + 1) + " must be x" +
                                     std::to_string(j + 1));
        }
    }
    if (lines.size() < 2) {
        throw std::runtime_error("data file has no observations");
    }
    std::vector<double> rows;
    std::vector<double> y;
    rows.reserve((lines.size() - 1) * d);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != d + 1) {
            throw std::runtime_error("data line " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(d + 1));
        }
        for (std::size_t j = 0; j <= d; ++j) {
            double v = 0.0;
            const auto f = fields[j];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw std::runtime_error("data line " + std::to_string(r + 1) + ": malformed number '" +
                                         std::string(f) + "'");
            }
            (j < d ? rows : y).push_back(v);
        }
    }
    return Dataset(d, rows, std::move(y));
}

Dataset read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open data file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

void write_csv(std::ostream& out, const Dataset& data)
{
    for (std::size_t j = 0; j < data.dimension(); ++j) {
        out << 'x' << (j + 1) << ',';
    }
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dimension(); ++j) {
            out << fmt::format("{:.17g},", data.x(i, j));
        }
        out << fmt::format("{:.17g}\n", data.y()[i]);
    }
}

} // namespace mdlsr
