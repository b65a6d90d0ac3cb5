#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdlsr {

/// Where a synthetic dataset came from.
struct Provenance {
    std::string true_model;
    std::vector<double> theta;
    double s_eps = 0.0;
    std::uint64_t seed = 0;
};

/// N observations (x_i, y_i) with x_i in R^d. Inputs are stored column-major
/// so batch evaluation can stream one variable at a time.
class Dataset {
public:
    /// `rows` is row-major N x d. Throws std::invalid_argument when N == 0,
    /// shapes disagree or any entry is non-finite.
    Dataset(std::size_t dimension, std::span<const double> rows, std::vector<double> y,
            std::optional<Provenance> provenance = std::nullopt);

    std::size_t size() const { return y_.size(); }
    std::size_t dimension() const { return dimension_; }

    std::span<const double> column(std::size_t j) const
    {
        return std::span<const double>(columns_).subspan(j * size(), size());
    }
    std::span<const double> y() const { return y_; }
    double x(std::size_t i, std::size_t j) const { return columns_[j * size() + i]; }
    std::vector<double> row(std::size_t i) const;

    const std::optional<Provenance>& provenance() const { return provenance_; }

private:
    std::size_t dimension_;
    std::vector<double> columns_;
    std::vector<double> y_;
    std::optional<Provenance> provenance_;
};

/// CSV with header "x1,...,xd,y". Throws std::runtime_error on malformed input,
/// including an empty file or a file with a header but no rows.
Dataset parse_csv(std::string_view text);
Dataset read_csv(const std::filesystem::path& path);

/// Writes the header and rows with 17 significant digits.
void write_csv(std::ostream& out, const Dataset& data);

} // namespace mdlsr
