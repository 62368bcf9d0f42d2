#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dsrfoc::io {

/// Writes via a temp file in the same directory plus rename, so readers never
/// observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const;  // throws if absent
};

/// Reads a simple numeric CSV with a header line.
CsvTable read_csv(const std::filesystem::path& path);

/// Fixed 12-significant-digit format used for all tabular output.
std::string format_double(double v);

}  // namespace dsrfoc::io
