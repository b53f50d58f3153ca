#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sglab/types.hpp"

namespace sglab::io {

/// Round-trippable scientific notation ("%.17e").
std::string format_real(double value);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char delimiter = ',');

/// Throw ParseError naming `line` when `token` is not a complete number.
double parse_real(std::string_view token, std::size_t line);
long long parse_integer(std::string_view token, std::size_t line);

/// Opens for writing, creating parent directories; throws on failure.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
void write_matrix_csv(const RowMatrix& m, const std::filesystem::path& path);
/// Reads a headerless numeric CSV with rows of equal length.
RowMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace sglab::io
