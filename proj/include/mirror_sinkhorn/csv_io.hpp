#pragma once

// Text formats shared by the library and the CLI.
//
//   matrix    one row per line, comma-separated decimals, no header
//   coupling  header line "m,n" followed by the matrix rows
//   marginal  one line of comma-separated decimals (a single column is
//             accepted on input)
//   tensor    header line "d,m1,...,md" followed by the entries in
//             row-major order, one line per last-mode fiber
//
// Doubles are written in shortest round-trip form, so a value survives
// write/read bit-exactly.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

class DenseTensor;

// Shortest decimal that reads back to the same double.
std::string format_double(double value);

Matrix parse_matrix(std::string_view text);
std::string format_matrix(const Matrix& m);

Coupling parse_coupling(std::string_view text);
std::string format_coupling(const Coupling& gamma);

Vector parse_vector(std::string_view text);
std::string format_vector(const Vector& v);

DenseTensor parse_tensor(std::string_view text);
std::string format_tensor(const DenseTensor& tensor);

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view contents);

Matrix read_matrix(const std::filesystem::path& path);
Coupling read_coupling(const std::filesystem::path& path);
Marginal read_marginal(const std::filesystem::path& path);

// Comma-separated header plus rows of fields; used for traces and summaries.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column(std::string_view name) const;
};

CsvTable parse_csv_table(std::string_view text);
std::string format_csv_table(const CsvTable& table);

}  // namespace mirror_sinkhorn
