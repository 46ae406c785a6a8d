#include "mirror_sinkhorn/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mirror_sinkhorn/tensor.hpp"

namespace mirror_sinkhorn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!line.empty()) lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(',', start);
    fields.push_back(trim(line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return fields;
}

double parse_double(std::string_view field) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("not a number: '" + std::string(field) + "'");
  }
  return value;
}

long long parse_integer(std::string_view field) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::vector<double>> parse_rows(const std::vector<std::string_view>& lines, std::size_t first) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = first; k < lines.size(); ++k) {
    std::vector<double> row;
    for (auto f : split_fields(lines[k])) row.push_back(parse_double(f));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ParseError("matrix has no rows");
  const auto n = rows.front().size();
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(n));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n) {
      throw ParseError("row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                       " fields, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw ParseError("cannot format double");
  return std::string(buf, ptr);
}

Matrix parse_matrix(std::string_view text) { return rows_to_matrix(parse_rows(split_lines(text), 0)); }

std::string format_matrix(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Coupling parse_coupling(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("coupling file is empty");
  const auto header = split_fields(lines.front());
  if (header.size() != 2) throw ParseError("coupling header must be 'm,n'");
  const auto m = parse_integer(header[0]);
  const auto n = parse_integer(header[1]);
  if (m < 1 || n < 1) throw ParseError("coupling dimensions must be positive");
  Matrix out = rows_to_matrix(parse_rows(lines, 1));
  if (out.rows() != m || out.cols() != n) {
    throw ParseError("coupling header says " + std::to_string(m) + "x" + std::to_string(n) + " but body is " +
                     std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
  }
  return out;
}

std::string format_coupling(const Coupling& gamma) {
  return std::to_string(gamma.rows()) + "," + std::to_string(gamma.cols()) + "\n" + format_matrix(gamma);
}

Vector parse_vector(std::string_view text) {
  const Matrix m = parse_matrix(text);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw ParseError("expected a single row or a single column of values");
}

std::string format_vector(const Vector& v) { return format_matrix(v.transpose()); }

DenseTensor parse_tensor(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("tensor file is empty");
  const auto header = split_fields(lines.front());
  const auto d = parse_integer(header.at(0));
  if (d < 1 || static_cast<std::size_t>(d) + 1 != header.size()) throw ParseError("tensor header must be 'd,m1,...,md'");
  std::vector<std::size_t> shape;
  for (std::size_t k = 1; k < header.size(); ++k) {
    const auto mk = parse_integer(header[k]);
    if (mk < 1) throw ParseError("tensor dimensions must be positive");
    shape.push_back(static_cast<std::size_t>(mk));
  }
  std::vector<double> data;
  for (const auto& row : parse_rows(lines, 1)) data.insert(data.end(), row.begin(), row.end());
  DenseTensor out(shape);
  if (data.size() != out.size()) {
    throw ParseError("tensor body has " + std::to_string(data.size()) + " entries, expected " +
                     std::to_string(out.size()));
  }
  std::copy(data.begin(), data.end(), out.data().begin());
  return out;
}

std::string format_tensor(const DenseTensor& tensor) {
  std::string out = std::to_string(tensor.rank());
  for (auto mk : tensor.shape()) out += "," + std::to_string(mk);
  out += '\n';
  const std::size_t fiber = tensor.shape().back();
  const auto values = tensor.data();
  for (std::size_t k = 0; k < values.size(); ++k) {
    out += format_double(values[k]);
    out += ((k + 1) % fiber == 0) ? '\n' : ',';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ParseError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Matrix read_matrix(const std::filesystem::path& path) {
  try {
    return parse_matrix(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Coupling read_coupling(const std::filesystem::path& path) {
  try {
    return parse_coupling(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Marginal read_marginal(const std::filesystem::path& path) {
  try {
    return Marginal(parse_vector(read_text_file(path)));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return static_cast<int>(k);
  }
  return -1;
}

CsvTable parse_csv_table(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("table is empty");
  CsvTable table;
  for (auto f : split_fields(lines.front())) table.header.emplace_back(f);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    std::vector<std::string> row;
    for (auto f : split_fields(lines[k])) row.emplace_back(f);
    if (row.size() != table.header.size()) {
      throw ParseError("table row " + std::to_string(k) + " has " + std::to_string(row.size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_csv_table(const CsvTable& table) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k > 0) out += ',';
      out += fields[k];
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

}  // namespace mirror_sinkhorn
