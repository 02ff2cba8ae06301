#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace lga {

/// Comma-separated output with a fixed header, LF line endings, and 17
/// significant digits for floating-point fields. NaN is written as "nan".
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << std::setprecision(17);
    write_fields(header);
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    if (sizeof...(Ts) != columns_) throw std::logic_error("CsvWriter: wrong field count");
    bool first = true;
    ((emit(fields, first)), ...);
    out_ << '\n';
  }

  std::size_t columns() const noexcept { return columns_; }

 private:
  void write_fields(const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) out_ << (i ? "," : "") << f[i];
    out_ << '\n';
  }

  template <class T>
  void emit(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      if (std::isnan(v)) {
        out_ << "nan";
        return;
      }
    }
    out_ << v;
  }

  std::ofstream out_;
  std::size_t columns_;
};

/// Reads a whole CSV file into rows of string fields (no quoting support).
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace lga
