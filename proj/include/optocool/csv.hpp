#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace optocool {

// Plain CSV writer. The first line is a '#' comment naming the run that
// produced the file, the second names the columns. Numbers are printed with
// 17 significant digits so values round-trip exactly and repeated runs with
// the same seed produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view run_comment,
            std::span<const std::string_view> columns)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
    out_ << "# " << run_comment << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
  }

  CsvWriter(const std::filesystem::path& path, std::string_view run_comment,
            std::initializer_list<std::string_view> columns)
      : CsvWriter(path, run_comment, std::span<const std::string_view>(columns.begin(),
                                                                       columns.size())) {}

  void row(std::span<const double> values) {
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      out_ << buf;
    }
    out_ << "\n";
  }

  void row(std::initializer_list<double> values) {
    row(std::span<const double>(values.begin(), values.size()));
  }

  void close() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace optocool
