#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace ssv {

// Round-trippable text for a double ("%.17g"), so equal values print equal bytes.
std::string format_number(double v);

struct CsvField {
  CsvField(std::string s) : text(std::move(s)) {}
  CsvField(const char* s) : text(s) {}
  CsvField(double v) : text(format_number(v)) {}
  CsvField(int v) : text(std::to_string(v)) {}
  CsvField(long v) : text(std::to_string(v)) {}
  CsvField(unsigned long v) : text(std::to_string(v)) {}
  CsvField(unsigned long long v) : text(std::to_string(v)) {}
  CsvField(long long v) : text(std::to_string(v)) {}
  CsvField(unsigned v) : text(std::to_string(v)) {}

  std::string text;
};

// Writes "\n"-terminated rows; fields containing ',', '"' or a newline are quoted.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header);

  void row(std::initializer_list<CsvField> fields);
  void close();

 private:
  void write(const std::vector<std::string>& fields);

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; FormatError if absent.
  std::size_t column(const std::string& name) const;
};

// Every row must have as many fields as the header; FormatError otherwise.
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);

}  // namespace ssv
