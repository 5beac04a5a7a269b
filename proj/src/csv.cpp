#include "ssv/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "ssv/errors.hpp"

namespace ssv {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header)
    : path_(path), out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw FormatError("cannot write " + path.string());
  write(std::vector<std::string>(header));
}

void CsvWriter::row(std::initializer_list<CsvField> fields) {
  std::vector<std::string> text;
  text.reserve(fields.size());
  for (const CsvField& f : fields) text.push_back(f.text);
  write(text);
}

void CsvWriter::write(const std::vector<std::string>& fields) {
  if (fields.size() != columns_)
    throw ShapeError(path_.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                     std::to_string(columns_));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << quoted(fields[i]);
  }
  out_ << '\n';
  if (!out_) throw FormatError("failed writing " + path_.string());
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw FormatError("failed writing " + path_.string());
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw FormatError("missing CSV column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (in_quotes) throw FormatError(path.string() + ": unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw FormatError(path.string() + ": empty CSV file");

  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw FormatError(path.string() + ": line " + std::to_string(r + 1) + " has " +
                        std::to_string(records[r].size()) + " fields, expected " +
                        std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw FormatError(what + ": '" + text + "' is not a number");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw FormatError(what + ": '" + text + "' is not a non-negative integer");
  return v;
}

}  // namespace ssv
