#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vclone {

using CsvRow = std::vector<std::string>;

/// RFC 4180 style: fields containing commas, quotes or newlines are quoted.
std::vector<CsvRow> parse_csv(const std::string& text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const CsvRow& row);

}  // namespace vclone
