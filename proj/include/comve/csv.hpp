#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace comve::csv {

using Row = std::vector<std::string>;

// RFC 4180: quoted fields may hold commas, doubled quotes and line breaks.
// CRLF and LF line endings are both accepted; a UTF-8 BOM is skipped.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::filesystem::path& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
std::string format_row(const Row& row);
void write_file(const std::filesystem::path& path, const std::vector<Row>& rows);

} // namespace comve::csv
