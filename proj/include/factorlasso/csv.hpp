#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factorlasso/types.hpp"

namespace factorlasso {

using CsvRecords = std::vector<std::vector<std::string>>;

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// Throws ParseError on an unterminated quote or stray characters after one.
CsvRecords parse_csv(std::string_view text);

/// Quotes fields containing commas, quotes or line breaks; CRLF record ends.
std::string write_csv(const CsvRecords& records);

/// Predictors, an optional response and optional column names.
struct Dataset
{
    Matrix x;
    std::optional<Vector> y;
    std::vector<std::string> names;
};

/// Rectangular numeric CSV. Errors carry 1-based row/column (the header is row 1).
/// Throws DataError when the file cannot be read, ParseError for ragged rows,
/// non-numeric cells or an empty file.
Dataset parse_numeric_csv(std::string_view text, bool has_header);
Dataset load_csv(const std::string& path, bool has_header);

/// Moves one column of `dataset.x` into `dataset.y`. `column` is a header
/// name or a 0-based index.
Dataset take_response_column(Dataset dataset, const std::string& column);

/// Single-column response file.
Vector load_response(const std::string& path, bool has_header);

std::string read_text_file(const std::string& path);

} // namespace factorlasso
