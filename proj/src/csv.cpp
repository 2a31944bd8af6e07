#include "factorlasso/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "factorlasso/errors.hpp"

namespace factorlasso {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t column)
{
    const std::string_view text = trim(cell);
    if (text.empty())
        throw ParseError(row, column, "empty cell");
    std::string_view digits = text;
    if (!digits.empty() && digits.front() == '+')
        digits.remove_prefix(1);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || end != digits.data() + digits.size())
        throw ParseError(row, column, "not a number: '" + std::string(text) + "'");
    if (!std::isfinite(value))
        throw ParseError(row, column, "non-finite value");
    return value;
}

} // namespace

CsvRecords parse_csv(std::string_view text)
{
    CsvRecords records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool after_quote = false;
    bool record_started = false;
    std::size_t row = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        after_quote = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
        record_started = false;
        ++row;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    after_quote = true;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == ',') {
            record_started = true;
            end_field();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            end_record();
        } else if (after_quote) {
            throw ParseError(row, record.size() + 1, "unexpected character after closing quote");
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
            record_started = true;
        } else {
            field.push_back(c);
            record_started = true;
        }
    }
    if (in_quotes)
        throw ParseError(row, record.size() + 1, "unterminated quoted field");
    if (record_started || !field.empty() || !record.empty())
        end_record();
    return records;
}

std::string write_csv(const CsvRecords& records)
{
    std::string out;
    for (const auto& record : records) {
        for (std::size_t c = 0; c < record.size(); ++c) {
            if (c > 0)
                out.push_back(',');
            const std::string& field = record[c];
            if (field.find_first_of(",\"\r\n") == std::string::npos) {
                out += field;
                continue;
            }
            out.push_back('"');
            for (char ch : field) {
                if (ch == '"')
                    out.push_back('"');
                out.push_back(ch);
            }
            out.push_back('"');
        }
        out += "\r\n";
    }
    return out;
}

Dataset parse_numeric_csv(std::string_view text, bool has_header)
{
    CsvRecords records = parse_csv(text);
    // Blank trailing lines are not records.
    while (!records.empty() && records.back().size() == 1 && trim(records.back().front()).empty())
        records.pop_back();
    if (records.empty())
        throw ParseError(1, 1, "empty file");

    Dataset dataset;
    std::size_t first = 0;
    if (has_header) {
        for (const auto& name : records.front())
            dataset.names.emplace_back(trim(name));
        first = 1;
    }
    if (records.size() <= first)
        throw ParseError(first + 1, 1, "no data rows");

    const std::size_t width = has_header ? dataset.names.size() : records[first].size();
    dataset.x.resize(static_cast<Index>(records.size() - first), static_cast<Index>(width));
    for (std::size_t r = first; r < records.size(); ++r) {
        const auto& record = records[r];
        if (record.size() != width)
            throw ParseError(r + 1, std::min(record.size(), width) + 1,
                             "ragged row: expected " + std::to_string(width) + " fields, found "
                                 + std::to_string(record.size()));
        for (std::size_t c = 0; c < width; ++c)
            dataset.x(static_cast<Index>(r - first), static_cast<Index>(c)) = parse_cell(record[c], r + 1, c + 1);
    }
    return dataset;
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad())
        throw DataError("error reading '" + path + "'");
    return buffer.str();
}

Dataset load_csv(const std::string& path, bool has_header)
{
    try {
        return parse_numeric_csv(read_text_file(path), has_header);
    } catch (const ParseError& e) {
        throw ParseError(e.row(), e.column(), path + ": " + e.what());
    }
}

Dataset take_response_column(Dataset dataset, const std::string& column)
{
    Index index = -1;
    for (std::size_t c = 0; c < dataset.names.size(); ++c)
        if (dataset.names[c] == column)
            index = static_cast<Index>(c);
    if (index < 0) {
        Index parsed = 0;
        const auto [end, ec] = std::from_chars(column.data(), column.data() + column.size(), parsed);
        if (ec != std::errc() || end != column.data() + column.size())
            throw DataError("response column '" + column + "' not found");
        index = parsed;
    }
    const Index p = dataset.x.cols();
    if (index < 0 || index >= p)
        throw DataError("response column index " + std::to_string(index) + " out of range");
    if (p < 2)
        throw DataError("taking the response leaves no predictors");

    dataset.y = dataset.x.col(index);
    Matrix rest(dataset.x.rows(), p - 1);
    rest.leftCols(index) = dataset.x.leftCols(index);
    rest.rightCols(p - 1 - index) = dataset.x.rightCols(p - 1 - index);
    dataset.x = std::move(rest);
    if (!dataset.names.empty())
        dataset.names.erase(dataset.names.begin() + index);
    return dataset;
}

Vector load_response(const std::string& path, bool has_header)
{
    const Dataset table = load_csv(path, has_header);
    if (table.x.cols() != 1)
        throw DataError("response file '" + path + "' must have exactly one column");
    return table.x.col(0);
}

} // namespace factorlasso
