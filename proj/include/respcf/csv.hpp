#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace respcf {

// Parse/format errors carry a 1-based row and column location.
class CsvError : public std::runtime_error {
public:
    CsvError(std::string message, std::size_t row, std::size_t column)
        : std::runtime_error(message + " (row " + std::to_string(row) + ", column " +
                             std::to_string(column) + ")"),
          row_(row),
          column_(column) {}

    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

// RFC-4180 reader: double-quoted fields, "" escapes, CR LF or LF record
// separators.  Returns all records; a trailing newline does not produce
// an empty record.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t row = 1, col = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
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
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw CsvError("unexpected quote inside unquoted field", row, col);
                in_quotes = true;
                field_was_quoted = true;
                break;
            case ',':
                end_field();
                ++col;
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++row;
                col = 1;
                break;
            default:
                field.push_back(c);
        }
    }
    if (in_quotes) throw CsvError("unterminated quoted field", row, col);
    if (!field.empty() || field_was_quoted || !record.empty()) end_record();
    return records;
}

inline std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

// Quotes a field only when needed.
inline std::string csv_escape(std::string_view field) {
    const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

// Strict full-field numeric parse ('.' decimal separator only).
inline double parse_numeric_cell(std::string_view cell, std::size_t row, std::size_t column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw CsvError("non-numeric cell '" + std::string(cell) + "'", row, column);
    return value;
}

}  // namespace respcf
