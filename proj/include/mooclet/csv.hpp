#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mooclet::csv {

// RFC 4180: fields containing a comma, quote, CR or LF are quoted and
// embedded quotes doubled. Records end with CRLF.
std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

// Accepts CRLF or LF line endings. Throws Error(validation) on an
// unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace mooclet::csv
