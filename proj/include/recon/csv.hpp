#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace recon::csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
// breaks; CRLF and LF line endings are both accepted.
std::vector<Record> read(std::istream& in);
std::vector<Record> parse(std::string_view text);

std::string quote(std::string_view field);
void write_record(std::ostream& out, const Record& record);

}  // namespace recon::csv
