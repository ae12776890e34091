#pragma once

#include <istream>
#include <string>
#include <vector>

namespace mfdr::detail {

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF tolerated.
// Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

}  // namespace mfdr::detail
