#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ssmgrad {

/// One observation per line, or the first column of a CSV. A non-numeric first
/// row is taken as a header; blank lines are skipped. Throws ParseError naming
/// the line of any other non-numeric or non-finite entry, or when no values remain.
std::vector<double> parse_series(std::istream& in);
std::vector<double> read_series(const std::string& path);

/// One value per line with 17 significant digits.
void write_series(std::ostream& out, std::span<const double> y);
void write_series(const std::string& path, std::span<const double> y);

} // namespace ssmgrad
