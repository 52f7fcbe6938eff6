#include "ssmgrad/series_io.hpp"

#include "ssmgrad/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace ssmgrad {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& field, double& value) {
    if (field.empty()) return false;
    const char* begin = field.data();
    if (*begin == '+') ++begin;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc{} && ptr == end;
}

} // namespace

std::vector<double> parse_series(std::istream& in) {
    std::vector<double> y;
    std::string line;
    std::size_t lineno = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of(",;\t");
        const std::string field = trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (field.empty() && trim(line).empty()) continue;
        double v;
        if (!parse_double(field, v)) {
            if (!seen_content) {
                seen_content = true;
                continue;
            }
            throw ParseError("line " + std::to_string(lineno) + ": not a number: '" + field + "'");
        }
        if (!std::isfinite(v))
            throw ParseError("line " + std::to_string(lineno) + ": value is not finite");
        seen_content = true;
        y.push_back(v);
    }
    if (y.empty()) throw ParseError("series contains no observations");
    return y;
}

std::vector<double> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return parse_series(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_series(std::ostream& out, std::span<const double> y) {
    const auto old = out.precision(17);
    for (double v : y) out << v << '\n';
    out.precision(old);
}

void write_series(const std::string& path, std::span<const double> y) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_series(out, y);
}

} // namespace ssmgrad
