#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fusionbench/tensor.hpp"

namespace fusionbench {

// Shortest decimal form that parses back to the identical double
// (std::to_chars / std::from_chars round-trip).
std::string format_double(double v);
double parse_double(const std::string& s, std::size_t line);

// Line reader that tracks 1-based line numbers for parse diagnostics.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}
    // Returns false at end of input.
    bool next(std::string& out);
    // Like next() but throws ParseError(context) at end of input.
    std::string require(const char* context);
    std::size_t line() const { return line_; }
    // Accounts for lines another reader consumed from the same stream.
    void advance(std::size_t n) { line_ += n; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

// Plain-text tensor container entry:
//   tensor <name> <rank> <dims...>
// followed by the values, one line per leading-axis slice (a single line for
// rank-1). Layout documented in docs/formats.md.
void write_tensor_record(std::ostream& out, const std::string& name, const Tensor& t);
// Reads one record; the expected name and shape come from the manifest.
Tensor read_tensor_record(LineReader& reader, const std::string& expected_name,
                          const std::vector<std::size_t>& expected_shape);

// Minimal CSV support for the formats this repo emits (no quoting needed:
// fields never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::vector<std::string>> read_csv(std::istream& in);

}  // namespace fusionbench
