#include "fusionbench/text_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "fusionbench/errors.hpp"

namespace fusionbench {

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("bad numeric value '" + s + "' at line " + std::to_string(line));
    }
    return v;
}

bool LineReader::next(std::string& out) {
    if (!std::getline(in_, out)) {
        return false;
    }
    ++line_;
    return true;
}

std::string LineReader::require(const char* context) {
    std::string out;
    if (!next(out)) {
        throw ParseError(std::string(context) + ": unexpected end of input at line " +
                         std::to_string(line_ + 1));
    }
    return out;
}

void write_tensor_record(std::ostream& out, const std::string& name, const Tensor& t) {
    out << "tensor " << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) {
        out << ' ' << d;
    }
    out << '\n';
    const std::size_t cols = t.rank() >= 2 ? t.shape().back() : t.numel();
    const std::size_t rows = t.numel() / cols;
    std::size_t idx = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c, ++idx) {
            if (c) out << ' ';
            out << format_double(t[idx]);
        }
        out << '\n';
    }
}

Tensor read_tensor_record(LineReader& reader, const std::string& expected_name,
                          const std::vector<std::size_t>& expected_shape) {
    std::string header = reader.require("tensor record");
    std::istringstream is(header);
    std::string tag, name;
    std::size_t rank = 0;
    if (!(is >> tag >> name >> rank) || tag != "tensor") {
        throw ParseError("malformed tensor header at line " + std::to_string(reader.line()));
    }
    if (name != expected_name) {
        throw ValidationError("expected tensor '" + expected_name + "' but found '" +
                              name + "' at line " + std::to_string(reader.line()));
    }
    std::vector<std::size_t> shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (!(is >> shape[i])) {
            throw ParseError("malformed tensor shape at line " +
                             std::to_string(reader.line()));
        }
    }
    if (shape != expected_shape) {
        std::string want;
        for (std::size_t d : expected_shape) want += std::to_string(d) + " ";
        throw ValidationError("tensor '" + name + "' shape disagrees with manifest (want " +
                              want + ") at line " + std::to_string(reader.line()));
    }

    Tensor t = Tensor::zeros(shape);
    const std::size_t cols = rank >= 2 ? shape.back() : t.numel();
    const std::size_t rows = t.numel() / cols;
    std::size_t idx = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        std::string line = reader.require("tensor values");
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t c = 0; c < cols; ++c, ++idx) {
            while (p < end && *p == ' ') ++p;
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) {
                throw ParseError("bad tensor value at line " +
                                 std::to_string(reader.line()));
            }
            p = res.ptr;
            t[idx] = v;
        }
        while (p < end && *p == ' ') ++p;
        if (p != end) {
            throw ParseError("trailing content in tensor row at line " +
                             std::to_string(reader.line()));
        }
    }
    return t;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace fusionbench
