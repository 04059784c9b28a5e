#include "fusionbench/sketch.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fusionbench/errors.hpp"

namespace fusionbench {

SketchSpec make_sketch(std::size_t n, std::size_t d, Rng& rng) {
    if (n < 1 || d < 1) {
        throw ParameterError("make_sketch: dimensions must be >= 1, got n=" +
                             std::to_string(n) + " d=" + std::to_string(d));
    }
    SketchSpec spec;
    spec.n = n;
    spec.d = d;
    spec.seed = rng.seed();
    spec.s = rng.uniform_signs(n);
    spec.h = rng.uniform_indices(n, d);
    return spec;
}

Tensor apply_sketch(const SketchSpec& spec, const Tensor& x) {
    if (x.rank() != 1 || x.dim(0) != spec.n) {
        throw DimensionError("apply_sketch: input shape " + shape_str(x) +
                             " does not match sketch input dimension " +
                             std::to_string(spec.n));
    }
    Tensor y = Tensor::zeros({spec.d});
    for (std::size_t i = 0; i < spec.n; ++i) {
        y[spec.h[i] - 1] += static_cast<double>(spec.s[i]) * x[i];
    }
    return y;
}

Tensor apply_sketch_transpose(const SketchSpec& spec, const Tensor& y) {
    if (y.rank() != 1 || y.dim(0) != spec.d) {
        throw DimensionError("apply_sketch_transpose: input shape " + shape_str(y) +
                             " does not match sketch output dimension " +
                             std::to_string(spec.d));
    }
    Tensor out = Tensor::zeros({spec.n});
    for (std::size_t i = 0; i < spec.n; ++i) {
        out[i] = static_cast<double>(spec.s[i]) * y[spec.h[i] - 1];
    }
    return out;
}

Tensor outer_sketch_oracle(const SketchSpec& spec_q, const SketchSpec& spec_v,
                           const Tensor& q, const Tensor& v) {
    if (spec_q.d != spec_v.d) {
        throw ParameterError("outer_sketch_oracle: sketch output dimensions differ (" +
                             std::to_string(spec_q.d) + " vs " +
                             std::to_string(spec_v.d) + ")");
    }
    if (q.rank() != 1 || q.dim(0) != spec_q.n) {
        throw DimensionError("outer_sketch_oracle: q shape " + shape_str(q) +
                             " does not match sketch input dimension " +
                             std::to_string(spec_q.n));
    }
    if (v.rank() != 1 || v.dim(0) != spec_v.n) {
        throw DimensionError("outer_sketch_oracle: v shape " + shape_str(v) +
                             " does not match sketch input dimension " +
                             std::to_string(spec_v.n));
    }
    const std::size_t d = spec_q.d;
    Tensor y = Tensor::zeros({d});
    for (std::size_t i = 0; i < spec_q.n; ++i) {
        for (std::size_t j = 0; j < spec_v.n; ++j) {
            const std::size_t bucket = (spec_q.h[i] - 1 + spec_v.h[j] - 1) % d;
            const double sign = static_cast<double>(spec_q.s[i] * spec_v.s[j]);
            y[bucket] += sign * q[i] * v[j];
        }
    }
    return y;
}

void save_sketch(const SketchSpec& spec, std::ostream& out) {
    out << spec.n << ' ' << spec.d << ' ' << spec.seed << '\n';
    for (std::size_t i = 0; i < spec.n; ++i) {
        if (i) out << ' ';
        out << spec.s[i];
    }
    out << '\n';
    for (std::size_t i = 0; i < spec.n; ++i) {
        if (i) out << ' ';
        out << spec.h[i];
    }
    out << '\n';
}

SketchSpec load_sketch(std::istream& in, std::size_t* line_counter) {
    std::size_t local = 0;
    std::size_t& line = line_counter ? *line_counter : local;
    auto next_line = [&](std::string& s) {
        if (!std::getline(in, s)) {
            throw ParseError("sketch: unexpected end of input at line " +
                             std::to_string(line + 1));
        }
        ++line;
    };

    std::string header;
    next_line(header);
    SketchSpec spec;
    {
        std::istringstream is(header);
        if (!(is >> spec.n >> spec.d >> spec.seed)) {
            throw ParseError("sketch: malformed header at line " + std::to_string(line));
        }
    }
    if (spec.n < 1 || spec.d < 1) {
        throw ValidationError("sketch: dimensions must be >= 1 at line " +
                              std::to_string(line));
    }

    std::string signs;
    next_line(signs);
    {
        std::istringstream is(signs);
        spec.s.resize(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            int v;
            if (!(is >> v) || (v != 1 && v != -1)) {
                throw ParseError("sketch: bad sign entry at line " + std::to_string(line));
            }
            spec.s[i] = v;
        }
    }

    std::string buckets;
    next_line(buckets);
    {
        std::istringstream is(buckets);
        spec.h.resize(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            std::uint64_t v;
            if (!(is >> v)) {
                throw ParseError("sketch: bad bucket entry at line " + std::to_string(line));
            }
            if (v < 1 || v > spec.d) {
                throw ValidationError("sketch: bucket out of range at line " +
                                      std::to_string(line));
            }
            spec.h[i] = static_cast<std::uint32_t>(v);
        }
    }
    return spec;
}

}  // namespace fusionbench
