#include "fusionbench/tensor.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "fusionbench/errors.hpp"
#include "fusionbench/rng.hpp"

namespace fusionbench {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

void require_rank(const Tensor& t, std::size_t r, const char* op, const char* arg) {
    if (t.rank() != r) {
        throw DimensionError(std::string(op) + ": " + arg + " must have rank " +
                             std::to_string(r) + ", got shape " + shape_str(t));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t d : shape_) {
        if (d == 0) {
            throw ParameterError("tensor: zero dimension in shape");
        }
    }
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("tensor: shape product " +
                             std::to_string(shape_numel(shape_)) +
                             " does not match data length " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("tensor: axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(*this));
    }
    return shape_[axis];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
        if (i) os << 'x';
        os << t.shape()[i];
    }
    os << ']';
    return os.str();
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    require_rank(w, 2, "matvec", "W");
    require_rank(x, 1, "matvec", "x");
    const std::size_t m = w.dim(0), n = w.dim(1);
    if (x.dim(0) != n) {
        throw DimensionError("matvec: W shape " + shape_str(w) +
                             " does not conform to x shape " + shape_str(x));
    }
    Tensor y = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = w.data().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            acc += row[j] * x[j];
        }
        y[i] = acc;
    }
    return y;
}

Tensor matvec(const Tensor& w, const Tensor& x, const Tensor& b) {
    require_rank(b, 1, "matvec", "b");
    if (b.dim(0) != w.dim(0)) {
        throw DimensionError("matvec: bias shape " + shape_str(b) +
                             " does not conform to W shape " + shape_str(w));
    }
    Tensor y = matvec(w, x);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        y[i] += b[i];
    }
    return y;
}

Tensor vecmat(const Tensor& x, const Tensor& w) {
    require_rank(x, 1, "vecmat", "x");
    require_rank(w, 2, "vecmat", "W");
    const std::size_t n = w.dim(0), m = w.dim(1);
    if (x.dim(0) != n) {
        throw DimensionError("vecmat: x shape " + shape_str(x) +
                             " does not conform to W shape " + shape_str(w));
    }
    Tensor y = Tensor::zeros({m});
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double* row = w.data().data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            y[j] += xi * row[j];
        }
    }
    return y;
}

Tensor vecmat(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(b, 1, "vecmat", "b");
    if (b.dim(0) != w.dim(1)) {
        throw DimensionError("vecmat: bias shape " + shape_str(b) +
                             " does not conform to W shape " + shape_str(w));
    }
    Tensor y = vecmat(x, w);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        y[i] += b[i];
    }
    return y;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("hadamard: shape " + shape_str(a) +
                             " does not match shape " + shape_str(b));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] *= b[i];
    }
    return out;
}

Tensor tanh_map(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data()) {
        v = std::tanh(v);
    }
    return out;
}

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

// In-place iterative radix-2 Cooley-Tukey; a.size() must be a power of two.
void fft_pow2(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi /
                           static_cast<double>(len);
        const cd wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (cd& v : a) {
            v /= static_cast<double>(n);
        }
    }
}

// Bluestein chirp-z: length-n DFT via a power-of-two convolution. The k^2
// phase is reduced mod 2n before multiplying by pi/n to keep precision at
// large n.
std::vector<cd> dft_bluestein(const std::vector<cd>& x, bool inverse) {
    const std::size_t n = x.size();
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cd> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t kk = (static_cast<std::uint64_t>(k) * k) %
                                 (2 * static_cast<std::uint64_t>(n));
        const double ang = sign * std::numbers::pi * static_cast<double>(kk) /
                           static_cast<double>(n);
        chirp[k] = cd(std::cos(ang), std::sin(ang));
    }
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cd> a(m, cd(0.0, 0.0)), b(m, cd(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        a[k] = x[k] * chirp[k];
        b[k] = std::conj(chirp[k]);
        if (k != 0) {
            b[m - k] = std::conj(chirp[k]);
        }
    }
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) {
        a[i] *= b[i];
    }
    fft_pow2(a, true);
    std::vector<cd> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = a[k] * chirp[k];
    }
    if (inverse) {
        for (cd& v : out) {
            v /= static_cast<double>(n);
        }
    }
    return out;
}

std::vector<cd> dft(std::vector<cd> x, bool inverse) {
    if (is_pow2(x.size())) {
        fft_pow2(x, inverse);
        return x;
    }
    return dft_bluestein(x, inverse);
}

}  // namespace

Tensor circular_convolve(const Tensor& a, const Tensor& b, ConvMode mode) {
    require_rank(a, 1, "circular_convolve", "a");
    require_rank(b, 1, "circular_convolve", "b");
    const std::size_t d = a.dim(0);
    if (b.dim(0) != d) {
        throw DimensionError("circular_convolve: length " + shape_str(a) +
                             " does not match length " + shape_str(b));
    }
    if (mode == ConvMode::Direct) {
        Tensor out = Tensor::zeros({d});
        for (std::size_t k = 0; k < d; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                acc += a[j] * b[(k + d - j) % d];
            }
            out[k] = acc;
        }
        return out;
    }
    std::vector<cd> fa(d), fb(d);
    for (std::size_t i = 0; i < d; ++i) {
        fa[i] = cd(a[i], 0.0);
        fb[i] = cd(b[i], 0.0);
    }
    fa = dft(std::move(fa), false);
    fb = dft(std::move(fb), false);
    for (std::size_t i = 0; i < d; ++i) {
        fa[i] *= fb[i];
    }
    fa = dft(std::move(fa), true);
    Tensor out = Tensor::zeros({d});
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = fa[i].real();
    }
    return out;
}

Tensor gaussian_tensor(Rng& rng, std::vector<std::size_t> shape, double sigma) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data()) {
        v = rng.next_gaussian(sigma);
    }
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("add: shape " + shape_str(a) + " does not match shape " +
                             shape_str(b));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] += b[i];
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("sub: shape " + shape_str(a) + " does not match shape " +
                             shape_str(b));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] -= b[i];
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (double& v : out.data()) {
        v *= c;
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("dot: shape " + shape_str(a) + " does not match shape " +
                             shape_str(b));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

Tensor outer(const Tensor& a, const Tensor& b) {
    require_rank(a, 1, "outer", "a");
    require_rank(b, 1, "outer", "b");
    const std::size_t m = a.dim(0), n = b.dim(0);
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.at(i, j) = a[i] * b[j];
        }
    }
    return out;
}

}  // namespace fusionbench
