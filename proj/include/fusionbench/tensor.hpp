#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fusionbench {

class Rng;

// Dense n-dimensional array of 64-bit floats, row-major flat storage.
// Shapes are fixed at construction; there are no strided views.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j, std::size_t k) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const Tensor& t);

enum class ConvMode { Direct, Frequency };

// y = W x (+ b), W rank-2 [m x n], x rank-1 [n], b rank-1 [m].
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor matvec(const Tensor& w, const Tensor& x, const Tensor& b);

// y = x^T W (+ b), x rank-1 [n], W rank-2 [n x m].
Tensor vecmat(const Tensor& x, const Tensor& w);
Tensor vecmat(const Tensor& x, const Tensor& w, const Tensor& b);

// Element-wise product; shapes must match exactly.
Tensor hadamard(const Tensor& a, const Tensor& b);

// Element-wise tanh.
Tensor tanh_map(const Tensor& x);

// out[k] = sum_j a[j] * b[(k - j) mod d]. Direct mode is the definitional
// O(d^2) evaluation; Frequency mode multiplies DFTs (radix-2 for powers of
// two, Bluestein otherwise) and agrees with Direct to ~1e-12 relative.
Tensor circular_convolve(const Tensor& a, const Tensor& b, ConvMode mode);

// Tensor of zero-mean Gaussians with the given standard deviation.
Tensor gaussian_tensor(Rng& rng, std::vector<std::size_t> shape, double sigma);

// Small conveniences used throughout the library and tests.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double dot(const Tensor& a, const Tensor& b);
Tensor outer(const Tensor& a, const Tensor& b);  // rank-1 x rank-1 -> rank-2

}  // namespace fusionbench
