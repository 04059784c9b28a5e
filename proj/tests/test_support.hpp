#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "fusionbench/rng.hpp"
#include "fusionbench/tensor.hpp"

namespace testsupport {

// |a - b|_inf scaled by max(1, |a|_inf, |b|_inf): relative for O(1)+ values,
// absolute near zero.
inline double rel_linf(const fusionbench::Tensor& a, const fusionbench::Tensor& b) {
    double scale = 1.0, err = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
        err = std::max(err, std::abs(a[i] - b[i]));
    }
    return err / scale;
}

inline fusionbench::Tensor gaussian_vec(fusionbench::Rng& rng, std::size_t n) {
    fusionbench::Tensor t = fusionbench::Tensor::zeros({n});
    for (double& v : t.data()) {
        v = rng.next_gaussian(1.0);
    }
    return t;
}

// Unique scratch directory under the system temp dir; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("fusionbench_" + tag + "_" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
