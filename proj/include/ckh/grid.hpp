#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ckh {

/// Integer offset on the grid lattice, one entry per axis. Unused axes are zero.
using LatticeOffset = Eigen::Vector3i;

/// Uniform periodic grid on the cube [0, P)^d.
///
/// Samples sit at x_i = i * dx with dx = P / n on every axis. Flat storage is
/// row-major with the x-axis fastest: idx = i0 + n * (i1 + n * i2).
/// Wavevector storage follows the usual FFT order, so index j maps to the
/// integer wavenumber j for j <= n/2 and j - n otherwise, giving the lattice
/// {-n/2 + 1, ..., n/2} scaled by 2*pi/P.
class PeriodicGrid {
public:
    PeriodicGrid(int dim, int n, double period) : dim_(dim), n_(n), period_(period) {
        if (dim < 1 || dim > 3) {
            throw std::invalid_argument("grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
        }
        if (n < 4 || n % 2 != 0) {
            throw std::invalid_argument("points per axis must be even and >= 4, got " + std::to_string(n));
        }
        if (!(period > 0.0) || !std::isfinite(period)) {
            throw std::invalid_argument("period must be positive and finite");
        }
        size_ = 1;
        for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(n);
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    double period() const { return period_; }
    double dx() const { return period_ / n_; }
    double volume() const { return std::pow(period_, dim_); }
    /// dx^d, the quadrature weight of one sample.
    double cell_volume() const { return std::pow(dx(), dim_); }
    /// Number of samples n^d.
    std::size_t size() const { return size_; }
    /// Spacing of the physical wavenumber lattice, 2*pi/P.
    double wavenumber_step() const { return 2.0 * std::numbers::pi / period_; }

    /// Signed integer wavenumber for FFT-order index j.
    int wavenumber_index(int j) const { return j <= n_ / 2 ? j : j - n_; }

    /// Largest retained integer wavenumber under the 2/3 rule.
    int dealias_cutoff() const { return (n_ - 1) / 3; }

    /// Per-axis indices of a flat index; unused axes are zero.
    std::array<int, 3> unflatten(std::size_t idx) const {
        std::array<int, 3> i{0, 0, 0};
        for (int a = 0; a < dim_; ++a) {
            i[a] = static_cast<int>(idx % static_cast<std::size_t>(n_));
            idx /= static_cast<std::size_t>(n_);
        }
        return i;
    }

    std::size_t flatten(const std::array<int, 3>& i) const {
        std::size_t idx = 0;
        for (int a = dim_ - 1; a >= 0; --a) {
            idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i[a]);
        }
        return idx;
    }

    /// Integer wavevector of the mode stored at flat index idx.
    LatticeOffset wavevector_index(std::size_t idx) const {
        const auto i = unflatten(idx);
        LatticeOffset v = LatticeOffset::Zero();
        for (int a = 0; a < dim_; ++a) v[a] = wavenumber_index(i[a]);
        return v;
    }

    /// Physical wavevector (2*pi/P) * n of the mode at flat index idx.
    Eigen::Vector3d wavevector(std::size_t idx) const {
        return wavevector_index(idx).cast<double>() * wavenumber_step();
    }

    /// Physical coordinate of the sample at flat index idx.
    Eigen::Vector3d coordinate(std::size_t idx) const {
        const auto i = unflatten(idx);
        Eigen::Vector3d x = Eigen::Vector3d::Zero();
        for (int a = 0; a < dim_; ++a) x[a] = i[a] * dx();
        return x;
    }

    bool operator==(const PeriodicGrid& other) const {
        return dim_ == other.dim_ && n_ == other.n_ && period_ == other.period_;
    }
    bool operator!=(const PeriodicGrid& other) const { return !(*this == other); }

private:
    int dim_;
    int n_;
    double period_;
    std::size_t size_ = 1;
};

inline PeriodicGrid make_grid(int dim, int n, double period) { return PeriodicGrid(dim, n, period); }

}  // namespace ckh
