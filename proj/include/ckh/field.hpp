#pragma once

#include "ckh/grid.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace ckh {

/// Real samples of a scalar (one component) or vector field on a PeriodicGrid.
///
/// Values are stored as an array with one row per grid point and one column
/// per component, so each component is contiguous in the flat grid order.
template <class Scalar>
class Field {
public:
    using Values = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Field(const PeriodicGrid& grid, int components)
        : grid_(grid), values_(Values::Zero(static_cast<Eigen::Index>(grid.size()), components)) {
        if (components < 1) throw std::invalid_argument("field needs at least one component");
    }

    Field(const PeriodicGrid& grid, Values values) : grid_(grid), values_(std::move(values)) {
        if (values_.rows() != static_cast<Eigen::Index>(grid.size()) || values_.cols() < 1) {
            throw std::invalid_argument("field value count does not match grid size");
        }
    }

    const PeriodicGrid& grid() const { return grid_; }
    int components() const { return static_cast<int>(values_.cols()); }
    Eigen::Index size() const { return values_.rows(); }

    const Values& values() const { return values_; }
    Values& values() { return values_; }

    auto component(int c) const { return values_.col(c); }
    auto component(int c) { return values_.col(c); }

    Scalar operator()(Eigen::Index i, int c = 0) const { return values_(i, c); }
    Scalar& operator()(Eigen::Index i, int c = 0) { return values_(i, c); }

    bool all_finite() const { return values_.allFinite(); }

    /// Pointwise Euclidean magnitude across components.
    Eigen::Array<Scalar, Eigen::Dynamic, 1> magnitude() const {
        return values_.square().rowwise().sum().sqrt();
    }

    /// Plain sum of samples times dx^d, per component.
    Eigen::Array<Scalar, 1, Eigen::Dynamic> integral() const {
        return values_.colwise().sum() * static_cast<Scalar>(grid_.cell_volume());
    }

private:
    PeriodicGrid grid_;
    Values values_;
};

/// Complex Fourier coefficients w_hat(k) in FFT storage order.
template <class Scalar>
class SpectralField {
public:
    using Complex = std::complex<Scalar>;
    using Coefficients = Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic>;

    SpectralField(const PeriodicGrid& grid, int components)
        : grid_(grid), coeffs_(Coefficients::Zero(static_cast<Eigen::Index>(grid.size()), components)) {}

    SpectralField(const PeriodicGrid& grid, Coefficients coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
        if (coeffs_.rows() != static_cast<Eigen::Index>(grid.size()) || coeffs_.cols() < 1) {
            throw std::invalid_argument("spectral coefficient count does not match grid size");
        }
    }

    const PeriodicGrid& grid() const { return grid_; }
    int components() const { return static_cast<int>(coeffs_.cols()); }

    const Coefficients& coefficients() const { return coeffs_; }
    Coefficients& coefficients() { return coeffs_; }

    Complex operator()(Eigen::Index i, int c = 0) const { return coeffs_(i, c); }
    Complex& operator()(Eigen::Index i, int c = 0) { return coeffs_(i, c); }

    /// Sum over modes and components of |w_hat|^2.
    Scalar power() const { return coeffs_.abs2().sum(); }

private:
    PeriodicGrid grid_;
    Coefficients coeffs_;
};

using RealField = Field<double>;
using ComplexSpectrum = SpectralField<double>;

enum class NormMode { full_integral, per_unit_volume };

/// Circular lattice shift: result(x) = f(x + offset * dx).
template <class Scalar>
Field<Scalar> shift_field(const Field<Scalar>& f, const LatticeOffset& offset) {
    const PeriodicGrid& g = f.grid();
    const int n = g.n();
    std::array<int, 3> s{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) s[a] = ((offset[a] % n) + n) % n;
    Field<Scalar> out(g, f.components());
    const auto size = static_cast<std::size_t>(g.size());
    for (std::size_t idx = 0; idx < size; ++idx) {
        auto i = g.unflatten(idx);
        for (int a = 0; a < g.dim(); ++a) i[a] = (i[a] + s[a]) % n;
        out.values().row(static_cast<Eigen::Index>(idx)) = f.values().row(static_cast<Eigen::Index>(g.flatten(i)));
    }
    return out;
}

/// Converts a physical displacement into a lattice offset; throws if any axis
/// is not an integer multiple of dx (relative slack 1e-9).
inline LatticeOffset lattice_offset(const PeriodicGrid& g, const Eigen::Vector3d& displacement) {
    LatticeOffset off = LatticeOffset::Zero();
    for (int a = 0; a < 3; ++a) {
        const double steps = displacement[a] / g.dx();
        const double r = std::round(steps);
        if (std::abs(steps - r) > 1e-9 * std::max(1.0, std::abs(steps))) {
            throw std::invalid_argument("shift is not a multiple of the grid spacing");
        }
        if (a >= g.dim() && r != 0.0) throw std::invalid_argument("shift along an axis the grid does not have");
        off[a] = static_cast<int>(r);
    }
    return off;
}

template <class Scalar>
Field<Scalar> shift_field(const Field<Scalar>& f, const Eigen::Vector3d& displacement) {
    return shift_field(f, lattice_offset(f.grid(), displacement));
}

/// Sum of the values in ascending order, so any permutation of the input
/// produces the same bits.
template <class Scalar>
Scalar permutation_invariant_sum(Eigen::Array<Scalar, Eigen::Dynamic, 1> v) {
    std::sort(v.data(), v.data() + v.size());
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) sum += v[i];
    return sum;
}

/// L^p norm with the pointwise Euclidean magnitude for vector fields.
template <class Scalar>
Scalar lp_norm(const Field<Scalar>& f, double p, NormMode mode = NormMode::full_integral) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm exponent must be >= 1");
    const Scalar sum = permutation_invariant_sum<Scalar>(f.magnitude().pow(static_cast<Scalar>(p)));
    Scalar integral = sum * static_cast<Scalar>(f.grid().cell_volume());
    if (mode == NormMode::per_unit_volume) integral /= static_cast<Scalar>(f.grid().volume());
    return std::pow(integral, static_cast<Scalar>(1.0 / p));
}

/// Samples fn(x) on the grid; fn returns one value per point.
template <class Scalar = double, class Fn>
Field<Scalar> sample(const PeriodicGrid& g, Fn&& fn) {
    Field<Scalar> out(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) out(static_cast<Eigen::Index>(i)) = fn(g.coordinate(i));
    return out;
}

}  // namespace ckh
