#pragma once

#include "ckh/field.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace ckh {

namespace detail {

/// Per-thread FFT engine with scratch lines. Eigen's FFT caches plans per
/// length, so one instance per thread keeps transforms reentrant.
template <class Scalar>
struct FftEngine {
    using Complex = std::complex<Scalar>;
    Eigen::FFT<Scalar> fft;
    std::vector<Complex> line_in;
    std::vector<Complex> line_out;

    FftEngine() { fft.SetFlag(Eigen::FFT<Scalar>::Unscaled); }

    static FftEngine& local() {
        thread_local FftEngine engine;
        return engine;
    }

    /// Unnormalized multi-axis transform of one contiguous component in place.
    void transform(Complex* data, const PeriodicGrid& g, bool forward) {
        const std::size_t n = static_cast<std::size_t>(g.n());
        const std::size_t total = g.size();
        line_in.resize(n);
        line_out.resize(n);
        std::size_t stride = 1;
        for (int axis = 0; axis < g.dim(); ++axis) {
            const std::size_t block = stride * n;
            for (std::size_t outer = 0; outer < total; outer += block) {
                for (std::size_t inner = 0; inner < stride; ++inner) {
                    Complex* base = data + outer + inner;
                    for (std::size_t j = 0; j < n; ++j) line_in[j] = base[j * stride];
                    if (forward) {
                        fft.fwd(line_out.data(), line_in.data(), static_cast<Eigen::Index>(n));
                    } else {
                        fft.inv(line_out.data(), line_in.data(), static_cast<Eigen::Index>(n));
                    }
                    for (std::size_t j = 0; j < n; ++j) base[j * stride] = line_out[j];
                }
            }
            stride = block;
        }
    }
};

}  // namespace detail

/// Forward transform w_hat(k) = (1/n^d) sum_x w(x) exp(-i k.x), the discrete
/// form of (1/|T_P|) * integral over the torus. With this scaling
/// sum_k |w_hat|^2 equals the per-volume mean of |w|^2.
template <class Scalar>
SpectralField<Scalar> dft_forward(const Field<Scalar>& f) {
    if (!f.all_finite()) throw std::invalid_argument("dft_forward: non-finite input value");
    const PeriodicGrid& g = f.grid();
    auto& engine = detail::FftEngine<Scalar>::local();
    SpectralField<Scalar> out(g, f.values().template cast<std::complex<Scalar>>().eval());
    const Scalar scale = Scalar(1) / static_cast<Scalar>(g.size());
    for (int c = 0; c < f.components(); ++c) {
        engine.transform(out.coefficients().col(c).data(), g, true);
    }
    out.coefficients() *= scale;
    return out;
}

/// Inverse transform w(x) = sum_k w_hat(k) exp(i k.x), imaginary part dropped
/// without checking. Used on internal paths that are Hermitian by construction.
template <class Scalar>
Field<Scalar> dft_inverse_unchecked(const SpectralField<Scalar>& s) {
    auto& engine = detail::FftEngine<Scalar>::local();
    auto work = s.coefficients();
    for (int c = 0; c < s.components(); ++c) engine.transform(work.col(c).data(), s.grid(), false);
    return Field<Scalar>(s.grid(), work.real().eval());
}

/// Inverse transform; rejects coefficients whose synthesized field has an
/// imaginary residual above 1e-10 of the field magnitude.
template <class Scalar>
Field<Scalar> dft_inverse(const SpectralField<Scalar>& s) {
    if (!s.coefficients().allFinite()) throw std::invalid_argument("dft_inverse: non-finite coefficient");
    auto& engine = detail::FftEngine<Scalar>::local();
    auto work = s.coefficients();
    for (int c = 0; c < s.components(); ++c) engine.transform(work.col(c).data(), s.grid(), false);
    const Scalar imag = work.imag().abs().maxCoeff();
    const Scalar magnitude = work.abs().maxCoeff();
    if (imag > Scalar(1e-10) * std::max(magnitude, Scalar(1e-300)) && imag > Scalar(0)) {
        throw std::invalid_argument("dft_inverse: coefficients are not Hermitian-symmetric");
    }
    return Field<Scalar>(s.grid(), work.real().eval());
}

/// Largest |w_hat(k) - conj(w_hat(-k))| over modes and components.
template <class Scalar>
Scalar hermitian_defect(const SpectralField<Scalar>& s) {
    const PeriodicGrid& g = s.grid();
    const int n = g.n();
    Scalar worst = 0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        auto i = g.unflatten(idx);
        for (int a = 0; a < g.dim(); ++a) i[a] = (n - i[a]) % n;
        const auto mirror = static_cast<Eigen::Index>(g.flatten(i));
        for (int c = 0; c < s.components(); ++c) {
            worst = std::max(worst, std::abs(s(static_cast<Eigen::Index>(idx), c) - std::conj(s(mirror, c))));
        }
    }
    return worst;
}

/// Spectral derivative along `axis` (multiplication by i k_axis). The Nyquist
/// wavenumber is zeroed so that odd derivatives of real fields stay real.
template <class Scalar>
SpectralField<Scalar> spectral_derivative(const SpectralField<Scalar>& s, int axis) {
    const PeriodicGrid& g = s.grid();
    SpectralField<Scalar> out(g, s.components());
    const Scalar step = static_cast<Scalar>(g.wavenumber_step());
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const int j = g.unflatten(idx)[axis];
        const int kn = g.wavenumber_index(j);
        const std::complex<Scalar> factor =
            (2 * j == g.n()) ? std::complex<Scalar>(0) : std::complex<Scalar>(0, step * static_cast<Scalar>(kn));
        out.coefficients().row(static_cast<Eigen::Index>(idx)) =
            s.coefficients().row(static_cast<Eigen::Index>(idx)) * factor;
    }
    return out;
}

/// 0/1 weights of the 2/3-rule mask: modes with any |n_a| above the cutoff are dropped.
inline Eigen::ArrayXd dealias_mask(const PeriodicGrid& g) {
    Eigen::ArrayXd mask(static_cast<Eigen::Index>(g.size()));
    const int cut = g.dealias_cutoff();
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const auto kn = g.wavevector_index(idx);
        mask[static_cast<Eigen::Index>(idx)] = (kn.cwiseAbs().maxCoeff() <= cut) ? 1.0 : 0.0;
    }
    return mask;
}

template <class Scalar>
void apply_mask(SpectralField<Scalar>& s, const Eigen::ArrayXd& mask) {
    for (int c = 0; c < s.components(); ++c) s.coefficients().col(c) *= mask.cast<std::complex<Scalar>>();
}

/// Gradient of every component of a real field, spectrally. Result component
/// c * d + b holds d f_c / d x_b.
template <class Scalar>
Field<Scalar> gradient(const Field<Scalar>& f) {
    const PeriodicGrid& g = f.grid();
    const int d = g.dim();
    const auto hat = dft_forward(f);
    Field<Scalar> out(g, f.components() * d);
    for (int b = 0; b < d; ++b) {
        const auto deriv = dft_inverse_unchecked(spectral_derivative(hat, b));
        for (int c = 0; c < f.components(); ++c) out.component(c * d + b) = deriv.component(c);
    }
    return out;
}

/// Divergence of a d-component vector field, spectrally.
template <class Scalar>
Field<Scalar> divergence(const Field<Scalar>& v) {
    const PeriodicGrid& g = v.grid();
    if (v.components() != g.dim()) throw std::invalid_argument("divergence needs a d-component field");
    const auto hat = dft_forward(v);
    SpectralField<Scalar> acc(g, 1);
    for (int b = 0; b < g.dim(); ++b) {
        SpectralField<Scalar> comp(g, hat.coefficients().col(b).eval());
        acc.coefficients() += spectral_derivative(comp, b).coefficients();
    }
    return dft_inverse_unchecked(acc);
}

}  // namespace ckh
