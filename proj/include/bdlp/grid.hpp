#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "bdlp/fft.hpp"
#include "bdlp/kernel.hpp"
#include "bdlp/space.hpp"

namespace bdlp {

/// Uniform periodic grid on the fundamental cell of a torus (d = 1 or 2),
/// with fields stored flat in row-major order. Forward transforms use the
/// negative-exponent convention; the inverse carries 1/N^d.
struct PeriodicGrid {
    int d = 1;
    int n = 1024;    // points per axis, power of two
    double L = 100.0;
    double h = 0.0;  // spacing L / n

    PeriodicGrid() { init(); }
    PeriodicGrid(int dim, int points, double side) : d(dim), n(points), L(side) { init(); }

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(n);
        return s;
    }

    double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= h;
        return v;
    }

    /// Signed coordinate of grid index along one axis, in [-L/2, L/2).
    double signed_coordinate(int idx) const {
        double u = idx * h;
        if (u >= 0.5 * L) u -= L;
        return u;
    }

    /// Displacement vector of flat index (minimal image).
    Vec point(std::size_t flat) const {
        Vec u{0.0, 0.0, 0.0};
        if (d == 1) {
            u[0] = signed_coordinate(static_cast<int>(flat));
        } else {
            u[0] = signed_coordinate(static_cast<int>(flat) / n);
            u[1] = signed_coordinate(static_cast<int>(flat) % n);
        }
        return u;
    }

    /// Angular frequency of mode index along one axis.
    double frequency(int k) const {
        const int kk = k <= n / 2 ? k : k - n;
        return 2.0 * std::numbers::pi * kk / L;
    }

    /// Frequency vector of flat mode index.
    Vec frequency_point(std::size_t flat) const {
        Vec p{0.0, 0.0, 0.0};
        if (d == 1) {
            p[0] = frequency(static_cast<int>(flat));
        } else {
            p[0] = frequency(static_cast<int>(flat) / n);
            p[1] = frequency(static_cast<int>(flat) % n);
        }
        return p;
    }

    void forward(std::vector<std::complex<double>>& field) const { transform(field, false); }
    void inverse(std::vector<std::complex<double>>& field) const { transform(field, true); }

    std::vector<std::complex<double>> to_complex(const std::vector<double>& real) const {
        std::vector<std::complex<double>> out(real.size());
        for (std::size_t i = 0; i < real.size(); ++i) out[i] = real[i];
        return out;
    }

    std::vector<double> to_real(const std::vector<std::complex<double>>& field) const {
        std::vector<double> out(field.size());
        for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i].real();
        return out;
    }

    /// Samples of the periodized kernel on the displacement grid.
    std::vector<double> sample_kernel(const Kernel& kernel) const {
        if (kernel.d != d) throw std::invalid_argument("sample_kernel: dimension mismatch");
        const SpaceSpec space{d, L};
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = kernel.eval_periodized(point(i), space);
        return out;
    }

    /// Analytic transform of the periodized kernel at the grid frequencies
    /// (Poisson summation makes this the exact torus Fourier coefficient,
    /// normalized so the zero mode is 1).
    std::vector<double> kernel_symbol(const Kernel& kernel) const {
        if (kernel.d != d) throw std::invalid_argument("kernel_symbol: dimension mismatch");
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = kernel.fourier(frequency_point(i));
        return out;
    }

    /// Largest deviation between the integral-normalized DFT of the sampled
    /// periodized kernel and the analytic transform at the grid frequencies:
    /// the aliasing error committed when the kernel is represented by point
    /// samples on this grid.
    double kernel_alias_deviation(const Kernel& kernel) const {
        auto samples = to_complex(sample_kernel(kernel));
        forward(samples);
        const auto symbol = kernel_symbol(kernel);
        const double hv = cell_volume();
        double worst = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i)
            worst = std::max(worst, std::abs(samples[i].real() * hv - symbol[i]));
        return worst;
    }

    /// Periodic convolution against a kernel given by its analytic symbol:
    /// (a * f)(u) = IDFT( symbol . DFT(f) ). Exact for band-limited f.
    std::vector<double> convolve(const std::vector<double>& symbol,
                                 const std::vector<double>& f) const {
        auto field = to_complex(f);
        forward(field);
        for (std::size_t i = 0; i < field.size(); ++i) field[i] *= symbol[i];
        inverse(field);
        return to_real(field);
    }

    /// h^d-weighted sum, the grid quadrature of a field over the cell.
    double integrate(const std::vector<double>& f) const {
        double acc = 0.0;
        for (double v : f) acc += v;
        return acc * cell_volume();
    }

  private:
    void init() {
        if (d < 1 || d > 2) throw std::invalid_argument("PeriodicGrid: d must be 1 or 2");
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::invalid_argument("PeriodicGrid: n must be a power of two");
        if (!(L > 0.0)) throw std::invalid_argument("PeriodicGrid: L must be positive");
        h = L / n;
    }

    void transform(std::vector<std::complex<double>>& field, bool inverse_dir) const {
        if (field.size() != size()) throw std::invalid_argument("PeriodicGrid: field size mismatch");
        if (d == 1) {
            fft_radix2(field, inverse_dir);
            return;
        }
        // rows
        std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) line[c] = field[static_cast<std::size_t>(r) * n + c];
            fft_radix2(line, inverse_dir);
            for (int c = 0; c < n; ++c) field[static_cast<std::size_t>(r) * n + c] = line[c];
        }
        // columns
        for (int c = 0; c < n; ++c) {
            for (int r = 0; r < n; ++r) line[r] = field[static_cast<std::size_t>(r) * n + c];
            fft_radix2(line, inverse_dir);
            for (int r = 0; r < n; ++r) field[static_cast<std::size_t>(r) * n + c] = line[r];
        }
    }
};

}  // namespace bdlp
