#pragma once
#include <random>

#include "grid.hpp"

namespace rqed {

namespace detail {
// Weight of DFT bin j (forward, e^{-2 pi i jk/n}) in the frequency-positive part.
// A component e^{-i w t} with w > 0 lands in bin n - m, so the upper half is positive.
inline double positive_bin_weight(int j, int n)
{
    if (j == 0 || 2 * j == n) return 0.5;
    return 2 * j > n ? 1.0 : 0.0;
}
inline void project_positive(const cplx* in, cplx* out, int n)
{
    cvec h = fft(in, n);
    for (int j = 0; j < n; ++j) h[j] *= positive_bin_weight(j, n);
    cvec r = ifft(h);
    for (int k = 0; k < n; ++k) out[k] = r[k];
}
} // namespace detail

inline Signal positive_part(const Signal& f)
{
    Signal out(f.grid, f.sites);
    for (int x = 0; x < f.m(); ++x) detail::project_positive(f.row(x), out.row(x), f.n());
    return out;
}
inline Signal negative_part(const Signal& f) { return f - positive_part(f); }

// Split along the lag axis only.
inline StationaryKernel positive_part(const StationaryKernel& K)
{
    StationaryKernel out(K.grid, K.sites);
    for (int x = 0; x < K.m(); ++x)
        for (int xp = 0; xp < K.m(); ++xp) detail::project_positive(K.row(x, xp), out.row(x, xp), K.n());
    return out;
}
inline StationaryKernel negative_part(const StationaryKernel& K) { return K - positive_part(K); }

// fhat(w_m) = int dt e^{i w_m t} f(t), bins m in [-n/2, n/2) stored at index m mod n.
inline std::vector<cvec> fourier_image(const Signal& f)
{
    const int n = f.n();
    std::vector<cvec> out(f.m(), cvec(n));
    for (int x = 0; x < f.m(); ++x) {
        cvec F = detail::fft(f.row(x), n);
        for (int j = 0; j < n; ++j) {
            const int m = 2 * j < n ? j : j - n;
            out[x][j] = f.grid.dt * std::exp(I * f.grid.omega(m) * f.grid.t0) * F[(n - j) % n];
        }
    }
    return out;
}

// (1/T) sum_w fhat(w) ghat(-w), the discrete form of int dw/2pi f_w g_{-w}.
inline cplx frequency_pairing(const Signal& f, const Signal& g)
{
    require_same(f.grid, g.grid, f.sites, g.sites);
    auto fh = fourier_image(f), gh = fourier_image(g);
    const int n = f.n();
    cplx acc = 0.0;
    for (int x = 0; x < f.m(); ++x) {
        cplx s = 0.0;
        for (int j = 0; j < n; ++j) s += fh[x][j] * gh[x][(n - j) % n];
        acc += f.sites.weights[x] * s;
    }
    return acc / f.grid.period();
}

enum class Spectrum { full, interior };

// Seeded random test signal. Interior spectra carry no DC or Nyquist content.
inline Signal random_signal(const TimeGrid& g, const SiteSet& s, std::uint64_t seed,
                            Spectrum spec = Spectrum::interior, bool real = false, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Signal out(g, s);
    for (auto& v : out.values) v = real ? cplx(N(rng), 0.0) : cplx(N(rng), N(rng));
    if (spec == Spectrum::interior) {
        const int n = g.n;
        for (int x = 0; x < s.size(); ++x) {
            cvec h = detail::fft(out.row(x), n);
            h[0] = 0.0;
            if (n % 2 == 0) h[n / 2] = 0.0;
            cvec r = detail::ifft(h);
            for (int k = 0; k < n; ++k) out(x, k) = real ? cplx(r[k].real(), 0.0) : r[k];
        }
    }
    return scale * out;
}

} // namespace rqed
