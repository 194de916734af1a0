#pragma once
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace rqed {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
inline constexpr cplx I{0.0, 1.0};

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TimeGrid {
    double t0 = 0.0;
    double dt = 1.0;
    int n = 1;

    TimeGrid() = default;
    TimeGrid(double t0_, double dt_, int n_) : t0(t0_), dt(dt_), n(n_)
    {
        if (!(dt > 0.0) || n < 2) throw config_error("TimeGrid needs dt > 0 and n >= 2");
    }
    static TimeGrid periodic(double period, int n, double t0 = 0.0) { return {t0, period / n, n}; }

    double period() const { return dt * n; }
    double time(int k) const { return t0 + k * dt; }
    int wrap(int k) const { return ((k % n) + n) % n; }
    // Lag samples k < n/2 are non-negative, the rest negative; k = n/2 is the wrap point.
    double lag(int k) const
    {
        k = wrap(k);
        return (2 * k < n ? k : k - n) * dt;
    }
    // Step function on the lag axis with half weight at zero lag and at the wrap point.
    double theta(int k) const
    {
        k = wrap(k);
        if (k == 0 || 2 * k == n) return 0.5;
        return 2 * k < n ? 1.0 : 0.0;
    }
    double omega(int bin) const { return 2.0 * std::numbers::pi * bin / period(); }
    bool operator==(const TimeGrid& o) const { return t0 == o.t0 && dt == o.dt && n == o.n; }
};

struct SiteSet {
    std::vector<std::string> labels;
    std::vector<double> weights;

    SiteSet() : labels{"x0"}, weights{1.0} {}
    SiteSet(std::vector<std::string> l, std::vector<double> w) : labels(std::move(l)), weights(std::move(w))
    {
        if (labels.size() != weights.size() || weights.empty())
            throw config_error("SiteSet labels and weights must be non-empty and equal length");
        for (double x : weights)
            if (!(x > 0.0)) throw config_error("site weights must be positive");
    }
    static SiteSet uniform(int m, double w = 1.0)
    {
        std::vector<std::string> l;
        for (int i = 0; i < m; ++i) l.push_back("x" + std::to_string(i));
        return {l, std::vector<double>(m, w)};
    }
    int size() const { return static_cast<int>(weights.size()); }
    bool operator==(const SiteSet& o) const { return weights == o.weights; }
};

struct Signal {
    TimeGrid grid;
    SiteSet sites;
    cvec values;

    Signal() = default;
    Signal(const TimeGrid& g, const SiteSet& s) : grid(g), sites(s), values(static_cast<size_t>(g.n) * s.size()) {}
    Signal(const TimeGrid& g, const SiteSet& s, cvec v) : grid(g), sites(s), values(std::move(v))
    {
        if (values.size() != static_cast<size_t>(g.n) * s.size()) throw shape_error("Signal values have wrong size");
    }

    int m() const { return sites.size(); }
    int n() const { return grid.n; }
    cplx& operator()(int x, int k) { return values[static_cast<size_t>(x) * grid.n + k]; }
    const cplx& operator()(int x, int k) const { return values[static_cast<size_t>(x) * grid.n + k]; }
    cplx* row(int x) { return values.data() + static_cast<size_t>(x) * grid.n; }
    const cplx* row(int x) const { return values.data() + static_cast<size_t>(x) * grid.n; }

    template <class F>
    static Signal from_function(const TimeGrid& g, const SiteSet& s, F&& f)
    {
        Signal out(g, s);
        for (int x = 0; x < s.size(); ++x)
            for (int k = 0; k < g.n; ++k) out(x, k) = f(x, g.time(k));
        return out;
    }
    static Signal spike(const TimeGrid& g, const SiteSet& s, int x, int k, cplx amp = 1.0)
    {
        Signal out(g, s);
        out(x, g.wrap(k)) = amp;
        return out;
    }
};

struct StationaryKernel {
    TimeGrid grid;
    SiteSet sites;
    cvec values;

    StationaryKernel() = default;
    StationaryKernel(const TimeGrid& g, const SiteSet& s)
        : grid(g), sites(s), values(static_cast<size_t>(g.n) * s.size() * s.size())
    {
    }
    int m() const { return sites.size(); }
    int n() const { return grid.n; }
    size_t index(int x, int xp, int k) const
    {
        return (static_cast<size_t>(x) * sites.size() + xp) * grid.n + grid.wrap(k);
    }
    cplx& operator()(int x, int xp, int k) { return values[index(x, xp, k)]; }
    const cplx& operator()(int x, int xp, int k) const { return values[index(x, xp, k)]; }
    cplx* row(int x, int xp) { return values.data() + index(x, xp, 0); }
    const cplx* row(int x, int xp) const { return values.data() + index(x, xp, 0); }
};

inline void require_same(const TimeGrid& a, const TimeGrid& b, const SiteSet& sa, const SiteSet& sb)
{
    if (!(a == b) || !(sa == sb)) throw shape_error("operands live on different grids or site sets");
}

namespace detail {
inline Eigen::FFT<double>& fft_engine()
{
    thread_local Eigen::FFT<double> f;
    return f;
}
inline cvec fft(const cplx* in, int n)
{
    cvec src(in, in + n), dst;
    fft_engine().fwd(dst, src);
    return dst;
}
inline cvec ifft(const cvec& in)
{
    cvec dst;
    fft_engine().inv(dst, in);
    return dst;
}
} // namespace detail

// Signal arithmetic
inline Signal operator+(Signal a, const Signal& b)
{
    require_same(a.grid, b.grid, a.sites, b.sites);
    for (size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
    return a;
}
inline Signal operator-(Signal a, const Signal& b)
{
    require_same(a.grid, b.grid, a.sites, b.sites);
    for (size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
    return a;
}
inline Signal operator*(cplx c, Signal a)
{
    for (auto& v : a.values) v *= c;
    return a;
}
inline Signal operator*(Signal a, cplx c) { return c * std::move(a); }
inline Signal conj(Signal a)
{
    for (auto& v : a.values) v = std::conj(v);
    return a;
}
// Pointwise product with a time-dependent factor, e.g. a carrier phase.
template <class F>
inline Signal modulate(Signal a, F&& f)
{
    for (int x = 0; x < a.m(); ++x)
        for (int k = 0; k < a.n(); ++k) a(x, k) *= f(a.grid.time(k));
    return a;
}
inline double max_abs(const cvec& v)
{
    double m = 0.0;
    for (auto& z : v) m = std::max(m, std::abs(z));
    return m;
}
inline double max_abs_diff(const cvec& a, const cvec& b)
{
    if (a.size() != b.size()) throw shape_error("size mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}
inline double max_abs_diff(const Signal& a, const Signal& b) { return max_abs_diff(a.values, b.values); }
inline double max_abs_diff(const StationaryKernel& a, const StationaryKernel& b) { return max_abs_diff(a.values, b.values); }

// Kernel arithmetic
inline StationaryKernel operator+(StationaryKernel a, const StationaryKernel& b)
{
    require_same(a.grid, b.grid, a.sites, b.sites);
    for (size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
    return a;
}
inline StationaryKernel operator-(StationaryKernel a, const StationaryKernel& b)
{
    require_same(a.grid, b.grid, a.sites, b.sites);
    for (size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
    return a;
}
inline StationaryKernel operator*(cplx c, StationaryKernel a)
{
    for (auto& v : a.values) v *= c;
    return a;
}
inline StationaryKernel conj(StationaryKernel a)
{
    for (auto& v : a.values) v = std::conj(v);
    return a;
}
// K(x,x',tau) -> K(x',x,-tau)
inline StationaryKernel reflect(const StationaryKernel& K)
{
    StationaryKernel R(K.grid, K.sites);
    for (int x = 0; x < K.m(); ++x)
        for (int xp = 0; xp < K.m(); ++xp)
            for (int k = 0; k < K.n(); ++k) R(x, xp, k) = K(xp, x, -k);
    return R;
}
inline StationaryKernel theta_gate(StationaryKernel K, bool forward = true)
{
    for (int x = 0; x < K.m(); ++x)
        for (int xp = 0; xp < K.m(); ++xp)
            for (int k = 0; k < K.n(); ++k) K(x, xp, k) *= K.grid.theta(forward ? k : -k);
    return K;
}
template <class F>
inline StationaryKernel modulate_lag(StationaryKernel K, F&& f)
{
    for (int x = 0; x < K.m(); ++x)
        for (int xp = 0; xp < K.m(); ++xp)
            for (int k = 0; k < K.n(); ++k) K(x, xp, k) *= f(K.grid.lag(k));
    return K;
}

inline StationaryKernel identity_kernel(const TimeGrid& g, const SiteSet& s)
{
    StationaryKernel K(g, s);
    for (int x = 0; x < s.size(); ++x) K(x, x, 0) = 1.0 / (s.weights[x] * g.dt);
    return K;
}

inline cplx contract_scalar(const Signal& f, const Signal& g)
{
    require_same(f.grid, g.grid, f.sites, g.sites);
    cplx acc = 0.0;
    for (int x = 0; x < f.m(); ++x) {
        cplx row = 0.0;
        for (int k = 0; k < f.n(); ++k) row += f(x, k) * g(x, k);
        acc += f.sites.weights[x] * row;
    }
    return acc * f.grid.dt;
}

inline Signal apply_kernel_left(const StationaryKernel& K, const Signal& g)
{
    require_same(K.grid, g.grid, K.sites, g.sites);
    const int m = g.m(), n = g.n();
    std::vector<cvec> gh(m);
    for (int x = 0; x < m; ++x) gh[x] = detail::fft(g.row(x), n);
    Signal out(g.grid, g.sites);
    for (int x = 0; x < m; ++x) {
        cvec acc(n, 0.0);
        for (int xp = 0; xp < m; ++xp) {
            cvec kh = detail::fft(K.row(x, xp), n);
            const double w = g.sites.weights[xp];
            for (int j = 0; j < n; ++j) acc[j] += w * kh[j] * gh[xp][j];
        }
        cvec r = detail::ifft(acc);
        for (int k = 0; k < n; ++k) out(x, k) = r[k] * g.grid.dt;
    }
    return out;
}

inline Signal apply_kernel_right(const Signal& f, const StationaryKernel& K) { return apply_kernel_left(reflect(K), f); }

inline cplx contract_kernel(const Signal& f, const StationaryKernel& K, const Signal& g)
{
    return contract_scalar(f, apply_kernel_left(K, g));
}

} // namespace rqed
