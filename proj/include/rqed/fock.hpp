#pragma once
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cumulants.hpp"
#include "kernels.hpp"

namespace rqed {

using Mat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

enum class DeviceKind { none, two_level, oscillator };

// Device with lowering operator L (sigma_- or b) and free frequency omega.
// Current J(x) = g(x) sqrt(hbar/2 omega) (L + L^dag); dipole D(x) = d(x) L.
struct DeviceModel {
    DeviceKind kind = DeviceKind::none;
    double omega = 1.0;
    int cutoff = 1;
    std::vector<double> current;
    cvec dipole;
    Mat rho;

    int dim() const
    {
        switch (kind) {
        case DeviceKind::none: return 1;
        case DeviceKind::two_level: return 2;
        default: return cutoff + 1;
        }
    }
    double current_scale(double hbar) const { return std::sqrt(hbar / (2.0 * omega)); }
    bool has_current() const { return kind != DeviceKind::none && !current.empty(); }
    bool has_dipole() const { return kind != DeviceKind::none && !dipole.empty(); }
};

enum class Op { A, Aplus, E, Edag, J, D, Ddag };
enum class Branch { plus, minus };

struct OrderedFactor {
    Op op;
    int site;
    int k;
    Branch branch;
};

struct Sources {
    std::optional<Signal> J_e, A_e, D_e, E_e;
};

struct SourceSample {
    cvec J, A, D, E;
};

inline bool is_field(Op op) { return op == Op::A || op == Op::Aplus || op == Op::E || op == Op::Edag; }

class FockSpace {
public:
    FockSpace(const SiteSet& sites, std::optional<ModeSet> broad, std::optional<ModeSet> narrow, int cutoff,
              DeviceModel device = {}, double hbar = 1.0, long budget = 4096)
        : sites_(sites), broad_(std::move(broad)), narrow_(std::move(narrow)), cutoff_(cutoff),
          device_(std::move(device)), hbar_(hbar)
    {
        if (cutoff_ < 1) throw config_error("photon cutoff must be at least 1");
        if (broad_) {
            if (broad_->band != Band::broad) throw config_error("broad slot holds a narrow mode set");
            broad_->validate(sites_);
        }
        if (narrow_) {
            if (narrow_->band != Band::narrow) throw config_error("narrow slot holds a broad mode set");
            narrow_->validate(sites_);
        }
        if (device_.has_current() && device_.has_dipole())
            throw config_error("a device couples either through a current or through a dipole");
        if (device_.has_current() && static_cast<int>(device_.current.size()) != sites_.size())
            throw config_error("device current table has wrong site count");
        if (device_.has_dipole() && static_cast<int>(device_.dipole.size()) != sites_.size())
            throw config_error("device dipole table has wrong site count");
        if (device_.has_dipole() && !narrow_) throw config_error("dipole coupling needs a narrow mode set");
        nb_ = broad_ ? broad_->size() : 0;
        nn_ = narrow_ ? narrow_->size() : 0;
        const int K = nb_ + nn_;
        long d = device_.dim();
        for (int q = 0; q < K; ++q) {
            d *= (cutoff_ + 1);
            if (d > budget) throw config_error("Fock dimension exceeds budget");
        }
        dim_ = static_cast<int>(d);
        frame_ = device_.has_dipole() ? device_.omega - narrow_->omega0 : device_.omega;
        build();
    }

    int dim() const { return dim_; }
    int modes() const { return nb_ + nn_; }
    double hbar() const { return hbar_; }
    const SiteSet& sites() const { return sites_; }
    const DeviceModel& device() const { return device_; }
    const std::optional<ModeSet>& broad() const { return broad_; }
    const std::optional<ModeSet>& narrow() const { return narrow_; }
    const SpMat& annihilator(int q) const { return a_[q]; }
    const SpMat& lowering() const { return L_; }
    const Eigen::VectorXd& free_energies() const { return h0_; }
    const Mat& initial_columns() const { return psi0_; }

    int occupation(int state, int q) const { return (state / stride_[q]) % (cutoff_ + 1); }
    bool below_cutoff(int state) const
    {
        for (int q = 0; q < modes(); ++q)
            if (occupation(state, q) >= cutoff_) return false;
        return true;
    }

    Mat op(Op o, int x, double t) const
    {
        Mat M = Mat::Zero(dim_, dim_);
        switch (o) {
        case Op::A:
        case Op::Aplus:
            for (int q = 0; q < nb_; ++q) {
                const double s = std::sqrt(hbar_ / (2.0 * broad_->omega[q]));
                const cplx c = s * broad_->u[q][x] * std::exp(-I * broad_->omega[q] * t);
                M += c * a_[q];
                if (o == Op::A) M += std::conj(c) * ad_[q];
            }
            break;
        case Op::E:
        case Op::Edag:
            for (int v = 0; v < nn_; ++v) {
                const double w = narrow_->omega[v];
                const cplx c = I * std::sqrt(hbar_ * w / 2.0) * narrow_->u[v][x] * std::exp(-I * (w - narrow_->omega0) * t);
                if (o == Op::E)
                    M += c * a_[nb_ + v];
                else
                    M += std::conj(c) * ad_[nb_ + v];
            }
            break;
        case Op::J:
            if (device_.has_current()) {
                const cplx c = device_.current[x] * device_.current_scale(hbar_) * std::exp(-I * frame_ * t);
                M += c * L_ + std::conj(c) * Ld_;
            }
            break;
        case Op::D:
        case Op::Ddag:
            if (device_.has_dipole()) {
                const cplx c = device_.dipole[x] * std::exp(-I * frame_ * t);
                if (o == Op::D)
                    M += c * L_;
                else
                    M += std::conj(c) * Ld_;
            }
            break;
        }
        return M;
    }

    // Interaction Hamiltonian with operator phases at t_ops and source values s.
    Mat interaction(double t_ops, const SourceSample& s) const
    {
        Mat H = Mat::Zero(dim_, dim_);
        const auto& w = sites_.weights;
        const int m = sites_.size();
        const cplx e1 = std::exp(-I * frame_ * t_ops);
        if (nb_ > 0) {
            const double cJ = device_.current_scale(hbar_);
            for (int q = 0; q < nb_; ++q) {
                const double sq = std::sqrt(hbar_ / (2.0 * broad_->omega[q]));
                const cplx e2 = std::exp(-I * broad_->omega[q] * t_ops);
                if (device_.has_current()) {
                    cplx cu = 0.0, cuc = 0.0;
                    for (int x = 0; x < m; ++x) {
                        cu += w[x] * device_.current[x] * broad_->u[q][x];
                        cuc += w[x] * device_.current[x] * std::conj(broad_->u[q][x]);
                    }
                    H -= cJ * sq * (cu * (e1 * e2 * La_[q] + std::conj(e1) * e2 * Lda_[q]) +
                                    cuc * (e1 * std::conj(e2) * Lad_[q] + std::conj(e1) * std::conj(e2) * Ldad_[q]));
                }
                if (!s.J.empty()) {
                    cplx c = 0.0, cc = 0.0;
                    for (int x = 0; x < m; ++x) {
                        c += w[x] * s.J[x] * broad_->u[q][x];
                        cc += w[x] * s.J[x] * std::conj(broad_->u[q][x]);
                    }
                    H -= sq * (c * e2 * a_[q] + cc * std::conj(e2) * ad_[q]);
                }
            }
        }
        if (!s.A.empty() && device_.has_current()) {
            cplx c = 0.0;
            for (int x = 0; x < m; ++x) c += w[x] * s.A[x] * device_.current[x];
            c *= device_.current_scale(hbar_);
            H -= c * (e1 * L_ + std::conj(e1) * Ld_);
        }
        if (nn_ > 0) {
            Mat X = Mat::Zero(dim_, dim_);
            for (int v = 0; v < nn_; ++v) {
                const double wv = narrow_->omega[v];
                const double r = std::sqrt(hbar_ * wv / 2.0);
                const cplx f = std::exp(I * (wv - narrow_->omega0) * t_ops);
                if (device_.has_dipole()) {
                    cplx cd = 0.0;
                    for (int x = 0; x < m; ++x) cd += w[x] * device_.dipole[x] * std::conj(narrow_->u[v][x]);
                    X += (-I * r * cd * e1 * f) * Lad_[nb_ + v];
                }
                if (!s.D.empty()) {
                    cplx c = 0.0;
                    for (int x = 0; x < m; ++x) c += w[x] * s.D[x] * std::conj(narrow_->u[v][x]);
                    X += (-I * r * c * f) * ad_[nb_ + v];
                }
            }
            if (device_.has_dipole() && !s.E.empty()) {
                cplx c = 0.0;
                for (int x = 0; x < m; ++x) c += w[x] * device_.dipole[x] * std::conj(s.E[x]);
                X += (c * e1) * L_;
            }
            H -= X + X.adjoint();
        }
        return H;
    }

    Mat free_hamiltonian() const { return h0_.cast<cplx>().asDiagonal(); }

private:
    void build()
    {
        const int K = nb_ + nn_;
        const int dd = device_.dim();
        stride_.assign(K, 0);
        int s = dd;
        for (int q = K - 1; q >= 0; --q) {
            stride_[q] = s;
            s *= (cutoff_ + 1);
        }
        a_.clear();
        for (int q = 0; q < K; ++q) {
            std::vector<Eigen::Triplet<cplx>> t;
            for (int i = 0; i < dim_; ++i) {
                const int nq = occupation(i, q);
                if (nq > 0) t.emplace_back(i - stride_[q], i, std::sqrt(static_cast<double>(nq)));
            }
            SpMat a(dim_, dim_);
            a.setFromTriplets(t.begin(), t.end());
            a_.push_back(a);
        }
        std::vector<Eigen::Triplet<cplx>> t;
        for (int i = 0; i < dim_; ++i) {
            const int nd = i % dd;
            if (nd > 0) t.emplace_back(i - 1, i, std::sqrt(static_cast<double>(nd)));
        }
        L_ = SpMat(dim_, dim_);
        L_.setFromTriplets(t.begin(), t.end());
        Ld_ = L_.adjoint();
        ad_.clear();
        La_.clear();
        Lad_.clear();
        Lda_.clear();
        Ldad_.clear();
        for (int q = 0; q < K; ++q) {
            ad_.push_back(a_[q].adjoint());
            La_.push_back(L_ * a_[q]);
            Lad_.push_back(L_ * ad_[q]);
            Lda_.push_back(Ld_ * a_[q]);
            Ldad_.push_back(Ld_ * ad_[q]);
        }
        h0_ = Eigen::VectorXd::Zero(dim_);
        for (int i = 0; i < dim_; ++i) {
            double e = 0.0;
            for (int q = 0; q < nb_; ++q) e += broad_->omega[q] * occupation(i, q);
            for (int v = 0; v < nn_; ++v) e += (narrow_->omega[v] - narrow_->omega0) * occupation(i, nb_ + v);
            e += frame_ * (i % dd);
            h0_(i) = hbar_ * e;
        }
        Mat rho = device_.rho;
        if (rho.size() == 0) {
            rho = Mat::Zero(dd, dd);
            rho(0, 0) = 1.0;
        }
        if (rho.rows() != dd || rho.cols() != dd) throw config_error("device initial state has wrong dimension");
        if ((rho - rho.adjoint()).norm() > 1e-12 || std::abs(rho.trace() - 1.0) > 1e-12)
            throw config_error("device initial state must be Hermitian with unit trace");
        Eigen::SelfAdjointEigenSolver<Mat> es(rho);
        std::vector<int> keep;
        for (int i = 0; i < dd; ++i) {
            if (es.eigenvalues()(i) < -1e-12) throw config_error("device initial state is not positive");
            if (es.eigenvalues()(i) > 1e-15) keep.push_back(i);
        }
        psi0_ = Mat::Zero(dim_, static_cast<int>(keep.size()));
        for (size_t c = 0; c < keep.size(); ++c) {
            const double p = std::sqrt(es.eigenvalues()(keep[c]));
            for (int j = 0; j < dd; ++j) psi0_(j, static_cast<int>(c)) = p * es.eigenvectors()(j, keep[c]);
        }
    }

    SiteSet sites_;
    std::optional<ModeSet> broad_, narrow_;
    int cutoff_;
    DeviceModel device_;
    double hbar_;
    int nb_ = 0, nn_ = 0, dim_ = 1;
    double frame_ = 0.0;
    std::vector<int> stride_;
    std::vector<SpMat> a_, ad_, La_, Lad_, Lda_, Ldad_;
    SpMat L_, Ld_;
    Mat psi0_;
    Eigen::VectorXd h0_;
};

inline Mat expm_hermitian(const Mat& H, double dt_over_hbar)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    Eigen::VectorXcd ph = (-I * dt_over_hbar * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// Indices of factors in T_C order: minus branch by increasing time, then plus branch by decreasing time.
inline std::vector<int> tc_order(const std::vector<OrderedFactor>& f)
{
    std::vector<int> minus, plus;
    for (int i = 0; i < static_cast<int>(f.size()); ++i) (f[i].branch == Branch::minus ? minus : plus).push_back(i);
    std::stable_sort(minus.begin(), minus.end(), [&](int a, int b) { return f[a].k < f[b].k; });
    std::stable_sort(plus.begin(), plus.end(), [&](int a, int b) { return f[a].k > f[b].k; });
    minus.insert(minus.end(), plus.begin(), plus.end());
    return minus;
}

enum class Picture { interaction, schrodinger };

class Propagator {
public:
    Propagator(const FockSpace& fs, const TimeGrid& g, Sources src = {}, Picture pic = Picture::interaction)
        : fs_(fs), g_(g), src_(std::move(src)), pic_(pic)
    {
        auto check = [&](const std::optional<Signal>& s, bool real) {
            if (!s) return;
            if (!(s->grid == g) || s->m() != fs.sites().size()) throw shape_error("source lives on a different grid");
            if (real)
                for (auto& v : s->values)
                    if (std::abs(v.imag()) > 1e-12 * (1.0 + std::abs(v))) throw config_error("J_e and A_e must be real");
        };
        check(src_.J_e, true);
        check(src_.A_e, true);
        check(src_.D_e, false);
        check(src_.E_e, false);
    }

    SourceSample sample(int k, double frac) const
    {
        SourceSample s;
        auto take = [&](const std::optional<Signal>& sig, cvec& out, bool real) {
            if (!sig) return;
            out.resize(sig->m());
            for (int x = 0; x < sig->m(); ++x) {
                cplx v = (1.0 - frac) * (*sig)(x, k) + frac * (*sig)(x, std::min(k + 1, g_.n - 1));
                out[x] = real ? cplx(v.real(), 0.0) : v;
            }
        };
        take(src_.J_e, s.J, true);
        take(src_.A_e, s.A, true);
        take(src_.D_e, s.D, false);
        take(src_.E_e, s.E, false);
        return s;
    }

    Mat step(int k) const
    {
        const double tm = g_.time(k) + 0.5 * g_.dt;
        const SourceSample s = sample(k, 0.5);
        if (pic_ == Picture::interaction) return expm_hermitian(fs_.interaction(tm, s), g_.dt / fs_.hbar());
        return expm_hermitian(fs_.free_hamiltonian() + fs_.interaction(0.0, s), g_.dt / fs_.hbar());
    }

    // Interaction-picture evolution U(t_k, t_0) for each requested k.
    std::vector<Mat> evolutions(const std::vector<int>& ks) const
    {
        const int kmax = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
        std::vector<Mat> out(ks.size());
        Mat U = Mat::Identity(fs_.dim(), fs_.dim());
        for (int k = 0; k <= kmax; ++k) {
            for (size_t i = 0; i < ks.size(); ++i)
                if (ks[i] == k) out[i] = to_interaction(U, k);
            if (k < kmax) U = step(k) * U;
        }
        return out;
    }

    Mat smatrix() const { return evolutions({g_.n - 1})[0]; }

    const TimeGrid& grid() const { return g_; }
    const FockSpace& space() const { return fs_; }

private:
    Mat to_interaction(const Mat& U, int k) const
    {
        if (pic_ == Picture::interaction) return U;
        const Eigen::VectorXd& h = fs_.free_energies();
        const Eigen::VectorXcd l = (I * g_.time(k) / fs_.hbar() * h.cast<cplx>()).array().exp();
        const Eigen::VectorXcd r = (-I * g_.t0 / fs_.hbar() * h.cast<cplx>()).array().exp();
        return l.asDiagonal() * U * r.asDiagonal();
    }

    const FockSpace& fs_;
    TimeGrid g_;
    Sources src_;
    Picture pic_;
};

inline cplx trace_against(const Mat& psi, const Mat& V) { return (psi.adjoint() * V).trace(); }

inline cplx tc_ordered_vev(const FockSpace& fs, const TimeGrid& g, const std::vector<OrderedFactor>& factors,
                           int max_factors = 8)
{
    if (static_cast<int>(factors.size()) > max_factors) throw config_error("factor count exceeds budget");
    auto order = tc_order(factors);
    Mat V = fs.initial_columns();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& f = factors[*it];
        V = fs.op(f.op, f.site, g.time(f.k)) * V;
    }
    return trace_against(fs.initial_columns(), V);
}

inline cplx heisenberg_correlator(const FockSpace& fs, const TimeGrid& g, const Sources& src,
                                  const std::vector<OrderedFactor>& factors, int max_factors = 8)
{
    if (static_cast<int>(factors.size()) > max_factors) throw config_error("factor count exceeds budget");
    for (auto& f : factors)
        if (f.k < 0 || f.k >= g.n) throw config_error("factor time is not on the grid");
    Propagator prop(fs, g, src);
    std::vector<int> ks;
    for (auto& f : factors) ks.push_back(f.k);
    auto U = prop.evolutions(ks);
    auto order = tc_order(factors);
    Mat V = fs.initial_columns();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& f = factors[*it];
        V = U[*it].adjoint() * (fs.op(f.op, f.site, g.time(f.k)) * (U[*it] * V));
    }
    return trace_against(fs.initial_columns(), V);
}

// <X(x, t_k)> in the Heisenberg picture for every grid sample.
inline cvec expectation_series(const FockSpace& fs, const TimeGrid& g, const Sources& src, Op op, int x)
{
    Propagator prop(fs, g, src);
    Mat V = fs.initial_columns();
    cvec out(g.n);
    for (int k = 0; k < g.n; ++k) {
        out[k] = (V.adjoint() * fs.op(op, x, g.time(k)) * V).trace();
        if (k + 1 < g.n) V = prop.step(k) * V;
    }
    return out;
}

inline Signal expectation_signal(const FockSpace& fs, const TimeGrid& g, const Sources& src, Op op)
{
    Signal out(g, fs.sites());
    for (int x = 0; x < fs.sites().size(); ++x) {
        cvec v = expectation_series(fs, g, src, op, x);
        for (int k = 0; k < g.n; ++k) out(x, k) = v[k];
    }
    return out;
}

struct SmatrixReport {
    double plus_deviation = 0.0;  // T_+ product of Heisenberg operators vs S^dag T_+[S X..]
    double minus_deviation = 0.0; // T_- product vs [T_- S^dag X..] S
    double unitarity = 0.0;       // |S S^dag - 1|
};

// Heisenberg operators from a Schroedinger-picture midpoint evolution are compared against
// the S-matrix expressions built from interaction-picture midpoint T-exponentials.
inline SmatrixReport verify_smatrix_identity(const FockSpace& fs, const TimeGrid& g, const Sources& src,
                                             const std::vector<OrderedFactor>& factors)
{
    SmatrixReport r;
    Propagator pi(fs, g, src, Picture::interaction), ps(fs, g, src, Picture::schrodinger);
    std::vector<int> ks{g.n - 1};
    for (auto& f : factors) ks.push_back(f.k);
    auto Ui = pi.evolutions(ks);
    auto Uh = ps.evolutions(ks);
    const Mat& S = Ui[0];
    const int d = fs.dim();
    r.unitarity = (S * S.adjoint() - Mat::Identity(d, d)).cwiseAbs().maxCoeff();

    auto heis = [&](size_t i) {
        const auto& f = factors[i];
        return Mat(Uh[i + 1].adjoint() * fs.op(f.op, f.site, g.time(f.k)) * Uh[i + 1]);
    };
    std::vector<int> plus, minus;
    for (int i = 0; i < static_cast<int>(factors.size()); ++i)
        (factors[i].branch == Branch::plus ? plus : minus).push_back(i);
    std::stable_sort(plus.begin(), plus.end(), [&](int a, int b) { return factors[a].k > factors[b].k; });
    std::stable_sort(minus.begin(), minus.end(), [&](int a, int b) { return factors[a].k < factors[b].k; });

    if (!plus.empty()) {
        Mat lhs = Mat::Identity(d, d);
        for (int i : plus) lhs = lhs * heis(i);
        // S^dag U(t_f,t_1) X_1 U(t_1,t_2) ... X_m U(t_m,t_0)
        Mat rhs = S.adjoint();
        Mat prev = S;
        for (int i : plus) {
            const Mat& Uk = Ui[i + 1];
            const auto& f = factors[i];
            rhs = rhs * (prev * Uk.adjoint()) * fs.op(f.op, f.site, g.time(f.k));
            prev = Uk;
        }
        rhs = rhs * prev;
        r.plus_deviation = (lhs - rhs).cwiseAbs().maxCoeff();
    }
    if (!minus.empty()) {
        Mat lhs = Mat::Identity(d, d);
        for (int i : minus) lhs = lhs * heis(i);
        // U(t_1,t_0)^dag X_1 U(t_2,t_1)^dag ... X_m U(t_f,t_m)^dag, then times S
        Mat rhs = Mat::Identity(d, d);
        Mat prev = Mat::Identity(d, d);
        for (int i : minus) {
            const Mat& Uk = Ui[i + 1];
            const auto& f = factors[i];
            rhs = rhs * (Uk * prev.adjoint()).adjoint() * fs.op(f.op, f.site, g.time(f.k));
            prev = Uk;
        }
        rhs = rhs * (S * prev.adjoint()).adjoint() * S;
        r.minus_deviation = (lhs - rhs).cwiseAbs().maxCoeff();
    }
    return r;
}

// Oracle commutator of the field against the retarded-kernel form, on the sub-cutoff block.
inline Report verify_wave_quantisation(const ModeSet& modes, const TimeGrid& g, const SiteSet& s,
                                       const KernelFamily& fam, int cutoff = 2, double hbar = 1.0,
                                       double tol = 1e-12)
{
    const bool broad = modes.band == Band::broad;
    FockSpace fs(s, broad ? std::optional<ModeSet>(modes) : std::nullopt,
                 broad ? std::nullopt : std::optional<ModeSet>(modes), cutoff, {}, hbar);
    std::vector<int> keep;
    for (int i = 0; i < fs.dim(); ++i)
        if (fs.below_cutoff(i)) keep.push_back(i);
    double dev = 0.0;
    const int stride = std::max(1, g.n / 16);
    for (int x = 0; x < s.size(); ++x)
        for (int xp = 0; xp < s.size(); ++xp)
            for (int k = 0; k < g.n; k += stride)
                for (int kp = 0; kp < g.n; kp += stride) {
                    const double t = g.time(k), tp = g.time(kp);
                    Mat C;
                    cplx expect;
                    if (broad) {
                        Mat A1 = fs.op(Op::A, x, t), A2 = fs.op(Op::A, xp, tp);
                        C = A1 * A2 - A2 * A1;
                        expect = -I * hbar * (fam.retarded(x, xp, k - kp) - fam.retarded(xp, x, kp - k));
                    } else {
                        Mat E1 = fs.op(Op::E, x, t), E2 = fs.op(Op::Edag, xp, tp);
                        C = E1 * E2 - E2 * E1;
                        expect = -I * hbar * (fam.retarded(x, xp, k - kp) - std::conj(fam.retarded(xp, x, kp - k)));
                    }
                    for (int i : keep)
                        for (int j : keep) dev = std::max(dev, std::abs(C(i, j) - (i == j ? expect : cplx(0.0))));
                }
    Report r;
    r.add(broad ? "field commutator vs retarded kernel" : "envelope commutator vs retarded kernel", dev, tol);
    return r;
}

// Finite-difference Kubo response of <A> to a c-number current, no device.
inline Signal linear_response_probe(const ModeSet& modes, const Signal& source, double eps, int cutoff = 3,
                                    double hbar = 1.0)
{
    FockSpace fs(source.sites, modes, std::nullopt, cutoff, {}, hbar);
    Sources src;
    src.J_e = eps * source;
    Signal r = expectation_signal(fs, source.grid, src, Op::A);
    return (1.0 / eps) * r;
}

// Q^{(1,1)}(p|q) = (i/hbar) theta(t_p - t_q) Tr rho [J(p), J(q)] for the isolated device.
inline CumulantSet extract_bare_cumulants(const DeviceModel& dev, const PointSet& P, double hbar = 1.0)
{
    CumulantSet Q;
    Q.points = P;
    Q.kind = CumulantKind::bare;
    if (dev.kind == DeviceKind::none || !dev.has_current()) return Q;
    FockSpace fs(P.sites, std::nullopt, std::nullopt, 1, dev, hbar);
    const Mat& psi = fs.initial_columns();
    std::vector<Mat> J;
    for (int p = 0; p < P.size(); ++p) J.push_back(fs.op(Op::J, P.site[p], P.time(p)));
    cvec& blk = Q.block(1, 1);
    for (int p = 0; p < P.size(); ++p)
        for (int q = 0; q < P.size(); ++q) {
            const double dt = P.time(p) - P.time(q);
            const double th = dt > 0 ? 1.0 : (dt < 0 ? 0.0 : 0.5);
            if (th == 0.0) continue;
            blk[Q.flat({p, q})] = (I / hbar) * th * trace_against(psi, J[p] * J[q] * psi - J[q] * J[p] * psi);
        }
    return Q;
}

// Central-difference response of the isolated device current to a weak drive a_e.
inline Signal device_current_response(const DeviceModel& dev, const Signal& a_e, double eps, double hbar = 1.0)
{
    FockSpace fs(a_e.sites, std::nullopt, std::nullopt, 1, dev, hbar);
    Sources sp, sm;
    sp.A_e = eps * a_e;
    sm.A_e = (-eps) * a_e;
    Signal up = expectation_signal(fs, a_e.grid, sp, Op::J);
    Signal dn = expectation_signal(fs, a_e.grid, sm, Op::J);
    return (0.5 / eps) * (up - dn);
}

} // namespace rqed
