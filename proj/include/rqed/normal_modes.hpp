#pragma once
#include <functional>

#include <Eigen/Eigenvalues>

#include "fock.hpp"

namespace rqed {

// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order)
{
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    for (int i = 1; i < order; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<double> x(order), w(order);
    for (int i = 0; i < order; ++i) {
        x[i] = es.eigenvalues()(i);
        w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
    return {x, w};
}

using SourceFn = std::function<double(int, double)>;

// Mean-field equations of broad modes bilinearly coupled to a linear-oscillator current,
// solved exactly by diagonalising the (real-linear) equations of motion.
// State z = (alpha_1..K, conj alpha_1..K, beta, conj beta).
class GaussianSystem {
public:
    GaussianSystem(const SiteSet& sites, const ModeSet& modes, const DeviceModel& dev, double hbar = 1.0)
        : sites_(sites), modes_(modes), dev_(dev), hbar_(hbar)
    {
        if (modes.band != Band::broad) throw config_error("the Gaussian solver handles broad modes only");
        modes.validate(sites);
        has_dev_ = dev.has_current();
        if (has_dev_ && dev.kind != DeviceKind::oscillator)
            throw config_error("the Gaussian solver needs a linear-oscillator device");
        K_ = modes.size();
        N_ = 2 * K_ + (has_dev_ ? 2 : 0);
        M_ = Mat::Zero(N_, N_);
        const auto& w = sites.weights;
        for (int q = 0; q < K_; ++q) {
            M_(q, q) = -I * modes.omega[q];
            M_(K_ + q, K_ + q) = I * modes.omega[q];
        }
        if (has_dev_) {
            const int b = 2 * K_;
            const double cJ = dev.current_scale(hbar);
            M_(b, b) = -I * dev.omega;
            M_(b + 1, b + 1) = I * dev.omega;
            for (int q = 0; q < K_; ++q) {
                const double sq = scale(q);
                cplx gu = 0.0, guc = 0.0;
                for (int x = 0; x < sites.size(); ++x) {
                    gu += w[x] * dev.current[x] * modes.u[q][x];
                    guc += w[x] * dev.current[x] * std::conj(modes.u[q][x]);
                }
                // alpha_q gains (i/hbar) s_q sum w u* <J>, with <J> = g cJ (beta + beta*)
                const cplx ca = I / hbar * sq * guc * cJ;
                M_(q, b) += ca;
                M_(q, b + 1) += ca;
                M_(K_ + q, b) += std::conj(ca);
                M_(K_ + q, b + 1) += std::conj(ca);
                // beta gains (i/hbar) cJ sum w g <A>, with <A> = sum s (u alpha + u* alpha*)
                const cplx cb = I / hbar * cJ * sq;
                M_(b, q) += cb * gu;
                M_(b, K_ + q) += cb * guc;
                M_(b + 1, q) += std::conj(cb * gu);
                M_(b + 1, K_ + q) += std::conj(cb * guc);
            }
        }
        Eigen::ComplexEigenSolver<Mat> es(M_);
        lambda_ = es.eigenvalues();
        V_ = es.eigenvectors();
        Vinv_ = V_.inverse();
    }

    int size() const { return N_; }
    const Mat& generator() const { return M_; }

    Mat propagator(double tau) const
    {
        Eigen::VectorXcd e = (lambda_ * tau).array().exp();
        return V_ * e.asDiagonal() * Vinv_;
    }

    // Row vector giving <A(x)> from z.
    Eigen::RowVectorXcd field_row(int x) const
    {
        Eigen::RowVectorXcd r = Eigen::RowVectorXcd::Zero(N_);
        for (int q = 0; q < K_; ++q) {
            r(q) = scale(q) * modes_.u[q][x];
            r(K_ + q) = scale(q) * std::conj(modes_.u[q][x]);
        }
        return r;
    }
    Eigen::RowVectorXcd current_row(int x) const
    {
        Eigen::RowVectorXcd r = Eigen::RowVectorXcd::Zero(N_);
        if (!has_dev_) return r;
        const double c = dev_.current[x] * dev_.current_scale(hbar_);
        r(2 * K_) = c;
        r(2 * K_ + 1) = c;
        return r;
    }
    // dz/dt per unit J_e weight at site x (source delta in the w dt measure).
    Eigen::VectorXcd current_source_column(int x) const
    {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(N_);
        for (int q = 0; q < K_; ++q) {
            c(q) = I / hbar_ * scale(q) * std::conj(modes_.u[q][x]);
            c(K_ + q) = std::conj(c(q));
        }
        return c;
    }
    Eigen::VectorXcd field_source_column(int x) const
    {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(N_);
        if (!has_dev_) return c;
        c(2 * K_) = I / hbar_ * dev_.current_scale(hbar_) * dev_.current[x];
        c(2 * K_ + 1) = std::conj(c(2 * K_));
        return c;
    }

    // Exact dressed Kubo response of <J(x,t)> to A_e(x',t'), tau = t - t'.
    cplx dressed_q11(int x, int xp, double tau) const
    {
        if (tau < 0) return 0.0;
        const cplx v = current_row(x) * propagator(tau) * field_source_column(xp);
        return tau == 0 ? 0.5 * v : v;
    }
    // Exact retarded response of <A(x,t)> to J_e(x',t'), including the device.
    cplx dressed_field_response(int x, int xp, double tau) const
    {
        if (tau < 0) return 0.0;
        const cplx v = field_row(x) * propagator(tau) * current_source_column(xp);
        return tau == 0 ? 0.5 * v : v;
    }

    struct Means {
        Signal field;
        Signal current;
    };

    // Means on the grid samples, starting from the ground state at g.t0. Sources are analytic
    // functions of (site, time), integrated with composite Gauss-Legendre quadrature.
    Means mean_field(const TimeGrid& g, const SourceFn& J_e, const SourceFn& A_e, int sub = 4, int order = 10) const
    {
        auto [xs, ws] = gauss_legendre(order);
        Means out{Signal(g, sites_), Signal(g, sites_)};
        Eigen::VectorXcd z = Eigen::VectorXcd::Zero(N_);
        const Mat step = propagator(g.dt);
        const double h = g.dt / sub;
        for (int k = 0; k < g.n; ++k) {
            for (int x = 0; x < sites_.size(); ++x) {
                out.field(x, k) = field_row(x) * z;
                out.current(x, k) = current_row(x) * z;
            }
            if (k + 1 == g.n) break;
            const double t1 = g.time(k + 1);
            Eigen::VectorXcd f_int = Eigen::VectorXcd::Zero(N_);
            for (int s = 0; s < sub; ++s) {
                const double a = g.time(k) + s * h;
                for (int i = 0; i < order; ++i) {
                    const double t = a + 0.5 * h * (xs[i] + 1.0);
                    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(N_);
                    for (int x = 0; x < sites_.size(); ++x) {
                        const double wx = sites_.weights[x];
                        if (J_e) f += wx * J_e(x, t) * current_source_column(x);
                        if (A_e) f += wx * A_e(x, t) * field_source_column(x);
                    }
                    f_int += 0.5 * h * ws[i] * (propagator(t1 - t) * f);
                }
            }
            z = step * z + f_int;
        }
        return out;
    }

private:
    double scale(int q) const { return std::sqrt(hbar_ / (2.0 * modes_.omega[q])); }

    SiteSet sites_;
    ModeSet modes_;
    DeviceModel dev_;
    double hbar_;
    bool has_dev_ = false;
    int K_ = 0, N_ = 0;
    Mat M_, V_, Vinv_;
    Eigen::VectorXcd lambda_;
};

} // namespace rqed
