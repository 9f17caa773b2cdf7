#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "got/coupling.hpp"
#include "got/dynamic_ot.hpp"

namespace got {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Linear form in the unknowns plus a constant from the fixed endpoint levels.
struct Affine {
    std::vector<std::pair<std::size_t, double>> terms;
    double constant = 0.0;
    std::vector<std::pair<std::size_t, double>> final_level;  // d constant / d rho_T(cell)

    Affine& add(const Affine& o, double s) {
        for (auto [i, v] : o.terms) terms.emplace_back(i, s * v);
        constant += s * o.constant;
        for (auto [i, v] : o.final_level) final_level.emplace_back(i, s * v);
        return *this;
    }
};

// Projection onto {(a, b) : b <= -(p - 1) (|a| / p)^q}, the domain of the conjugate of h.
void project_dual(double& a, double& b, double p) {
    if (p == 1.0) {
        a = std::clamp(a, -1.0, 1.0);
        b = std::min(b, 0.0);
        return;
    }
    const double q = p / (p - 1.0);
    auto phi = [&](double t) { return (p - 1.0) * std::pow(t / p, q); };
    auto dphi = [&](double t) { return std::pow(t / p, q - 1.0); };
    const double t0 = std::abs(a);
    if (b <= -phi(t0)) return;
    double lo = b < 0.0 ? p * std::pow(-b / (p - 1.0), 1.0 / q) : 0.0;
    double hi = t0;
    lo = std::min(lo, hi);
    double t;
    if (p == 2.0) {
        // t^3 + (8 + 4b) t - 8 t0 = 0 has a single real root when the linear coefficient is nonnegative.
        const double P = 8.0 + 4.0 * b;
        const double Q = -8.0 * t0;
        if (P >= 0.0) {
            const double disc = std::sqrt(0.25 * Q * Q + P * P * P / 27.0);
            t = std::cbrt(-0.5 * Q + disc) + std::cbrt(-0.5 * Q - disc);
            t = std::clamp(t, lo, hi);
            a = std::copysign(t, a);
            b = -phi(t);
            return;
        }
    }
    auto f = [&](double s) { return s - t0 + (b + phi(s)) * dphi(s); };
    t = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double ft = f(t);
        if (ft > 0.0) hi = t; else lo = t;
        if (hi - lo <= 1e-15 * std::max(1.0, t0)) break;
        const double d2 = (q - 1.0) / p * std::pow(t / p, q - 2.0);
        const double df = 1.0 + dphi(t) * dphi(t) + (b + phi(t)) * d2;
        double next = t - ft / df;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-16 * std::max(1.0, t0)) {
            t = next;
            break;
        }
        t = next;
    }
    a = std::copysign(t, a);
    b = -phi(t);
}

class ActionProblem {
public:
    ActionProblem(const DynamicGrid& grid, const GraphState& from, const GraphState& to, const ActionSpec& spec,
                  int steps)
        : grid_(grid), from_(from), to_(to), spec_(spec), T_(static_cast<std::size_t>(steps)) {
        C_ = grid.cell_count();
        F_ = grid.face_count();
        V_ = grid.node_count();
        reservoir_ = spec.variant != FlowVariant::kirchhoff;
        n_rho_ = (T_ - 1) * C_;
        n_flux_ = T_ * F_;
        n_gamma_ = reservoir_ ? (T_ - 1) * V_ : 0;
        assemble();
    }

    std::size_t unknowns() const { return n_rho_ + n_flux_ + n_gamma_; }
    std::size_t pairs() const { return pair_count_; }

    const SpMat& K() const { return K_; }
    const Vec& offset() const { return c_; }
    const SpMat& A() const { return A_; }
    const Vec& rhs() const { return b_; }
    const SpMat& offset_sensitivity() const { return c_end_; }
    const SpMat& rhs_sensitivity() const { return b_end_; }

    DynamicField field(const Vec& z) const {
        DynamicField f;
        f.levels.resize(T_ + 1, GraphState::zero(grid_));
        f.levels.front() = from_;
        f.levels.back() = to_;
        for (std::size_t k = 1; k < T_; ++k) {
            for (std::size_t c = 0; c < C_; ++c) f.levels[k].rho[c] = z[static_cast<Eigen::Index>(rho_var(k, c))];
            if (reservoir_)
                for (std::size_t v = 0; v < V_; ++v)
                    f.levels[k].gamma[v] = z[static_cast<Eigen::Index>(gamma_var(k, v))];
        }
        f.flux.assign(T_, std::vector<double>(F_, 0.0));
        for (std::size_t k = 0; k < T_; ++k)
            for (std::size_t i = 0; i < F_; ++i) f.flux[k][i] = z[static_cast<Eigen::Index>(flux_var(k, i))];
        return f;
    }

private:
    std::size_t rho_var(std::size_t k, std::size_t c) const { return (k - 1) * C_ + c; }
    std::size_t flux_var(std::size_t k, std::size_t f) const { return n_rho_ + k * F_ + f; }
    std::size_t gamma_var(std::size_t k, std::size_t v) const { return n_rho_ + n_flux_ + (k - 1) * V_ + v; }

    Affine rho(std::size_t k, std::size_t c) const {
        Affine a;
        if (k == 0) {
            a.constant = from_.rho[c];
        } else if (k == T_) {
            a.constant = to_.rho[c];
            a.final_level.emplace_back(c, 1.0);
        } else {
            a.terms.emplace_back(rho_var(k, c), 1.0);
        }
        return a;
    }
    Affine gamma(std::size_t k, std::size_t v) const {
        Affine a;
        if (k == 0) a.constant = from_.gamma[v];
        else if (k == T_) a.constant = to_.gamma[v];
        else a.terms.emplace_back(gamma_var(k, v), 1.0);
        return a;
    }
    Affine flux(std::size_t k, std::size_t f) const {
        Affine a;
        a.terms.emplace_back(flux_var(k, f), 1.0);
        return a;
    }

    void add_row(const Affine& form) {
        for (auto [i, v] : form.terms) a_trip_.emplace_back(static_cast<int>(rows_), static_cast<int>(i), v);
        b_list_.push_back(-form.constant);
        for (auto [c, v] : form.final_level) b_end_trip_.emplace_back(static_cast<int>(rows_), static_cast<int>(c), -v);
        ++rows_;
    }

    void add_pair(const Affine& flow, const Affine& density, double weight) {
        const Affine* parts[2] = {&flow, &density};
        for (int s = 0; s < 2; ++s) {
            const int row = static_cast<int>(2 * pair_count_ + static_cast<std::size_t>(s));
            for (auto [i, v] : parts[s]->terms) k_trip_.emplace_back(row, static_cast<int>(i), weight * v);
            c_list_.push_back(weight * parts[s]->constant);
            for (auto [c, v] : parts[s]->final_level) c_end_trip_.emplace_back(row, static_cast<int>(c), weight * v);
        }
        ++pair_count_;
    }

    void assemble() {
        const double dt = 1.0 / static_cast<double>(T_);
        std::vector<std::vector<std::pair<std::size_t, double>>> ports(V_);  // (face, outward sign)
        for (std::size_t e = 0; e < grid_.edge_count(); ++e) {
            const Edge& ed = grid_.graph().edge(EdgeId{static_cast<std::uint32_t>(e)});
            ports[ed.tail.value].emplace_back(grid_.face(e, 0), -1.0);
            ports[ed.head.value].emplace_back(grid_.face(e, grid_.cells(e)), 1.0);
        }

        for (std::size_t k = 0; k < T_; ++k) {
            for (std::size_t e = 0; e < grid_.edge_count(); ++e)
                for (int i = 0; i < grid_.cells(e); ++i) {
                    const std::size_t c = grid_.cell(e, i);
                    Affine row;
                    row.add(rho(k + 1, c), 1.0 / dt).add(rho(k, c), -1.0 / dt);
                    row.add(flux(k, grid_.face(e, i + 1)), 1.0 / grid_.dx(e));
                    row.add(flux(k, grid_.face(e, i)), -1.0 / grid_.dx(e));
                    add_row(row);
                }
            for (std::size_t v = 0; v < V_; ++v) {
                // The global mass balance makes one node row redundant.
                if (k + 1 == T_ && v + 1 == V_) continue;
                Affine row;
                for (auto [f, sign] : ports[v]) row.add(flux(k, f), reservoir_ ? -sign : sign);
                if (reservoir_) row.add(gamma(k + 1, v), 1.0 / dt).add(gamma(k, v), -1.0 / dt);
                add_row(row);
            }
        }

        for (std::size_t k = 0; k < T_; ++k) {
            for (std::size_t e = 0; e < grid_.edge_count(); ++e) {
                const int n = grid_.cells(e);
                for (int i = 0; i <= n; ++i) {
                    const std::size_t lo = grid_.cell(e, std::max(i - 1, 0));
                    const std::size_t hi = grid_.cell(e, std::min(i, n - 1));
                    Affine dens;
                    dens.add(rho(k, lo), 0.25).add(rho(k, hi), 0.25).add(rho(k + 1, lo), 0.25).add(rho(k + 1, hi), 0.25);
                    const double w = (i == 0 || i == n ? 0.5 : 1.0) * grid_.dx(e) * dt;
                    add_pair(flux(k, grid_.face(e, i)), dens, w);
                }
            }
            if (!reservoir_) continue;
            for (std::size_t v = 0; v < V_; ++v) {
                Affine mass;
                mass.add(gamma(k, v), 0.5).add(gamma(k + 1, v), 0.5);
                if (spec_.variant == FlowVariant::reservoir_net) {
                    Affine net;
                    for (auto [f, sign] : ports[v]) net.add(flux(k, f), sign);
                    add_pair(net, mass, dt);
                } else {
                    for (auto [f, sign] : ports[v]) {
                        Affine in;
                        in.add(flux(k, f), sign);
                        add_pair(in, mass, dt);
                    }
                }
            }
        }

        const auto N = static_cast<Eigen::Index>(unknowns());
        A_.resize(static_cast<Eigen::Index>(rows_), N);
        A_.setFromTriplets(a_trip_.begin(), a_trip_.end());
        b_ = Eigen::Map<const Vec>(b_list_.data(), static_cast<Eigen::Index>(b_list_.size()));
        K_.resize(static_cast<Eigen::Index>(2 * pair_count_), N);
        K_.setFromTriplets(k_trip_.begin(), k_trip_.end());
        c_ = Eigen::Map<const Vec>(c_list_.data(), static_cast<Eigen::Index>(c_list_.size()));
        c_end_.resize(K_.rows(), static_cast<Eigen::Index>(C_));
        c_end_.setFromTriplets(c_end_trip_.begin(), c_end_trip_.end());
        b_end_.resize(A_.rows(), static_cast<Eigen::Index>(C_));
        b_end_.setFromTriplets(b_end_trip_.begin(), b_end_trip_.end());
    }

    const DynamicGrid& grid_;
    const GraphState& from_;
    const GraphState& to_;
    ActionSpec spec_;
    std::size_t T_, C_ = 0, F_ = 0, V_ = 0;
    bool reservoir_ = false;
    std::size_t n_rho_ = 0, n_flux_ = 0, n_gamma_ = 0;
    std::size_t rows_ = 0, pair_count_ = 0;
    Triplets a_trip_, k_trip_, c_end_trip_, b_end_trip_;
    std::vector<double> b_list_, c_list_;
    SpMat A_, K_, c_end_, b_end_;
    Vec b_, c_;
};

void check_endpoint(const DynamicGrid& grid, const GraphState& s, const ActionSpec& spec, const char* label) {
    if (s.rho.size() != grid.cell_count() || s.gamma.size() != grid.node_count())
        throw DomainError(std::string(label) + " state does not match the grid");
    for (double r : s.rho)
        if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError(std::string(label) + " state has a negative density");
    for (double g : s.gamma) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError(std::string(label) + " state has a negative node mass");
        if (spec.variant == FlowVariant::kirchhoff && g != 0.0)
            throw DomainError(std::string(label) + " state carries node mass, which the Kirchhoff variant excludes");
    }
    if (std::abs(s.mass(grid) - 1.0) > 1e-8) throw DomainError(std::string(label) + " state does not have unit mass");
}

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ActionResult minimize_action(const DynamicGrid& grid, const GraphState& from, const GraphState& to,
                             const ActionSpec& spec, const SolverOptions& options, const ActionResult* warm_start) {
    if (!(spec.p >= 1.0) || !std::isfinite(spec.p)) throw DomainError("exponent p must be finite and at least 1");
    if (options.time_steps < 1) throw DomainError("at least one time step is required");
    check_endpoint(grid, from, spec, "initial");
    check_endpoint(grid, to, spec, "final");

    const ActionProblem prob(grid, from, to, spec, options.time_steps);
    const SpMat& K = prob.K();
    const SpMat& A = prob.A();
    const SpMat Kt = K.transpose();
    const auto N = static_cast<Eigen::Index>(prob.unknowns());
    const auto P = static_cast<Eigen::Index>(prob.pairs());

    Vec tau = Vec::Ones(N);
    {
        Vec colsum = Vec::Zero(N);
        for (Eigen::Index j = 0; j < K.outerSize(); ++j)
            for (SpMat::InnerIterator it(K, j); it; ++it) colsum[it.col()] += std::abs(it.value());
        for (Eigen::Index j = 0; j < N; ++j)
            if (colsum[j] > 0.0) tau[j] = 1.0 / colsum[j];
    }
    Vec sigma = Vec::Ones(P);
    {
        Vec rowsum = Vec::Zero(K.rows());
        for (Eigen::Index j = 0; j < K.outerSize(); ++j)
            for (SpMat::InnerIterator it(K, j); it; ++it) rowsum[it.row()] += std::abs(it.value());
        for (Eigen::Index q = 0; q < P; ++q) {
            const double m = std::max(rowsum[2 * q], rowsum[2 * q + 1]);
            if (m > 0.0) sigma[q] = 1.0 / m;
        }
    }

    const Vec tau0 = tau;
    const Vec sigma0 = sigma;
    const SpMat ATAt = A * tau.asDiagonal() * A.transpose();
    Eigen::SimplicialLDLT<SpMat> chol(ATAt);
    if (chol.info() != Eigen::Success) throw SolverError("continuity constraints could not be factorized");
    const Vec& b = prob.rhs();
    // Uniform rescaling of tau leaves this projection unchanged, so the factorization survives step balancing.
    auto project = [&](const Vec& u) -> Vec {
        const Vec lambda = chol.solve(A * u - b);
        return u - tau0.cwiseProduct(A.transpose() * lambda);
    };
    double ratio = 1.0;
    int adaptations = 0;

    Vec z = Vec::Zero(N);
    Vec y = Vec::Zero(2 * P);
    if (warm_start && warm_start->primal.size() == static_cast<std::size_t>(N) &&
        warm_start->dual.size() == static_cast<std::size_t>(2 * P)) {
        z = Eigen::Map<const Vec>(warm_start->primal.data(), N);
        y = Eigen::Map<const Vec>(warm_start->dual.data(), 2 * P);
    } else {
        // Linear interpolation between the endpoints, projected onto the constraints.
        const std::size_t T = static_cast<std::size_t>(options.time_steps);
        for (std::size_t k = 1; k < T; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(T);
            for (std::size_t c = 0; c < grid.cell_count(); ++c)
                z[static_cast<Eigen::Index>((k - 1) * grid.cell_count() + c)] = (1 - s) * from.rho[c] + s * to.rho[c];
        }
    }
    z = project(z);
    {
        const Vec check = A * z - b;
        if (inf_norm(check) > 1e-8 * std::max(1.0, inf_norm(b)))
            throw SolverError("continuity constraints are inconsistent");
    }

    const Vec& c = prob.offset();
    ActionResult result;
    Vec u(2 * P);
    double action = 0.0;
    double residual = kInfinity;
    std::size_t it = 0;
    for (; it < options.max_iterations; ++it) {
        const Vec z_new = project(z - tau.cwiseProduct(Kt * y));
        const Vec z_bar = 2.0 * z_new - z;
        const Vec Kz = K * z_bar + c;
        Vec y_new(2 * P);
        for (Eigen::Index q = 0; q < P; ++q) {
            const double s = sigma[q];
            double a = y[2 * q] + s * Kz[2 * q];
            double bb = y[2 * q + 1] + s * Kz[2 * q + 1];
            const double va = a;
            const double vb = bb;
            project_dual(a, bb, spec.p);
            y_new[2 * q] = a;
            y_new[2 * q + 1] = bb;
            u[2 * q] = (va - a) / s;
            u[2 * q + 1] = (vb - bb) / s;
        }
        const bool check = (it + 1) % options.check_every == 0 || it + 1 == options.max_iterations;
        if (check) {
            action = 0.0;
            for (Eigen::Index q = 0; q < P; ++q) action += perspective_h(u[2 * q], u[2 * q + 1], spec.p);
            // Complementarity: the primal image lies in the subdifferential of the conjugate at y.
            const Vec image = K * z_new + c;
            const double primal_res = inf_norm(image - u) / std::max(1e-12, inf_norm(image));
            // Stationarity: K^T y is normal to the constraint set.
            const Vec grad = Kt * y_new;
            const Vec normal = A.transpose() * chol.solve(A * tau0.cwiseProduct(grad));
            const double dual_res = inf_norm(grad - normal) / std::max(1e-12, inf_norm(grad));
            residual = std::max(primal_res, dual_res);
            result.log.push_back({it + 1, primal_res, dual_res, action});
            if (options.monitor) options.monitor(result.log.back());
            z = z_new;
            y = y_new;
            if (residual <= options.tolerance) {
                ++it;
                break;
            }
            // Residual balancing with a bounded number of adjustments.
            if (adaptations < 40 && (primal_res > 10.0 * dual_res || dual_res > 10.0 * primal_res)) {
                ratio *= primal_res > dual_res ? 2.0 : 0.5;
                tau = tau0 / ratio;
                sigma = sigma0 * ratio;
                ++adaptations;
            }
        } else {
            z = z_new;
            y = y_new;
        }
    }
    result.iterations = it;
    result.kkt_residual = residual;
    if (!(residual <= options.tolerance)) {
        std::ostringstream msg;
        msg << "dynamic solver did not converge in " << options.max_iterations << " iterations";
        if (!result.log.empty())
            msg << " (primal residual " << result.log.back().primal_residual << ", dual residual "
                << result.log.back().dual_residual << ", action " << result.log.back().action << ")";
        throw SolverError(msg.str());
    }

    result.action = action;
    result.value = std::pow(std::max(action, 0.0), 1.0 / spec.p);
    result.field = prob.field(z);
    result.primal.assign(z.data(), z.data() + z.size());
    result.dual.assign(y.data(), y.data() + y.size());
    if (options.endpoint_gradient) {
        const Vec lambda = chol.solve(A * tau0.cwiseProduct(Kt * y));
        const Vec g = prob.offset_sensitivity().transpose() * y + prob.rhs_sensitivity().transpose() * lambda;
        result.endpoint_gradient.assign(g.data(), g.data() + g.size());
    }
    return result;
}

}  // namespace got
