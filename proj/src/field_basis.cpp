#include "roughmckv/field_basis.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace rmkv {

namespace {

// Frobenius norm of the order-3 tensor stored as d slices of d x d.
double third_norm(const std::vector<Eigen::MatrixXd>& t) {
    double sq = 0.0;
    for (const auto& slice : t) sq += slice.squaredNorm();
    return std::sqrt(sq);
}

Eigen::MatrixXd make_probes(int dim) {
    constexpr double lo = -5.0, hi = 5.0;
    constexpr int per_axis = 41;
    if (dim == 1) {
        Eigen::MatrixXd p(per_axis, 1);
        for (int i = 0; i < per_axis; ++i)
            p(i, 0) = lo + (hi - lo) * static_cast<double>(i) / (per_axis - 1);
        return p;
    }
    if (dim == 2) {
        Eigen::MatrixXd p(per_axis * per_axis, 2);
        for (int i = 0; i < per_axis; ++i)
            for (int j = 0; j < per_axis; ++j) {
                p(i * per_axis + j, 0) = lo + (hi - lo) * static_cast<double>(i) / (per_axis - 1);
                p(i * per_axis + j, 1) = lo + (hi - lo) * static_cast<double>(j) / (per_axis - 1);
            }
        return p;
    }
    // Higher dimensions: fixed-seed Monte Carlo probes.
    std::mt19937 gen(12345);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd p(2048, dim);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (int j = 0; j < dim; ++j) p(i, j) = u(gen);
    return p;
}

}  // namespace

Atom Atom::bump(Eigen::VectorXd center, double width, Eigen::VectorXd direction) {
    Atom a;
    a.linear = Eigen::VectorXd::Zero(center.size());
    a.center = std::move(center);
    a.width = width;
    a.direction = std::move(direction);
    a.offset = 1.0;
    return a;
}

Atom Atom::affine(Eigen::VectorXd center, double width, Eigen::VectorXd direction,
                  Eigen::VectorXd linear, double offset) {
    Atom a;
    a.center = std::move(center);
    a.width = width;
    a.direction = std::move(direction);
    a.linear = std::move(linear);
    a.offset = offset;
    return a;
}

double atom_scalar(const Atom& a, const Eigen::VectorXd& x) {
    const Eigen::VectorXd q = x - a.center;
    const double L = a.width * a.width;
    const double p = a.offset + a.linear.dot(q);
    return p * std::exp(-0.5 * q.squaredNorm() / L);
}

Eigen::VectorXd atom_scalar_grad(const Atom& a, const Eigen::VectorXd& x) {
    const Eigen::VectorXd q = x - a.center;
    const double L = a.width * a.width;
    const double p = a.offset + a.linear.dot(q);
    const double g = std::exp(-0.5 * q.squaredNorm() / L);
    return g * (a.linear - (p / L) * q);
}

Eigen::MatrixXd atom_scalar_hess(const Atom& a, const Eigen::VectorXd& x) {
    const Eigen::VectorXd q = x - a.center;
    const double L = a.width * a.width;
    const double p = a.offset + a.linear.dot(q);
    const double g = std::exp(-0.5 * q.squaredNorm() / L);
    const Eigen::Index d = q.size();
    Eigen::MatrixXd h = -(a.linear * q.transpose() + q * a.linear.transpose() +
                          p * Eigen::MatrixXd::Identity(d, d)) /
                        L;
    h += (p / (L * L)) * q * q.transpose();
    return g * h;
}

std::vector<Eigen::MatrixXd> atom_scalar_third(const Atom& a, const Eigen::VectorXd& x) {
    const Eigen::VectorXd q = x - a.center;
    const double L = a.width * a.width;
    const double L2 = L * L, L3 = L2 * L;
    const double p = a.offset + a.linear.dot(q);
    const double g = std::exp(-0.5 * q.squaredNorm() / L);
    const Eigen::Index d = q.size();
    std::vector<Eigen::MatrixXd> t(d, Eigen::MatrixXd::Zero(d, d));
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                const double dij = (i == j) ? 1.0 : 0.0;
                const double dik = (i == k) ? 1.0 : 0.0;
                const double djk = (j == k) ? 1.0 : 0.0;
                double v = -(a.linear(i) * djk + a.linear(j) * dik + a.linear(k) * dij) / L;
                v += (a.linear(i) * q(j) * q(k) + a.linear(j) * q(i) * q(k) +
                      a.linear(k) * q(i) * q(j) + p * (dij * q(k) + dik * q(j) + djk * q(i))) /
                     L2;
                v -= p * q(i) * q(j) * q(k) / L3;
                t[k](i, j) = g * v;
            }
    return t;
}

FieldBasis::FieldBasis(int dim, std::vector<Atom> atoms) : dim_(dim), atoms_(std::move(atoms)) {
    if (dim_ < 1) throw std::invalid_argument("basis dimension must be positive");
    if (atoms_.empty()) throw std::invalid_argument("basis needs at least one atom");
    for (const Atom& a : atoms_) {
        if (a.center.size() != dim_ || a.direction.size() != dim_ || a.linear.size() != dim_)
            throw std::invalid_argument("atom dimensions must match the basis");
        if (!(a.width > 0.0)) throw std::invalid_argument("atom width must be positive");
    }
    probes_ = make_probes(dim_);
    const std::size_t K = atoms_.size();
    const Eigen::Index P = probes_.rows();

    atom_sup_ = Eigen::MatrixXd::Zero(K, 4);
    for (std::size_t k = 0; k < K; ++k) {
        const double vn = atoms_[k].direction.norm();
        for (Eigen::Index ip = 0; ip < P; ++ip) {
            const Eigen::VectorXd x = probes_.row(ip).transpose();
            atom_sup_(k, 0) = std::max(atom_sup_(k, 0), vn * std::abs(atom_scalar(atoms_[k], x)));
            atom_sup_(k, 1) = std::max(atom_sup_(k, 1), vn * atom_scalar_grad(atoms_[k], x).norm());
            atom_sup_(k, 2) = std::max(atom_sup_(k, 2), vn * atom_scalar_hess(atoms_[k], x).norm());
            atom_sup_(k, 3) =
                std::max(atom_sup_(k, 3), vn * third_norm(atom_scalar_third(atoms_[k], x)));
        }
    }

    // Per-pair diagonal product norms, orders 0..2.
    pair_sup_.assign(3, Eigen::MatrixXd::Zero(K, K));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < K; ++l) {
            Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(K, K);
            unit(k, l) = 1.0;
            for (int order = 0; order <= 2; ++order)
                pair_sup_[order](k, l) = pair_field_cb_scan(unit, order);
        }
}

// Diagonal two-point field and its first two derivatives at one point.
// Returns order-0 value in g0, order-1 in g1 (j, a) = d G^j / d x_a, and
// order-2 in g2 slices per j.
void FieldBasis::pair_eval(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, int order,
                           Eigen::VectorXd& g0, Eigen::MatrixXd& g1,
                           std::vector<Eigen::MatrixXd>& g2) const {
    const std::size_t K = atoms_.size();
    const Eigen::Index d = dim_;
    // Only atoms referenced by nonzero entries of m need their derivatives;
    // the constructor's unit-matrix cache scans touch two atoms at a time.
    std::vector<char> row_used(K, 0), col_used(K, 0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < K; ++l)
            if (m(k, l) != 0.0) {
                row_used[k] = 1;
                col_used[l] = 1;
            }
    std::vector<double> s(K, 0.0);
    std::vector<Eigen::VectorXd> ds(K);
    std::vector<Eigen::MatrixXd> dds(K);
    std::vector<std::vector<Eigen::MatrixXd>> ddds(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (row_used[k]) s[k] = atom_scalar(atoms_[k], x);
        if (col_used[k] || (row_used[k] && order >= 1)) ds[k] = atom_scalar_grad(atoms_[k], x);
        if ((col_used[k] && order >= 1) || (row_used[k] && order >= 2))
            dds[k] = atom_scalar_hess(atoms_[k], x);
        if (col_used[k] && order >= 2) ddds[k] = atom_scalar_third(atoms_[k], x);
    }
    g0 = Eigen::VectorXd::Zero(d);
    if (order >= 1) g1 = Eigen::MatrixXd::Zero(d, d);
    if (order >= 2) g2.assign(d, Eigen::MatrixXd::Zero(d, d));
    for (std::size_t l = 0; l < K; ++l) {
        if (!col_used[l]) continue;
        // w 'paints' the first slot: w(x) = sum_k m(k,l) s_k(x) v_k.
        Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(d, d);   // (i, a) = d w_i / d x_a
        std::vector<Eigen::MatrixXd> ddw;
        if (order >= 2) ddw.assign(d, Eigen::MatrixXd::Zero(d, d));
        for (std::size_t k = 0; k < K; ++k) {
            const double c = m(k, l);
            if (c == 0.0) continue;
            w += c * s[k] * atoms_[k].direction;
            if (order >= 1) dw += c * atoms_[k].direction * ds[k].transpose();
            if (order >= 2)
                for (Eigen::Index i = 0; i < d; ++i)
                    ddw[i] += c * atoms_[k].direction(i) * dds[k];
        }
        const Eigen::VectorXd& v = atoms_[l].direction;
        const double scalar0 = w.dot(ds[l]);
        g0 += scalar0 * v;
        if (order >= 1) {
            // d/dx_a of w . grad s_l = (d_a w) . grad s_l + w . d_a grad s_l.
            const Eigen::VectorXd row = dw.transpose() * ds[l] + dds[l] * w;
            g1 += v * row.transpose();
        }
        if (order >= 2) {
            for (Eigen::Index a = 0; a < d; ++a)
                for (Eigen::Index b = 0; b < d; ++b) {
                    double acc = 0.0;
                    for (Eigen::Index i = 0; i < d; ++i) {
                        acc += ddw[i](a, b) * ds[l](i);
                        acc += dw(i, a) * dds[l](i, b);
                        acc += dw(i, b) * dds[l](i, a);
                        acc += w(i) * ddds[l][i](a, b);
                    }
                    for (Eigen::Index j = 0; j < d; ++j) g2[j](a, b) += v(j) * acc;
                }
        }
    }
}

double FieldBasis::pair_field_cb_scan(const Eigen::MatrixXd& m, int order) const {
    double sup = 0.0;
    Eigen::VectorXd g0;
    Eigen::MatrixXd g1;
    std::vector<Eigen::MatrixXd> g2;
    for (Eigen::Index ip = 0; ip < probes_.rows(); ++ip) {
        const Eigen::VectorXd x = probes_.row(ip).transpose();
        pair_eval(m, x, order, g0, g1, g2);
        double v = g0.norm();
        if (order >= 1) v = std::max(v, g1.norm());
        if (order >= 2) {
            double sq = 0.0;
            for (const auto& slice : g2) sq += slice.squaredNorm();
            v = std::max(v, std::sqrt(sq));
        }
        sup = std::max(sup, v);
    }
    return sup;
}

double FieldBasis::atom_cb(std::size_t k, int order) const {
    double v = 0.0;
    for (int r = 0; r <= order; ++r) v = std::max(v, atom_sup_(k, r));
    return v;
}

void FieldBasis::check_x(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw std::invalid_argument("point dimension must match the basis");
}

Eigen::VectorXd FieldBasis::field_value(const Eigen::VectorXd& coeffs,
                                        const Eigen::VectorXd& x) const {
    check_x(x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (coeffs(k) == 0.0) continue;
        out += coeffs(k) * atom_scalar(atoms_[k], x) * atoms_[k].direction;
    }
    return out;
}

Eigen::MatrixXd FieldBasis::field_jacobian(const Eigen::VectorXd& coeffs,
                                           const Eigen::VectorXd& x) const {
    check_x(x);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (coeffs(k) == 0.0) continue;
        out += coeffs(k) * atoms_[k].direction * atom_scalar_grad(atoms_[k], x).transpose();
    }
    return out;
}

double FieldBasis::field_cb(const Eigen::VectorXd& coeffs, int order) const {
    if (coeffs.size() != static_cast<Eigen::Index>(atoms_.size()))
        throw std::invalid_argument("coefficient count must match the basis");
    if (order < 0 || order > 3) throw std::invalid_argument("derivative order must be 0..3");
    const Eigen::Index d = dim_;
    double sup = 0.0;
    for (Eigen::Index ip = 0; ip < probes_.rows(); ++ip) {
        const Eigen::VectorXd x = probes_.row(ip).transpose();
        Eigen::VectorXd val = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d, d);
        Eigen::MatrixXd hess_flat = Eigen::MatrixXd::Zero(d, d * d);
        Eigen::MatrixXd third_flat = Eigen::MatrixXd::Zero(d, d * d * d);
        for (std::size_t k = 0; k < atoms_.size(); ++k) {
            const double c = coeffs(k);
            if (c == 0.0) continue;
            const Eigen::VectorXd& v = atoms_[k].direction;
            val += c * atom_scalar(atoms_[k], x) * v;
            if (order >= 1) jac += c * v * atom_scalar_grad(atoms_[k], x).transpose();
            if (order >= 2) {
                const Eigen::MatrixXd h = atom_scalar_hess(atoms_[k], x);
                hess_flat += c * v * Eigen::Map<const Eigen::RowVectorXd>(h.data(), d * d);
            }
            if (order >= 3) {
                const auto t = atom_scalar_third(atoms_[k], x);
                Eigen::RowVectorXd flat(d * d * d);
                for (Eigen::Index kk = 0; kk < d; ++kk)
                    flat.segment(kk * d * d, d * d) =
                        Eigen::Map<const Eigen::RowVectorXd>(t[kk].data(), d * d);
                third_flat += c * v * flat;
            }
        }
        double m = val.norm();
        if (order >= 1) m = std::max(m, jac.norm());
        if (order >= 2) m = std::max(m, hess_flat.norm());
        if (order >= 3) m = std::max(m, third_flat.norm());
        sup = std::max(sup, m);
    }
    return sup;
}

double FieldBasis::field_cb_bound(const Eigen::VectorXd& coeffs, int order) const {
    double b = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) b += std::abs(coeffs(k)) * atom_cb(k, order);
    return b;
}

double FieldBasis::sobolev_proxy(const Eigen::VectorXd& coeffs, double s) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        const double lam = atoms_[k].width;
        sum += coeffs(k) * coeffs(k) * std::pow(1.0 + 1.0 / (lam * lam), s);
    }
    return std::sqrt(sum);
}

double FieldBasis::pair_field_cb(const Eigen::MatrixXd& m, int order) const {
    if (m.rows() != static_cast<Eigen::Index>(atoms_.size()) || m.cols() != m.rows())
        throw std::invalid_argument("pair coefficient matrix must be K x K");
    if (order < 0 || order > 2) throw std::invalid_argument("pair derivative order must be 0..2");
    return pair_field_cb_scan(m, order);
}

double FieldBasis::pair_field_cb_bound(const Eigen::MatrixXd& m, int order) const {
    double b = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k)
        for (std::size_t l = 0; l < atoms_.size(); ++l) {
            double pairmax = 0.0;
            for (int r = 0; r <= order; ++r) pairmax = std::max(pairmax, pair_sup_[r](k, l));
            b += std::abs(m(k, l)) * pairmax;
        }
    return b;
}

Eigen::VectorXd SmoothField::value(const Eigen::VectorXd& x) const {
    return basis->field_value(coeffs, x);
}

Eigen::MatrixXd SmoothField::jacobian(const Eigen::VectorXd& x) const {
    return basis->field_jacobian(coeffs, x);
}

Eigen::VectorXd TwoPointField::value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const std::size_t K = basis->size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis->dim());
    for (std::size_t l = 0; l < K; ++l) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(basis->dim());
        for (std::size_t k = 0; k < K; ++k) {
            if (m(k, l) == 0.0) continue;
            w += m(k, l) * atom_scalar(basis->atom(k), x) * basis->atom(k).direction;
        }
        if (w.isZero(0.0)) continue;
        out += w.dot(atom_scalar_grad(basis->atom(l), y)) * basis->atom(l).direction;
    }
    return out;
}

double TestFunction::value(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) v += coeffs(k) * atom_scalar(atoms[k], x);
    return v;
}

Eigen::VectorXd TestFunction::grad(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) v += coeffs(k) * atom_scalar_grad(atoms[k], x);
    return v;
}

Eigen::MatrixXd TestFunction::hess(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(x.size(), x.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) v += coeffs(k) * atom_scalar_hess(atoms[k], x);
    return v;
}

}  // namespace rmkv
