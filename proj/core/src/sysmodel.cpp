#include "aronsson/sysmodel.hpp"

#include <cmath>
#include <numbers>

namespace aronsson {

PolyMatrixField::PolyMatrixField(int n, int m, std::vector<Polynomial> entries,
                                 double lipschitz_bound)
    : n_(n), m_(m), entries_(std::move(entries)), lipschitz_bound_(lipschitz_bound) {
    if (n < 1 || m < 1) throw std::invalid_argument("PolyMatrixField: n, m must be >= 1");
    if (static_cast<int>(entries_.size()) != n * m) {
        throw std::invalid_argument("PolyMatrixField: expected n*m entries");
    }
    for (const auto& e : entries_) {
        if (e.nvars() != n) {
            throw std::invalid_argument("PolyMatrixField: entries must be polynomials in n vars");
        }
    }
    entry_grads_.reserve(static_cast<std::size_t>(n) * m * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int k = 0; k < n; ++k) {
                entry_grads_.push_back(entry(i, j).derivative(k));
            }
        }
    }
}

Mat PolyMatrixField::sigma(const Vec& x) const {
    if (x.size() != n_) throw std::invalid_argument("sigma: point has wrong dimension");
    Mat s(n_, m_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < m_; ++j) {
            s(i, j) = entry(i, j)(x);
        }
    }
    return s;
}

Mat PolyMatrixField::column_jacobian(int j, const Vec& x) const {
    if (j < 0 || j >= m_) throw std::invalid_argument("column_jacobian: column out of range");
    if (x.size() != n_) throw std::invalid_argument("column_jacobian: point has wrong dimension");
    Mat d(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int k = 0; k < n_; ++k) {
            d(i, k) = entry_grads_[(static_cast<std::size_t>(i) * m_ + j) * n_ + k](x);
        }
    }
    return d;
}

double PolyMatrixField::sample_lipschitz(const Box& box, int samples, Rng& rng) const {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec a = rng.point_in(box);
        Vec b = rng.point_in(box);
        double dist = (a - b).norm();
        if (dist < 1e-12) continue;
        double ratio = (sigma(a) - sigma(b)).operatorNorm() / dist;
        worst = std::max(worst, ratio);
    }
    return worst;
}

std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::isotropic: return "isotropic";
        case SystemKind::hormander: return "hormander";
        case SystemKind::grushin: return "grushin";
        case SystemKind::custom: return "custom";
    }
    return "unknown";
}

SystemCatalogEntry SystemCatalogEntry::isotropic(int n) {
    if (n < 1) throw ConfigError("isotropic: n must be >= 1");
    std::vector<Polynomial> entries;
    entries.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            entries.push_back(Polynomial::constant(n, i == j ? 1.0 : 0.0));
        }
    }
    SystemCatalogEntry e{SystemKind::isotropic, n, Mat(), PolyMatrixField(n, n, std::move(entries), 0.0)};
    return e;
}

SystemCatalogEntry SystemCatalogEntry::hormander(int m, const Mat& B) {
    if (m < 2 || m % 2 != 0) throw ConfigError("hormander: m must be even and >= 2");
    if (B.rows() != m || B.cols() != m) throw ConfigError("hormander: B must be m x m");
    const double tol = 1e-12;
    if ((B.transpose() + B).cwiseAbs().maxCoeff() > tol) {
        throw ConfigError("hormander: requires tB = -B");
    }
    // tB = -B and B^{-1} = tB together mean B B = -I.
    if ((B * B + Mat::Identity(m, m)).cwiseAbs().maxCoeff() > tol) {
        throw ConfigError("hormander: requires B^{-1} = tB");
    }
    const int n = m + 1;
    std::vector<Polynomial> entries;
    entries.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            entries.push_back(Polynomial::constant(n, i == j ? 1.0 : 0.0));
        }
    }
    // Bottom row: t(B x_h), so entry (m, j) = sum_k B_{jk} x_k.
    for (int j = 0; j < m; ++j) {
        Polynomial p(n);
        for (int k = 0; k < m; ++k) {
            if (B(j, k) != 0.0) {
                std::vector<int> e(n, 0);
                e[k] = 1;
                p.add_term(B(j, k), e);
            }
        }
        entries.push_back(std::move(p));
    }
    SystemCatalogEntry e{SystemKind::hormander, m, B, PolyMatrixField(n, m, std::move(entries), 1.0)};
    return e;
}

SystemCatalogEntry SystemCatalogEntry::grushin(int m) {
    if (m < 1) throw ConfigError("grushin: m must be >= 1");
    const int n = m + 1;
    const int cols = 2 * m;
    std::vector<Polynomial> entries;
    entries.reserve(static_cast<std::size_t>(n) * cols);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < cols; ++j) {
            entries.push_back(Polynomial::constant(n, i == j ? 1.0 : 0.0));
        }
    }
    // Bottom row: zeros then t(x_h).
    for (int j = 0; j < cols; ++j) {
        if (j < m) {
            entries.push_back(Polynomial::constant(n, 0.0));
        } else {
            entries.push_back(Polynomial::variable(n, j - m));
        }
    }
    SystemCatalogEntry e{SystemKind::grushin, m, Mat(), PolyMatrixField(n, cols, std::move(entries), 1.0)};
    return e;
}

SystemCatalogEntry SystemCatalogEntry::custom(PolyMatrixField field) {
    return SystemCatalogEntry{SystemKind::custom, field.control_dim(), Mat(), std::move(field)};
}

int SystemCatalogEntry::horizontal_dim() const {
    switch (kind) {
        case SystemKind::hormander:
        case SystemKind::grushin:
            return m;
        default:
            return field.state_dim();
    }
}

double hamiltonian(const PolyMatrixField& field, const Vec& x, const Vec& p) {
    if (p.size() != field.state_dim()) {
        throw std::invalid_argument("hamiltonian: covector has wrong dimension");
    }
    return (field.sigma(x).transpose() * p).norm();
}

double hamiltonian_value(const PolyMatrixField& field, const HamiltonianKind& kind, const Vec& x,
                         const Vec& p) {
    const double h = hamiltonian(field, x, p);
    return kind.mode == HamiltonianKind::Mode::degree1 ? h : kind.scale * h * h;
}

Vec hamiltonian_gradient_p(const PolyMatrixField& field, const HamiltonianKind& kind, const Vec& x,
                           const Vec& p, double tol_H) {
    const Mat s = field.sigma(x);
    const Vec w = s.transpose() * p;
    if (kind.mode == HamiltonianKind::Mode::squared) {
        return 2.0 * kind.scale * (s * w);
    }
    const double h = w.norm();
    if (h <= tol_H) {
        throw SingularPointError("hamiltonian_gradient_p: H <= tol_H in degree-1 mode");
    }
    return s * (w / h);
}

Vec feedback(const PolyMatrixField& field, const Vec& x, const Vec& grad_u, double tol_H) {
    const Vec w = field.sigma(x).transpose() * grad_u;
    const double h = w.norm();
    if (h <= tol_H) {
        throw SingularPointError("feedback: H <= tol_H");
    }
    return -w / h;
}

SingularIndicator singular_indicator(const PolyMatrixField& field, const Vec& x, const Vec& grad_u,
                                     double tol_H) {
    const double h = hamiltonian(field, x, grad_u);
    return {h <= tol_H, h};
}

std::vector<Vec> sample_unit_sphere(int dim, int count) {
    std::vector<Vec> pts;
    if (dim == 1) {
        pts.push_back(Vec::Constant(1, 1.0));
        pts.push_back(Vec::Constant(1, -1.0));
        return pts;
    }
    if (count <= 0) count = default_sphere_count(dim);
    if (dim == 2) {
        pts.reserve(count);
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * std::numbers::pi * k / count;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            pts.push_back(std::move(v));
        }
        return pts;
    }
    if (dim == 3) {
        // Poles plus rings x azimuths; odd ring count and even azimuth count
        // keep the sample antipodally symmetric.
        int rings = static_cast<int>(std::floor(std::sqrt((count - 2) / 2.0)));
        if (rings < 1) rings = 1;
        if (rings % 2 == 0) rings += 1;
        int azim = static_cast<int>(std::lround(static_cast<double>(count - 2) / rings));
        if (azim < 2) azim = 2;
        if (azim % 2 != 0) azim += 1;
        pts.reserve(static_cast<std::size_t>(rings) * azim + 2);
        Vec north(3), south(3);
        north << 0, 0, 1;
        south << 0, 0, -1;
        pts.push_back(north);
        pts.push_back(south);
        for (int r = 1; r <= rings; ++r) {
            const double phi = std::numbers::pi * r / (rings + 1);
            for (int k = 0; k < azim; ++k) {
                const double th = 2.0 * std::numbers::pi * k / azim;
                Vec v(3);
                v << std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi);
                pts.push_back(std::move(v));
            }
        }
        return pts;
    }
    // dim >= 4: deterministic Gaussian directions closed under negation.
    Rng rng(0x5f3759df);
    const int half = (count + 1) / 2;
    pts.reserve(2 * static_cast<std::size_t>(half));
    for (int k = 0; k < half; ++k) {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) {
            const double u1 = std::max(rng.uniform(), 1e-300);
            const double u2 = rng.uniform();
            v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }
        if (v.norm() < 1e-9) { --k; continue; }
        v.normalize();
        pts.push_back(v);
        pts.push_back(-v);
    }
    return pts;
}

int default_sphere_count(int dim) {
    switch (dim) {
        case 1: return 2;
        case 2: return 64;
        case 3: return 266;
        default: return 128 * dim;
    }
}

double evasion_check(const SystemCatalogEntry& entry, const Vec& x, int sphere_count) {
    const int hd = entry.horizontal_dim();
    const Mat s = entry.field.sigma(x);
    const int cd = entry.field.control_dim();
    double best = 0.0;
    for (const Vec& a : sample_unit_sphere(cd, sphere_count)) {
        const Vec f = s * a;
        best = std::max(best, f.head(hd).norm());
    }
    return best;
}

}  // namespace aronsson
