#include "slatefem/linalg.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace slatefem
{

// ---------------------------------------------------------------------------
// CsrMatrix
// ---------------------------------------------------------------------------

CsrMatrix CsrMatrix::from_triplets(int nrows, int ncols, const std::vector< Triplet >& entries)
{
    CsrMatrix m(nrows, ncols);
    std::vector< int > count(static_cast< std::size_t >(nrows), 0);
    for (const auto& t : entries)
    {
        if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
            throw Error("CsrMatrix: entry (" + std::to_string(t.row) + "," + std::to_string(t.col) + ") out of range");
        ++count[t.row];
    }
    // bucket by row preserving input order, then stable-sort each row by column
    std::vector< int > start(static_cast< std::size_t >(nrows) + 1, 0);
    for (int i = 0; i < nrows; ++i)
        start[i + 1] = start[i] + count[i];
    std::vector< int > order(entries.size());
    std::vector< int > fill(start.begin(), start.end() - 1);
    for (std::size_t k = 0; k < entries.size(); ++k)
        order[fill[entries[k].row]++] = static_cast< int >(k);

    for (int i = 0; i < nrows; ++i)
    {
        auto b = order.begin() + start[i], e = order.begin() + start[i + 1];
        std::stable_sort(b, e, [&](int x, int y) { return entries[x].col < entries[y].col; });
        for (auto it = b; it != e; ++it)
        {
            const auto& t = entries[*it];
            if (!m.cols_.empty() && static_cast< int >(m.cols_.size()) > m.row_ptr_[i] && m.cols_.back() == t.col)
                m.vals_.back() += t.value;
            else
            {
                m.cols_.push_back(t.col);
                m.vals_.push_back(t.value);
            }
        }
        m.row_ptr_[i + 1] = static_cast< int >(m.cols_.size());
    }
    return m;
}

CsrMatrix CsrMatrix::identity(int n)
{
    std::vector< Triplet > t;
    for (int i = 0; i < n; ++i)
        t.push_back({i, i, 1.});
    return from_triplets(n, n, t);
}

CsrMatrix CsrMatrix::from_dense(const Eigen::MatrixXd& a, double drop)
{
    std::vector< Triplet > t;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (std::abs(a(i, j)) > drop)
                t.push_back({i, j, a(i, j)});
    return from_triplets(static_cast< int >(a.rows()), static_cast< int >(a.cols()), t);
}

double CsrMatrix::at(int i, int j) const
{
    const auto b  = cols_.begin() + row_ptr_[i];
    const auto e  = cols_.begin() + row_ptr_[i + 1];
    const auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? vals_[it - cols_.begin()] : 0.;
}

void CsrMatrix::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const
{
    if (x.size() != ncols_)
        throw Error("CsrMatrix: vector of size " + std::to_string(x.size()) + " for " + std::to_string(ncols_) +
                    " columns");
    y.resize(nrows_);
    for (int i = 0; i < nrows_; ++i)
    {
        double acc = 0.;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            acc += vals_[k] * x[cols_[k]];
        y[i] = acc;
    }
}

Eigen::VectorXd CsrMatrix::operator*(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd y;
    multiply(x, y);
    return y;
}

Eigen::VectorXd CsrMatrix::diagonal() const
{
    Eigen::VectorXd d = Eigen::VectorXd::Zero(std::min(nrows_, ncols_));
    for (int i = 0; i < d.size(); ++i)
        d[i] = at(i, i);
    return d;
}

CsrMatrix CsrMatrix::transpose() const
{
    std::vector< Triplet > t;
    t.reserve(vals_.size());
    for (int i = 0; i < nrows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            t.push_back({cols_[k], i, vals_[k]});
    return from_triplets(ncols_, nrows_, t);
}

double CsrMatrix::norm_inf() const
{
    double out = 0.;
    for (int i = 0; i < nrows_; ++i)
    {
        double s = 0.;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            s += std::abs(vals_[k]);
        out = std::max(out, s);
    }
    return out;
}

Eigen::MatrixXd CsrMatrix::to_dense() const
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nrows_, ncols_);
    for (int i = 0; i < nrows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            d(i, cols_[k]) = vals_[k];
    return d;
}

Eigen::SparseMatrix< double > CsrMatrix::to_eigen() const
{
    std::vector< Eigen::Triplet< double > > t;
    t.reserve(vals_.size());
    for (int i = 0; i < nrows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            t.emplace_back(i, cols_[k], vals_[k]);
    Eigen::SparseMatrix< double > s(nrows_, ncols_);
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

void CsrMatrix::constrain_row(int i)
{
    bool has_diag = false;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
    {
        vals_[k] = cols_[k] == i ? 1. : 0.;
        has_diag = has_diag || cols_[k] == i;
    }
    if (has_diag)
        return;
    const auto pos = std::lower_bound(cols_.begin() + row_ptr_[i], cols_.begin() + row_ptr_[i + 1], i) - cols_.begin();
    cols_.insert(cols_.begin() + pos, i);
    vals_.insert(vals_.begin() + pos, 1.);
    for (int r = i + 1; r <= nrows_; ++r)
        ++row_ptr_[r];
}

void CsrMatrix::constrain_row_col(int i)
{
    for (std::size_t k = 0; k < cols_.size(); ++k)
        if (cols_[k] == i)
            vals_[k] = 0.;
    constrain_row(i);
}

double asymmetry(const CsrMatrix& a)
{
    const CsrMatrix at = a.transpose();
    double          out = 0.;
    for (int i = 0; i < a.nrows(); ++i)
    {
        double s = 0.;
        // merge the two sorted rows
        int ka = a.row_ptr()[i], kb = at.row_ptr()[i];
        const int ea = a.row_ptr()[i + 1], eb = at.row_ptr()[i + 1];
        while (ka < ea || kb < eb)
        {
            const int ca = ka < ea ? a.cols()[ka] : a.ncols();
            const int cb = kb < eb ? at.cols()[kb] : at.ncols();
            if (ca == cb)
                s += std::abs(a.vals()[ka++] - at.vals()[kb++]);
            else if (ca < cb)
                s += std::abs(a.vals()[ka++]);
            else
                s += std::abs(at.vals()[kb++]);
        }
        out = std::max(out, s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense factorizations
// ---------------------------------------------------------------------------

DenseFactor::DenseFactor(const Eigen::MatrixXd& a, Factorization kind, int cell) : kind_(kind), lu_(a)
{
    if (a.rows() != a.cols())
        throw Error("dense factorization of a non-square " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " matrix");
    const int n = static_cast< int >(a.rows());

    Eigen::VectorXd row_max(n);
    for (int i = 0; i < n; ++i)
        row_max[i] = a.row(i).cwiseAbs().maxCoeff();

    if (kind == Factorization::cholesky)
    {
        const double scale = a.cwiseAbs().rowwise().sum().maxCoeff();
        if ((a - a.transpose()).cwiseAbs().rowwise().sum().maxCoeff() > 1e-10 * scale)
            throw Error("cholesky factorization of a non-symmetric matrix");
        for (int j = 0; j < n; ++j)
        {
            double d = lu_(j, j);
            for (int k = 0; k < j; ++k)
                d -= lu_(j, k) * lu_(j, k);
            if (!(d > pivot_threshold * row_max[j]))
                throw SingularMatrixError("cholesky: non-positive pivot " + std::to_string(d) + " in column " +
                                              std::to_string(j),
                                          cell);
            lu_(j, j) = std::sqrt(d);
            for (int i = j + 1; i < n; ++i)
            {
                double s = lu_(i, j);
                for (int k = 0; k < j; ++k)
                    s -= lu_(i, k) * lu_(j, k);
                lu_(i, j) = s / lu_(j, j);
            }
        }
        return;
    }

    perm_.resize(static_cast< std::size_t >(n));
    std::iota(perm_.begin(), perm_.end(), 0);
    for (int k = 0; k < n; ++k)
    {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(lu_(i, k)) > std::abs(lu_(p, k)))
                p = i;
        if (p != k)
        {
            lu_.row(p).swap(lu_.row(k));
            std::swap(perm_[p], perm_[k]);
        }
        if (!(std::abs(lu_(k, k)) > pivot_threshold * row_max[perm_[k]]))
            throw SingularMatrixError("LU: pivot breakdown in column " + std::to_string(k), cell);
        for (int i = k + 1; i < n; ++i)
        {
            lu_(i, k) /= lu_(k, k);
            const double l = lu_(i, k);
            if (l != 0.)
                lu_.row(i).tail(n - k - 1) -= l * lu_.row(k).tail(n - k - 1);
        }
    }
}

Eigen::MatrixXd DenseFactor::solve(const Eigen::MatrixXd& b) const
{
    const int n = size();
    if (b.rows() != n)
        throw Error("dense solve: right-hand side has " + std::to_string(b.rows()) + " rows, expected " +
                    std::to_string(n));
    Eigen::MatrixXd x(n, b.cols());
    if (kind_ == Factorization::cholesky)
    {
        x = lu_.triangularView< Eigen::Lower >().solve(b);
        lu_.triangularView< Eigen::Lower >().transpose().solveInPlace(x);
        return x;
    }
    for (int i = 0; i < n; ++i)
        x.row(i) = b.row(perm_[i]);
    lu_.triangularView< Eigen::UnitLower >().solveInPlace(x);
    lu_.triangularView< Eigen::Upper >().solveInPlace(x);
    return x;
}

Eigen::MatrixXd DenseFactor::inverse() const { return solve(Eigen::MatrixXd::Identity(size(), size())); }

Eigen::MatrixXd dense_factor_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Factorization kind, int cell)
{
    return DenseFactor(a, kind, cell).solve(b);
}

Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& a, int cell) { return DenseFactor(a, Factorization::lu, cell).inverse(); }

// ---------------------------------------------------------------------------
// Krylov methods
// ---------------------------------------------------------------------------

LinearOperator as_operator(const CsrMatrix& a)
{
    if (a.nrows() != a.ncols())
        throw Error("as_operator: matrix is not square");
    return {a.nrows(), [&a](const Eigen::VectorXd& x, Eigen::VectorXd& y) { a.multiply(x, y); }};
}

std::string krylov_name(KrylovMethod m)
{
    switch (m)
    {
    case KrylovMethod::cg: return "cg";
    case KrylovMethod::gmres: return "gmres";
    case KrylovMethod::fgmres: return "fgmres";
    }
    return "?";
}

KrylovMethod parse_krylov(const std::string& name)
{
    if (name == "cg")
        return KrylovMethod::cg;
    if (name == "gmres")
        return KrylovMethod::gmres;
    if (name == "fgmres")
        return KrylovMethod::fgmres;
    throw Error("unknown Krylov method '" + name + "' (expected cg, gmres or fgmres)");
}

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration< double >(Clock::now() - t0).count(); }

void apply_pc(const KrylovConfig& cfg, const Eigen::VectorXd& r, Eigen::VectorXd& z)
{
    if (cfg.preconditioner)
        cfg.preconditioner.apply(r, z);
    else
        z = r;
}

double true_residual(const LinearOperator& a, const Eigen::VectorXd& b, const Eigen::VectorXd& x, Eigen::VectorXd& r)
{
    a.apply(x, r);
    r = b - r;
    return r.norm();
}

void pcg(const LinearOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const KrylovConfig& cfg,
         double tol, SolveReport& rep)
{
    Eigen::VectorXd r, z, p, q;
    double          rnorm = true_residual(a, b, x, r);
    if (cfg.monitor)
        cfg.monitor(0, rnorm);
    while (rep.iterations < cfg.maxiter && rnorm > tol)
    {
        // (re)start from the true residual
        apply_pc(cfg, r, z);
        p          = z;
        double rz  = r.dot(z);
        while (rep.iterations < cfg.maxiter)
        {
            a.apply(p, q);
            const double pq = p.dot(q);
            if (pq == 0. || !std::isfinite(pq))
                break;
            const double alpha = rz / pq;
            x += alpha * p;
            r -= alpha * q;
            ++rep.iterations;
            rnorm = r.norm();
            if (cfg.monitor)
                cfg.monitor(rep.iterations, rnorm);
            if (rnorm <= tol)
                break;
            apply_pc(cfg, r, z);
            const double rz_new = r.dot(z);
            p                   = z + (rz_new / rz) * p;
            rz                  = rz_new;
        }
        const double recursive = rnorm;
        rnorm                  = true_residual(a, b, x, r);
        if (rnorm <= tol || recursive > tol)
            break;
    }
}

void gmres(const LinearOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const KrylovConfig& cfg,
           double tol, bool flexible, SolveReport& rep)
{
    const int       n = static_cast< int >(b.size());
    const int       m = std::max(1, std::min(cfg.restart, std::max(n, 1)));
    Eigen::VectorXd r;
    double          beta = true_residual(a, b, x, r);
    if (cfg.monitor)
        cfg.monitor(0, beta);

    Eigen::MatrixXd V(n, m + 1), Z;
    if (flexible)
        Z.resize(n, m);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs(m), sn(m), g(m + 1), w, z;

    while (rep.iterations < cfg.maxiter && beta > tol)
    {
        V.col(0) = r / beta;
        g.setZero();
        g[0] = beta;
        H.setZero();
        int j = 0;
        for (; j < m && rep.iterations < cfg.maxiter; ++j)
        {
            apply_pc(cfg, V.col(j), z);
            if (flexible)
                Z.col(j) = z;
            a.apply(z, w);
            for (int i = 0; i <= j; ++i)
            {
                H(i, j) = w.dot(V.col(i));
                w -= H(i, j) * V.col(i);
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) > 0.)
                V.col(j + 1) = w / H(j + 1, j);
            for (int i = 0; i < j; ++i)
            {
                const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j)    = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j)        = t;
            }
            const double d = std::hypot(H(j, j), H(j + 1, j));
            cs[j]          = d > 0. ? H(j, j) / d : 1.;
            sn[j]          = d > 0. ? H(j + 1, j) / d : 0.;
            H(j, j)        = d;
            H(j + 1, j)    = 0.;
            g[j + 1]       = -sn[j] * g[j];
            g[j]           = cs[j] * g[j];
            ++rep.iterations;
            if (cfg.monitor)
                cfg.monitor(rep.iterations, std::abs(g[j + 1]));
            if (std::abs(g[j + 1]) <= tol || d == 0.)
            {
                ++j;
                break;
            }
        }
        // x += M (V y) or Z y
        const Eigen::VectorXd y = H.topLeftCorner(j, j).triangularView< Eigen::Upper >().solve(g.head(j));
        if (flexible)
            x += Z.leftCols(j) * y;
        else
        {
            apply_pc(cfg, V.leftCols(j) * y, z);
            x += z;
        }
        beta = true_residual(a, b, x, r);
    }
}

} // namespace

SolveReport krylov_solve(const LinearOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                         const KrylovConfig& cfg)
{
    if (b.size() != a.size)
        throw Error("krylov_solve: right-hand side size " + std::to_string(b.size()) + " does not match operator size " +
                    std::to_string(a.size));
    if (x.size() != b.size())
        x = Eigen::VectorXd::Zero(b.size());
    if (!(cfg.rtol > 0. && cfg.rtol < 1.) || cfg.maxiter < 1)
        throw Error("krylov_solve: rtol must lie in (0,1) and maxiter must be positive");

    const auto  t0 = Clock::now();
    SolveReport rep;
    rep.method        = krylov_name(cfg.method);
    const double bnrm = b.norm();
    const double tol  = std::max(cfg.rtol * bnrm, cfg.atol);
    if (bnrm == 0.)
    {
        x.setZero();
        rep.converged = true;
        return rep;
    }
    switch (cfg.method)
    {
    case KrylovMethod::cg: pcg(a, b, x, cfg, tol, rep); break;
    case KrylovMethod::gmres: gmres(a, b, x, cfg, tol, false, rep); break;
    case KrylovMethod::fgmres: gmres(a, b, x, cfg, tol, true, rep); break;
    }
    Eigen::VectorXd r;
    const double    rn    = true_residual(a, b, x, r);
    rep.relative_residual = rn / bnrm;
    rep.converged         = rn <= tol;
    rep.solve_seconds     = seconds_since(t0);
    return rep;
}

SolveReport krylov_solve(const CsrMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const KrylovConfig& cfg)
{
    return krylov_solve(as_operator(a), b, x, cfg);
}

std::string solve_report_csv_header()
{
    return "label,n,dofs,method,iterations,relative_residual,converged,setup_seconds,solve_seconds";
}

std::string solve_report_csv_row(const SolveReport& r, const std::string& label, int n, int dofs)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%s,%d,%.12e,%d,%.12e,%.12e", label.c_str(), n, dofs, r.method.c_str(),
                  r.iterations, r.relative_residual, r.converged ? 1 : 0, r.setup_seconds, r.solve_seconds);
    return buf;
}

// ---------------------------------------------------------------------------
// Sparse direct
// ---------------------------------------------------------------------------

struct SparseDirect::Impl
{
    Eigen::SparseMatrix< double >                                           mat;
    Eigen::SparseLU< Eigen::SparseMatrix< double >, Eigen::COLAMDOrdering< int > > lu;
};

SparseDirect::SparseDirect(const CsrMatrix& a) : impl_(std::make_unique< Impl >())
{
    if (a.nrows() != a.ncols())
        throw Error("sparse direct solve of a non-square matrix");
    impl_->mat = a.to_eigen();
    impl_->mat.makeCompressed();
    impl_->lu.analyzePattern(impl_->mat);
    impl_->lu.factorize(impl_->mat);
    if (impl_->lu.info() != Eigen::Success)
        throw SingularMatrixError("sparse LU failed: " + impl_->lu.lastErrorMessage());
}

SparseDirect::~SparseDirect() = default;

Eigen::VectorXd SparseDirect::solve(const Eigen::VectorXd& b) const
{
    if (b.size() != impl_->mat.rows())
        throw Error("sparse direct solve: right-hand side size mismatch");
    Eigen::VectorXd x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success || !x.allFinite())
        throw SingularMatrixError("sparse LU solve failed");
    return x;
}

Eigen::VectorXd sparse_direct_solve(const CsrMatrix& a, const Eigen::VectorXd& b) { return SparseDirect(a).solve(b); }

std::string pc_name(PcKind k)
{
    switch (k)
    {
    case PcKind::none: return "none";
    case PcKind::jacobi: return "jacobi";
    case PcKind::exact: return "exact";
    }
    return "?";
}

PcKind parse_pc(const std::string& name)
{
    if (name == "none")
        return PcKind::none;
    if (name == "jacobi")
        return PcKind::jacobi;
    if (name == "exact")
        return PcKind::exact;
    throw Error("unknown preconditioner '" + name + "' (expected none, jacobi or exact)");
}

LinearOperator make_preconditioner(const CsrMatrix& a, PcKind kind)
{
    switch (kind)
    {
    case PcKind::none: return {};
    case PcKind::jacobi: {
        Eigen::VectorXd d = a.diagonal();
        for (int i = 0; i < d.size(); ++i)
            d[i] = d[i] != 0. ? 1. / d[i] : 1.;
        return {a.nrows(), [d](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = d.cwiseProduct(x); }};
    }
    case PcKind::exact: {
        auto lu = std::make_shared< const SparseDirect >(a);
        return {a.nrows(), [lu](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = lu->solve(x); }};
    }
    }
    return {};
}

} // namespace slatefem
