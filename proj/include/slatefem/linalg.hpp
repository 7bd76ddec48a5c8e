#ifndef SLATEFEM_LINALG_HPP
#define SLATEFEM_LINALG_HPP

#include "slatefem/common.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace slatefem
{

// ---------------------------------------------------------------------------
// Sparse storage
// ---------------------------------------------------------------------------

struct Triplet
{
    int    row;
    int    col;
    double value;
};

/// Compressed sparse row matrix with sorted, unique column indices.
class CsrMatrix
{
public:
    CsrMatrix() = default;
    CsrMatrix(int nrows, int ncols) : nrows_(nrows), ncols_(ncols), row_ptr_(static_cast< std::size_t >(nrows) + 1, 0) {}

    /// Duplicates are summed in input order, so the result depends only on
    /// the order in which entries were produced.
    static CsrMatrix from_triplets(int nrows, int ncols, const std::vector< Triplet >& entries);
    static CsrMatrix identity(int n);
    static CsrMatrix from_dense(const Eigen::MatrixXd& a, double drop = 0.);

    int nrows() const { return nrows_; }
    int ncols() const { return ncols_; }
    int nnz() const { return static_cast< int >(vals_.size()); }

    const std::vector< int >&    row_ptr() const { return row_ptr_; }
    const std::vector< int >&    cols() const { return cols_; }
    const std::vector< double >& vals() const { return vals_; }
    std::vector< double >&       vals() { return vals_; }

    double          at(int i, int j) const;
    Eigen::VectorXd operator*(const Eigen::VectorXd& x) const;
    void            multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
    Eigen::VectorXd diagonal() const;
    CsrMatrix       transpose() const;
    double          norm_inf() const;
    Eigen::MatrixXd to_dense() const;
    Eigen::SparseMatrix< double > to_eigen() const;

    /// Zeroes row i and sets its diagonal to 1 (entry must exist or is inserted).
    void constrain_row(int i);
    /// Zeroes row and column i, unit diagonal.
    void constrain_row_col(int i);

private:
    int                   nrows_ = 0;
    int                   ncols_ = 0;
    std::vector< int >    row_ptr_{0};
    std::vector< int >    cols_;
    std::vector< double > vals_;
};

/// ||A - A^T||_inf
double asymmetry(const CsrMatrix& a);

// ---------------------------------------------------------------------------
// Dense local factorizations
// ---------------------------------------------------------------------------

enum class Factorization
{
    lu,
    cholesky
};

inline constexpr double pivot_threshold = 1e-12;

/// Partial-pivot LU or Cholesky of a small dense matrix. A pivot below
/// pivot_threshold times the largest entry of its original row raises
/// SingularMatrixError tagged with `cell`.
class DenseFactor
{
public:
    DenseFactor(const Eigen::MatrixXd& a, Factorization kind, int cell = -1);

    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    Eigen::MatrixXd inverse() const;
    int             size() const { return static_cast< int >(lu_.rows()); }

private:
    Factorization      kind_;
    Eigen::MatrixXd    lu_; // packed L\U, or L for Cholesky
    std::vector< int > perm_;
};

Eigen::MatrixXd dense_factor_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   Factorization kind = Factorization::lu, int cell = -1);
Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& a, int cell = -1);

// ---------------------------------------------------------------------------
// Krylov methods
// ---------------------------------------------------------------------------

/// Matrix-free linear operator y = A x.
struct LinearOperator
{
    int                                                                 size = 0;
    std::function< void(const Eigen::VectorXd&, Eigen::VectorXd&) > apply;

    explicit operator bool() const { return static_cast< bool >(apply); }
};

LinearOperator as_operator(const CsrMatrix& a);

enum class KrylovMethod
{
    cg,
    gmres,
    fgmres
};

std::string  krylov_name(KrylovMethod m);
KrylovMethod parse_krylov(const std::string& name);

struct KrylovConfig
{
    KrylovMethod   method  = KrylovMethod::cg;
    int            restart = 30;
    double         rtol    = 1e-8;
    double         atol    = 0.;
    int            maxiter = 1000;
    LinearOperator preconditioner; // empty = identity
    /// Called with (iteration, residual-norm estimate) after every iteration and once at start.
    std::function< void(int, double) > monitor;
};

struct SolveReport
{
    std::string method;
    int         iterations        = 0;
    double      relative_residual = 0.; // true residual ||b - A x|| / ||b||
    bool        converged         = false;
    double      setup_seconds     = 0.;
    double      solve_seconds     = 0.;
};

/// Solves A x = b starting from x. Non-convergence is reported, not thrown.
SolveReport krylov_solve(const LinearOperator& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                         const KrylovConfig& cfg);
SolveReport krylov_solve(const CsrMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const KrylovConfig& cfg);

std::string solve_report_csv_header();
std::string solve_report_csv_row(const SolveReport& r, const std::string& label, int n, int dofs);

// ---------------------------------------------------------------------------
// Sparse direct solves and preconditioners
// ---------------------------------------------------------------------------

/// Factored sparse LU, reusable for many right-hand sides.
class SparseDirect
{
public:
    explicit SparseDirect(const CsrMatrix& a);
    ~SparseDirect();
    SparseDirect(const SparseDirect&)            = delete;
    SparseDirect& operator=(const SparseDirect&) = delete;

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

private:
    struct Impl;
    std::unique_ptr< Impl > impl_;
};

Eigen::VectorXd sparse_direct_solve(const CsrMatrix& a, const Eigen::VectorXd& b);

enum class PcKind
{
    none,
    jacobi,
    exact
};

std::string pc_name(PcKind k);
PcKind      parse_pc(const std::string& name);

/// Preconditioner operator for an assembled matrix (empty for none).
LinearOperator make_preconditioner(const CsrMatrix& a, PcKind kind);

} // namespace slatefem

#endif
