#include "test_support.hpp"
#include "slatefem/precon.hpp"

#include <doctest.h>

using namespace slatefem;
using namespace testing;

namespace
{
Eigen::MatrixXd random_spd(int n)
{
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        a.col(i) = random_vector(n);
    return a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

CsrMatrix random_sparse_spd(int n)
{
    std::vector< Triplet >                     t;
    std::uniform_int_distribution< int >       col(0, n - 1);
    std::uniform_real_distribution< double >   val(-1., 1.);
    Eigen::VectorXd                            rowsum = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k)
        {
            const int    j = col(rng());
            const double v = val(rng());
            if (i == j)
                continue;
            t.push_back({i, j, v});
            t.push_back({j, i, v});
            rowsum[i] += std::abs(v);
            rowsum[j] += std::abs(v);
        }
    for (int i = 0; i < n; ++i)
        t.push_back({i, i, rowsum[i] + 1.});
    return CsrMatrix::from_triplets(n, n, t);
}
} // namespace

TEST_CASE("csr basics")
{
    const auto a = CsrMatrix::from_triplets(3, 3, {{0, 2, 1.}, {0, 0, 2.}, {0, 2, 3.}, {2, 1, -1.}});
    CHECK(a.nnz() == 3);
    CHECK(a.at(0, 2) == 4.);
    CHECK(a.at(0, 0) == 2.);
    CHECK(a.at(1, 1) == 0.);
    CHECK(a.cols()[0] == 0);
    CHECK(a.cols()[1] == 2);
    CHECK(a.transpose().at(1, 2) == -1.);
    CHECK(max_abs(a.to_dense() - Eigen::MatrixXd(a.to_eigen())) == 0.);
    Eigen::Vector3d x(1., 2., 3.);
    CHECK(max_abs(a * x - a.to_dense() * x) == 0.);

    auto b = a;
    b.constrain_row(1);
    CHECK(b.at(1, 1) == 1.);
    auto c = a;
    c.constrain_row_col(2);
    CHECK(c.at(0, 2) == 0.);
    CHECK(c.at(2, 2) == 1.);
    CHECK(c.at(2, 1) == 0.);
    CHECK(asymmetry(CsrMatrix::identity(4)) == 0.);
}

TEST_CASE("dense factorizations")
{
    const Eigen::VectorXd b = random_vector(4);
    CHECK(max_abs(dense_factor_solve(Eigen::MatrixXd::Identity(4, 4), b) - b) == 0.);

    const Eigen::MatrixXd a   = random_spd(5);
    const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(5, 3);
    const Eigen::MatrixXd ref = a.inverse() * rhs;
    for (auto kind : {Factorization::lu, Factorization::cholesky})
    {
        const auto x = dense_factor_solve(a, rhs, kind);
        CHECK(max_abs(x - ref) < 1e-10);
        CHECK(max_abs(a * x - rhs) <= 1e-10 * max_abs(rhs));
    }
    CHECK(max_abs(dense_inverse(a) * a - Eigen::MatrixXd::Identity(5, 5)) < 1e-12);

    // pivoting is needed here
    Eigen::Matrix3d p;
    p << 0, 1, 2, 1, 0, 3, 4, -3, 8;
    CHECK(max_abs(p * dense_factor_solve(p, Eigen::Vector3d(1, 2, 3)) - Eigen::Vector3d(1, 2, 3)) < 1e-13);

    Eigen::Matrix2d rank1;
    rank1 << 1, 2, 2, 4;
    CHECK_THROWS_AS(dense_factor_solve(rank1, Eigen::Vector2d(1, 1)), SingularMatrixError);
    Eigen::Matrix2d asym;
    asym << 2, 1, 0, 2;
    CHECK_THROWS_AS(dense_factor_solve(asym, Eigen::Vector2d(1, 1), Factorization::cholesky), Error);
    Eigen::Matrix2d indef;
    indef << 1, 0, 0, -1;
    CHECK_THROWS_AS(dense_factor_solve(indef, Eigen::Vector2d(1, 1), Factorization::cholesky), SingularMatrixError);
}

TEST_CASE("krylov on the identity")
{
    const auto            I = CsrMatrix::identity(10);
    const Eigen::VectorXd b = random_vector(10);
    for (auto m : {KrylovMethod::cg, KrylovMethod::gmres, KrylovMethod::fgmres})
    {
        KrylovConfig cfg;
        cfg.method        = m;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
        const auto      r = krylov_solve(I, b, x, cfg);
        CHECK(r.converged);
        CHECK(r.iterations == 1);
        CHECK(max_abs(x - b) < 1e-14);
    }
    Eigen::VectorXd x;
    CHECK_THROWS_AS(krylov_solve(I, random_vector(9), x, KrylovConfig{}), Error);
    KrylovConfig bad;
    bad.rtol = 0.;
    CHECK_THROWS_AS(krylov_solve(I, b, x, bad), Error);
}

TEST_CASE("trace system solves")
{
    const auto         mesh = unit_square(4);
    const auto         mf   = model_problem_forms(mesh, Method::mixed_hybrid, 1, manufactured("sin-sin").data());
    StaticCondensation sc(mf.a, FieldSplit::make(3, {0, 1}), {mf.bc_dofs, mf.bc_values});
    const CsrMatrix&   S = sc.S();
    const Eigen::VectorXd b      = random_vector(S.nrows());
    const Eigen::VectorXd direct = sparse_direct_solve(S, b);

    for (auto pc : {PcKind::none, PcKind::jacobi})
    {
        KrylovConfig cfg;
        cfg.rtol           = 1e-12;
        cfg.preconditioner = make_preconditioner(S, pc);
        Eigen::VectorXd x  = Eigen::VectorXd::Zero(b.size());
        const auto      r  = krylov_solve(S, b, x, cfg);
        CHECK(r.converged);
        CHECK(r.relative_residual <= 1e-12);
        CHECK(max_abs(x - direct) < 1e-8);
    }
    for (auto m : {KrylovMethod::cg, KrylovMethod::gmres, KrylovMethod::fgmres})
    {
        KrylovConfig cfg;
        cfg.method         = m;
        cfg.preconditioner = make_preconditioner(S, PcKind::exact);
        Eigen::VectorXd x  = Eigen::VectorXd::Zero(b.size());
        const auto      r  = krylov_solve(S, b, x, cfg);
        CHECK(r.iterations == 1);
        CHECK(r.converged);
    }

    // too few iterations: reported, not thrown
    KrylovConfig few;
    few.maxiter       = 2;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    const auto      r = krylov_solve(S, b, x, few);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
}

TEST_CASE("cg error decreases in the energy norm")
{
    const CsrMatrix       a     = random_sparse_spd(40);
    const Eigen::MatrixXd dense = a.to_dense();
    const Eigen::VectorXd xs    = random_vector(40);
    const Eigen::VectorXd b     = dense * xs;
    double                prev  = 1e300;
    for (int it = 1; it <= 25; ++it)
    {
        KrylovConfig cfg;
        cfg.maxiter       = it;
        cfg.rtol          = 1e-300;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(40);
        krylov_solve(a, b, x, cfg);
        const Eigen::VectorXd e      = x - xs;
        const double          energy = std::sqrt(e.dot(dense * e));
        CHECK(energy <= prev * (1. + 1e-12));
        prev = energy;
    }
}

TEST_CASE("gmres residual is monotone within a cycle")
{
    const CsrMatrix       a = random_sparse_spd(60);
    const Eigen::VectorXd b = random_vector(60);
    for (auto m : {KrylovMethod::gmres, KrylovMethod::fgmres})
    {
        std::vector< double > hist;
        KrylovConfig          cfg;
        cfg.method  = m;
        cfg.restart = 60;
        cfg.monitor = [&](int, double r) { hist.push_back(r); };
        Eigen::VectorXd x = Eigen::VectorXd::Zero(60);
        CHECK(krylov_solve(a, b, x, cfg).converged);
        for (std::size_t i = 1; i < hist.size(); ++i)
            CHECK(hist[i] <= hist[i - 1] * (1. + 1e-12));
    }
}

TEST_CASE("sparse direct")
{
    const auto D = CsrMatrix::from_triplets(3, 3, {{0, 0, 2.}, {1, 1, 4.}, {2, 2, -5.}});
    CHECK(max_abs(sparse_direct_solve(D, Eigen::Vector3d(1., 1., 1.)) - Eigen::Vector3d(0.5, 0.25, -0.2)) < 1e-15);

    const auto            A = random_sparse_spd(50);
    const Eigen::VectorXd b = random_vector(50);
    CHECK(max_abs(sparse_direct_solve(A, b) - A.to_dense().partialPivLu().solve(b)) < 1e-10);

    const auto ms = mixed_system(unit_square(2), 1, manufactured("sin-sin").data());
    CsrMatrix  M  = slate::assemble_matrix(slate::Tensor(ms.a));
    auto       rhs = slate::assemble_vector(slate::Tensor(ms.L));
    slate::constrain_rows(M, rhs, {ms.bc_dofs, ms.bc_values});
    const auto x = sparse_direct_solve(M, rhs);
    CHECK((M * x - rhs).norm() <= 1e-10 * rhs.norm());

    const auto singular = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.}, {0, 1, 1.}, {1, 0, 1.}, {1, 1, 1.}});
    CHECK_THROWS_AS(sparse_direct_solve(singular, Eigen::Vector2d(1., 1.)), Error);
}

TEST_CASE("solve report csv")
{
    SolveReport r;
    r.method            = "cg";
    r.iterations        = 7;
    r.relative_residual = 1.5e-9;
    r.converged         = true;
    const std::string header = solve_report_csv_header();
    const std::string row    = solve_report_csv_row(r, "trace", 8, 100);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(row.find("1.500000000000e-09") != std::string::npos);
    CHECK(parse_krylov("fgmres") == KrylovMethod::fgmres);
    CHECK(parse_pc("exact") == PcKind::exact);
    CHECK_THROWS_AS(parse_pc("amg"), Error);
}
