#include "test_support.hpp"
#include "slatefem/precon.hpp"

#include <doctest.h>

using namespace slatefem;
using namespace testing;
namespace f = slatefem::forms;

namespace
{
SolverOptions exact_inner()
{
    SolverOptions o;
    o.inner_pc = PcKind::exact;
    return o;
}

struct Assembled
{
    CsrMatrix       A;
    Eigen::VectorXd b;
};

Assembled full_system(const ModelForms& mf)
{
    Assembled  s{slate::assemble_matrix(slate::Tensor(mf.a)), slate::assemble_vector(slate::Tensor(mf.L))};
    const int  off = mf.offsets()[2];
    slate::Bcs gb;
    for (std::size_t i = 0; i < mf.bc_dofs.size(); ++i)
    {
        gb.dofs.push_back(off + mf.bc_dofs[i]);
        gb.values.push_back(mf.bc_values[i]);
    }
    slate::constrain_rows(s.A, s.b, gb);
    return s;
}

Assembled mixed(const MixedSystem& ms)
{
    Assembled s{slate::assemble_matrix(slate::Tensor(ms.a)), slate::assemble_vector(slate::Tensor(ms.L))};
    slate::constrain_rows(s.A, s.b, {ms.bc_dofs, ms.bc_values});
    return s;
}

MeshPtr all_neumann(int n)
{
    return std::make_shared< const Mesh >(
        mark_boundary(build_unit_square(n), [](const Vec2&) { return std::optional< BoundaryLabel >(BoundaryLabel::neumann); }));
}
} // namespace

TEST_CASE("field split validation")
{
    const auto s = FieldSplit::make(3, {0, 1});
    CHECK(s.condensed == std::vector< int >{2});
    CHECK_THROWS_AS(FieldSplit::make(3, {0, 1, 2}), Error);
    CHECK_THROWS_AS(FieldSplit::make(3, {0, 0}), Error);
    CHECK_THROWS_AS(FieldSplit::make(3, {3}), Error);
    CHECK_THROWS_AS(FieldSplit::make(3, {}), Error);

    const auto o = SolverOptions::from_map({{"condensed_field_ksp_type", "gmres"},
                                            {"condensed_field_pc_type", "exact"},
                                            {"condensed_field_ksp_rtol", "1e-10"},
                                            {"condensed_field_ksp_max_it", "50"},
                                            {"pc_sc_eliminate_fields", "0,1"}});
    CHECK(o.inner_method == KrylovMethod::gmres);
    CHECK(o.inner_pc == PcKind::exact);
    CHECK(o.inner_rtol == 1e-10);
    CHECK(o.inner_maxiter == 50);
    CHECK(o.eliminate == std::vector< int >{0, 1});
    CHECK_THROWS_AS(SolverOptions::from_map({{"ksp_type", "cg"}}), Error);
}

TEST_CASE("schur complement of a block-diagonal system")
{
    const auto m  = unit_square(2);
    const auto v  = create_space(m, {Family::DG, 1});
    const auto q  = create_space(m, {Family::DG, 0});
    const auto tr = create_space(m, {Family::Trace, 0});
    auto       a  = std::make_shared< f::FormIR >(std::vector< std::vector< SpacePtr > >{{v, q, tr}, {v, q, tr}});
    a->add(f::dx, f::inner(f::test(0), f::trial(0)) + f::inner(f::test(1), f::trial(1)));
    const auto tt = f::inner(f::test(2), f::trial(2));
    a->add(f::dS, tt);
    a->add(f::ds(), tt);
    StaticCondensation sc(a, FieldSplit::make(3, {0, 1}), {});
    const auto         A22 = slate::assemble_matrix(slate::Tensor(a->restrict_fields({2}, {2})));
    CHECK(max_abs(sc.S().to_dense() - A22.to_dense()) < 1e-15);
}

TEST_CASE("condensed operator against per-cell dense elimination")
{
    const auto         mesh = unit_square(3);
    const auto         mf   = model_problem_forms(mesh, Method::mixed_hybrid, 2, manufactured("sin-sin").data());
    StaticCondensation sc(mf.a, FieldSplit::make(3, {0, 1}), {mf.bc_dofs, mf.bc_values});

    const auto&     tr = mf.spaces[2];
    Eigen::MatrixXd S  = Eigen::MatrixXd::Zero(tr->ndof_global(), tr->ndof_global());
    for (int c = 0; c < mesh->num_cells(); ++c)
    {
        const auto      t  = f::assemble_local(*mf.a, c);
        const int       ne = t.row_offsets[2];
        const int       nc = t.row_offsets[3] - ne;
        const auto&     A  = t.data;
        Eigen::MatrixXd s  = A.bottomRightCorner(nc, nc) -
                            A.bottomLeftCorner(nc, ne) * A.topLeftCorner(ne, ne).inverse() * A.topRightCorner(ne, nc);
        const auto d = tr->cell_dofs(c);
        for (int i = 0; i < nc; ++i)
            for (int j = 0; j < nc; ++j)
                S(d[i], d[j]) += s(i, j);
    }
    CHECK(max_abs(sc.S_unconstrained().to_dense() - S) < 1e-12 * max_abs(S));
    CHECK(asymmetry(sc.S()) <= 1e-10 * sc.S().norm_inf());
    Eigen::LLT< Eigen::MatrixXd > llt(sc.S().to_dense());
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("conforming fields cannot be eliminated")
{
    const auto ms = mixed_system(unit_square(2), 1, manufactured("sin-sin").data());
    CHECK_THROWS_AS(StaticCondensation(ms.a, FieldSplit::make(2, {0}), {}), Error);
}

TEST_CASE("static condensation apply")
{
    const auto mesh = std::make_shared< const Mesh >(label_left_neumann(build_unit_square(3)));
    for (Method meth : {Method::mixed_hybrid, Method::ldgh})
    {
        const auto         mf = model_problem_forms(mesh, meth, 1, manufactured("exp-sin").data());
        StaticCondensation sc(mf.a, FieldSplit::make(3, {0, 1}), {mf.bc_dofs, mf.bc_values}, exact_inner());
        const auto         sys = full_system(mf);

        Eigen::VectorXd x;
        sc.apply(Eigen::VectorXd::Zero(sys.b.size()), x);
        CHECK(max_abs(x) == 0.);

        // one outer iteration with an exact inner solve
        KrylovConfig cfg;
        cfg.method         = KrylovMethod::fgmres;
        cfg.preconditioner = sc.as_preconditioner();
        Eigen::VectorXd y  = Eigen::VectorXd::Zero(sys.b.size());
        const auto      r  = krylov_solve(sys.A, sys.b, y, cfg);
        CHECK(r.iterations == 1);
        CHECK(r.relative_residual < 1e-8);

        // constructed solution
        Eigen::VectorXd xs = random_vector(sys.b.size());
        const auto      off = mf.offsets();
        for (std::size_t i = 0; i < mf.bc_dofs.size(); ++i)
            xs[off[2] + mf.bc_dofs[i]] = mf.bc_values[i];
        const Eigen::VectorXd rhs = sys.A * xs;
        Eigen::VectorXd       z;
        sc.apply(rhs, z);
        CHECK(max_abs(z - xs) < 1e-8);

        // random residual: eliminated rows hold
        const Eigen::VectorXd rr = random_vector(sys.b.size());
        sc.apply(rr, z);
        const Eigen::VectorXd res = sys.A * z - rr;
        CHECK(max_abs(res.head(off[2])) < 1e-9);
    }
}

TEST_CASE("broken transfer")
{
    const auto m1 = unit_square(1);
    const auto rt = create_space(m1, {Family::RT, 1});
    const auto bt = make_broken_transfer(rt, break_space(rt));
    int        interior = rt->facet_dofs([&] {
        for (int f = 0; f < m1->num_facets(); ++f)
            if (m1->facet_kind(f) == FacetKind::interior)
                return f;
        return -1;
    }())[0];
    Eigen::VectorXd r = Eigen::VectorXd::Zero(rt->ndof_global());
    r[interior]       = 1.;
    const auto rb     = bt.transfer(r);
    double     sum    = 0.;
    for (int i = 0; i < rb.size(); ++i)
        if (bt.conforming_of[i] == interior)
        {
            CHECK(rb[i] == 0.5);
            sum += rb[i];
        }
    CHECK(sum == 1.);
    for (int d = 0; d < rt->ndof_global(); ++d)
        CHECK(bt.count[d] == (d == interior ? 2 : 1));
    r.setZero();
    r[(interior + 1) % rt->ndof_global()] = 3.;
    CHECK(bt.transfer(r).sum() == 3.);

    // consistency for random pairs
    const auto m  = unit_square(4);
    for (int k = 1; k <= 2; ++k)
    {
        const auto rtk = create_space(m, {Family::RT, k});
        const auto btk = make_broken_transfer(rtk, break_space(rtk));
        double     worst = 0.;
        for (int trial = 0; trial < 100; ++trial)
        {
            const Eigen::VectorXd R = random_vector(rtk->ndof_global());
            const Eigen::VectorXd w = random_vector(rtk->ndof_global());
            worst = std::max(worst, std::abs(transfer_residual(btk, R).dot(btk.inject(w)) - R.dot(w)));
        }
        CHECK(worst < 1e-12);

        const Eigen::VectorXd w = random_vector(rtk->ndof_global());
        CHECK(max_abs(btk.project_div(btk.inject(w)) - w) == 0.);

        Eigen::VectorXd twins = random_vector(btk.broken->ndof_global());
        const auto      avg   = btk.project_div(twins);
        Eigen::VectorXd expect = Eigen::VectorXd::Zero(rtk->ndof_global());
        for (int i = 0; i < twins.size(); ++i)
            expect[btk.conforming_of[i]] += twins[i] / btk.count[btk.conforming_of[i]];
        CHECK(max_abs(avg - expect) < 1e-15);
    }
    CHECK_THROWS_AS(make_broken_transfer(create_space(m, {Family::DG, 1}), break_space(create_space(m, {Family::RT, 1}))), Error);
}

TEST_CASE("hybridization setup")
{
    const auto ms = mixed_system(unit_square(1), 1, manufactured("sin-sin").data());
    HybridizationPC hp(ms.a, ms.bc_dofs);
    CHECK(hp.trace_space()->ndof_global() == 5);
    CHECK(hp.condensation().S().nrows() == 5);
    CHECK(hp.condensation().bcs().dofs.size() == 4);

    // K annihilates conforming velocities
    const auto m   = unit_square(3);
    const auto ms3 = mixed_system(m, 2, manufactured("sin-sin").data());
    HybridizationPC hp3(ms3.a, ms3.bc_dofs);
    const auto      K = slate::assemble_matrix(slate::Tensor(hp3.jump_form()));
    const auto&     bt = hp3.transfer();
    CHECK(max_abs(K * bt.inject(random_vector(bt.conforming->ndof_global()))) < 1e-11);

    // RT(2) must pair with DG(1)
    const auto rt2 = create_space(m, {Family::RT, 2});
    const auto dg0 = create_space(m, {Family::DG, 0});
    auto       bad = std::make_shared< f::FormIR >(std::vector< std::vector< SpacePtr > >{{rt2, dg0}, {rt2, dg0}});
    bad->add(f::dx, f::inner(f::test(0), f::trial(0)) - f::inner(f::div(f::test(0)), f::trial(1)) +
                        f::inner(f::test(1), f::div(f::trial(0))));
    CHECK_THROWS_AS(HybridizationPC(bad, {}), Error);
}

TEST_CASE("hybridization matches the direct mixed solve")
{
    for (bool neumann : {false, true})
        for (int k : {1, 2})
        {
            const Mesh base = build_unit_square(4);
            const auto mesh = std::make_shared< const Mesh >(neumann ? label_left_neumann(base) : base);
            const auto ms   = mixed_system(mesh, k, manufactured("sin-sin").data());
            const auto sys  = mixed(ms);
            const auto xd   = sparse_direct_solve(sys.A, sys.b);

            HybridizationPC hp(ms.a, ms.bc_dofs, exact_inner());
            Eigen::VectorXd zero;
            hp.apply(Eigen::VectorXd::Zero(sys.b.size()), zero);
            CHECK(max_abs(zero) == 0.);

            KrylovConfig cfg;
            cfg.method         = KrylovMethod::fgmres;
            cfg.preconditioner = hp.as_preconditioner();
            Eigen::VectorXd x  = Eigen::VectorXd::Zero(sys.b.size());
            const auto      r  = krylov_solve(sys.A, sys.b, x, cfg);
            CHECK(r.iterations == 1);
            CHECK(max_abs(x - xd) < 1e-8);

            // apply reproduces a constructed coefficient vector
            Eigen::VectorXd xs = random_vector(sys.b.size());
            for (std::size_t i = 0; i < ms.bc_dofs.size(); ++i)
                xs[ms.bc_dofs[i]] = ms.bc_values[i];
            Eigen::VectorXd y;
            hp.apply(sys.A * xs, y);
            CHECK(max_abs(y - xs) < 1e-8);
        }
}

TEST_CASE("all-Neumann boundary")
{
    const auto mesh = all_neumann(3);
    // zero flux data: the Neumann velocity dofs are fixed at zero
    ProblemData zero;
    zero.f         = manufactured("sin-sin").data().f;
    const auto ms0 = mixed_system(mesh, 1, zero);
    for (double v : ms0.bc_values)
        CHECK(v == 0.);
    HybridizationPC hp0(ms0.a, ms0.bc_dofs, exact_inner());
    CHECK(hp0.condensation().bcs().dofs.empty());

    const auto ms  = mixed_system(mesh, 2, manufactured("exp-sin").data());
    const auto sys = mixed(ms);
    const auto xd  = sparse_direct_solve(sys.A, sys.b);
    HybridizationPC hp(ms.a, ms.bc_dofs, exact_inner());
    KrylovConfig    cfg;
    cfg.method         = KrylovMethod::fgmres;
    cfg.preconditioner = hp.as_preconditioner();
    Eigen::VectorXd x  = Eigen::VectorXd::Zero(sys.b.size());
    CHECK(krylov_solve(sys.A, sys.b, x, cfg).iterations == 1);
    CHECK(max_abs(x - xd) < 1e-8);
}
