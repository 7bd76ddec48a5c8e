#include "test_support.hpp"
#include "slatefem/study.hpp"

#include <doctest.h>

using namespace slatefem;
using namespace testing;
namespace f = slatefem::forms;

namespace
{
std::shared_ptr< Function > constant_fn(const SpacePtr& s, double v)
{
    auto fn    = std::make_shared< Function >(s);
    fn->coeffs = Eigen::VectorXd::Constant(s->ndof_global(), v);
    return fn;
}

// per-cell integrals of a scalar function times a DG test basis
Eigen::VectorXd moments(const Function& fn, const SpacePtr& test_space)
{
    f::FormIR L({{test_space}});
    L.add(f::dx, f::inner(f::test(), f::coefficient(std::make_shared< const Function >(fn))));
    return slate::assemble_vector(slate::Tensor(L));
}

// local L2 projection, cell by cell
Function l2_project(const SpacePtr& v, const f::ScalarField& g)
{
    auto M = std::make_shared< f::FormIR >(std::vector< std::vector< SpacePtr > >{{v}, {v}});
    M->add(f::dx, f::inner(f::test(), f::trial()));
    auto L = std::make_shared< f::FormIR >(std::vector< std::vector< SpacePtr > >{{v}});
    L->add(f::dx, f::inner(f::test(), f::field(g)));
    Function out(v);
    out.coeffs = slate::assemble_vector(slate::solve(slate::Tensor(M), slate::Tensor(L)));
    return out;
}

ModelSolution ldgh_solution(int n, int k)
{
    SolverOptions o;
    o.inner_pc = PcKind::exact;
    return solve_model(unit_square(n), Method::ldgh, k, manufactured("sin-sin").data(), o);
}
} // namespace

TEST_CASE("scalar post-processing fixed points")
{
    const auto m  = unit_square(3);
    const auto u0 = constant_fn(create_space(m, {Family::VectorDG, 1}), 0.);
    const auto pc = constant_fn(create_space(m, {Family::DG, 1}), 2.5);
    const auto ps = scalar_pp(*u0, *pc, f::ScalarField::constant(1.));
    CHECK(ps.space->family() == ElementFamily{Family::DG, 2});
    CHECK(l2_error(ps, [](const Vec2&) { return 2.5; }) < 1e-12);

    // exact inputs from a quadratic with u = -kappa grad p
    const double kappa = 3.;
    auto         p     = [](const Vec2& x) { return 1. + x.x() * x.x() - 2. * x.x() * x.y() + 0.5 * x.y(); };
    VectorFn     u     = [kappa](const Vec2& x) { return Vec2(-kappa * (2. * x.x() - 2. * x.y()), -kappa * (-2. * x.x() + 0.5)); };
    for (int l : {0, 1})
    {
        const auto uh = interpolate(create_space(m, {Family::VectorDG, 1}), u);
        const auto ph = l2_project(create_space(m, {Family::DG, 1}), {p, 2});
        const auto pstar = scalar_pp(uh, ph, f::ScalarField::constant(kappa), {l});
        CHECK(l2_error(pstar, p) < 1e-10);
    }
    CHECK_THROWS_AS(scalar_pp(*u0, *pc, f::ScalarField::constant(1.), {2}), Error);
    CHECK_THROWS_AS(scalar_pp(*u0, *pc, f::ScalarField::constant(1.), {-1}), Error);
}

TEST_CASE("scalar post-processing preserves cell means")
{
    const auto sol = ldgh_solution(4, 1);
    for (int l : {0, 1})
    {
        const auto ps  = scalar_pp(sol.fields[0], sol.p(), f::ScalarField::constant(1.), {l});
        const auto dg0 = create_space(sol.mesh, {Family::DG, 0});
        CHECK(max_abs(moments(ps, dg0) - moments(sol.p(), dg0)) < 1e-12);
    }
}

TEST_CASE("scalar post-processing plan matches the naive evaluator")
{
    const auto sol = ldgh_solution(3, 2);
    const auto sys = scalar_pp_system(sol.fields[0], sol.p(), f::ScalarField::constant(1.), {1});
    const auto plan = slate::compile(sys.expr);
    for (int c = 0; c < sol.mesh->num_cells(); ++c)
        CHECK(rel_diff(slate::evaluate_cell(plan, c), naive_eval(sys.expr, c)) < 1e-12);
}

TEST_CASE("flux post-processing")
{
    // zero data
    const auto m  = unit_square(2);
    const auto u0 = constant_fn(create_space(m, {Family::VectorDG, 1}), 0.);
    const auto p1 = constant_fn(create_space(m, {Family::DG, 1}), 1.);
    // constant 1 on every facet: only the lowest Legendre coefficient is set
    const auto l1 = constant_fn(create_space(m, {Family::Trace, 1}), 0.);
    for (int fc = 0; fc < m->num_facets(); ++fc)
        l1->coeffs[l1->space->facet_dofs(fc)[0]] = 1.;
    const auto uz = flux_pp(*u0, *p1, *l1, 1.);
    CHECK(uz.space->family() == ElementFamily{Family::RT, 2});
    CHECK(uz.space->broken());
    CHECK(max_abs(uz.coeffs) < 1e-13);

    for (int k : {0, 1, 2})
    {
        const auto  sol = ldgh_solution(4, k);
        const auto& uh  = sol.fields[0];
        const auto& ph  = sol.p();
        const auto& lh  = sol.fields[2];
        const auto  us  = flux_pp(uh, ph, lh, 1.);
        CHECK(max_normal_jump(us) < 1e-10);

        auto share = [](const Function& fn) { return std::make_shared< const Function >(fn); };
        // facet moments of u*.n equal those of the numerical flux
        const auto tr = create_space(sol.mesh, {Family::Trace, k});
        f::FormIR  a({{tr}}), b({{tr}});
        for (const auto& meas : {f::dS, f::ds()})
        {
            a.add(meas, f::inner(f::test(), f::jump(f::coefficient(share(us)))));
            b.add(meas, f::inner(f::test(), f::jump(f::coefficient(share(uh))) +
                                                f::constant(1.) * (f::coefficient(share(ph)) - f::coefficient(share(lh)))));
        }
        for (int c = 0; c < sol.mesh->num_cells(); ++c)
            CHECK(max_abs(f::assemble_local(a, c).data - f::assemble_local(b, c).data) < 1e-11);

        if (k >= 1)
        {
            const auto r = create_space(sol.mesh, {Family::VectorDG, k - 1});
            f::FormIR  ia({{r}}), ib({{r}});
            ia.add(f::dx, f::inner(f::test(), f::coefficient(share(us))));
            ib.add(f::dx, f::inner(f::test(), f::coefficient(share(uh))));
            for (int c = 0; c < sol.mesh->num_cells(); ++c)
                CHECK(max_abs(f::assemble_local(ia, c).data - f::assemble_local(ib, c).data) < 1e-11);
        }

        const auto sys  = flux_pp_system(uh, ph, lh, 1.);
        const auto plan = slate::compile(sys.expr);
        for (int c = 0; c < sol.mesh->num_cells(); c += 2)
            CHECK(rel_diff(slate::evaluate_cell(plan, c), naive_eval(sys.expr, c)) < 1e-12);
    }
    CHECK_THROWS_AS(flux_pp(*p1, *p1, *l1, 1.), Error);
}

TEST_CASE("post-processed rates on a small sequence")
{
    const auto mp = manufactured("sin-sin");
    double     e_prev = 0., d_prev = 0.;
    for (int n : {4, 8})
    {
        const auto sol = ldgh_solution(n, 1);
        const auto ps  = scalar_pp(sol.fields[0], sol.p(), f::ScalarField::constant(1.));
        const auto us  = flux_pp(sol.fields[0], sol.p(), sol.fields[2], 1.);
        const double e = l2_error(ps, mp.p);
        const double d = l2_error_div(us, mp.div_u());
        if (n == 8)
        {
            CHECK(std::log2(e_prev / e) > 2.7);
            CHECK(std::log2(d_prev / d) > 1.7);
        }
        e_prev = e;
        d_prev = d;
    }
}

TEST_CASE("ldgh with tau = h")
{
    // small stabilization: p drops to order k, u keeps k+1
    const auto    mp = manufactured("sin-sin");
    SolverOptions o;
    o.inner_pc = PcKind::exact;
    for (int k : {1, 2})
    {
        double ep = 0., eu = 0.;
        for (int n : {16, 32})
        {
            const double tau = 1. / n;
            const auto   sol = solve_model(unit_square(n), Method::ldgh, k, mp.data(tau), o);
            const double a   = l2_error(sol.p(), mp.p);
            const double b   = l2_error(sol.fields[0], mp.u());
            if (n == 32)
            {
                CHECK(std::abs(std::log2(ep / a) - k) < 0.2);
                CHECK(std::abs(std::log2(eu / b) - (k + 1)) < 0.2);
            }
            ep = a;
            eu = b;
        }
    }
}
