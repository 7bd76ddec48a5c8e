#include "slatefem/problem.hpp"

#include <cmath>
#include <numbers>

namespace slatefem
{

using namespace forms;

std::string method_name(Method m)
{
    switch (m)
    {
    case Method::mixed_hybrid: return "mixed-hybrid";
    case Method::ldgh: return "ldgh";
    case Method::cg_primal: return "cg-primal";
    }
    return "?";
}

Method parse_method(const std::string& name)
{
    if (name == "mixed-hybrid")
        return Method::mixed_hybrid;
    if (name == "ldgh")
        return Method::ldgh;
    if (name == "cg-primal")
        return Method::cg_primal;
    throw Error("unknown method '" + name + "' (expected mixed-hybrid, ldgh or cg-primal)");
}

VectorFn ManufacturedProblem::u() const
{
    return [g = grad_p, k = kappa](const Vec2& x) -> Vec2 { return -k * g(x); };
}

ScalarFn ManufacturedProblem::div_u() const
{
    return [f = f, p = p, c = c](const Vec2& x) { return f(x) - c * p(x); };
}

ProblemData ManufacturedProblem::data(double tau, int data_degree) const
{
    ProblemData d;
    d.kappa = ScalarField::constant(kappa);
    d.c     = ScalarField::constant(c);
    d.f     = {f, data_degree};
    d.p0    = {p, data_degree};
    d.flux  = {u(), data_degree};
    d.tau   = tau;
    return d;
}

ManufacturedProblem manufactured(const std::string& id)
{
    constexpr double pi = std::numbers::pi;
    ManufacturedProblem mp;
    mp.id = id;
    if (id == "sin-sin")
    {
        mp.p      = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
        mp.grad_p = [](const Vec2& x) {
            return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
        };
        mp.f = [](const Vec2& x) { return (2. * pi * pi + 1.) * std::sin(pi * x.x()) * std::sin(pi * x.y()); };
    }
    else if (id == "exp-sin")
    {
        const auto s = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
        const auto ds = [](const Vec2& x) {
            return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
        };
        mp.p      = [s](const Vec2& x) { return std::exp(s(x)); };
        mp.grad_p = [s, ds](const Vec2& x) -> Vec2 { return std::exp(s(x)) * ds(x); };
        // -lap p + p with lap p = p (|grad s|^2 + lap s), lap s = -2 pi^2 s
        mp.f = [s, ds](const Vec2& x) {
            const double p = std::exp(s(x));
            return -p * (ds(x).squaredNorm() - 2. * pi * pi * s(x)) + p;
        };
    }
    else
        throw Error("unknown manufactured solution '" + id + "' (expected sin-sin or exp-sin)");
    return mp;
}

namespace
{

std::vector< int > layout(const std::vector< SpacePtr >& spaces)
{
    std::vector< int > off{0};
    for (const auto& s : spaces)
        off.push_back(off.back() + s->ndof_global());
    return off;
}

void add_facets(FormIR& form, const Expr& integrand, bool with_dirichlet)
{
    form.add(dS, integrand);
    if (with_dirichlet)
        form.add(ds(), integrand);
    else
        form.add(ds(BoundaryLabel::neumann), integrand);
}

} // namespace

FormPtr ModelForms::block(int i, int j) const { return std::make_shared< const FormIR >(a->restrict_fields({i}, {j})); }
FormPtr ModelForms::rhs(int i) const { return std::make_shared< const FormIR >(L->restrict_fields({i})); }
std::vector< int > ModelForms::offsets() const { return layout(spaces); }
std::vector< int > MixedSystem::offsets() const { return layout(spaces); }

ModelForms model_problem_forms(const MeshPtr& mesh, Method method, int degree, const ProblemData& data)
{
    ModelForms mf;
    mf.method       = method;
    mf.degree       = degree;
    const Mesh& m   = *mesh;
    const Expr mu   = field(data.kappa.reciprocal());
    const Expr c    = field(data.c);
    const Expr f    = field(data.f);
    const Expr p0   = field(data.p0);
    const Expr g    = inner(field(data.flux), normal());
    const Expr tau  = constant(data.tau);

    if (method == Method::cg_primal)
    {
        if (degree < 1 || degree > 4)
            throw Error("cg-primal supports degrees 1..4, got " + std::to_string(degree));
        const auto V = create_space(mesh, {Family::CG, degree});
        mf.spaces    = {V};
        auto a       = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{V}, {V}});
        a->add(dx, field(data.kappa) * inner(grad(test()), grad(trial())) + c * inner(test(), trial()));
        auto L = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{V}});
        L->add(dx, inner(test(), f));
        L->add(ds(BoundaryLabel::neumann), -inner(test(), g));
        mf.a = a;
        mf.L = L;

        std::vector< char > mark(static_cast< std::size_t >(V->ndof_global()), 0);
        for (int fct = 0; fct < m.num_facets(); ++fct)
        {
            if (m.facet_kind(fct) != FacetKind::exterior || m.exterior_label(fct) != BoundaryLabel::dirichlet)
                continue;
            for (int v : m.facet_vertices(fct))
                mark[v] = 1;
            for (int d : V->facet_dofs(fct))
                mark[d] = 1;
        }
        const auto x = dof_coordinates(*V);
        for (int i = 0; i < V->ndof_global(); ++i)
            if (mark[i])
            {
                mf.bc_dofs.push_back(i);
                mf.bc_values.push_back(data.p0.fn(x[i]));
            }
        return mf;
    }

    SpacePtr U, P, T;
    if (method == Method::mixed_hybrid)
    {
        if (degree < 1 || degree > 3)
            throw Error("mixed-hybrid supports degrees 1..3, got " + std::to_string(degree));
        U = break_space(create_space(mesh, {Family::RT, degree}));
        P = create_space(mesh, {Family::DG, degree - 1});
        T = create_space(mesh, {Family::Trace, degree - 1});
    }
    else
    {
        if (degree < 0 || degree > 2)
            throw Error("ldgh supports degrees 0..2, got " + std::to_string(degree));
        U = create_space(mesh, {Family::VectorDG, degree});
        P = create_space(mesh, {Family::DG, degree});
        T = create_space(mesh, {Family::Trace, degree});
    }
    mf.spaces = {U, P, T};
    auto a    = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{U, P, T}, {U, P, T}});
    auto L    = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{U, P, T}});

    a->add(dx, mu * inner(test(0), trial(0)) - inner(div(test(0)), trial(1)));
    L->add(dx, inner(test(1), f));
    L->add(ds(BoundaryLabel::neumann), -inner(test(2), g));

    if (method == Method::mixed_hybrid)
    {
        a->add(dx, inner(test(1), div(trial(0))) + c * inner(test(1), trial(1)));
        add_facets(*a, inner(jump(test(0)), trial(2)) - inner(test(2), jump(trial(0))), false);
        L->add(ds(BoundaryLabel::dirichlet), -inner(jump(test(0)), p0));
    }
    else
    {
        a->add(dx, -inner(grad(test(1)), trial(0)) + c * inner(test(1), trial(1)));
        add_facets(*a, inner(jump(test(0)), trial(2)), true);
        // this cell's side of the numerical flux u.n + tau (p - lambda)
        add_facets(*a,
                   inner(test(1), jump(trial(0))) + tau * inner(test(1), trial(1)) - tau * inner(test(1), trial(2)),
                   true);
        add_facets(*a,
                   -inner(test(2), jump(trial(0))) - tau * inner(test(2), trial(1)) + tau * inner(test(2), trial(2)),
                   false);
    }
    mf.a = a;
    mf.L = L;

    for (int fct = 0; fct < m.num_facets(); ++fct)
    {
        if (m.facet_kind(fct) != FacetKind::exterior || m.exterior_label(fct) != BoundaryLabel::dirichlet)
            continue;
        const auto dofs = T->facet_dofs(fct);
        std::vector< double > vals(dofs.size(), 0.);
        if (method == Method::ldgh)
            vals = trace_projection(*T, fct, data.p0.fn);
        for (std::size_t j = 0; j < dofs.size(); ++j)
        {
            mf.bc_dofs.push_back(dofs[j]);
            mf.bc_values.push_back(vals[j]);
        }
    }
    return mf;
}

MixedSystem mixed_system(const MeshPtr& mesh, int degree, const ProblemData& data)
{
    if (degree < 1 || degree > 3)
        throw Error("mixed system supports RT degrees 1..3, got " + std::to_string(degree));
    MixedSystem ms;
    ms.degree     = degree;
    const auto U  = create_space(mesh, {Family::RT, degree});
    const auto P  = create_space(mesh, {Family::DG, degree - 1});
    ms.spaces     = {U, P};
    const Expr mu = field(data.kappa.reciprocal());
    auto       a  = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{U, P}, {U, P}});
    a->add(dx, mu * inner(test(0), trial(0)) - inner(div(test(0)), trial(1)) + inner(test(1), div(trial(0))) +
                   field(data.c) * inner(test(1), trial(1)));
    auto L = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{U, P}});
    L->add(dx, inner(test(1), field(data.f)));
    L->add(ds(BoundaryLabel::dirichlet), -inner(jump(test(0)), field(data.p0)));
    ms.a = a;
    ms.L = L;

    // same rule the hybridized trace equation uses for <gamma, flux.n>
    FormIR neumann({{create_space(mesh, {Family::Trace, degree - 1})}});
    neumann.add(ds(BoundaryLabel::neumann), inner(test(), inner(field(data.flux), normal())));
    const int exactness = quadrature_exactness(neumann, neumann.terms().front());

    const Mesh& m = *mesh;
    for (int fct = 0; fct < m.num_facets(); ++fct)
    {
        if (m.facet_kind(fct) != FacetKind::exterior || m.exterior_label(fct) != BoundaryLabel::neumann)
            continue;
        const auto dofs = U->facet_dofs(fct);
        const auto vals = rt_facet_moments(*U, fct, data.flux.fn, exactness);
        for (std::size_t j = 0; j < dofs.size(); ++j)
        {
            ms.bc_dofs.push_back(dofs[j]);
            ms.bc_values.push_back(vals[j]);
        }
    }
    return ms;
}

Mesh label_left_neumann(const Mesh& mesh)
{
    return mark_boundary(mesh, [](const Vec2& x) -> std::optional< BoundaryLabel > {
        return x.x() < 1e-12 ? BoundaryLabel::neumann : BoundaryLabel::dirichlet;
    });
}

} // namespace slatefem
