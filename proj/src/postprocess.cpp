#include "slatefem/postprocess.hpp"

#include <cmath>

namespace slatefem
{

using namespace forms;

namespace
{

std::shared_ptr< const Function > share(const Function& f) { return std::make_shared< const Function >(f); }

Function assemble_result(const LocalPostProcess& lp)
{
    Function out(lp.target);
    out.coeffs = slate::assemble_vector(lp.expr);
    return out;
}

} // namespace

LocalPostProcess scalar_pp_system(const Function& u_h, const Function& p_h, const ScalarField& kappa,
                                  const PostProcessConfig& cfg)
{
    if (p_h.space->family().family != Family::DG)
        throw Error("scalar_pp: p_h must be a DG function, got " + p_h.space->name());
    if (u_h.space->element().value_size() != 2)
        throw Error("scalar_pp: u_h must be vector-valued");
    const int k = p_h.space->family().degree;
    const int l = cfg.multiplier_degree;
    if (l < 0 || l > k)
        throw Error("scalar_pp: multiplier degree " + std::to_string(l) + " outside [0, " + std::to_string(k) + "]");
    const auto mesh = p_h.space->mesh_ptr();
    const auto V    = create_space(mesh, {Family::DG, k + 1});
    const auto M    = create_space(mesh, {Family::DG, l});

    FormIR K({{V, M}, {V, M}});
    K.add(dx, inner(grad(test(0)), grad(trial(0))) + inner(test(0), trial(1)) + inner(test(1), trial(0)));
    FormIR F({{V, M}});
    F.add(dx, -inner(grad(test(0)), field(kappa.reciprocal()) * coefficient(share(u_h))) +
                  inner(test(1), coefficient(share(p_h))));

    const slate::Expr E = slate::inverse(slate::Tensor(K)) * slate::Tensor(F);
    return {slate::blocks(E, {0}), V};
}

Function scalar_pp(const Function& u_h, const Function& p_h, const ScalarField& kappa, const PostProcessConfig& cfg)
{
    Function out = assemble_result(scalar_pp_system(u_h, p_h, kappa, cfg));
    out.name     = "p_star";
    return out;
}

LocalPostProcess flux_pp_system(const Function& u_h, const Function& p_h, const Function& lambda_h, double tau)
{
    if (u_h.space->family().family != Family::VectorDG || p_h.space->family().family != Family::DG ||
        lambda_h.space->family().family != Family::Trace)
        throw Error("flux_pp: expected VectorDG flux, DG scalar and Trace multiplier from an LDG-H solve");
    const int k = u_h.space->family().degree;
    if (p_h.space->family().degree != k || lambda_h.space->family().degree != k)
        throw Error("flux_pp: u_h, p_h and lambda_h must share degree " + std::to_string(k));
    if (k + 1 > 3)
        throw Error("flux_pp: degree " + std::to_string(k) + " needs RT" + std::to_string(k + 1) +
                    ", beyond the supported RT degrees");
    const auto mesh = u_h.space->mesh_ptr();
    const auto Ud   = break_space(create_space(mesh, {Family::RT, k + 1}));
    const auto Mu   = create_space(mesh, {Family::Trace, k});

    std::vector< SpacePtr > tests;
    if (k >= 1)
        tests.push_back(create_space(mesh, {Family::VectorDG, k - 1}));
    tests.push_back(Mu);
    const int mu_field = static_cast< int >(tests.size()) - 1;

    const Expr uh = coefficient(share(u_h));
    const Expr ph = coefficient(share(p_h));
    const Expr lh = coefficient(share(lambda_h));

    FormIR A({tests, {Ud}});
    FormIR F({tests});
    if (k >= 1)
    {
        A.add(dx, inner(test(0), trial(0)));
        F.add(dx, inner(test(0), uh));
    }
    const Expr lhs = inner(test(mu_field), jump(trial(0)));
    const Expr rhs = inner(test(mu_field), jump(uh) + constant(tau) * (ph - lh));
    for (const auto& m : {dS, ds()})
    {
        A.add(m, lhs);
        F.add(m, rhs);
    }
    return {slate::solve(slate::Tensor(A), slate::Tensor(F)), Ud};
}

Function flux_pp(const Function& u_h, const Function& p_h, const Function& lambda_h, double tau)
{
    Function out = assemble_result(flux_pp_system(u_h, p_h, lambda_h, tau));
    out.name     = "u_star";
    return out;
}

double max_normal_jump(const Function& u)
{
    const auto& space = *u.space;
    if (space.element().value_size() != 2)
        throw Error("max_normal_jump: function is not vector-valued");
    const Mesh& mesh = space.mesh();
    const auto  rule = quadrature(QuadratureKind::edge, 2 * space.family().degree + 2);
    double      out  = 0.;
    for (int f = 0; f < mesh.num_facets(); ++f)
    {
        if (mesh.facet_kind(f) != FacetKind::interior)
            continue;
        const auto& fv = mesh.facet_vertices(f);
        for (int q = 0; q < rule.size(); ++q)
        {
            // same physical point seen from both cells
            const Vec2 x   = mesh.vertex(fv[0]) + rule.points[q].x() * (mesh.vertex(fv[1]) - mesh.vertex(fv[0]));
            double     sum = 0.;
            for (int side = 0; side < 2; ++side)
            {
                const int  c    = mesh.facet_cells(f)[side];
                const int  e    = mesh.facet_local_index(f)[side];
                const auto geom = cell_geometry(mesh, c);
                const Vec2 ref  = geom.jacobian.inverse() * (x - geom.origin);
                sum += evaluate(u, c, ref).dot(geom.facet_normals[e]);
            }
            out = std::max(out, std::abs(sum));
        }
    }
    return out;
}

} // namespace slatefem
