#ifndef SLATEFEM_PROBLEM_HPP
#define SLATEFEM_PROBLEM_HPP

#include "slatefem/forms.hpp"

#include <string>
#include <vector>

namespace slatefem
{

enum class Method
{
    mixed_hybrid,
    ldgh,
    cg_primal
};

std::string method_name(Method m);
Method      parse_method(const std::string& name);

/// Coefficients and data of  -div(kappa grad p) + c p = f,
/// p = p0 on Dirichlet facets, u.n = flux.n on Neumann facets (u = -kappa grad p).
struct ProblemData
{
    forms::ScalarField kappa = forms::ScalarField::constant(1.);
    forms::ScalarField c     = forms::ScalarField::constant(1.);
    forms::ScalarField f     = forms::ScalarField::constant(0.);
    forms::ScalarField p0    = forms::ScalarField::constant(0.);
    forms::VectorField flux{[](const Vec2&) { return Vec2(0., 0.); }, 0};
    double             tau = 1.;
};

/// Closed-form solution with derived data.
struct ManufacturedProblem
{
    std::string id;
    ScalarFn    p;
    VectorFn    grad_p;
    ScalarFn    f;
    double      kappa = 1.;
    double      c     = 1.;

    VectorFn    u() const;     // -kappa grad p
    ScalarFn    div_u() const; // f - c p
    ProblemData data(double tau = 1., int data_degree = 4) const;
};

/// "sin-sin": p = sin(pi x) sin(pi y); "exp-sin": p = exp(sin(pi x) sin(pi y)).
ManufacturedProblem manufactured(const std::string& id);

/// Three-field hybridized system (or the single-field primal system for
/// cg-primal). Fields: mixed-hybrid [broken RT(k), DG(k-1), Trace(k-1)],
/// ldgh [VectorDG(k), DG(k), Trace(k)], cg-primal [CG(k)].
/// The trace equation is written with the sign that makes the condensed
/// operator positive-definite.
struct ModelForms
{
    Method                  method = Method::mixed_hybrid;
    int                     degree = 1;
    std::vector< SpacePtr > spaces;
    forms::FormPtr          a;
    forms::FormPtr          L;
    /// Constrained global dofs of the last field and their values.
    std::vector< int >    bc_dofs;
    std::vector< double > bc_values;

    int             num_fields() const { return static_cast< int >(spaces.size()); }
    forms::FormPtr  block(int i, int j) const;
    forms::FormPtr  rhs(int i) const;
    std::vector< int > offsets() const; // global multi-field vector layout
};

ModelForms model_problem_forms(const MeshPtr& mesh, Method method, int degree, const ProblemData& data);

/// Conforming mixed system: [RT(k), DG(k-1)], Neumann RT dofs are essential.
struct MixedSystem
{
    int                     degree = 1;
    std::vector< SpacePtr > spaces;
    forms::FormPtr          a;
    forms::FormPtr          L;
    std::vector< int >      bc_dofs; // RT dofs on Neumann facets
    std::vector< double >   bc_values;

    std::vector< int > offsets() const;
};

MixedSystem mixed_system(const MeshPtr& mesh, int degree, const ProblemData& data);

/// Marks x = 0 Neumann and the rest Dirichlet.
Mesh label_left_neumann(const Mesh& mesh);

} // namespace slatefem

#endif
