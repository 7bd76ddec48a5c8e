#ifndef SLATEFEM_POSTPROCESS_HPP
#define SLATEFEM_POSTPROCESS_HPP

#include "slatefem/slate.hpp"

namespace slatefem
{

struct PostProcessConfig
{
    int multiplier_degree = 0; // l, with 0 <= l <= degree of p_h
};

/// A cell-local solve written as a Slate expression together with the
/// discontinuous space its result lives on.
struct LocalPostProcess
{
    slate::Expr expr;
    SpacePtr    target;
};

/// Per cell: find p* in P_{k+1}, psi in P_l with
///   <grad w, grad p*> + <w, psi> = -<grad w, kappa^{-1} u_h>,
///   <phi, p*> = <phi, p_h>.
LocalPostProcess scalar_pp_system(const Function& u_h, const Function& p_h, const forms::ScalarField& kappa,
                                  const PostProcessConfig& cfg = {});
Function         scalar_pp(const Function& u_h, const Function& p_h, const forms::ScalarField& kappa,
                           const PostProcessConfig& cfg = {});

/// Per cell: u* in RT(k+1) matching the moments of u_h against [P_{k-1}]^2
/// and the facet moments of the numerical flux u_h.n + tau (p_h - lambda_h)
/// against P_k(e). Result lives on broken RT(k+1).
LocalPostProcess flux_pp_system(const Function& u_h, const Function& p_h, const Function& lambda_h, double tau);
Function         flux_pp(const Function& u_h, const Function& p_h, const Function& lambda_h, double tau);

/// Largest |u.n+ + u.n-| over interior-facet quadrature points.
double max_normal_jump(const Function& u);

} // namespace slatefem

#endif
