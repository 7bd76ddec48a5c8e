#ifndef SLATEFEM_FEM_HPP
#define SLATEFEM_FEM_HPP

#include "slatefem/mesh.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace slatefem
{

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

enum class QuadratureKind
{
    cell, // reference triangle (0,0),(1,0),(0,1)
    edge  // unit interval [0,1]; points stored as (t, 0)
};

struct QuadratureRule
{
    QuadratureKind        kind = QuadratureKind::cell;
    std::vector< Vec2 >   points;
    std::vector< double > weights;
    int                   exactness = 0;

    int size() const { return static_cast< int >(weights.size()); }
};

inline constexpr int max_quadrature_exactness = 12;

/// Collapsed Gauss-Legendre rule on the triangle, Gauss-Legendre on the edge.
QuadratureRule quadrature(QuadratureKind kind, int exactness);

/// Shifted Legendre polynomial of order j on [0,1] and its derivative.
double legendre01(int j, double t);

// ---------------------------------------------------------------------------
// Element families
// ---------------------------------------------------------------------------

enum class Family
{
    RT,       // Raviart-Thomas, degree k >= 1, local dim k(k+2)
    DG,       // discontinuous Lagrange
    VectorDG, // two DG components
    CG,       // continuous Lagrange
    Trace     // facet polynomials, k+1 unknowns per facet
};

struct ElementFamily
{
    Family family = Family::DG;
    int    degree = 0;

    std::string name() const;
    friend bool operator==(const ElementFamily&, const ElementFamily&) = default;
};

/// Basis values on the reference cell. Layout is point-major:
/// value(p, i, c) and grad(p, i, c, d) for component c and direction d.
struct Tabulation
{
    int                   npts  = 0;
    int                   ndof  = 0;
    int                   vsize = 1;
    std::vector< double > values;
    std::vector< double > grads;

    double value(int p, int i, int c = 0) const { return values[(p * ndof + i) * vsize + c]; }
    double grad(int p, int i, int c, int d) const { return grads[((p * ndof + i) * vsize + c) * 2 + d]; }
    double div(int p, int i) const { return grad(p, i, 0, 0) + grad(p, i, 1, 1); }
};

/// Reference element. For Trace the basis lives on the unit interval; use
/// tabulate_edge to evaluate the cell-local trace basis on a triangle edge.
class ReferenceElement
{
public:
    explicit ReferenceElement(ElementFamily family);

    const ElementFamily& family() const { return family_; }
    int                  dim() const { return dim_; }
    int                  value_size() const { return vsize_; }
    /// Polynomial degree of the basis (RT(k) contains degree-k polynomials).
    int poly_degree() const { return family_.degree; }

    /// Values and gradients at reference-cell points (or reference-edge
    /// parameters stored as (t,0) for Trace).
    Tabulation tabulate(std::span< const Vec2 > points) const;

    /// Cell-local basis at points of local edge `edge` given by parameters t.
    /// Trace bases are nonzero only on their own edge.
    Tabulation tabulate_edge(int edge, std::span< const double > t) const;

private:
    ElementFamily         family_;
    int                   dim_   = 0;
    int                   vsize_ = 1;
    int                   mono_degree_ = 0;
    // coefficients over monomials, per dof and component: coeffs_[(i*vsize + c)*nmono + m]
    std::vector< double > coeffs_;
};

/// Reference-cell point of parameter t on local edge e.
Vec2 edge_point(int edge, double t);

// ---------------------------------------------------------------------------
// Function spaces
// ---------------------------------------------------------------------------

class FunctionSpace;
using SpacePtr = std::shared_ptr< const FunctionSpace >;
using MeshPtr  = std::shared_ptr< const Mesh >;

class FunctionSpace
{
public:
    const Mesh&             mesh() const { return *mesh_; }
    const MeshPtr&          mesh_ptr() const { return mesh_; }
    const ElementFamily&    family() const { return element_->family(); }
    const ReferenceElement& element() const { return *element_; }
    bool                    broken() const { return broken_; }
    int                     ndof_global() const { return ndof_global_; }
    int                     local_dim() const { return element_->dim(); }
    int                     uid() const { return uid_; }

    /// No global dof shared between cells.
    bool discontinuous() const;

    std::span< const int > cell_dofs(int c) const
    {
        return {cell_dofs_.data() + static_cast< std::size_t >(c) * local_dim(), static_cast< std::size_t >(local_dim())};
    }
    /// Per cell-local basis sign (+-1) relating the pushed-forward reference
    /// basis to the globally oriented one. All ones except RT and Trace.
    std::span< const double > cell_signs(int c) const
    {
        return {cell_signs_.data() + static_cast< std::size_t >(c) * local_dim(), static_cast< std::size_t >(local_dim())};
    }
    /// Dofs attached to facet f (Trace, conforming RT, CG edge interiors).
    std::span< const int > facet_dofs(int f) const;
    int                    dofs_per_facet() const { return dofs_per_facet_; }

    std::string name() const;

    friend SpacePtr create_space(MeshPtr mesh, ElementFamily family);
    friend SpacePtr break_space(const SpacePtr& space);

private:
    FunctionSpace() = default;

    MeshPtr                                   mesh_;
    std::shared_ptr< const ReferenceElement > element_;
    bool                                      broken_         = false;
    int                                       ndof_global_    = 0;
    int                                       dofs_per_facet_ = 0;
    int                                       uid_            = 0;
    std::vector< int >                        cell_dofs_;
    std::vector< double >                     cell_signs_;
    std::vector< int >                        facet_dofs_;
};

/// Supported: RT k in {1,2,3}, DG/VectorDG/Trace k in {0..3}, CG k in {1..4}.
SpacePtr create_space(MeshPtr mesh, ElementFamily family);

/// Cell-wise copy of a conforming RT space (same local element and signs).
SpacePtr break_space(const SpacePtr& space);

// ---------------------------------------------------------------------------
// Functions and pointwise evaluation
// ---------------------------------------------------------------------------

struct Function
{
    explicit Function(SpacePtr s, std::string n = {})
        : space(std::move(s)), coeffs(Eigen::VectorXd::Zero(space->ndof_global())), name(std::move(n))
    {}

    SpacePtr        space;
    Eigen::VectorXd coeffs;
    std::string     name;

    Eigen::VectorXd cell_coeffs(int c) const;
};

/// Basis of a space pushed forward to one cell at a set of points.
/// value[c] and grad[d] are (npts x ndof); grad is for scalar spaces only,
/// div for vector spaces only.
struct CellBasis
{
    int             npts  = 0;
    int             ndof  = 0;
    int             vsize = 1;
    Eigen::MatrixXd value[2];
    Eigen::MatrixXd grad[2];
    Eigen::MatrixXd div;
};

CellBasis push_forward(const FunctionSpace& space, const Tabulation& ref, const CellGeometry& geom, int cell);

using ScalarFn = std::function< double(const Vec2&) >;
using VectorFn = std::function< Vec2(const Vec2&) >;

/// Value of a scalar function (component 0) or vector function at a reference point of a cell.
Vec2   evaluate(const Function& fn, int cell, const Vec2& ref_point);
double l2_error(const Function& fn, const ScalarFn& exact, int exactness = max_quadrature_exactness);
double l2_error(const Function& fn, const VectorFn& exact, int exactness = max_quadrature_exactness);
/// L2 error of the divergence of a vector-valued function.
double l2_error_div(const Function& fn, const ScalarFn& exact_div, int exactness = max_quadrature_exactness);

/// Normal-moment dofs of a vector field on facet f of an RT space:
/// integral of (q . n_global) L_j over the facet.
std::vector< double > rt_facet_moments(const FunctionSpace& rt, int facet, const VectorFn& q,
                                       int exactness = max_quadrature_exactness);

/// L2 projection of a scalar field onto the trace basis of facet f.
std::vector< double > trace_projection(const FunctionSpace& trace, int facet, const ScalarFn& q);

/// Physical node positions of a Lagrange space (CG, DG, VectorDG), indexed by global dof.
std::vector< Vec2 > dof_coordinates(const FunctionSpace& space);

/// Nodal interpolant into a Lagrange space.
Function interpolate(const SpacePtr& space, const ScalarFn& fn);
Function interpolate(const SpacePtr& space, const VectorFn& fn);

/// Global unit normal of a facet: the low-to-high tangent rotated clockwise.
Vec2 facet_global_normal(const Mesh& mesh, int facet);

} // namespace slatefem

#endif
