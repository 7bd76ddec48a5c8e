#ifndef SLATEFEM_MESH_HPP
#define SLATEFEM_MESH_HPP

#include "slatefem/common.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace slatefem
{

enum class FacetKind
{
    interior,
    exterior
};

enum class BoundaryLabel
{
    dirichlet,
    neumann
};

/// Affine map data of one triangle. Local edge e is opposite local vertex e and
/// runs from vertex (e+1)%3 to vertex (e+2)%3.
struct CellGeometry
{
    Vec2                origin;   // physical position of local vertex 0
    Mat2                jacobian; // columns v1-v0, v2-v0
    double              det_j = 0.;
    Mat2                inv_jt;
    std::array<Vec2, 3> facet_normals; // outward, unit
    std::array<double, 3> facet_lengths{};

    Vec2 map(const Vec2& ref) const { return origin + jacobian * ref; }
};

/// 2D simplicial mesh. Immutable once built; relabeling returns a copy.
class Mesh
{
public:
    int num_cells() const { return static_cast< int >(cell_vertices_.size()); }
    int num_vertices() const { return static_cast< int >(vertex_coords_.size()); }
    int num_facets() const { return static_cast< int >(facet_vertices_.size()); }

    const std::array< int, 3 >& cell_vertices(int c) const { return cell_vertices_[c]; }
    const std::array< int, 3 >& cell_facets(int c) const { return cell_facets_[c]; }
    const Vec2&                 vertex(int v) const { return vertex_coords_[v]; }

    /// Endpoints sorted by global vertex index.
    const std::array< int, 2 >& facet_vertices(int f) const { return facet_vertices_[f]; }

    /// Incident cells, lower index first ("+" side). Second entry is -1 on the boundary.
    const std::array< int, 2 >& facet_cells(int f) const { return facet_cells_[f]; }
    const std::array< int, 2 >& facet_local_index(int f) const { return facet_local_[f]; }
    int                         facet_num_cells(int f) const { return facet_cells_[f][1] < 0 ? 1 : 2; }
    FacetKind facet_kind(int f) const { return facet_cells_[f][1] < 0 ? FacetKind::exterior : FacetKind::interior; }
    BoundaryLabel exterior_label(int f) const { return labels_[f]; }
    Vec2          facet_midpoint(int f) const;

    /// True when local edge e of cell c runs from the lower to the higher global
    /// vertex, i.e. its local parametrization and outward normal agree with the
    /// global facet orientation.
    bool edge_agrees(int c, int e) const
    {
        const auto& v = cell_vertices_[c];
        return v[(e + 1) % 3] < v[(e + 2) % 3];
    }

    int count_exterior(BoundaryLabel label) const;

    friend Mesh build_unit_square(int n);
    friend Mesh build_mesh(std::vector< Vec2 > coords, std::vector< std::array< int, 3 > > cells);
    friend Mesh mark_boundary(const Mesh& mesh,
                              const std::function< std::optional< BoundaryLabel >(const Vec2&) >& predicate);
    friend bool operator==(const Mesh&, const Mesh&) = default;

private:
    std::vector< Vec2 >                 vertex_coords_;
    std::vector< std::array< int, 3 > > cell_vertices_;
    std::vector< std::array< int, 3 > > cell_facets_;
    std::vector< std::array< int, 2 > > facet_vertices_;
    std::vector< std::array< int, 2 > > facet_cells_;
    std::vector< std::array< int, 2 > > facet_local_;
    std::vector< BoundaryLabel >        labels_;
};

/// n x n grid of squares, each split along the lower-left to upper-right diagonal.
/// All exterior facets start out Dirichlet.
Mesh build_unit_square(int n);

/// Mesh from explicit coordinates and counter-clockwise triangles.
Mesh build_mesh(std::vector< Vec2 > coords, std::vector< std::array< int, 3 > > cells);

CellGeometry cell_geometry(const Mesh& mesh, int cell);

/// Relabel every exterior facet according to the predicate evaluated at its
/// midpoint. Throws if the predicate leaves a facet unlabeled.
Mesh mark_boundary(const Mesh& mesh, const std::function< std::optional< BoundaryLabel >(const Vec2&) >& predicate);

/// Legacy ASCII VTK dump of the triangulation.
void write_vtk(const Mesh& mesh, std::ostream& out);

} // namespace slatefem

#endif
