#include "slatefem/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

namespace slatefem
{

Vec2 Mesh::facet_midpoint(int f) const
{
    const auto& fv = facet_vertices_[f];
    return 0.5 * (vertex_coords_[fv[0]] + vertex_coords_[fv[1]]);
}

int Mesh::count_exterior(BoundaryLabel label) const
{
    int count = 0;
    for (int f = 0; f < num_facets(); ++f)
        if (facet_kind(f) == FacetKind::exterior && labels_[f] == label)
            ++count;
    return count;
}

Mesh build_mesh(std::vector< Vec2 > coords, std::vector< std::array< int, 3 > > cells)
{
    Mesh mesh;
    mesh.vertex_coords_ = std::move(coords);
    mesh.cell_vertices_ = std::move(cells);
    const int n_cells   = mesh.num_cells();
    mesh.cell_facets_.resize(n_cells);

    std::map< std::pair< int, int >, int > facet_of;
    for (int c = 0; c < n_cells; ++c)
    {
        const auto& v = mesh.cell_vertices_[c];
        for (int i = 0; i < 3; ++i)
            if (v[i] < 0 || v[i] >= mesh.num_vertices())
                throw Error("build_mesh: vertex index out of range");
        const Vec2   a    = mesh.vertex_coords_[v[1]] - mesh.vertex_coords_[v[0]];
        const Vec2   b    = mesh.vertex_coords_[v[2]] - mesh.vertex_coords_[v[0]];
        const double area = a.x() * b.y() - a.y() * b.x();
        if (!(area > 0.))
            throw Error("build_mesh: cell " + std::to_string(c) + " is not positively oriented");

        for (int e = 0; e < 3; ++e)
        {
            const int lo = std::min(v[(e + 1) % 3], v[(e + 2) % 3]);
            const int hi = std::max(v[(e + 1) % 3], v[(e + 2) % 3]);
            auto [it, inserted] = facet_of.try_emplace({lo, hi}, mesh.num_facets());
            if (inserted)
            {
                mesh.facet_vertices_.push_back({lo, hi});
                mesh.facet_cells_.push_back({c, -1});
                mesh.facet_local_.push_back({e, -1});
            }
            else
            {
                auto& fc = mesh.facet_cells_[it->second];
                if (fc[1] >= 0)
                    throw Error("build_mesh: facet shared by more than two cells");
                // cells are visited in increasing order, so the first owner is the "+" side
                fc[1]                               = c;
                mesh.facet_local_[it->second][1] = e;
            }
            mesh.cell_facets_[c][e] = it->second;
        }
    }
    mesh.labels_.assign(mesh.num_facets(), BoundaryLabel::dirichlet);
    return mesh;
}

Mesh build_unit_square(int n)
{
    if (n < 1)
        throw Error("build_unit_square: mesh size must be at least 1, got " + std::to_string(n));

    std::vector< Vec2 > coords;
    coords.reserve(static_cast< std::size_t >((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            coords.emplace_back(static_cast< double >(i) / n, static_cast< double >(j) / n);

    std::vector< std::array< int, 3 > > cells;
    cells.reserve(static_cast< std::size_t >(2 * n * n));
    const auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
        {
            const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
            cells.push_back({v00, v10, v11});
            cells.push_back({v00, v11, v01});
        }
    return build_mesh(std::move(coords), std::move(cells));
}

CellGeometry cell_geometry(const Mesh& mesh, int cell)
{
    if (cell < 0 || cell >= mesh.num_cells())
        throw Error("cell_geometry: cell index " + std::to_string(cell) + " out of range");

    const auto&         v = mesh.cell_vertices(cell);
    std::array< Vec2, 3 > x{mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2])};

    CellGeometry g;
    g.origin = x[0];
    g.jacobian.col(0) = x[1] - x[0];
    g.jacobian.col(1) = x[2] - x[0];
    g.det_j           = g.jacobian.determinant();
    g.inv_jt          = g.jacobian.inverse().transpose();
    for (int e = 0; e < 3; ++e)
    {
        const Vec2 t       = x[(e + 2) % 3] - x[(e + 1) % 3];
        g.facet_lengths[e] = t.norm();
        g.facet_normals[e] = Vec2(t.y(), -t.x()) / g.facet_lengths[e];
    }
    return g;
}

Mesh mark_boundary(const Mesh& mesh, const std::function< std::optional< BoundaryLabel >(const Vec2&) >& predicate)
{
    Mesh out = mesh;
    for (int f = 0; f < mesh.num_facets(); ++f)
    {
        if (mesh.facet_kind(f) != FacetKind::exterior)
            continue;
        const auto label = predicate(mesh.facet_midpoint(f));
        if (!label)
            throw Error("mark_boundary: exterior facet " + std::to_string(f) + " left unlabeled");
        out.labels_[f] = *label;
    }
    return out;
}

void write_vtk(const Mesh& mesh, std::ostream& out)
{
    char buf[96];
    out << "# vtk DataFile Version 3.0\nslatefem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_vertices() << " double\n";
    for (int v = 0; v < mesh.num_vertices(); ++v)
    {
        std::snprintf(buf, sizeof buf, "%.12e %.12e 0\n", mesh.vertex(v).x(), mesh.vertex(v).y());
        out << buf;
    }
    out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
    for (int c = 0; c < mesh.num_cells(); ++c)
    {
        const auto& v = mesh.cell_vertices(c);
        out << "3 " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    }
    out << "CELL_TYPES " << mesh.num_cells() << '\n';
    for (int c = 0; c < mesh.num_cells(); ++c)
        out << "5\n";
}

} // namespace slatefem
