#include "test_support.hpp"

#include <doctest.h>

using namespace slatefem;
using namespace testing;

namespace
{
double factorial(int n) { return n <= 1 ? 1. : n * factorial(n - 1); }

// exact integral of x^a y^b over the reference triangle
double monomial_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

double integrate(const QuadratureRule& r, const std::function< double(const Vec2&) >& f)
{
    double s = 0.;
    for (int q = 0; q < r.size(); ++q)
        s += r.weights[q] * f(r.points[q]);
    return s;
}
} // namespace

TEST_CASE("space dimensions")
{
    const auto m1 = unit_square(1);
    const auto m2 = unit_square(2);
    CHECK(create_space(m2, {Family::DG, 0})->ndof_global() == 8);
    CHECK(create_space(m1, {Family::Trace, 0})->ndof_global() == 5);
    const auto rt1 = create_space(m1, {Family::RT, 1});
    CHECK(rt1->ndof_global() == 5);
    const auto rt1b = break_space(rt1);
    CHECK(rt1b->ndof_global() == 6);
    CHECK(rt1b->broken());
    CHECK_THROWS_AS(break_space(rt1b), Error);
    CHECK_THROWS_AS(break_space(create_space(m1, {Family::DG, 1})), Error);
    CHECK(break_space(create_space(m2, {Family::RT, 2}))->ndof_global() == 64);

    for (int k = 1; k <= 3; ++k)
        CHECK(create_space(m1, {Family::RT, k})->local_dim() == k * (k + 2));
    for (int k = 0; k <= 3; ++k)
    {
        CHECK(create_space(m1, {Family::DG, k})->local_dim() == (k + 1) * (k + 2) / 2);
        CHECK(create_space(m1, {Family::VectorDG, k})->local_dim() == (k + 1) * (k + 2));
        CHECK(create_space(m1, {Family::Trace, k})->dofs_per_facet() == k + 1);
    }
    CHECK_THROWS_AS(create_space(m1, {Family::RT, 0}), Error);
    CHECK_THROWS_AS(create_space(m1, {Family::RT, 4}), Error);
    CHECK_THROWS_AS(create_space(m1, {Family::CG, 5}), Error);
    CHECK_THROWS_AS(create_space(m1, {Family::DG, 4}), Error);
}

TEST_CASE("dof sharing")
{
    const auto m = unit_square(3);
    for (int k = 1; k <= 3; ++k)
    {
        const auto         rt = create_space(m, {Family::RT, k});
        std::vector< int > uses(rt->ndof_global(), 0);
        for (int c = 0; c < m->num_cells(); ++c)
            for (int d : rt->cell_dofs(c))
                ++uses[d];
        for (int f = 0; f < m->num_facets(); ++f)
            for (int d : rt->facet_dofs(f))
                CHECK(uses[d] == m->facet_num_cells(f));
        CHECK(break_space(rt)->discontinuous());
    }
    for (auto fam : {Family::DG, Family::VectorDG})
    {
        const auto         s = create_space(m, {fam, 2});
        std::vector< int > uses(s->ndof_global(), 0);
        for (int c = 0; c < m->num_cells(); ++c)
            for (int d : s->cell_dofs(c))
                ++uses[d];
        for (int u : uses)
            CHECK(u == 1);
    }
    const auto tr = create_space(m, {Family::Trace, 1});
    std::vector< int > owner(tr->ndof_global(), -1);
    for (int f = 0; f < m->num_facets(); ++f)
        for (int d : tr->facet_dofs(f))
        {
            CHECK(owner[d] == -1);
            owner[d] = f;
        }
}

TEST_CASE("quadrature exactness")
{
    for (int ex = 0; ex <= max_quadrature_exactness; ++ex)
    {
        const auto cell = quadrature(QuadratureKind::cell, ex);
        CHECK(std::abs(integrate(cell, [](const Vec2&) { return 1.; }) - 0.5) < 1e-14);
        for (double w : cell.weights)
            CHECK(w > 0.);
        for (int a = 0; a <= ex; ++a)
            for (int b = 0; a + b <= ex; ++b)
            {
                const double got = integrate(cell, [&](const Vec2& x) { return std::pow(x.x(), a) * std::pow(x.y(), b); });
                CHECK(std::abs(got - monomial_integral(a, b)) < 1e-14);
            }
        const auto edge = quadrature(QuadratureKind::edge, ex);
        for (int a = 0; a <= ex; ++a)
            CHECK(std::abs(integrate(edge, [&](const Vec2& x) { return std::pow(x.x(), a); }) - 1. / (a + 1)) < 1e-14);
    }
    const auto r4 = quadrature(QuadratureKind::cell, 4);
    CHECK(std::abs(integrate(r4, [](const Vec2& x) { return x.x() * x.x() * x.y() * x.y(); }) - 1. / 180.) < 1e-15);
    CHECK_THROWS_AS(quadrature(QuadratureKind::cell, 13), Error);
}

TEST_CASE("reference tabulation")
{
    const std::vector< Vec2 > verts{Vec2(0., 0.), Vec2(1., 0.), Vec2(0., 1.)};
    const auto                cg1 = ReferenceElement({Family::CG, 1}).tabulate(verts);
    for (int p = 0; p < 3; ++p)
        for (int i = 0; i < 3; ++i)
            CHECK(std::abs(cg1.value(p, i) - (p == i ? 1. : 0.)) < 1e-14);

    const std::vector< Vec2 > pts{Vec2(0.2, 0.3), Vec2(0.7, 0.1), Vec2(0., 0.)};
    const auto                dg0 = ReferenceElement({Family::DG, 0}).tabulate(pts);
    for (int p = 0; p < 3; ++p)
        CHECK(dg0.value(p, 0) == doctest::Approx(1.));

    // partition of unity
    const auto rule = quadrature(QuadratureKind::cell, 6);
    for (auto fam : {Family::CG, Family::DG})
        for (int k = fam == Family::CG ? 1 : 0; k <= 3; ++k)
        {
            const auto t = ReferenceElement({fam, k}).tabulate(rule.points);
            for (int p = 0; p < t.npts; ++p)
            {
                double s = 0., gx = 0.;
                for (int i = 0; i < t.ndof; ++i)
                {
                    s += t.value(p, i);
                    gx += t.grad(p, i, 0, 0);
                }
                CHECK(std::abs(s - 1.) < 1e-13);
                CHECK(std::abs(gx) < 1e-11);
            }
        }

    const std::vector< Vec2 > outside{Vec2(0.8, 0.8)};
    CHECK_THROWS_AS(ReferenceElement({Family::DG, 1}).tabulate(outside), Error);
}

TEST_CASE("RT1 edge fluxes")
{
    // reference cell: outward normals and lengths of the three edges
    const Vec2   normals[3] = {Vec2(1., 1.) / std::sqrt(2.), Vec2(-1., 0.), Vec2(0., -1.)};
    const double lengths[3] = {std::sqrt(2.), 1., 1.};
    const ReferenceElement rt({Family::RT, 1});
    const double           g = 0.5 / std::sqrt(3.);
    const std::vector< double > t{0.5 - g, 0.5 + g};
    for (int e = 0; e < 3; ++e)
    {
        const auto tab = rt.tabulate_edge(e, t);
        for (int i = 0; i < 3; ++i)
        {
            double flux = 0.;
            double vmin = 1e300, vmax = -1e300;
            for (int p = 0; p < 2; ++p)
            {
                const double vn = tab.value(p, i, 0) * normals[e].x() + tab.value(p, i, 1) * normals[e].y();
                flux += 0.5 * lengths[e] * vn;
                vmin = std::min(vmin, vn);
                vmax = std::max(vmax, vn);
            }
            CHECK(vmax - vmin < 1e-14); // constant normal component
            CHECK(std::abs(flux - (i == e ? 1. : 0.)) < 1e-14);
        }
    }
}

TEST_CASE("RT normal continuity")
{
    const auto m    = unit_square(3);
    const auto rule = quadrature(QuadratureKind::edge, 6);
    for (int k = 1; k <= 3; ++k)
    {
        const auto rt = create_space(m, {Family::RT, k});
        const auto u  = random_function(rt);
        double     worst = 0.;
        for (int f = 0; f < m->num_facets(); ++f)
        {
            if (m->facet_kind(f) != FacetKind::interior)
                continue;
            const auto& fv = m->facet_vertices(f);
            for (int q = 0; q < rule.size(); ++q)
            {
                const Vec2 x   = m->vertex(fv[0]) + rule.points[q].x() * (m->vertex(fv[1]) - m->vertex(fv[0]));
                double     sum = 0.;
                for (int side = 0; side < 2; ++side)
                {
                    const int  c   = m->facet_cells(f)[side];
                    const auto geo = cell_geometry(*m, c);
                    const Vec2 ref = geo.jacobian.inverse() * (x - geo.origin);
                    sum += evaluate(*u, c, ref).dot(geo.facet_normals[m->facet_local_index(f)[side]]);
                }
                worst = std::max(worst, std::abs(sum));
            }
        }
        CHECK(worst < 1e-11);
    }
}

TEST_CASE("trace space matches RT normal traces")
{
    std::vector< double > t;
    for (int i = 0; i < 9; ++i)
        t.push_back((i + 0.5) / 9.);
    for (int k = 1; k <= 3; ++k)
    {
        const ReferenceElement rt({Family::RT, k});
        const ReferenceElement tr({Family::Trace, k - 1});
        const Vec2             normals[3] = {Vec2(1., 1.) / std::sqrt(2.), Vec2(-1., 0.), Vec2(0., -1.)};
        for (int e = 0; e < 3; ++e)
        {
            const auto      tu = rt.tabulate_edge(e, t);
            const auto      tt = tr.tabulate_edge(e, t);
            Eigen::MatrixXd B(t.size(), tt.ndof);
            for (std::size_t p = 0; p < t.size(); ++p)
                for (int j = 0; j < tt.ndof; ++j)
                    B(p, j) = tt.value(p, j);
            for (int i = 0; i < tu.ndof; ++i)
            {
                Eigen::VectorXd vn(t.size());
                for (std::size_t p = 0; p < t.size(); ++p)
                    vn[p] = tu.value(p, i, 0) * normals[e].x() + tu.value(p, i, 1) * normals[e].y();
                const Eigen::VectorXd c = B.colPivHouseholderQr().solve(vn);
                CHECK((B * c - vn).norm() < 1e-11);
            }
        }
    }
}

TEST_CASE("interpolation and errors")
{
    const auto m   = unit_square(3);
    auto       lin = [](const Vec2& x) { return 1. + 2. * x.x() - 3. * x.y(); };
    auto       quad = [](const Vec2& x) { return x.x() * x.x() - x.x() * x.y() + 0.5; };
    CHECK(l2_error(interpolate(create_space(m, {Family::CG, 1}), lin), lin) < 1e-13);
    CHECK(l2_error(interpolate(create_space(m, {Family::DG, 2}), quad), quad) < 1e-13);
    CHECK(l2_error(interpolate(create_space(m, {Family::CG, 3}), quad), quad) < 1e-13);
    const VectorFn v = [](const Vec2& x) { return Vec2(x.y(), 2. * x.x()); };
    CHECK(l2_error(interpolate(create_space(m, {Family::VectorDG, 1}), v), v) < 1e-13);
    // DG0 of a linear function: error of the nodal (centroid) interpolant is nonzero
    CHECK(l2_error(interpolate(create_space(m, {Family::DG, 0}), lin), lin) > 1e-3);
}

TEST_CASE("facet moments")
{
    const auto m  = unit_square(2);
    const auto rt = create_space(m, {Family::RT, 2});
    for (int f = 0; f < m->num_facets(); ++f)
    {
        const auto   mom = rt_facet_moments(*rt, f, [](const Vec2&) { return Vec2(1., 2.); });
        const auto&  fv  = m->facet_vertices(f);
        const double len = (m->vertex(fv[1]) - m->vertex(fv[0])).norm();
        CHECK(mom.size() == 2);
        CHECK(std::abs(mom[0] - len * Vec2(1., 2.).dot(facet_global_normal(*m, f))) < 1e-14);
        CHECK(std::abs(mom[1]) < 1e-14); // constant against a mean-free Legendre polynomial
    }
    const auto tr = create_space(m, {Family::Trace, 1});
    for (int f = 0; f < m->num_facets(); ++f)
    {
        // a linear function is reproduced by its projection
        auto       q  = [](const Vec2& x) { return 2. * x.x() + x.y(); };
        const auto c  = trace_projection(*tr, f, q);
        Function   lam(tr);
        for (std::size_t j = 0; j < c.size(); ++j)
            lam.coeffs[tr->facet_dofs(f)[j]] = c[j];
        const auto& fv = m->facet_vertices(f);
        CHECK(std::abs(c[0] - 0.5 * (q(m->vertex(fv[0])) + q(m->vertex(fv[1])))) < 1e-14); // mean
    }
}
