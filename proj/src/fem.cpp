#include "slatefem/fem.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

namespace slatefem
{

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace
{

// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre(int m, std::vector< double >& x, std::vector< double >& w)
{
    x.assign(m, 0.);
    w.assign(m, 0.);
    for (int i = 0; i < m; ++i)
    {
        double z  = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 1.;
        for (int it = 0; it < 100; ++it)
        {
            double p0 = 1., p1 = z;
            for (int j = 2; j <= m; ++j)
            {
                const double p2 = ((2. * j - 1.) * z * p1 - (j - 1.) * p0) / j;
                p0              = p1;
                p1              = p2;
            }
            dp              = m * (z * p1 - p0) / (z * z - 1.);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        x[i] = 0.5 * (1. - z);
        w[i] = 1. / ((1. - z * z) * dp * dp);
    }
}

} // namespace

QuadratureRule quadrature(QuadratureKind kind, int exactness)
{
    if (exactness < 0 || exactness > max_quadrature_exactness)
        throw Error("quadrature: unsupported exactness " + std::to_string(exactness));

    QuadratureRule rule;
    rule.kind      = kind;
    rule.exactness = exactness;
    std::vector< double > xu, wu, xv, wv;
    if (kind == QuadratureKind::edge)
    {
        gauss_legendre((exactness + 2) / 2, xu, wu);
        for (std::size_t i = 0; i < xu.size(); ++i)
        {
            rule.points.emplace_back(xu[i], 0.);
            rule.weights.push_back(wu[i]);
        }
        return rule;
    }
    // collapse the square onto the triangle: x = u, y = (1-u) v
    gauss_legendre((exactness + 3) / 2, xu, wu);
    gauss_legendre((exactness + 2) / 2, xv, wv);
    for (std::size_t i = 0; i < xu.size(); ++i)
        for (std::size_t j = 0; j < xv.size(); ++j)
        {
            rule.points.emplace_back(xu[i], (1. - xu[i]) * xv[j]);
            rule.weights.push_back(wu[i] * wv[j] * (1. - xu[i]));
        }
    return rule;
}

double legendre01(int j, double t)
{
    const double x = 2. * t - 1.;
    double       p0 = 1., p1 = x;
    if (j == 0)
        return 1.;
    for (int n = 2; n <= j; ++n)
    {
        const double p2 = ((2. * n - 1.) * x * p1 - (n - 1.) * p0) / n;
        p0              = p1;
        p1              = p2;
    }
    return p1;
}

// ---------------------------------------------------------------------------
// Reference elements
// ---------------------------------------------------------------------------

std::string ElementFamily::name() const
{
    const char* base = "";
    switch (family)
    {
    case Family::RT: base = "RT"; break;
    case Family::DG: base = "DG"; break;
    case Family::VectorDG: base = "VectorDG"; break;
    case Family::CG: base = "CG"; break;
    case Family::Trace: base = "Trace"; break;
    }
    return std::string(base) + "(" + std::to_string(degree) + ")";
}

namespace
{

const std::array< Vec2, 3 > ref_vertex{Vec2(0., 0.), Vec2(1., 0.), Vec2(0., 1.)};

int num_monomials(int degree) { return (degree + 1) * (degree + 2) / 2; }

// Monomials x^a y^b ordered by total degree, a descending within a degree.
std::vector< std::array< int, 2 > > monomial_exponents(int degree)
{
    std::vector< std::array< int, 2 > > out;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a)
            out.push_back({a, d - a});
    return out;
}

double ipow(double x, int n)
{
    double r = 1.;
    for (int i = 0; i < n; ++i)
        r *= x;
    return r;
}

void eval_monomials(int degree, const Vec2& p, std::vector< double >& val, std::vector< double >& dx,
                    std::vector< double >& dy)
{
    const auto exps = monomial_exponents(degree);
    val.resize(exps.size());
    dx.resize(exps.size());
    dy.resize(exps.size());
    for (std::size_t m = 0; m < exps.size(); ++m)
    {
        const auto [a, b] = exps[m];
        val[m]            = ipow(p.x(), a) * ipow(p.y(), b);
        dx[m]             = a > 0 ? a * ipow(p.x(), a - 1) * ipow(p.y(), b) : 0.;
        dy[m]             = b > 0 ? b * ipow(p.x(), a) * ipow(p.y(), b - 1) : 0.;
    }
}

// Equispaced Lagrange nodes: vertices, edge interiors (along each local edge), interior.
std::vector< Vec2 > lagrange_nodes(int k)
{
    if (k == 0)
        return {Vec2(1. / 3., 1. / 3.)};
    std::vector< Vec2 > nodes(ref_vertex.begin(), ref_vertex.end());
    for (int e = 0; e < 3; ++e)
        for (int j = 1; j < k; ++j)
            nodes.push_back(edge_point(e, static_cast< double >(j) / k));
    for (int j = 1; j < k; ++j)
        for (int i = 1; i + j < k; ++i)
            nodes.emplace_back(static_cast< double >(i) / k, static_cast< double >(j) / k);
    return nodes;
}

bool inside_reference(const Vec2& p)
{
    constexpr double tol = 1e-12;
    return p.x() >= -tol && p.y() >= -tol && p.x() + p.y() <= 1. + tol;
}

} // namespace

Vec2 edge_point(int edge, double t)
{
    const Vec2& a = ref_vertex[(edge + 1) % 3];
    const Vec2& b = ref_vertex[(edge + 2) % 3];
    return a + t * (b - a);
}

ReferenceElement::ReferenceElement(ElementFamily family) : family_(family)
{
    const int k = family.degree;
    switch (family.family)
    {
    case Family::Trace:
        dim_         = 3 * (k + 1);
        vsize_       = 1;
        mono_degree_ = k;
        return;
    case Family::DG:
    case Family::CG:
    case Family::VectorDG: {
        const auto nodes = lagrange_nodes(k);
        const int  n     = num_monomials(k);
        Eigen::MatrixXd vdm(n, n);
        std::vector< double > val, dx, dy;
        for (int i = 0; i < n; ++i)
        {
            eval_monomials(k, nodes[i], val, dx, dy);
            for (int m = 0; m < n; ++m)
                vdm(i, m) = val[m];
        }
        // column j of the inverse holds the monomial coefficients of basis j
        const Eigen::MatrixXd inv = vdm.inverse();
        mono_degree_              = k;
        if (family.family == Family::VectorDG)
        {
            vsize_ = 2;
            dim_   = 2 * n;
            coeffs_.assign(static_cast< std::size_t >(dim_ * 2 * n), 0.);
            for (int c = 0; c < 2; ++c)
                for (int i = 0; i < n; ++i)
                    for (int m = 0; m < n; ++m)
                        coeffs_[((c * n + i) * 2 + c) * n + m] = inv(m, i);
        }
        else
        {
            vsize_ = 1;
            dim_   = n;
            coeffs_.resize(static_cast< std::size_t >(n * n));
            for (int i = 0; i < n; ++i)
                for (int m = 0; m < n; ++m)
                    coeffs_[i * n + m] = inv(m, i);
        }
        return;
    }
    case Family::RT: {
        if (k < 1)
            throw Error("RT degree must be at least 1");
        vsize_       = 2;
        dim_         = k * (k + 2);
        mono_degree_ = k;
        const int nm = num_monomials(k);
        // spanning set [P_{k-1}]^2 + x P~_{k-1}, as vector monomial coefficients
        std::vector< std::vector< double > > span; // each: 2*nm entries (comp-major)
        const auto exps = monomial_exponents(k);
        const auto index_of = [&](int a, int b) {
            for (int m = 0; m < nm; ++m)
                if (exps[m][0] == a && exps[m][1] == b)
                    return m;
            return -1;
        };
        for (int c = 0; c < 2; ++c)
            for (int d = 0; d <= k - 1; ++d)
                for (int a = d; a >= 0; --a)
                {
                    std::vector< double > v(2 * nm, 0.);
                    v[c * nm + index_of(a, d - a)] = 1.;
                    span.push_back(std::move(v));
                }
        for (int a = k - 1; a >= 0; --a)
        {
            const int             b = k - 1 - a;
            std::vector< double > v(2 * nm, 0.);
            v[0 * nm + index_of(a + 1, b)] = 1.;
            v[1 * nm + index_of(a, b + 1)] = 1.;
            span.push_back(std::move(v));
        }

        const auto edge_rule = quadrature(QuadratureKind::edge, 2 * k);
        const auto cell_rule = quadrature(QuadratureKind::cell, 2 * k);
        Eigen::MatrixXd dofs(dim_, dim_);
        std::vector< double > val, dx, dy;
        const auto eval_vec = [&](const std::vector< double >& v, const Vec2& p) {
            eval_monomials(k, p, val, dx, dy);
            Vec2 out = Vec2::Zero();
            for (int m = 0; m < nm; ++m)
            {
                out.x() += v[m] * val[m];
                out.y() += v[nm + m] * val[m];
            }
            return out;
        };
        for (int s = 0; s < dim_; ++s)
        {
            int row = 0;
            for (int e = 0; e < 3; ++e)
            {
                const Vec2 t = ref_vertex[(e + 2) % 3] - ref_vertex[(e + 1) % 3];
                const Vec2 n_scaled(t.y(), -t.x()); // unit normal times edge length
                for (int j = 0; j < k; ++j, ++row)
                {
                    double acc = 0.;
                    for (int q = 0; q < edge_rule.size(); ++q)
                    {
                        const double tq = edge_rule.points[q].x();
                        acc += edge_rule.weights[q] * eval_vec(span[s], edge_point(e, tq)).dot(n_scaled) *
                               legendre01(j, tq);
                    }
                    dofs(row, s) = acc;
                }
            }
            const auto inner = monomial_exponents(k - 2 >= 0 ? k - 2 : 0);
            if (k >= 2)
                for (int c = 0; c < 2; ++c)
                    for (const auto& [a, b] : inner)
                    {
                        double acc = 0.;
                        for (int q = 0; q < cell_rule.size(); ++q)
                        {
                            const Vec2& p = cell_rule.points[q];
                            acc += cell_rule.weights[q] * eval_vec(span[s], p)[c] * ipow(p.x(), a) * ipow(p.y(), b);
                        }
                        dofs(row++, s) = acc;
                    }
        }
        const Eigen::MatrixXd x = dofs.inverse();
        coeffs_.assign(static_cast< std::size_t >(dim_ * 2 * nm), 0.);
        for (int i = 0; i < dim_; ++i)
            for (int s = 0; s < dim_; ++s)
                for (int c = 0; c < 2; ++c)
                    for (int m = 0; m < nm; ++m)
                        coeffs_[(i * 2 + c) * nm + m] += x(s, i) * span[s][c * nm + m];
        return;
    }
    }
}

Tabulation ReferenceElement::tabulate(std::span< const Vec2 > points) const
{
    Tabulation tab;
    tab.npts  = static_cast< int >(points.size());
    tab.ndof  = dim_;
    tab.vsize = vsize_;
    tab.values.assign(static_cast< std::size_t >(tab.npts * dim_ * vsize_), 0.);
    tab.grads.assign(static_cast< std::size_t >(tab.npts * dim_ * vsize_ * 2), 0.);

    if (family_.family == Family::Trace)
    {
        // facet-local basis on [0,1]
        tab.ndof = family_.degree + 1;
        tab.values.assign(static_cast< std::size_t >(tab.npts * tab.ndof), 0.);
        tab.grads.assign(static_cast< std::size_t >(tab.npts * tab.ndof * 2), 0.);
        for (int p = 0; p < tab.npts; ++p)
        {
            const double t = points[p].x();
            if (t < -1e-12 || t > 1. + 1e-12)
                throw Error("tabulate: point outside the reference edge");
            for (int j = 0; j < tab.ndof; ++j)
                tab.values[p * tab.ndof + j] = legendre01(j, t);
        }
        return tab;
    }

    const int             nm = num_monomials(mono_degree_);
    std::vector< double > val, dx, dy;
    for (int p = 0; p < tab.npts; ++p)
    {
        if (!inside_reference(points[p]))
            throw Error("tabulate: point outside the reference cell");
        eval_monomials(mono_degree_, points[p], val, dx, dy);
        for (int i = 0; i < dim_; ++i)
            for (int c = 0; c < vsize_; ++c)
            {
                const double* cf = coeffs_.data() + (i * vsize_ + c) * nm;
                double        v = 0., gx = 0., gy = 0.;
                for (int m = 0; m < nm; ++m)
                {
                    v += cf[m] * val[m];
                    gx += cf[m] * dx[m];
                    gy += cf[m] * dy[m];
                }
                const std::size_t idx = static_cast< std::size_t >((p * dim_ + i) * vsize_ + c);
                tab.values[idx]       = v;
                tab.grads[idx * 2]    = gx;
                tab.grads[idx * 2 + 1] = gy;
            }
    }
    return tab;
}

Tabulation ReferenceElement::tabulate_edge(int edge, std::span< const double > t) const
{
    if (family_.family != Family::Trace)
    {
        std::vector< Vec2 > pts;
        pts.reserve(t.size());
        for (double s : t)
            pts.push_back(edge_point(edge, s));
        return tabulate(pts);
    }
    const int  nf = family_.degree + 1;
    Tabulation tab;
    tab.npts  = static_cast< int >(t.size());
    tab.ndof  = dim_;
    tab.vsize = 1;
    tab.values.assign(static_cast< std::size_t >(tab.npts * dim_), 0.);
    tab.grads.assign(static_cast< std::size_t >(tab.npts * dim_ * 2), 0.);
    for (int p = 0; p < tab.npts; ++p)
        for (int j = 0; j < nf; ++j)
            tab.values[p * dim_ + edge * nf + j] = legendre01(j, t[p]);
    return tab;
}

// ---------------------------------------------------------------------------
// Function spaces
// ---------------------------------------------------------------------------

namespace
{
std::atomic< int > next_space_uid{0};
}

bool FunctionSpace::discontinuous() const
{
    switch (family().family)
    {
    case Family::DG:
    case Family::VectorDG: return true;
    case Family::RT: return broken_;
    default: return false;
    }
}

std::span< const int > FunctionSpace::facet_dofs(int f) const
{
    if (dofs_per_facet_ == 0)
        return {};
    return {facet_dofs_.data() + static_cast< std::size_t >(f) * dofs_per_facet_,
            static_cast< std::size_t >(dofs_per_facet_)};
}

std::string FunctionSpace::name() const { return (broken_ ? "Broken" : "") + family().name(); }

SpacePtr create_space(MeshPtr mesh, ElementFamily family)
{
    const int  k  = family.degree;
    const bool ok = [&] {
        switch (family.family)
        {
        case Family::RT: return k >= 1 && k <= 3;
        case Family::DG:
        case Family::VectorDG:
        case Family::Trace: return k >= 0 && k <= 3;
        case Family::CG: return k >= 1 && k <= 4;
        }
        return false;
    }();
    if (!ok)
        throw Error("create_space: unsupported element " + family.name());

    auto space = std::shared_ptr< FunctionSpace >(new FunctionSpace());
    space->mesh_    = mesh;
    space->element_ = std::make_shared< const ReferenceElement >(family);
    space->uid_     = next_space_uid++;

    const Mesh& m     = *mesh;
    const int   ldim  = space->local_dim();
    const int   ncell = m.num_cells();
    space->cell_dofs_.resize(static_cast< std::size_t >(ncell * ldim));
    space->cell_signs_.assign(static_cast< std::size_t >(ncell * ldim), 1.);
    auto dofs  = [&](int c) { return space->cell_dofs_.data() + static_cast< std::size_t >(c) * ldim; };
    auto signs = [&](int c) { return space->cell_signs_.data() + static_cast< std::size_t >(c) * ldim; };

    switch (family.family)
    {
    case Family::DG:
    case Family::VectorDG:
        for (int c = 0; c < ncell; ++c)
            for (int i = 0; i < ldim; ++i)
                dofs(c)[i] = c * ldim + i;
        space->ndof_global_ = ncell * ldim;
        break;
    case Family::Trace: {
        const int nf           = k + 1;
        space->dofs_per_facet_ = nf;
        space->ndof_global_    = m.num_facets() * nf;
        for (int f = 0; f < m.num_facets(); ++f)
            for (int j = 0; j < nf; ++j)
                space->facet_dofs_.push_back(f * nf + j);
        for (int c = 0; c < ncell; ++c)
            for (int e = 0; e < 3; ++e)
            {
                const bool agrees = m.edge_agrees(c, e);
                for (int j = 0; j < nf; ++j)
                {
                    dofs(c)[e * nf + j]  = m.cell_facets(c)[e] * nf + j;
                    signs(c)[e * nf + j] = (agrees || j % 2 == 0) ? 1. : -1.;
                }
            }
        break;
    }
    case Family::RT: {
        const int nint         = k * (k - 1);
        space->dofs_per_facet_ = k;
        for (int f = 0; f < m.num_facets(); ++f)
            for (int j = 0; j < k; ++j)
                space->facet_dofs_.push_back(f * k + j);
        const int interior0 = m.num_facets() * k;
        space->ndof_global_ = interior0 + ncell * nint;
        for (int c = 0; c < ncell; ++c)
        {
            for (int e = 0; e < 3; ++e)
            {
                const bool agrees = m.edge_agrees(c, e);
                for (int j = 0; j < k; ++j)
                {
                    dofs(c)[e * k + j]  = m.cell_facets(c)[e] * k + j;
                    signs(c)[e * k + j] = agrees ? 1. : (j % 2 == 0 ? -1. : 1.);
                }
            }
            for (int i = 0; i < nint; ++i)
                dofs(c)[3 * k + i] = interior0 + c * nint + i;
        }
        break;
    }
    case Family::CG: {
        const int ne           = k - 1;
        const int nint         = (k - 1) * (k - 2) / 2;
        space->dofs_per_facet_ = ne;
        const int edge0        = m.num_vertices();
        const int interior0    = edge0 + m.num_facets() * ne;
        space->ndof_global_    = interior0 + ncell * nint;
        for (int f = 0; f < m.num_facets(); ++f)
            for (int j = 0; j < ne; ++j)
                space->facet_dofs_.push_back(edge0 + f * ne + j);
        for (int c = 0; c < ncell; ++c)
        {
            const auto& v = m.cell_vertices(c);
            for (int i = 0; i < 3; ++i)
                dofs(c)[i] = v[i];
            for (int e = 0; e < 3; ++e)
            {
                const bool agrees = m.edge_agrees(c, e);
                for (int j = 0; j < ne; ++j)
                    dofs(c)[3 + e * ne + j] = edge0 + m.cell_facets(c)[e] * ne + (agrees ? j : ne - 1 - j);
            }
            for (int i = 0; i < nint; ++i)
                dofs(c)[3 + 3 * ne + i] = interior0 + c * nint + i;
        }
        break;
    }
    }
    return space;
}

SpacePtr break_space(const SpacePtr& space)
{
    if (space->family().family != Family::RT)
        throw Error("break_space: only RT spaces can be broken, got " + space->name());
    if (space->broken())
        throw Error("break_space: space is already broken");

    auto out = std::shared_ptr< FunctionSpace >(new FunctionSpace());
    out->mesh_       = space->mesh_;
    out->element_    = space->element_;
    out->broken_     = true;
    out->uid_        = next_space_uid++;
    out->cell_signs_ = space->cell_signs_;
    const int ldim   = space->local_dim();
    const int ncell  = space->mesh().num_cells();
    out->ndof_global_ = ncell * ldim;
    out->cell_dofs_.resize(static_cast< std::size_t >(ncell * ldim));
    for (int i = 0; i < ncell * ldim; ++i)
        out->cell_dofs_[i] = i;
    return out;
}

// ---------------------------------------------------------------------------
// Functions
// ---------------------------------------------------------------------------

Eigen::VectorXd Function::cell_coeffs(int c) const
{
    const auto      dofs = space->cell_dofs(c);
    Eigen::VectorXd out(dofs.size());
    for (std::size_t i = 0; i < dofs.size(); ++i)
        out[static_cast< Eigen::Index >(i)] = coeffs[dofs[i]];
    return out;
}

CellBasis push_forward(const FunctionSpace& space, const Tabulation& ref, const CellGeometry& geom, int cell)
{
    CellBasis out;
    out.npts        = ref.npts;
    out.ndof        = ref.ndof;
    out.vsize       = ref.vsize;
    const auto sign = space.cell_signs(cell);
    const Family fam = space.family().family;

    for (int c = 0; c < ref.vsize; ++c)
        out.value[c].resize(ref.npts, ref.ndof);
    if (ref.vsize == 1)
    {
        out.grad[0].resize(ref.npts, ref.ndof);
        out.grad[1].resize(ref.npts, ref.ndof);
    }
    else
        out.div.resize(ref.npts, ref.ndof);

    const Mat2&  jac = geom.jacobian;
    const Mat2&  ijt = geom.inv_jt;
    const double det = geom.det_j;
    for (int p = 0; p < ref.npts; ++p)
        for (int i = 0; i < ref.ndof; ++i)
        {
            const double s = sign[i];
            if (ref.vsize == 1)
            {
                out.value[0](p, i) = s * ref.value(p, i);
                const Vec2 g        = ijt * Vec2(ref.grad(p, i, 0, 0), ref.grad(p, i, 0, 1));
                out.grad[0](p, i)   = s * g.x();
                out.grad[1](p, i)   = s * g.y();
            }
            else if (fam == Family::RT)
            {
                const Vec2 v       = jac * Vec2(ref.value(p, i, 0), ref.value(p, i, 1)) / det;
                out.value[0](p, i) = s * v.x();
                out.value[1](p, i) = s * v.y();
                out.div(p, i)      = s * ref.div(p, i) / det;
            }
            else
            {
                out.value[0](p, i) = ref.value(p, i, 0);
                out.value[1](p, i) = ref.value(p, i, 1);
                double d           = 0.;
                for (int c = 0; c < 2; ++c)
                    for (int r = 0; r < 2; ++r)
                        d += ijt(c, r) * ref.grad(p, i, c, r);
                out.div(p, i) = d;
            }
        }
    return out;
}

Vec2 evaluate(const Function& fn, int cell, const Vec2& ref_point)
{
    const auto&           space = *fn.space;
    const auto            geom  = cell_geometry(space.mesh(), cell);
    const std::array< Vec2, 1 > pts{ref_point};
    const auto            basis = push_forward(space, space.element().tabulate(pts), geom, cell);
    const Eigen::VectorXd coeffs = fn.cell_coeffs(cell);
    Vec2                  out    = Vec2::Zero();
    for (int c = 0; c < basis.vsize; ++c)
        out[c] = basis.value[c].row(0).dot(coeffs);
    return out;
}

namespace
{

template < typename PointError >
double integrate_error(const Function& fn, int exactness, PointError&& point_error)
{
    const auto& space = *fn.space;
    if (space.family().family == Family::Trace)
        throw Error("l2_error: trace functions are not supported");
    const auto rule = quadrature(QuadratureKind::cell, exactness);
    const auto ref  = space.element().tabulate(rule.points);
    double     acc  = 0.;
    for (int c = 0; c < space.mesh().num_cells(); ++c)
    {
        const auto            geom   = cell_geometry(space.mesh(), c);
        const auto            basis  = push_forward(space, ref, geom, c);
        const Eigen::VectorXd coeffs = fn.cell_coeffs(c);
        for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * geom.det_j * point_error(basis, coeffs, q, geom.map(rule.points[q]));
    }
    return std::sqrt(acc);
}

} // namespace

double l2_error(const Function& fn, const ScalarFn& exact, int exactness)
{
    if (fn.space->element().value_size() != 1)
        throw Error("l2_error: scalar exact solution given for a vector space");
    return integrate_error(fn, exactness, [&](const CellBasis& b, const Eigen::VectorXd& cf, int q, const Vec2& x) {
        const double d = b.value[0].row(q).dot(cf) - exact(x);
        return d * d;
    });
}

double l2_error(const Function& fn, const VectorFn& exact, int exactness)
{
    if (fn.space->element().value_size() != 2)
        throw Error("l2_error: vector exact solution given for a scalar space");
    return integrate_error(fn, exactness, [&](const CellBasis& b, const Eigen::VectorXd& cf, int q, const Vec2& x) {
        const Vec2 d = Vec2(b.value[0].row(q).dot(cf), b.value[1].row(q).dot(cf)) - exact(x);
        return d.squaredNorm();
    });
}

double l2_error_div(const Function& fn, const ScalarFn& exact_div, int exactness)
{
    if (fn.space->element().value_size() != 2)
        throw Error("l2_error_div: divergence of a scalar space");
    return integrate_error(fn, exactness, [&](const CellBasis& b, const Eigen::VectorXd& cf, int q, const Vec2& x) {
        const double d = b.div.row(q).dot(cf) - exact_div(x);
        return d * d;
    });
}

std::vector< Vec2 > dof_coordinates(const FunctionSpace& space)
{
    const Family fam = space.family().family;
    if (fam != Family::CG && fam != Family::DG && fam != Family::VectorDG)
        throw Error("dof_coordinates: not a Lagrange space: " + space.name());
    const auto          nodes = lagrange_nodes(space.family().degree);
    const int           n     = static_cast< int >(nodes.size());
    std::vector< Vec2 > out(static_cast< std::size_t >(space.ndof_global()), Vec2::Zero());
    for (int c = 0; c < space.mesh().num_cells(); ++c)
    {
        const auto geom = cell_geometry(space.mesh(), c);
        const auto dofs = space.cell_dofs(c);
        for (std::size_t i = 0; i < dofs.size(); ++i)
            out[dofs[i]] = geom.map(nodes[static_cast< int >(i) % n]);
    }
    return out;
}

Function interpolate(const SpacePtr& space, const ScalarFn& fn)
{
    if (space->element().value_size() != 1)
        throw Error("interpolate: scalar function into vector space");
    Function   out(space);
    const auto x = dof_coordinates(*space);
    for (int i = 0; i < space->ndof_global(); ++i)
        out.coeffs[i] = fn(x[i]);
    return out;
}

Function interpolate(const SpacePtr& space, const VectorFn& fn)
{
    if (space->family().family != Family::VectorDG)
        throw Error("interpolate: vector interpolation needs a VectorDG space");
    Function   out(space);
    const auto x       = dof_coordinates(*space);
    const int  nscalar = space->local_dim() / 2;
    for (int c = 0; c < space->mesh().num_cells(); ++c)
    {
        const auto dofs = space->cell_dofs(c);
        for (std::size_t i = 0; i < dofs.size(); ++i)
            out.coeffs[dofs[i]] = fn(x[dofs[i]])[static_cast< int >(i) / nscalar];
    }
    return out;
}

Vec2 facet_global_normal(const Mesh& mesh, int facet)
{
    const auto& fv = mesh.facet_vertices(facet);
    const Vec2  t  = mesh.vertex(fv[1]) - mesh.vertex(fv[0]);
    return Vec2(t.y(), -t.x()) / t.norm();
}

std::vector< double > rt_facet_moments(const FunctionSpace& rt, int facet, const VectorFn& q, int exactness)
{
    if (rt.family().family != Family::RT)
        throw Error("rt_facet_moments: not an RT space");
    const Mesh& m    = rt.mesh();
    const auto& fv   = m.facet_vertices(facet);
    const Vec2  a    = m.vertex(fv[0]);
    const Vec2  b    = m.vertex(fv[1]);
    const Vec2  n    = facet_global_normal(m, facet);
    const auto  rule = quadrature(QuadratureKind::edge, exactness);
    const double len = (b - a).norm();

    std::vector< double > out(static_cast< std::size_t >(rt.family().degree), 0.);
    for (int qp = 0; qp < rule.size(); ++qp)
    {
        const double t  = rule.points[qp].x();
        const double qn = q(a + t * (b - a)).dot(n);
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] += rule.weights[qp] * len * qn * legendre01(static_cast< int >(j), t);
    }
    return out;
}

std::vector< double > trace_projection(const FunctionSpace& trace, int facet, const ScalarFn& q)
{
    if (trace.family().family != Family::Trace)
        throw Error("trace_projection: not a trace space");
    const Mesh& m    = trace.mesh();
    const auto& fv   = m.facet_vertices(facet);
    const Vec2  a    = m.vertex(fv[0]);
    const Vec2  b    = m.vertex(fv[1]);
    const auto  rule = quadrature(QuadratureKind::edge, max_quadrature_exactness);

    std::vector< double > out(static_cast< std::size_t >(trace.family().degree + 1), 0.);
    for (int qp = 0; qp < rule.size(); ++qp)
    {
        const double t  = rule.points[qp].x();
        const double qv = q(a + t * (b - a));
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] += rule.weights[qp] * qv * legendre01(static_cast< int >(j), t);
    }
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] *= 2. * static_cast< double >(j) + 1.;
    return out;
}

} // namespace slatefem
