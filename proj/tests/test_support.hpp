#ifndef SLATEFEM_TEST_SUPPORT_HPP
#define SLATEFEM_TEST_SUPPORT_HPP

#include "slatefem/problem.hpp"
#include "slatefem/slate.hpp"

#include <random>

namespace testing
{

using namespace slatefem;

inline MeshPtr unit_square(int n) { return std::make_shared< const Mesh >(build_unit_square(n)); }

inline MeshPtr reference_cell()
{
    return std::make_shared< const Mesh >(build_mesh({Vec2(0., 0.), Vec2(1., 0.), Vec2(0., 1.)}, {{0, 1, 2}}));
}

inline std::mt19937& rng()
{
    static std::mt19937 g(20240611u);
    return g;
}

inline Eigen::VectorXd random_vector(int n)
{
    std::uniform_real_distribution< double > d(-1., 1.);
    Eigen::VectorXd                           v(n);
    for (int i = 0; i < n; ++i)
        v[i] = d(rng());
    return v;
}

inline std::shared_ptr< Function > random_function(const SpacePtr& s)
{
    auto f    = std::make_shared< Function >(s);
    f->coeffs = random_vector(s->ndof_global());
    return f;
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.; }

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const double scale = std::max(1., std::max(max_abs(a), max_abs(b)));
    return max_abs(a - b) / scale;
}

/// Tree-walking evaluation of a Slate expression on one cell, written
/// directly against Eigen so it shares no code with the plan compiler.
inline Eigen::MatrixXd naive_eval(const slate::Expr& e, int cell)
{
    using slate::Op;
    switch (e->op)
    {
    case Op::tensor: return forms::assemble_local(*e->form, cell).data;
    case Op::assembled_vector:
    {
        std::vector< double > vals;
        for (const auto& f : e->functions)
            for (int d : f->space->cell_dofs(cell))
                vals.push_back(f->coeffs[d]);
        return Eigen::Map< Eigen::VectorXd >(vals.data(), static_cast< Eigen::Index >(vals.size()));
    }
    case Op::add: return naive_eval(e->children[0], cell) + naive_eval(e->children[1], cell);
    case Op::negate: return -naive_eval(e->children[0], cell);
    case Op::transpose: return naive_eval(e->children[0], cell).transpose();
    case Op::inverse: return naive_eval(e->children[0], cell).fullPivLu().inverse();
    case Op::solve:
        return naive_eval(e->children[0], cell).fullPivLu().solve(naive_eval(e->children[1], cell));
    case Op::mul:
    {
        const Eigen::MatrixXd l = naive_eval(e->children[0], cell);
        const Eigen::MatrixXd r = naive_eval(e->children[1], cell);
        if (e->children[0]->rank == 1)
            return (l.transpose() * r).transpose();
        return l * r;
    }
    case Op::blocks:
    {
        const auto&           child = e->children[0];
        const Eigen::MatrixXd m     = naive_eval(child, cell);
        auto pick = [](const slate::Axis& ax, const std::vector< int >& fields) {
            const auto         off = ax.local_offsets();
            std::vector< int > idx;
            for (int f : fields)
                for (int i = off[f]; i < off[f + 1]; ++i)
                    idx.push_back(i);
            return idx;
        };
        const auto      rows = pick(child->axes[0], e->row_fields);
        const auto      cols = child->rank == 2 ? pick(child->axes[1], e->col_fields) : std::vector< int >{0};
        Eigen::MatrixXd out(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                out(i, j) = m(rows[i], cols[j]);
        return out;
    }
    }
    return {};
}

} // namespace testing

#endif
