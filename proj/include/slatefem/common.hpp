#ifndef SLATEFEM_COMMON_HPP
#define SLATEFEM_COMMON_HPP

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace slatefem
{

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A dense local factorization hit a pivot below the relative threshold.
class SingularMatrixError : public Error
{
public:
    explicit SingularMatrixError(const std::string& what, int cell = -1)
        : Error(cell >= 0 ? what + " (cell " + std::to_string(cell) + ")" : what), cell_(cell)
    {}
    int cell() const noexcept { return cell_; }

private:
    int cell_;
};

/// Worker count used by cell loops. 1 forces the serial path.
int  num_threads();
void set_num_threads(int n);

/// Runs body(i) for i in [0, n) on num_threads() workers. If any call throws,
/// the exception from the smallest index is rethrown after all workers finish.
void parallel_for(int n, const std::function< void(int) >& body);

} // namespace slatefem

#endif
