#include "slatefem/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace slatefem
{

namespace
{
std::atomic< int > g_threads{0};
}

int num_threads()
{
    const int n = g_threads.load();
    if (n > 0)
        return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_num_threads(int n) { g_threads.store(std::max(n, 0)); }

void parallel_for(int n, const std::function< void(int) >& body)
{
    const int workers = std::min(num_threads(), n);
    if (workers <= 1)
    {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector< std::exception_ptr > errors(static_cast< std::size_t >(workers));
    std::vector< int >                error_at(static_cast< std::size_t >(workers), n);
    std::vector< std::thread >        pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            // contiguous chunks keep each worker's cells together
            const int lo = static_cast< int >(static_cast< long >(n) * w / workers);
            const int hi = static_cast< int >(static_cast< long >(n) * (w + 1) / workers);
            for (int i = lo; i < hi; ++i)
            {
                try
                {
                    body(i);
                }
                catch (...)
                {
                    errors[w]   = std::current_exception();
                    error_at[w] = i;
                    return;
                }
            }
        });
    for (auto& t : pool)
        t.join();
    int first = -1;
    for (int w = 0; w < workers; ++w)
        if (errors[w] && (first < 0 || error_at[w] < error_at[first]))
            first = w;
    if (first >= 0)
        std::rethrow_exception(errors[first]);
}

} // namespace slatefem
