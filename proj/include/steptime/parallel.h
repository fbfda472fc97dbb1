#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace steptime
{

/** \brief Run fn(i) for i in [0, n) on a pool of worker threads.
 *
 * Iterations must be independent. With serial = true (or a single hardware thread) the loop runs
 * in index order on the calling thread. The first exception thrown by any iteration is rethrown.
 */
template<typename Fn>
void parallel_for(std::size_t n, Fn && fn, bool serial = false)
{
  const std::size_t workers = serial ? 1 : std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if(workers <= 1)
  {
    for(std::size_t i = 0; i < n; ++i)
    {
      fn(i);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for(std::size_t w = 0; w < workers; ++w)
  {
    pool.emplace_back([&]() {
      for(std::size_t i = next++; i < n; i = next++)
      {
        try
        {
          fn(i);
        }
        catch(...)
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if(!error)
          {
            error = std::current_exception();
          }
        }
      }
    });
  }
  pool.clear();
  if(error)
  {
    std::rethrow_exception(error);
  }
}

} // namespace steptime
