#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace semimodal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

//! Broad failure classes; the CLI maps each to a distinct exit status.
enum class ErrorKind
{
  invalid_argument,
  io,
  parse,
  config,
  numerical
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what)
{
  return Error(ErrorKind::invalid_argument, what);
}

//! Pipeline stages that consume randomness. The numeric values are part of
//! the seed-derivation scheme and must not be renumbered.
enum class Stage : std::uint64_t
{
  split = 1,
  variable_selection = 2,
  permutation = 3,
  bootstrap = 4,
  synth_background = 5,
  synth_experimental = 6,
  synth_test = 7
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace detail

//! Counter-based seed derivation: seed_{stage,i} = mix(mix(mix(master) ^ stage) ^ i).
//! Every stochastic step receives its own stream, so reordering or
//! parallelizing stages never changes any individual draw.
inline std::uint64_t derive_seed(std::uint64_t master, Stage stage, std::uint64_t counter = 0)
{
  std::uint64_t s = detail::splitmix64(master);
  s = detail::splitmix64(s ^ static_cast<std::uint64_t>(stage));
  return detail::splitmix64(s ^ counter);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter)
{
  return detail::splitmix64(detail::splitmix64(parent) ^ counter);
}

//! Runs fn(i) for i in [0, count) on up to `threads` workers. Work is strided
//! by index; callers write results into pre-sized slots so the gathered output
//! is independent of scheduling. The first exception thrown is rethrown.
template<class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers)
          fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace semimodal
