// Minimal chunked parallel_for over an index range.

#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace stvem {

// Runs job(start, end) on nb_threads threads over [0, nb_elements).
// With nb_threads <= 1 the job runs inline on the full range.
inline void parallel_for(std::size_t nb_elements,
                         const std::function<void(std::size_t, std::size_t)>& job,
                         int nb_threads) {
  if (nb_threads <= 1 || nb_elements < 2) {
    job(0, nb_elements);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(nb_threads, nb_elements);
  const std::size_t chunk = nb_elements / nt;
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const std::size_t start = k * chunk;
    const std::size_t end = (k + 1 == nt) ? nb_elements : start + chunk;
    workers.emplace_back(job, start, end);
  }
  for (auto& w : workers) w.join();
}

} // namespace stvem
