#include "tailmoment/parallel.hpp"

namespace tailmoment {
namespace {
int default_threads() {
#ifdef _OPENMP
  return omp_get_num_procs();
#else
  return 1;
#endif
}
}  // namespace

void set_max_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? default_threads() : n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return default_threads();
#endif
}

}  // namespace tailmoment
