#include "dass/execution.hpp"

#include <omp.h>

namespace dass {

int max_threads() { return omp_get_max_threads(); }

}  // namespace dass
