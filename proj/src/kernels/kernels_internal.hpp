#pragma once

#include "fdrl/kernels.hpp"

namespace fdrl::kernels::detail {

#ifdef FDRL_HAVE_AVX2_KERNELS
const KernelTable &avx2_table();
#endif

} // namespace fdrl::kernels::detail
