#pragma once

namespace traceforge {

// Name of the BLAS kernel family selected at startup ("SkylakeX", "Haswell", ...).
// OpenBLAS's own CPU detection falls back to a generic kernel inside some
// hypervisors; blas_env.cpp picks the kernel from CPUID before the library
// initializes. An explicit OPENBLAS_CORETYPE in the environment wins.
const char* blas_kernel_name();

}  // namespace traceforge
