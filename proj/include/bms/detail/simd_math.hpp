#pragma once

#include <cmath>

// glibc ships SIMD variants of exp in libmvec but only advertises them to the
// compiler under -ffast-math. Re-declaring exp with an OpenMP SIMD clause lets
// `#pragma omp simd` loops call the vector variant without enabling
// fast-math for the whole translation unit. Requires -fopenmp-simd.
#if defined(BMS_VECTOR_EXP) && defined(__GLIBC__) && defined(__x86_64__) && \
    defined(__GNUC__) && !defined(__clang__)
extern "C" {
#pragma omp declare simd notinbranch
double exp(double) noexcept;
}
#endif

#if defined(_OPENMP) || defined(BMS_OPENMP_SIMD)
#define BMS_PRAGMA(x) _Pragma(#x)
#define BMS_SIMD_REDUCTION(...) BMS_PRAGMA(omp simd reduction(+ : __VA_ARGS__))
#define BMS_SIMD BMS_PRAGMA(omp simd)
#else
#define BMS_SIMD_REDUCTION(...)
#define BMS_SIMD
#endif
