#pragma once

#include <cstddef>

#include "tempoden/parallel.hpp"

namespace tempoden::detail {

// Row-major matrix products used by conv2d. The k-loop order per output
// element is independent of the row partition, so multi-threaded calls are
// bit-identical to single-threaded ones.

// C (MxN) += A (MxK) * B (KxN)
template <typename T>
void gemm_nn(int m_rows, int n_cols, int k_len, const T* a, const T* b, T* c) {
    parallel_for(0, m_rows, [=](int m0, int m1) {
        int m = m0;
        for (; m + 4 <= m1; m += 4) {
            T* c0 = c + std::size_t(m + 0) * n_cols;
            T* c1 = c + std::size_t(m + 1) * n_cols;
            T* c2 = c + std::size_t(m + 2) * n_cols;
            T* c3 = c + std::size_t(m + 3) * n_cols;
            for (int k = 0; k < k_len; ++k) {
                const T* bk = b + std::size_t(k) * n_cols;
                const T a0 = a[std::size_t(m + 0) * k_len + k];
                const T a1 = a[std::size_t(m + 1) * k_len + k];
                const T a2 = a[std::size_t(m + 2) * k_len + k];
                const T a3 = a[std::size_t(m + 3) * k_len + k];
#pragma omp simd
                for (int n = 0; n < n_cols; ++n) {
                    const T bv = bk[n];
                    c0[n] += a0 * bv;
                    c1[n] += a1 * bv;
                    c2[n] += a2 * bv;
                    c3[n] += a3 * bv;
                }
            }
        }
        for (; m < m1; ++m) {
            T* cm = c + std::size_t(m) * n_cols;
            for (int k = 0; k < k_len; ++k) {
                const T av = a[std::size_t(m) * k_len + k];
                const T* bk = b + std::size_t(k) * n_cols;
#pragma omp simd
                for (int n = 0; n < n_cols; ++n) cm[n] += av * bk[n];
            }
        }
    });
}

// C (MxN) += A (MxK) * B^T (B stored NxK); contiguous dot products.
template <typename T>
void gemm_nt(int m_rows, int n_cols, int k_len, const T* a, const T* b, T* c) {
    parallel_for(0, m_rows, [=](int m0, int m1) {
        for (int m = m0; m < m1; ++m) {
            const T* am = a + std::size_t(m) * k_len;
            T* cm = c + std::size_t(m) * n_cols;
            for (int n = 0; n < n_cols; ++n) {
                const T* bn = b + std::size_t(n) * k_len;
                T acc = T(0);
#pragma omp simd reduction(+ : acc)
                for (int k = 0; k < k_len; ++k) acc += am[k] * bn[k];
                cm[n] += acc;
            }
        }
    });
}

// C (MxN) += A^T (A stored KxM) * B (KxN)
template <typename T>
void gemm_tn(int m_rows, int n_cols, int k_len, const T* a, const T* b, T* c) {
    parallel_for(0, m_rows, [=](int m0, int m1) {
        for (int m = m0; m < m1; ++m) {
            T* cm = c + std::size_t(m) * n_cols;
            for (int k = 0; k < k_len; ++k) {
                const T av = a[std::size_t(k) * m_rows + m];
                const T* bk = b + std::size_t(k) * n_cols;
#pragma omp simd
                for (int n = 0; n < n_cols; ++n) cm[n] += av * bk[n];
            }
        }
    });
}

} // namespace tempoden::detail
