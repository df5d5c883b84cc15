/*
   Copyright 2026 The ahflow Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#ifndef AHFLOW_CORE_HPP
#define AHFLOW_CORE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ahflow {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct backend_mismatch : error {
    using error::error;
};

struct valence_error : error {
    using error::error;
};

struct singular_error : error {
    using error::error;
};

struct blowup_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

// ---------------------------------------------------------------------------
// Tensor valences for boundary fields.
//
// Scalar / Vector / Covector / Sym2 are the public kinds; Mat (a full rank-2
// array, used for mixed-index objects) and Tan3 (one upper index against a
// symmetric lower pair, Christoffel shaped) appear inside the curvature
// kernels.
// ---------------------------------------------------------------------------

enum class Valence { Scalar, Vector, Covector, Sym2, Mat, Tan3 };

inline int sym2_comps(int d) { return d * (d + 1) / 2; }

inline int valence_comps(Valence v, int d) {
    switch (v) {
        case Valence::Scalar: return 1;
        case Valence::Vector: return d;
        case Valence::Covector: return d;
        case Valence::Sym2: return sym2_comps(d);
        case Valence::Mat: return d * d;
        case Valence::Tan3: return d * sym2_comps(d);
    }
    return 0;
}

inline const char* valence_name(Valence v) {
    switch (v) {
        case Valence::Scalar: return "scalar";
        case Valence::Vector: return "vector";
        case Valence::Covector: return "covector";
        case Valence::Sym2: return "sym2";
        case Valence::Mat: return "mat";
        case Valence::Tan3: return "tan3";
    }
    return "?";
}

// Packed upper-triangle index for symmetric rank-2 storage, row-major.
inline int sym2_index(int i, int j, int d) {
    if (i > j) std::swap(i, j);
    return i * d - i * (i - 1) / 2 + (j - i);
}

// ---------------------------------------------------------------------------
// Small dense matrix helpers (boundary dimensions are tiny, d <= 7).
// All routines operate on row-major full storage.
// ---------------------------------------------------------------------------

namespace dense {

inline void sym2_unpack(const double* packed, int d, double* full) {
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) full[i * d + j] = packed[sym2_index(i, j, d)];
}

inline void sym2_pack(const double* full, int d, double* packed) {
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            packed[sym2_index(i, j, d)] = 0.5 * (full[i * d + j] + full[j * d + i]);
}

// In-place Cholesky factorization A = L L^T; returns false if not positive
// definite.
inline bool cholesky(double* a, int d) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * d + j];
            for (int k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * d + i] = std::sqrt(s);
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
        for (int j = i + 1; j < d; ++j) a[i * d + j] = 0.0;
    }
    return true;
}

inline double det_from_cholesky(const double* l, int d) {
    double det = 1.0;
    for (int i = 0; i < d; ++i) det *= l[i * d + i] * l[i * d + i];
    return det;
}

// Solve L L^T x = b in place.
inline void cholesky_solve(const double* l, int d, double* b) {
    for (int i = 0; i < d; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l[i * d + k] * b[k];
        b[i] = s / l[i * d + i];
    }
    for (int i = d - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < d; ++k) s -= l[k * d + i] * b[k];
        b[i] = s / l[i * d + i];
    }
}

// Inverse of a symmetric positive definite matrix given in packed storage.
// Throws singular_error when the matrix is not positive definite.
inline void sym2_inverse(const double* packed, int d, double* packed_inv) {
    std::vector<double> l(d * d), col(d);
    sym2_unpack(packed, d, l.data());
    if (!cholesky(l.data(), d)) throw singular_error("matrix not positive definite");
    std::vector<double> inv(d * d);
    for (int j = 0; j < d; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        cholesky_solve(l.data(), d, col.data());
        for (int i = 0; i < d; ++i) inv[i * d + j] = col[i];
    }
    sym2_pack(inv.data(), d, packed_inv);
}

inline double sym2_det(const double* packed, int d) {
    std::vector<double> l(d * d);
    sym2_unpack(packed, d, l.data());
    if (!cholesky(l.data(), d)) throw singular_error("matrix not positive definite");
    return det_from_cholesky(l.data(), d);
}

inline bool sym2_posdef(const double* packed, int d) {
    std::vector<double> l(d * d);
    sym2_unpack(packed, d, l.data());
    return cholesky(l.data(), d);
}

inline void matmul(const double* a, const double* b, int d, double* c) {
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += a[i * d + k] * b[k * d + j];
            c[i * d + j] = s;
        }
}

}  // namespace dense

// ---------------------------------------------------------------------------
// Data-parallel loop with a fixed chunk decomposition. The chunking is
// independent of the thread count so reductions assembled per chunk and
// combined in index order give bit-identical results for any AHFLOW_THREADS.
// ---------------------------------------------------------------------------

inline int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("AHFLOW_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        return 1;
    }();
    return cached;
}

constexpr int kParallelChunk = 4096;

template <class F>
void parallel_for(int n, F&& body) {
    const int nt = max_threads();
    if (nt <= 1 || n < 2 * kParallelChunk) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    const int nchunks = (n + kParallelChunk - 1) / kParallelChunk;
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(nt, nchunks);
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int c = next.fetch_add(1);
                if (c >= nchunks) break;
                const int lo = c * kParallelChunk;
                const int hi = std::min(n, lo + kParallelChunk);
                for (int i = lo; i < hi; ++i) body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

// Deterministic sum over n items: partial sums per fixed-size chunk combined
// in chunk order.
template <class F>
double deterministic_sum(int n, F&& term) {
    const int nchunks = (n + kParallelChunk - 1) / kParallelChunk;
    std::vector<double> partial(static_cast<size_t>(std::max(nchunks, 1)), 0.0);
    for (int c = 0; c < nchunks; ++c) {
        const int lo = c * kParallelChunk;
        const int hi = std::min(n, lo + kParallelChunk);
        double s = 0.0;
        for (int i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<size_t>(c)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace ahflow

#endif  // AHFLOW_CORE_HPP
