#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vta {

// Row-major dense matrix. The workhorse container for frame features, video
// features and embedding sets.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

    T* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const T* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

// Eight accumulators so the loop vectorizes without reassociation flags;
// the summation order is fixed by the code, keeping results reproducible.
template <typename T>
inline T dot(const T* a, const T* b, int n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
        acc[4] += a[i + 4] * b[i + 4];
        acc[5] += a[i + 5] * b[i + 5];
        acc[6] += a[i + 6] * b[i + 6];
        acc[7] += a[i + 7] * b[i + 7];
    }
    T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline bool all_finite(const T* v, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(static_cast<double>(v[i]))) return false;
    }
    return true;
}

inline int round_up(int v, int multiple) { return ((v + multiple - 1) / multiple) * multiple; }

// Number of worker threads; overridable with VTA_THREADS.
int worker_count();

// Static-chunked parallel loop. Each index is processed exactly once and
// writes only to its own slots, so results do not depend on thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

// Mean power of a signal.
template <typename T>
inline double mean_power(const std::vector<T>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return acc / static_cast<double>(v.size());
}

}  // namespace vta
