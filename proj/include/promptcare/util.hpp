#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "promptcare/errors.hpp"

namespace promptcare {

// Index of the maximum element; ties resolve to the lowest index. Every
// argmax in the toolkit (mask predictions, class decisions, candidate
// selection) goes through this so tie-breaking is uniform.
template <class Vec>
int argmax_lowest(const Vec& v, int size) {
    if (size <= 0) throw ConfigError("argmax over empty range");
    int best = 0;
    for (int i = 1; i < size; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

template <class T>
int argmax_lowest(const std::vector<T>& v) {
    return argmax_lowest(v, static_cast<int>(v.size()));
}

// Indices of the k largest scores, ordered by (score descending, index
// ascending); ties on score resolve to the lowest index. Throws if k exceeds
// the number of scores.
template <class Vec>
std::vector<int> topk_lowest(const Vec& scores, int size, int k) {
    if (k < 0 || k > size) throw ConfigError("top-k: k out of range");
    std::vector<int> idx(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

template <class T>
std::vector<int> topk_lowest(const std::vector<T>& scores, int k) {
    return topk_lowest(scores, static_cast<int>(scores.size()), k);
}

}  // namespace promptcare
