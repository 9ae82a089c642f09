#include "klab/multi_index.hpp"

#include <algorithm>
#include <stdexcept>

namespace klab {

int binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<int>(r);
}

MultiIndexSet::MultiIndexSet(int n_, int k_) : n(n_), k(k_) {
    if (n < 0 || k < 0 || k > n)
        throw std::invalid_argument("MultiIndexSet: need 0 <= k <= n");
    std::vector<int> cur(k);
    // standard lexicographic enumeration
    for (int i = 0; i < k; ++i) cur[i] = i + 1;
    if (k == 0) {
        tuples.push_back({});
        return;
    }
    while (true) {
        tuples.push_back(cur);
        int pos = k - 1;
        while (pos >= 0 && cur[pos] == n - (k - 1 - pos)) --pos;
        if (pos < 0) break;
        ++cur[pos];
        for (int j = pos + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
}

int MultiIndexSet::rank(const std::vector<int>& idx) const {
    for (int r = 0; r < count(); ++r)
        if (tuples[r] == idx) return r;
    throw std::invalid_argument("MultiIndexSet::rank: not an increasing member tuple");
}

int sort_sign(std::vector<int>& idx) {
    int sign = 1;
    const int k = static_cast<int>(idx.size());
    for (int i = 1; i < k; ++i) {
        int j = i;
        while (j > 0 && idx[j - 1] > idx[j]) {
            std::swap(idx[j - 1], idx[j]);
            sign = -sign;
            --j;
        }
        if (j > 0 && idx[j - 1] == idx[j]) return 0;
    }
    return sign;
}

int MultiIndexSet::lookup(std::vector<int> idx, int& rank_out) const {
    const int sgn = sort_sign(idx);
    if (sgn == 0) {
        rank_out = -1;
        return 0;
    }
    rank_out = rank(idx);
    return sgn;
}

std::vector<int> MultiIndexSet::complement(int r) const {
    const std::vector<int>& t = tuples[r];
    std::vector<int> c;
    c.reserve(n - k);
    size_t p = 0;
    for (int i = 1; i <= n; ++i) {
        if (p < t.size() && t[p] == i) {
            ++p;
            continue;
        }
        c.push_back(i);
    }
    return c;
}

int split_sign(const std::vector<int>& tuple, const std::vector<int>& comp) {
    std::vector<int> perm(tuple);
    perm.insert(perm.end(), comp.begin(), comp.end());
    // count inversions of the concatenation
    int sign = 1;
    for (size_t i = 0; i < perm.size(); ++i)
        for (size_t j = i + 1; j < perm.size(); ++j)
            if (perm[i] > perm[j]) sign = -sign;
    return sign;
}

} // namespace klab
