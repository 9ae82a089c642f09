// Increasing multi-indices for antisymmetric tensor storage.
//
// A k-form on R^n keeps one coefficient per increasing index tuple
// 1 <= i1 < ... < ik <= n (indices are 1-based to match the usual dx^i
// notation). Components at arbitrary tuples come from the antisymmetric
// extension: zero on repeats, otherwise sign of the sorting permutation
// times the stored channel.

#pragma once

#include <vector>

namespace klab {

int binomial(int n, int k);

// All increasing k-subsets of {1..n} in lexicographic order.
// index_set(3,2) = {(1,2),(1,3),(2,3)}.
struct MultiIndexSet {
    int n = 0;
    int k = 0;
    std::vector<std::vector<int>> tuples;

    MultiIndexSet() = default;
    MultiIndexSet(int n_, int k_);

    int count() const { return static_cast<int>(tuples.size()); }
    const std::vector<int>& operator[](int r) const { return tuples[r]; }

    // Rank of an increasing tuple; throws if the tuple is not a member.
    int rank(const std::vector<int>& idx) const;

    // Antisymmetric lookup of an arbitrary tuple: writes the channel rank and
    // returns the permutation sign, or 0 if an index repeats (rank then -1).
    int lookup(std::vector<int> idx, int& rank_out) const;

    // Complement of tuple r inside {1..n}, increasing.
    std::vector<int> complement(int r) const;
};

// Sign of the permutation taking (tuple, complement) to (1..n): used by the
// Hodge star. Assumes both halves are increasing and disjoint.
int split_sign(const std::vector<int>& tuple, const std::vector<int>& comp);

// Sorts idx in place, counting transpositions; returns +1/-1, or 0 on repeats.
int sort_sign(std::vector<int>& idx);

} // namespace klab
