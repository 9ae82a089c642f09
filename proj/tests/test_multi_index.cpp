#include "doctest.h"
#include "klab/multi_index.hpp"

#include <stdexcept>

using namespace klab;

TEST_CASE("binomial coefficients") {
    CHECK(binomial(0, 0) == 1);
    CHECK(binomial(4, 0) == 1);
    CHECK(binomial(4, 2) == 6);
    CHECK(binomial(5, 3) == 10);
    CHECK(binomial(6, 6) == 1);
    CHECK(binomial(3, 5) == 0);
}

TEST_CASE("index set enumeration is lexicographic") {
    MultiIndexSet s(3, 2);
    REQUIRE(s.count() == 3);
    CHECK(s[0] == std::vector<int>{1, 2});
    CHECK(s[1] == std::vector<int>{1, 3});
    CHECK(s[2] == std::vector<int>{2, 3});

    MultiIndexSet z(4, 0);
    REQUIRE(z.count() == 1);
    CHECK(z[0].empty());

    MultiIndexSet top(4, 4);
    REQUIRE(top.count() == 1);
    CHECK(top[0] == std::vector<int>{1, 2, 3, 4});

    MultiIndexSet big(5, 2);
    CHECK(big.count() == 10);
    // (1,2),(1,3),(1,4),(1,5),(2,3),(2,4),(2,5),... puts (2,5) at rank 6.
    CHECK(big.rank({2, 5}) == 6);
}

TEST_CASE("rank round trips and rejects non-members") {
    MultiIndexSet s(4, 2);
    for (int r = 0; r < s.count(); ++r) CHECK(s.rank(s[r]) == r);
    CHECK_THROWS_AS((void)s.rank({2, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)s.rank({1, 5}), std::invalid_argument);
}

TEST_CASE("antisymmetric lookup") {
    MultiIndexSet s(4, 2);
    int r = -2;

    CHECK(s.lookup({1, 3}, r) == 1);
    CHECK(r == s.rank({1, 3}));

    // One transposition flips the sign.
    CHECK(s.lookup({3, 1}, r) == -1);
    CHECK(r == s.rank({1, 3}));

    // Repeated index is annihilated.
    CHECK(s.lookup({2, 2}, r) == 0);
    CHECK(r == -1);

    MultiIndexSet t(3, 3);
    // (2,3,1) -> (1,2,3) is a 3-cycle, even permutation.
    CHECK(t.lookup({2, 3, 1}, r) == 1);
    CHECK(r == 0);
    // (3,2,1) is odd.
    CHECK(t.lookup({3, 2, 1}, r) == -1);
}

TEST_CASE("complement and split sign") {
    MultiIndexSet s(3, 2);
    // (1,3) has complement (2); (1,3,2) -> (1,2,3) is one swap.
    int r13 = s.rank({1, 3});
    CHECK(s.complement(r13) == std::vector<int>{2});
    CHECK(split_sign(s[r13], s.complement(r13)) == -1);

    // (1,2) | (3) is already sorted.
    int r12 = s.rank({1, 2});
    CHECK(split_sign(s[r12], s.complement(r12)) == 1);

    // (2,3) | (1): (2,3,1) -> even.
    int r23 = s.rank({2, 3});
    CHECK(split_sign(s[r23], s.complement(r23)) == 1);

    MultiIndexSet q(4, 2);
    // (1,3)|(2,4): permutation (1,3,2,4), one swap, odd.
    int q13 = q.rank({1, 3});
    CHECK(split_sign(q[q13], q.complement(q13)) == -1);
    // (2,4)|(1,3): (2,4,1,3) -> count inversions: (2,1),(4,1),(4,3) = 3, odd.
    int q24 = q.rank({2, 4});
    CHECK(split_sign(q[q24], q.complement(q24)) == -1);

    // Empty tuple against the full complement.
    MultiIndexSet e(3, 0);
    CHECK(split_sign(e[0], e.complement(0)) == 1);
}

TEST_CASE("sort_sign counts transpositions") {
    std::vector<int> a{3, 1, 2};
    CHECK(sort_sign(a) == 1);
    CHECK(a == std::vector<int>{1, 2, 3});

    std::vector<int> b{2, 1};
    CHECK(sort_sign(b) == -1);

    std::vector<int> c{1, 4, 4};
    CHECK(sort_sign(c) == 0);

    std::vector<int> d{5};
    CHECK(sort_sign(d) == 1);
}
