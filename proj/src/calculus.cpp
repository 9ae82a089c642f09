#include "klab/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace klab {

namespace {

bool channels_have_grad(const KFormField& f) {
    for (const auto& c : f.coeff)
        if (!c.has_grad()) return false;
    return true;
}

bool channels_have_hess(const KFormField& f) {
    for (const auto& c : f.coeff)
        if (!c.has_hess()) return false;
    return true;
}

bool vf_has_hess(const VectorField& v) {
    for (const auto& c : v.comp)
        if (!c.has_hess()) return false;
    return true;
}

// One term of a precomputed sparse contraction: coefficient channel `rank`
// enters with `sign`, optionally differentiated.
struct Term {
    int sign;
    int rank;
    int a; // meaning depends on the operation (slot, direction, ...)
    int b;
};

} // namespace

KFormField wedge(const KFormField& a, const KFormField& b) {
    if (a.n != b.n) throw std::invalid_argument("wedge: dimension mismatch");
    const int n = a.n, ka = a.k, kb = b.k;
    if (ka + kb > n) throw std::invalid_argument("wedge: degree exceeds dimension");
    KFormField r(n, ka + kb);

    for (int out = 0; out < r.channels(); ++out) {
        const std::vector<int>& I = r.idx[out];
        // every split of I into an increasing ka-subset and its remainder
        std::vector<Term> terms;
        const int kc = ka + kb;
        std::vector<int> sel(ka);
        std::function<void(int, int)> rec = [&](int pos, int start) {
            if (pos == ka) {
                std::vector<int> A(ka), B(kb);
                std::vector<bool> used(kc, false);
                for (int p = 0; p < ka; ++p) used[sel[p]] = true;
                int ia = 0, ib = 0;
                int inversions = 0;
                for (int p = 0; p < kc; ++p) {
                    if (used[p]) {
                        A[ia++] = I[p];
                    } else {
                        // elements of A coming after this B-element create inversions
                        for (int q = p + 1; q < kc; ++q)
                            if (used[q]) ++inversions;
                        B[ib++] = I[p];
                    }
                }
                Term t;
                t.sign = (inversions % 2 == 0) ? 1 : -1;
                t.rank = a.idx.rank(A);
                t.a = b.idx.rank(B);
                t.b = 0;
                terms.push_back(t);
                return;
            }
            for (int s = start; s <= kc - (ka - pos); ++s) {
                sel[pos] = s;
                rec(pos + 1, s + 1);
            }
        };
        rec(0, 0);

        auto av = a.coeff, bv = b.coeff;
        ScalarFn& out_fn = r.coeff[out];
        out_fn.val = [terms, av, bv](double t, const Vec& x) {
            double s = 0.0;
            for (const Term& tm : terms)
                s += tm.sign * av[tm.rank].value(t, x) * bv[tm.a].value(t, x);
            return s;
        };
        if (channels_have_grad(a) && channels_have_grad(b)) {
            out_fn.grad = [terms, av, bv](double t, const Vec& x) {
                Vec g(x.size(), 0.0);
                for (const Term& tm : terms) {
                    const double fa = av[tm.rank].value(t, x);
                    const double fb = bv[tm.a].value(t, x);
                    axpy(tm.sign * fb, av[tm.rank].grad(t, x), g);
                    axpy(tm.sign * fa, bv[tm.a].grad(t, x), g);
                }
                return g;
            };
        }
    }
    return r;
}

KFormField contract(const VectorField& X, const KFormField& a) {
    if (X.n != a.n) throw std::invalid_argument("contract: dimension mismatch");
    if (a.k == 0) throw std::invalid_argument("contract: cannot contract a 0-form");
    const int n = a.n;
    KFormField r(n, a.k - 1);
    const bool want_grad = channels_have_grad(a) && X.has_jacobian();

    for (int out = 0; out < r.channels(); ++out) {
        const std::vector<int>& J = r.idx[out];
        std::vector<Term> terms; // (sign, rank of a-channel, component l)
        for (int l = 1; l <= n; ++l) {
            std::vector<int> tuple;
            tuple.reserve(a.k);
            tuple.push_back(l);
            tuple.insert(tuple.end(), J.begin(), J.end());
            int rank = -1;
            const int sgn = a.idx.lookup(tuple, rank);
            if (sgn == 0) continue;
            terms.push_back(Term{sgn, rank, l - 1, 0});
        }
        auto av = a.coeff;
        auto xc = X.comp;
        r.coeff[out].val = [terms, av, xc](double t, const Vec& x) {
            double s = 0.0;
            for (const Term& tm : terms)
                s += tm.sign * xc[tm.a].value(t, x) * av[tm.rank].value(t, x);
            return s;
        };
        if (want_grad) {
            r.coeff[out].grad = [terms, av, xc](double t, const Vec& x) {
                Vec g(x.size(), 0.0);
                for (const Term& tm : terms) {
                    axpy(tm.sign * av[tm.rank].value(t, x), xc[tm.a].grad(t, x), g);
                    axpy(tm.sign * xc[tm.a].value(t, x), av[tm.rank].grad(t, x), g);
                }
                return g;
            };
        }
    }
    return r;
}

KFormField exterior_derivative(const KFormField& a) {
    const int n = a.n;
    if (a.k >= n) return zero_form(n, n); // d of a top form vanishes
    KFormField r(n, a.k + 1);
    const bool want_grad = channels_have_hess(a);

    for (int out = 0; out < r.channels(); ++out) {
        const std::vector<int>& I = r.idx[out];
        std::vector<Term> terms; // (sign, source rank, derivative direction)
        for (size_t m = 0; m < I.size(); ++m) {
            std::vector<int> rest;
            rest.reserve(I.size() - 1);
            for (size_t q = 0; q < I.size(); ++q)
                if (q != m) rest.push_back(I[q]);
            const int sgn = (m % 2 == 0) ? 1 : -1;
            terms.push_back(Term{sgn, a.idx.rank(rest), I[m] - 1, 0});
        }
        auto av = a.coeff;
        r.coeff[out].val = [terms, av](double t, const Vec& x) {
            double s = 0.0;
            for (const Term& tm : terms) s += tm.sign * av[tm.rank].partial(t, x, tm.a);
            return s;
        };
        if (want_grad) {
            r.coeff[out].grad = [terms, av](double t, const Vec& x) {
                const int n_ = static_cast<int>(x.size());
                Vec g(n_, 0.0);
                for (const Term& tm : terms) {
                    const Mat H = av[tm.rank].hess(t, x);
                    for (int j = 0; j < n_; ++j) g[j] += tm.sign * H(tm.a, j);
                }
                return g;
            };
        }
    }
    return r;
}

KFormField hodge_star(const KFormField& a) {
    const int n = a.n;
    KFormField r(n, n - a.k);
    for (int src = 0; src < a.channels(); ++src) {
        const std::vector<int> comp = a.idx.complement(src);
        const int sgn = split_sign(a.idx[src], comp);
        const int out = r.idx.rank(comp);
        r.coeff[out] = scale(static_cast<double>(sgn), a.coeff[src]);
    }
    return r;
}

KFormField hodge_star_inverse(const KFormField& a) {
    // acting on (n-k)-forms returning k-forms: star^{-1} = (-1)^{k(n-k)} star
    const int n = a.n;
    const int k = n - a.k;
    const double sgn = ((k * (n - k)) % 2 == 0) ? 1.0 : -1.0;
    return scale(sgn, hodge_star(a));
}

KFormField lie_derivative(const VectorField& b, const KFormField& K) {
    if (b.n != K.n) throw std::invalid_argument("lie_derivative: dimension mismatch");
    const int n = K.n, k = K.k;
    KFormField r(n, k);
    const bool want_grad = channels_have_hess(K) && vf_has_hess(b) && channels_have_grad(K);

    for (int out = 0; out < r.channels(); ++out) {
        const std::vector<int> C = r.idx[out];
        // slot terms: K_{C with i at slot j} * d_{C_j} b^i
        std::vector<Term> slots; // sign, K-rank, deriv dir (C_j - 1), component (i - 1)
        for (int j = 0; j < k; ++j) {
            for (int i = 1; i <= n; ++i) {
                std::vector<int> tup(C);
                tup[j] = i;
                int rank = -1;
                const int sgn = K.idx.lookup(tup, rank);
                if (sgn == 0) continue;
                slots.push_back(Term{sgn, rank, C[j] - 1, i - 1});
            }
        }
        auto kv = K.coeff;
        auto bc = b.comp;
        const int self = out;
        r.coeff[out].val = [slots, kv, bc, self](double t, const Vec& x) {
            const int n_ = static_cast<int>(x.size());
            const Vec g = kv[self].gradient(t, x);
            double s = 0.0;
            for (int l = 0; l < n_; ++l) s += bc[l].value(t, x) * g[l];
            for (const Term& tm : slots)
                s += tm.sign * kv[tm.rank].value(t, x) * bc[tm.b].partial(t, x, tm.a);
            return s;
        };
        if (want_grad) {
            r.coeff[out].grad = [slots, kv, bc, self](double t, const Vec& x) {
                const int n_ = static_cast<int>(x.size());
                Vec g(n_, 0.0);
                const Vec kg = kv[self].grad(t, x);
                const Mat kh = kv[self].hess(t, x);
                for (int l = 0; l < n_; ++l) {
                    const double bl = bc[l].value(t, x);
                    const Vec bg = bc[l].grad(t, x);
                    for (int m = 0; m < n_; ++m)
                        g[m] += bg[m] * kg[l] + bl * kh(l, m);
                }
                for (const Term& tm : slots) {
                    const double kval = kv[tm.rank].value(t, x);
                    const Vec kgr = kv[tm.rank].grad(t, x);
                    const Mat bh = bc[tm.b].hess(t, x);
                    const Vec bg = bc[tm.b].grad(t, x);
                    for (int m = 0; m < n_; ++m)
                        g[m] += tm.sign * (kgr[m] * bg[tm.a] + kval * bh(tm.a, m));
                }
                return g;
            };
        }
    }
    return r;
}

KFormField lie_derivative_adjoint(const VectorField& b, const KFormField& theta) {
    if (b.n != theta.n)
        throw std::invalid_argument("lie_derivative_adjoint: dimension mismatch");
    const int n = theta.n, k = theta.k;
    KFormField r(n, k);
    const bool want_grad =
        channels_have_hess(theta) && channels_have_grad(theta) && vf_has_hess(b);

    for (int out = 0; out < r.channels(); ++out) {
        const std::vector<int> C = r.idx[out];
        // slot terms: + theta_{C with i at slot j} * d_i b^{C_j}
        std::vector<Term> slots; // sign, theta-rank, deriv dir (i-1), component (C_j - 1)
        for (int j = 0; j < k; ++j) {
            for (int i = 1; i <= n; ++i) {
                std::vector<int> tup(C);
                tup[j] = i;
                int rank = -1;
                const int sgn = theta.idx.lookup(tup, rank);
                if (sgn == 0) continue;
                slots.push_back(Term{sgn, rank, i - 1, C[j] - 1});
            }
        }
        auto tv = theta.coeff;
        auto bc = b.comp;
        const int self = out;
        r.coeff[out].val = [slots, tv, bc, self](double t, const Vec& x) {
            const int n_ = static_cast<int>(x.size());
            double divb = 0.0;
            double conv = 0.0;
            const Vec tg = tv[self].gradient(t, x);
            for (int l = 0; l < n_; ++l) {
                divb += bc[l].partial(t, x, l);
                conv += bc[l].value(t, x) * tg[l];
            }
            double s = -divb * tv[self].value(t, x) - conv;
            for (const Term& tm : slots)
                s += tm.sign * tv[tm.rank].value(t, x) * bc[tm.b].partial(t, x, tm.a);
            return s;
        };
        if (want_grad) {
            r.coeff[out].grad = [slots, tv, bc, self](double t, const Vec& x) {
                const int n_ = static_cast<int>(x.size());
                Vec g(n_, 0.0);
                const double th = tv[self].value(t, x);
                const Vec tg = tv[self].grad(t, x);
                const Mat thh = tv[self].hess(t, x);
                double divb = 0.0;
                for (int l = 0; l < n_; ++l) divb += bc[l].partial(t, x, l);
                for (int m = 0; m < n_; ++m) {
                    double ddivb = 0.0; // d_m div b
                    double conv_m = 0.0;
                    for (int l = 0; l < n_; ++l) {
                        const Mat bh = bc[l].hess(t, x);
                        ddivb += bh(m, l);
                        conv_m += bc[l].grad(t, x)[m] * tg[l] + bc[l].value(t, x) * thh(l, m);
                    }
                    g[m] = -ddivb * th - divb * tg[m] - conv_m;
                }
                for (const Term& tm : slots) {
                    const double tval = tv[tm.rank].value(t, x);
                    const Vec tgr = tv[tm.rank].grad(t, x);
                    const Mat bh = bc[tm.b].hess(t, x);
                    const Vec bg = bc[tm.b].grad(t, x);
                    for (int m = 0; m < n_; ++m)
                        g[m] += tm.sign * (tgr[m] * bg[tm.a] + tval * bh(tm.a, m));
                }
                return g;
            };
        }
    }
    return r;
}

namespace {

KFormField transport(const KFormField& K, std::function<Vec(const Vec&)> point,
                     std::function<Mat(const Vec&)> jac) {
    KFormField r(K.n, K.k);
    for (int out = 0; out < r.channels(); ++out) {
        std::vector<int> J(r.idx[out]);
        for (int& v : J) --v; // 0-based columns
        auto kv = K.coeff;
        const MultiIndexSet src_idx = K.idx;
        r.coeff[out].val = [kv, src_idx, J, point, jac](double t, const Vec& x) {
            const Vec y = point(x);
            const Mat A = jac(x);
            double s = 0.0;
            for (int ri = 0; ri < src_idx.count(); ++ri) {
                const double kval = kv[ri].value(t, y);
                if (kval == 0.0) continue;
                std::vector<int> I(src_idx[ri]);
                for (int& v : I) --v;
                s += kval * minor_det(A, I, J);
            }
            return s;
        };
    }
    return r;
}

} // namespace

KFormField pushforward(const SampledDiffeo& phi, const KFormField& K) {
    if (phi.n != K.n) throw std::invalid_argument("pushforward: dimension mismatch");
    if (!phi.inv || !phi.dinv)
        throw std::invalid_argument("pushforward: diffeomorphism lacks inverse data");
    return transport(K, phi.inv, phi.dinv);
}

KFormField pullback(const SampledDiffeo& phi, const KFormField& K) {
    if (phi.n != K.n) throw std::invalid_argument("pullback: dimension mismatch");
    if (!phi.fwd || !phi.dfwd)
        throw std::invalid_argument("pullback: diffeomorphism lacks forward data");
    return transport(K, phi.fwd, phi.dfwd);
}

KFormField sharp(const KFormField& covariant) { return covariant; }
KFormField flat(const KFormField& contravariant) { return contravariant; }

double inner_product_pointwise(const KFormField& F, const KFormField& K,
                               double t, const Vec& x) {
    if (F.n != K.n || F.k != K.k)
        throw std::invalid_argument("inner_product_pointwise: mismatched forms");
    double s = 0.0;
    for (int c = 0; c < F.channels(); ++c)
        s += F.coeff[c].value(t, x) * K.coeff[c].value(t, x);
    return s;
}

double l2_pairing(const KFormField& F, const KFormField& K,
                  const QuadratureGrid& grid, double t) {
    double s = 0.0;
    for (const auto& nd : grid.nodes()) s += nd.w * inner_product_pointwise(F, K, t, nd.x);
    return s;
}

QuadValue l2_pairing_with_estimate(const KFormField& F, const KFormField& K,
                                   const QuadratureGrid& grid, double t) {
    return integrate_with_estimate(
        grid, [&](const Vec& x) { return inner_product_pointwise(F, K, t, x); });
}

double integrate_top_form(const KFormField& a, const QuadratureGrid& grid, double t) {
    if (a.k != a.n) throw std::invalid_argument("integrate_top_form: not a top form");
    double s = 0.0;
    for (const auto& nd : grid.nodes()) s += nd.w * a.coeff[0].value(t, nd.x);
    return s;
}

double fiber_norm(const KFormField& K, double t, const Vec& x) {
    double s = 0.0;
    for (const auto& c : K.coeff) {
        const double v = c.value(t, x);
        s += v * v;
    }
    return std::sqrt(s);
}

KFormField channel_partial(const KFormField& K, int dir) {
    KFormField r(K.n, K.k);
    for (int c = 0; c < K.channels(); ++c) {
        const ScalarFn src = K.coeff[c];
        r.coeff[c].val = [src, dir](double t, const Vec& x) { return src.partial(t, x, dir); };
        if (src.has_hess()) {
            r.coeff[c].grad = [src, dir](double t, const Vec& x) {
                const Mat H = src.hess(t, x);
                Vec g(x.size());
                for (size_t j = 0; j < x.size(); ++j) g[j] = H(dir, static_cast<int>(j));
                return g;
            };
        }
    }
    return r;
}

double weak_derivative_check(const KFormField& K, const std::vector<KFormField>& S,
                             const QuadratureGrid& grid,
                             const std::vector<TestForm>& test_forms, double t) {
    if (static_cast<int>(S.size()) != K.n)
        throw std::invalid_argument("weak_derivative_check: need one S_i per direction");
    double worst = 0.0;
    for (const TestForm& tf : test_forms) {
        for (int i = 0; i < K.n; ++i) {
            const double lhs = l2_pairing(S[i], tf.form, grid, t);
            const double rhs = l2_pairing(K, channel_partial(tf.form, i), grid, t);
            worst = std::max(worst, std::fabs(lhs + rhs));
        }
    }
    return worst;
}

} // namespace klab
