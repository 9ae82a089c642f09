#include "klab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace klab {

namespace {

// sum_l Hess(xi^i)(j, l) * xi^l, the field-along-itself curvature entering
// the Ito correction of the variational equation.
Mat hess_along(const VectorField& xi, double t, const Vec& x, const Vec& xi_val) {
    const int n = xi.n;
    Mat out(n);
    for (int i = 0; i < n; ++i) {
        const Mat H = xi.comp[static_cast<size_t>(i)].hessian(t, x);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int l = 0; l < n; ++l) s += H(j, l) * xi_val[static_cast<size_t>(l)];
            out(i, j) = s;
        }
    }
    return out;
}

bool state_ok(const Vec& x, double guard) {
    return all_finite(x) && norm_inf(x) < guard;
}

} // namespace

FlowStepper::FlowStepper(const VectorField& b_, const std::vector<VectorField>& xis_,
                         SdeScheme scheme_, int direction_, bool with_jacobian_)
    : n(b_.n), b(&b_), xis(&xis_), scheme(scheme_), direction(direction_),
      with_jacobian(with_jacobian_) {
    if (direction != 1 && direction != -1)
        throw std::invalid_argument("FlowStepper: direction must be +1 or -1");
    for (const VectorField& xi : xis_)
        if (xi.n != n) throw std::invalid_argument("FlowStepper: field dimension mismatch");
}

void FlowStepper::init(const std::vector<Vec>& x0s) {
    if (x0s.empty()) throw std::invalid_argument("FlowStepper: no initial points");
    for (const Vec& p : x0s)
        if (static_cast<int>(p.size()) != n)
            throw std::invalid_argument("FlowStepper: initial point dimension mismatch");
    x = x0s;
    ok.assign(x0s.size(), 1);
    failed = 0;
    if (with_jacobian) {
        D.assign(x0s.size(), Mat::identity(n));
        J.assign(x0s.size(), 1.0);
    }
}

void FlowStepper::step(double t0, double t1, const Vec& dW) {
    if (static_cast<int>(dW.size()) != static_cast<int>(xis->size()))
        throw std::invalid_argument("FlowStepper: increment count != driver count");
    const double h = std::abs(t1 - t0);
    const double sg = static_cast<double>(direction);
    const int nd = static_cast<int>(xis->size());

    for (size_t pt = 0; pt < x.size(); ++pt) {
        if (!ok[pt]) continue;
        const Vec& X = x[pt];

        Vec b0 = sg * b->eval(t0, X);
        std::vector<Vec> xi0(static_cast<size_t>(nd));
        for (int k = 0; k < nd; ++k) xi0[static_cast<size_t>(k)] = (*xis)[static_cast<size_t>(k)].eval(t0, X);

        Vec xnew;
        Mat dnew;
        bool step_good = true;

        if (scheme == SdeScheme::StratonovichHeun) {
            Vec pred = X + h * b0;
            for (int k = 0; k < nd; ++k) axpy(sg * dW[static_cast<size_t>(k)], xi0[static_cast<size_t>(k)], pred);
            if (!state_ok(pred, blowup_guard)) {
                ok[pt] = 0;
                ++failed;
                continue;
            }
            Vec b1 = sg * b->eval(t1, pred);
            xnew = X + (0.5 * h) * (b0 + b1);
            for (int k = 0; k < nd; ++k) {
                Vec xi1 = (*xis)[static_cast<size_t>(k)].eval(t1, pred);
                axpy(0.5 * sg * dW[static_cast<size_t>(k)], xi0[static_cast<size_t>(k)] + xi1, xnew);
            }

            if (with_jacobian) {
                const Mat& Dc = D[pt];
                Mat B0D = matmul(b->jacobian(t0, X), Dc);
                Mat dpred = Dc + (sg * h) * B0D;
                std::vector<Mat> A0D(static_cast<size_t>(nd));
                for (int k = 0; k < nd; ++k) {
                    A0D[static_cast<size_t>(k)] = matmul((*xis)[static_cast<size_t>(k)].jacobian(t0, X), Dc);
                    dpred = dpred + (sg * dW[static_cast<size_t>(k)]) * A0D[static_cast<size_t>(k)];
                }
                dnew = Dc + (0.5 * sg * h) * (B0D + matmul(b->jacobian(t1, pred), dpred));
                for (int k = 0; k < nd; ++k) {
                    Mat A1D = matmul((*xis)[static_cast<size_t>(k)].jacobian(t1, pred), dpred);
                    dnew = dnew + (0.5 * sg * dW[static_cast<size_t>(k)]) * (A0D[static_cast<size_t>(k)] + A1D);
                }
            }
        } else {
            // Euler on the Ito form: the Stratonovich drift picks up
            // 1/2 sum_k (Dxi_k) xi_k, direction-independent (sign squares).
            Vec corr(static_cast<size_t>(n), 0.0);
            std::vector<Mat> Mk(static_cast<size_t>(nd));
            for (int k = 0; k < nd; ++k) {
                Mk[static_cast<size_t>(k)] = (*xis)[static_cast<size_t>(k)].jacobian(t0, X);
                axpy(0.5, matvec(Mk[static_cast<size_t>(k)], xi0[static_cast<size_t>(k)]), corr);
            }
            xnew = X + h * (b0 + corr);
            for (int k = 0; k < nd; ++k) axpy(sg * dW[static_cast<size_t>(k)], xi0[static_cast<size_t>(k)], xnew);

            if (with_jacobian) {
                const Mat& Dc = D[pt];
                Mat drift = sg * b->jacobian(t0, X);
                for (int k = 0; k < nd; ++k) {
                    const Mat& M = Mk[static_cast<size_t>(k)];
                    drift = drift + 0.5 * (hess_along((*xis)[static_cast<size_t>(k)], t0, X,
                                                      xi0[static_cast<size_t>(k)]) +
                                           matmul(M, M));
                }
                dnew = Dc + h * matmul(drift, Dc);
                for (int k = 0; k < nd; ++k)
                    dnew = dnew + (sg * dW[static_cast<size_t>(k)]) * matmul(Mk[static_cast<size_t>(k)], Dc);
            }
        }

        if (!state_ok(xnew, blowup_guard)) step_good = false;
        double jnew = 1.0;
        if (step_good && with_jacobian) {
            if (!all_finite(dnew)) {
                step_good = false;
            } else {
                try {
                    jnew = det(dnew);
                } catch (const std::runtime_error&) {
                    step_good = false;
                }
                if (step_good && !(jnew > 0.0)) step_good = false;
            }
        }

        if (!step_good) {
            ok[pt] = 0;
            ++failed;
            continue;
        }
        x[pt] = std::move(xnew);
        if (with_jacobian) {
            D[pt] = std::move(dnew);
            J[pt] = jnew;
        }
    }
}

bool FlowEnsemble::has_jacobians() const {
    return !tracks.empty() && !tracks.front().empty() && !tracks.front().front().Ds.empty();
}

Vec FlowEnsemble::position(int path, int point, int step) const {
    const FlowTrack& tr = tracks[static_cast<size_t>(path)][static_cast<size_t>(point)];
    Vec out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = tr.xs[static_cast<size_t>(step) * n + i];
    return out;
}

Mat FlowEnsemble::jacobian(int path, int point, int step) const {
    const FlowTrack& tr = tracks[static_cast<size_t>(path)][static_cast<size_t>(point)];
    if (tr.Ds.empty()) throw std::logic_error("FlowEnsemble: Jacobians were not stored");
    Mat out(n);
    const size_t base = static_cast<size_t>(step) * n * n;
    for (int i = 0; i < n * n; ++i) out.a[static_cast<size_t>(i)] = tr.Ds[base + static_cast<size_t>(i)];
    return out;
}

double FlowEnsemble::determinant(int path, int point, int step) const {
    const FlowTrack& tr = tracks[static_cast<size_t>(path)][static_cast<size_t>(point)];
    if (tr.J.empty()) throw std::logic_error("FlowEnsemble: determinants were not stored");
    return tr.J[static_cast<size_t>(step)];
}

int FlowEnsemble::failed_count() const {
    int c = 0;
    for (const auto& row : tracks)
        for (const FlowTrack& tr : row)
            if (!tr.ok) ++c;
    return c;
}

double FlowEnsemble::failed_fraction() const {
    const size_t total = tracks.size() * (tracks.empty() ? 0 : tracks.front().size());
    if (total == 0) return 0.0;
    return static_cast<double>(failed_count()) / static_cast<double>(total);
}

namespace {

void integrate_one_path(const VectorField& b, const std::vector<VectorField>& xis,
                        const BrownianPaths& paths, const std::vector<Vec>& x0s,
                        const FlowOptions& options, int direction, int path,
                        std::vector<FlowTrack>& out) {
    const int n = b.n;
    const int m = paths.spec.steps();
    const double T = paths.spec.horizon;
    const double dt = paths.spec.dt();
    const int nd = static_cast<int>(xis.size());

    FlowStepper st(b, xis, options.scheme, direction, options.with_jacobian);
    st.blowup_guard = options.blowup_guard;
    st.init(x0s);

    out.assign(x0s.size(), FlowTrack{});
    for (size_t pt = 0; pt < x0s.size(); ++pt) {
        FlowTrack& tr = out[pt];
        tr.xs.assign(static_cast<size_t>(m + 1) * n, 0.0);
        if (options.with_jacobian) {
            tr.Ds.assign(static_cast<size_t>(m + 1) * n * n, 0.0);
            tr.J.assign(static_cast<size_t>(m + 1), 1.0);
        }
    }

    auto record = [&](int step_idx) {
        for (size_t pt = 0; pt < x0s.size(); ++pt) {
            FlowTrack& tr = out[pt];
            for (int i = 0; i < n; ++i)
                tr.xs[static_cast<size_t>(step_idx) * n + i] = st.x[pt][static_cast<size_t>(i)];
            if (options.with_jacobian) {
                const size_t base = static_cast<size_t>(step_idx) * n * n;
                for (int i = 0; i < n * n; ++i) tr.Ds[base + static_cast<size_t>(i)] = st.D[pt].a[static_cast<size_t>(i)];
                tr.J[static_cast<size_t>(step_idx)] = st.J[pt];
            }
        }
    };

    record(0);
    Vec dW(static_cast<size_t>(nd), 0.0);
    for (int j = 0; j < m; ++j) {
        double t0, t1;
        if (direction > 0) {
            t0 = dt * j;
            t1 = dt * (j + 1);
            for (int k = 0; k < nd; ++k)
                dW[static_cast<size_t>(k)] = paths.inc[static_cast<size_t>(path)][static_cast<size_t>(k)][static_cast<size_t>(j)];
        } else {
            t0 = T - dt * j;
            t1 = T - dt * (j + 1);
            for (int k = 0; k < nd; ++k)
                dW[static_cast<size_t>(k)] = paths.inc[static_cast<size_t>(path)][static_cast<size_t>(k)][static_cast<size_t>(m - 1 - j)];
        }
        std::vector<char> before = st.ok;
        st.step(t0, t1, dW);
        for (size_t pt = 0; pt < x0s.size(); ++pt)
            if (before[pt] && !st.ok[pt]) {
                out[pt].ok = false;
                out[pt].fail_step = j;
            }
        record(j + 1);
    }
}

FlowEnsemble integrate_impl(const VectorField& b, const std::vector<VectorField>& xis,
                            const BrownianPaths& paths, const std::vector<Vec>& x0s,
                            const FlowOptions& options, int direction) {
    if (b.n < 1) throw std::invalid_argument("integrate_flow: drift has no dimension");
    if (static_cast<int>(xis.size()) != paths.spec.n_drivers)
        throw std::invalid_argument("integrate_flow: driver count != field count");
    if (x0s.empty()) throw std::invalid_argument("integrate_flow: no initial points");
    if (paths.n_paths < 1) throw std::invalid_argument("integrate_flow: no paths");

    FlowEnsemble ens;
    ens.n = b.n;
    ens.steps = paths.spec.steps();
    ens.scheme = options.scheme;
    ens.direction = direction;
    ens.spec = paths.spec;
    ens.times = grid_times(paths.spec);
    ens.x0s = x0s;
    ens.tracks.resize(static_cast<size_t>(paths.n_paths));

    const int threads = std::max(1, std::min(options.threads, paths.n_paths));
    if (threads == 1) {
        for (int p = 0; p < paths.n_paths; ++p)
            integrate_one_path(b, xis, paths, x0s, options, direction, p,
                               ens.tracks[static_cast<size_t>(p)]);
    } else {
        // Static slab partition: each path writes only its own slot, so the
        // result is identical for any thread count.
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int tix = 0; tix < threads; ++tix) {
            pool.emplace_back([&, tix]() {
                for (int p = tix; p < paths.n_paths; p += threads)
                    integrate_one_path(b, xis, paths, x0s, options, direction, p,
                                       ens.tracks[static_cast<size_t>(p)]);
            });
        }
        for (std::thread& th : pool) th.join();
    }
    return ens;
}

} // namespace

FlowEnsemble integrate_flow(const VectorField& b, const std::vector<VectorField>& xis,
                            const BrownianPaths& paths, const std::vector<Vec>& x0s,
                            const FlowOptions& options) {
    return integrate_impl(b, xis, paths, x0s, options, +1);
}

FlowEnsemble integrate_backward_flow(const VectorField& b, const std::vector<VectorField>& xis,
                                     const BrownianPaths& paths, const std::vector<Vec>& x0s,
                                     const FlowOptions& options) {
    return integrate_impl(b, xis, paths, x0s, options, -1);
}

void require_failure_rate_ok(const FlowEnsemble& ensemble, double max_fraction) {
    if (ensemble.failed_fraction() > max_fraction)
        throw std::runtime_error("flow integration: flagged path fraction exceeds policy (" +
                                 format_double(ensemble.failed_fraction()) + " > " +
                                 format_double(max_fraction) + ")");
}

MomentEstimate jacobian_moments(const FlowEnsemble& ensemble, double p) {
    if (p < 1.0) throw std::invalid_argument("jacobian_moments: p must be >= 1");
    if (ensemble.tracks.empty()) throw std::invalid_argument("jacobian_moments: empty ensemble");
    if (!ensemble.has_jacobians())
        throw std::invalid_argument("jacobian_moments: ensemble lacks Jacobians");

    const int n = ensemble.n;
    const int m = ensemble.steps;
    MomentEstimate best;
    bool any = false;
    for (int pt = 0; pt < ensemble.n_points(); ++pt) {
        double sum = 0.0, sumsq = 0.0;
        int cnt = 0;
        for (int path = 0; path < ensemble.n_paths(); ++path) {
            const FlowTrack& tr = ensemble.tracks[static_cast<size_t>(path)][static_cast<size_t>(pt)];
            if (!tr.ok) continue;
            double mx = 0.0;
            for (int s = 0; s <= m; ++s) {
                const size_t base = static_cast<size_t>(s) * n * n;
                double fs = 0.0;
                for (int i = 0; i < n * n; ++i) {
                    const double v = tr.Ds[base + static_cast<size_t>(i)];
                    fs += v * v;
                }
                mx = std::max(mx, std::sqrt(fs));
            }
            const double sample = std::pow(mx, p);
            sum += sample;
            sumsq += sample * sample;
            ++cnt;
        }
        if (cnt == 0) continue;
        const double mean = sum / cnt;
        double se = 0.0;
        if (cnt > 1) {
            const double var = std::max(0.0, (sumsq - cnt * mean * mean) / (cnt - 1));
            se = std::sqrt(var / cnt);
        }
        if (!any || mean > best.value) {
            best.value = mean;
            best.std_error = se;
            any = true;
        }
    }
    if (!any) throw std::runtime_error("jacobian_moments: every track is flagged");
    return best;
}

ConvergenceReport flow_convergence_sweep(const std::vector<VectorField>& b_sequence,
                                         const std::vector<VectorField>& xis,
                                         const BrownianPaths& paths,
                                         const std::vector<Vec>& x0s, double p,
                                         const Vec& params, const FlowOptions& options) {
    const size_t N = b_sequence.size();
    if (N < 3) throw std::invalid_argument("flow_convergence_sweep: need at least 3 members");
    if (!params.empty() && params.size() != N && params.size() != N - 1)
        throw std::invalid_argument("flow_convergence_sweep: params length mismatch");
    if (p < 1.0) throw std::invalid_argument("flow_convergence_sweep: p must be >= 1");

    // Coupling: every member rides the same increments and initial points.
    std::vector<FlowEnsemble> members;
    members.reserve(N);
    for (const VectorField& bn : b_sequence) {
        members.push_back(integrate_flow(bn, xis, paths, x0s, options));
        require_failure_rate_ok(members.back());
    }
    const FlowEnsemble& ref = members.back();

    ConvergenceReport rep;
    rep.name = "flow_convergence_sweep";
    rep.parameter_label = "epsilon";
    rep.error_label = "position_error_p";
    if (options.with_jacobian) rep.aux_label = "jacobian_error_p";

    const int n = ref.n;
    const int m = ref.steps;
    for (size_t mem = 0; mem + 1 < N; ++mem) {
        const FlowEnsemble& e = members[mem];
        double pos_err = 0.0, jac_err = 0.0;
        for (int pt = 0; pt < ref.n_points(); ++pt) {
            double pos_sum = 0.0, jac_sum = 0.0;
            int cnt = 0;
            for (int path = 0; path < ref.n_paths(); ++path) {
                const FlowTrack& ta = e.tracks[static_cast<size_t>(path)][static_cast<size_t>(pt)];
                const FlowTrack& tb = ref.tracks[static_cast<size_t>(path)][static_cast<size_t>(pt)];
                if (!ta.ok || !tb.ok) continue;
                double mx = 0.0, mj = 0.0;
                for (int s = 0; s <= m; ++s) {
                    double d2 = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double d = ta.xs[static_cast<size_t>(s) * n + i] -
                                         tb.xs[static_cast<size_t>(s) * n + i];
                        d2 += d * d;
                    }
                    mx = std::max(mx, std::sqrt(d2));
                    if (options.with_jacobian) {
                        double f2 = 0.0;
                        const size_t base = static_cast<size_t>(s) * n * n;
                        for (int i = 0; i < n * n; ++i) {
                            const double d = ta.Ds[base + static_cast<size_t>(i)] -
                                             tb.Ds[base + static_cast<size_t>(i)];
                            f2 += d * d;
                        }
                        mj = std::max(mj, std::sqrt(f2));
                    }
                }
                pos_sum += std::pow(mx, p);
                jac_sum += std::pow(mj, p);
                ++cnt;
            }
            if (cnt == 0) continue;
            pos_err = std::max(pos_err, pos_sum / cnt);
            jac_err = std::max(jac_err, jac_sum / cnt);
        }
        const double param = params.empty() ? static_cast<double>(mem + 1) : params[mem];
        rep.add(param, pos_err, jac_err);
    }
    return rep;
}

void write_ensemble_csv(const FlowEnsemble& ensemble, const std::string& filepath) {
    const int n = ensemble.n;
    std::vector<std::string> header = {"path", "point", "t"};
    for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i));
    const bool jac = ensemble.has_jacobians();
    if (jac) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                header.push_back("D" + std::to_string(i) + std::to_string(j));
        header.push_back("J");
    }
    header.push_back("ok");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<size_t>(ensemble.n_paths()) * ensemble.n_points() *
                 (ensemble.steps + 1));
    for (int path = 0; path < ensemble.n_paths(); ++path) {
        for (int pt = 0; pt < ensemble.n_points(); ++pt) {
            const FlowTrack& tr = ensemble.tracks[static_cast<size_t>(path)][static_cast<size_t>(pt)];
            for (int s = 0; s <= ensemble.steps; ++s) {
                std::vector<std::string> row;
                row.reserve(header.size());
                row.push_back(std::to_string(path));
                row.push_back(std::to_string(pt));
                row.push_back(format_double(ensemble.times[static_cast<size_t>(s)]));
                for (int i = 0; i < n; ++i)
                    row.push_back(format_double(tr.xs[static_cast<size_t>(s) * n + i]));
                if (jac) {
                    const size_t base = static_cast<size_t>(s) * n * n;
                    for (int i = 0; i < n * n; ++i)
                        row.push_back(format_double(tr.Ds[base + static_cast<size_t>(i)]));
                    row.push_back(format_double(tr.J[static_cast<size_t>(s)]));
                }
                row.push_back(tr.ok ? "1" : "0");
                rows.push_back(std::move(row));
            }
        }
    }
    write_csv(filepath, header, rows);
}

} // namespace klab
