#include "reachbot/ik.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reachbot/rng.hpp"

namespace reachbot {

namespace {

// Solve the symmetric positive-definite 3x3 system A x = b in place
// (Gaussian elimination with partial pivoting; A is tiny and damped, so this
// is more than enough).
Vec3 solve3(double a[3][3], Vec3 b) {
    double rhs[3] = {b.x, b.y, b.z};
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-300) throw std::runtime_error("ik: singular system");
        std::swap(a[col], a[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    double x[3];
    for (int r = 2; r >= 0; --r) {
        double s = rhs[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return {x[0], x[1], x[2]};
}

}  // namespace

IkResult solve_ik(const KinematicChain& chain, const Vec3& target, std::span<const double> q0,
                  const IkParams& params) {
    if (!(params.damping > 0.0)) throw std::invalid_argument("ik: damping must be > 0");
    if (!(params.tolerance > 0.0)) throw std::invalid_argument("ik: tolerance must be > 0");
    if (!std::isfinite(target.x) || !std::isfinite(target.y) || !std::isfinite(target.z)) {
        throw std::invalid_argument("ik: target must be finite");
    }
    if (q0.size() != chain.joint_count()) {
        throw std::invalid_argument("ik: q0 length does not match chain");
    }
    if (!chain.within_limits(q0, 1e-12)) throw std::invalid_argument("ik: q0 outside joint limits");
    if (!chain.has_frame(params.frame)) throw std::invalid_argument("ik: unknown frame");

    std::vector<bool> active(chain.joint_count(), params.active_joints.empty());
    for (const std::string& name : params.active_joints) {
        bool found = false;
        for (std::size_t i = 0; i < chain.joint_count(); ++i) {
            if (chain.joints()[i].name == name) {
                active[i] = true;
                found = true;
            }
        }
        if (!found) throw std::invalid_argument("ik: unknown active joint '" + name + "'");
    }

    IkResult best;
    best.q.assign(q0.begin(), q0.end());

    auto residual_at = [&](std::span<const double> angles) {
        const FkResult fk = chain.forward_kinematics(angles);
        return distance(chain.frame_pose(fk, params.frame).translation, target);
    };
    best.residual = residual_at(best.q);

    // Restart configurations come from a fixed-seed stream, so a given
    // (chain, target, q0, params) always walks the same path.
    Rng restart_rng(0x696b5f72657374ULL);

    const double d2 = params.damping * params.damping;
    int iter_used = 0;

    for (int start = 0; start <= params.restarts && iter_used < params.max_iters; ++start) {
        std::vector<double> q(q0.begin(), q0.end());
        if (start > 0) {
            for (std::size_t j = 0; j < q.size(); ++j) {
                if (!active[j]) continue;
                q[j] = restart_rng.uniform(chain.joints()[j].lo, chain.joints()[j].hi);
            }
        }
        {
            const double res = residual_at(q);
            if (res < best.residual) {
                best.residual = res;
                best.q = q;
            }
        }

        double start_best = best.residual;
        int since_improve = 0;

        while (iter_used < params.max_iters && best.residual > params.tolerance) {
            ++iter_used;
            const FkResult fk = chain.forward_kinematics(q);
            const Vec3 err = target - chain.frame_pose(fk, params.frame).translation;
            const Jacobian jac = chain.jacobian(q, params.frame);

            // J J^T + d^2 I over the active columns
            double a[3][3];
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < jac.cols; ++j) {
                        if (!active[j]) continue;
                        s += jac(static_cast<std::size_t>(r), j) *
                             jac(static_cast<std::size_t>(c), j);
                    }
                    a[r][c] = s + (r == c ? d2 : 0.0);
                }
            }
            const Vec3 y = solve3(a, err);

            for (std::size_t j = 0; j < jac.cols; ++j) {
                if (!active[j]) continue;
                double dq = jac(0, j) * y.x + jac(1, j) * y.y + jac(2, j) * y.z;
                dq = std::clamp(dq, -params.step_clamp, params.step_clamp);
                q[j] += dq;
            }
            chain.clamp_to_limits(q);

            const double res = residual_at(q);
            if (res < best.residual) {
                best.residual = res;
                best.q = q;
            }
            // relative improvement keeps slow near-singular polishing alive
            // while a frozen plateau (limit-stuck local minimum) stalls out
            if (res < start_best * (1.0 - 1e-6)) {
                start_best = res;
                since_improve = 0;
            } else if (++since_improve >= params.stall_window) {
                break;
            }
        }
    }

    best.iterations = iter_used;
    best.converged = best.residual <= params.tolerance;
    return best;
}

}  // namespace reachbot
