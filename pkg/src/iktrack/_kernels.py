"""Hot numeric kernels: chain forward kinematics, stacked frame Jacobians,
pose residuals, and drift-corrected rotation integration.

All kernels take plain float64/int64 arrays so they compile under numba and
run unchanged as numpy when acceleration is off (see ``_accel``). The 3x3
arithmetic is written out explicitly to avoid temporary allocations in the
per-step loop.
"""
import numpy as np

from ._accel import njit


@njit(cache=True)
def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis[0], axis[1], axis[2]
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    out = np.empty((3, 3))
    out[0, 0] = c + t * x * x
    out[0, 1] = t * x * y - s * z
    out[0, 2] = t * x * z + s * y
    out[1, 0] = t * x * y + s * z
    out[1, 1] = c + t * y * y
    out[1, 2] = t * y * z - s * x
    out[2, 0] = t * x * z - s * y
    out[2, 1] = t * y * z + s * x
    out[2, 2] = c + t * z * z
    return out


@njit(cache=True)
def fk_chain(topo, parent, joint_of, origin_p, origin_r, axis, s, base_p, base_r):
    """World pose of every link.

    ``topo`` orders links parent-before-child. Returns (positions (L,3),
    rotations (L,3,3)). A link's frame sits on its joint: the origin offset is
    fixed in the parent, the rotation about ``axis`` acts on the child frame.
    """
    n_links = parent.shape[0]
    pos = np.empty((n_links, 3))
    rot = np.empty((n_links, 3, 3))
    for i in range(n_links):
        l = topo[i]
        par = parent[l]
        if par < 0:
            pos[l] = base_p
            rot[l] = base_r
            continue
        pos[l] = pos[par] + np.dot(rot[par], origin_p[l])
        rj = rotation_about_axis(axis[l], s[joint_of[l]])
        rot[l] = np.dot(rot[par], np.dot(origin_r[l], rj))
    return pos, rot


@njit(cache=True)
def stacked_jacobian_kernel(parent, joint_of, axis, pos_idx, ori_idx, pos, rot,
                            base_pos, n_joints):
    """Stacked frame Jacobian: linear rows for position targets, then angular
    rows for orientation targets. Columns ordered (base_lin, base_ang, s_dot).
    """
    n_p = pos_idx.shape[0]
    n_o = ori_idx.shape[0]
    jac = np.zeros((3 * (n_p + n_o), n_joints + 6))
    for i in range(n_p):
        f = pos_idx[i]
        r0 = 3 * i
        dx = pos[f, 0] - base_pos[0]
        dy = pos[f, 1] - base_pos[1]
        dz = pos[f, 2] - base_pos[2]
        jac[r0, 0] = 1.0
        jac[r0 + 1, 1] = 1.0
        jac[r0 + 2, 2] = 1.0
        # -skew(p_frame - p_base)
        jac[r0, 4] = dz
        jac[r0, 5] = -dy
        jac[r0 + 1, 3] = -dz
        jac[r0 + 1, 5] = dx
        jac[r0 + 2, 3] = dy
        jac[r0 + 2, 4] = -dx
        l = f
        while parent[l] >= 0:
            j = joint_of[l]
            aw = np.dot(rot[l], axis[l])  # axis is invariant under its own rotation
            rx = pos[f, 0] - pos[l, 0]
            ry = pos[f, 1] - pos[l, 1]
            rz = pos[f, 2] - pos[l, 2]
            jac[r0, 6 + j] = aw[1] * rz - aw[2] * ry
            jac[r0 + 1, 6 + j] = aw[2] * rx - aw[0] * rz
            jac[r0 + 2, 6 + j] = aw[0] * ry - aw[1] * rx
            l = parent[l]
    for i in range(n_o):
        f = ori_idx[i]
        r0 = 3 * (n_p + i)
        jac[r0, 3] = 1.0
        jac[r0 + 1, 4] = 1.0
        jac[r0 + 2, 5] = 1.0
        l = f
        while parent[l] >= 0:
            j = joint_of[l]
            aw = np.dot(rot[l], axis[l])
            jac[r0, 6 + j] = aw[0]
            jac[r0 + 1, 6 + j] = aw[1]
            jac[r0 + 2, 6 + j] = aw[2]
            l = parent[l]
    return jac


@njit(cache=True)
def pose_residual_kernel(pos_idx, ori_idx, pos, rot, target_pos, target_rot):
    """Stacked pose residual: Euclidean position errors, then the
    skew-symmetric part of (R_estimate^T R_target) read off as a vector.
    """
    n_p = pos_idx.shape[0]
    n_o = ori_idx.shape[0]
    out = np.empty(3 * (n_p + n_o))
    for i in range(n_p):
        f = pos_idx[i]
        out[3 * i] = target_pos[i, 0] - pos[f, 0]
        out[3 * i + 1] = target_pos[i, 1] - pos[f, 1]
        out[3 * i + 2] = target_pos[i, 2] - pos[f, 2]
    for i in range(n_o):
        f = ori_idx[i]
        r0 = 3 * (n_p + i)
        # m[a, b] = (R^T T)[a, b]; only the six off-diagonal entries are needed
        m21 = rot[f, 0, 2] * target_rot[i, 0, 1] + rot[f, 1, 2] * target_rot[i, 1, 1] + rot[f, 2, 2] * target_rot[i, 2, 1]
        m12 = rot[f, 0, 1] * target_rot[i, 0, 2] + rot[f, 1, 1] * target_rot[i, 1, 2] + rot[f, 2, 1] * target_rot[i, 2, 2]
        m02 = rot[f, 0, 0] * target_rot[i, 0, 2] + rot[f, 1, 0] * target_rot[i, 1, 2] + rot[f, 2, 0] * target_rot[i, 2, 2]
        m20 = rot[f, 0, 2] * target_rot[i, 0, 0] + rot[f, 1, 2] * target_rot[i, 1, 0] + rot[f, 2, 2] * target_rot[i, 2, 0]
        m10 = rot[f, 0, 1] * target_rot[i, 0, 0] + rot[f, 1, 1] * target_rot[i, 1, 0] + rot[f, 2, 1] * target_rot[i, 2, 0]
        m01 = rot[f, 0, 0] * target_rot[i, 0, 1] + rot[f, 1, 0] * target_rot[i, 1, 1] + rot[f, 2, 0] * target_rot[i, 2, 1]
        out[r0] = 0.5 * (m21 - m12)
        out[r0 + 1] = 0.5 * (m02 - m20)
        out[r0 + 2] = 0.5 * (m10 - m01)
    return out


@njit(cache=True)
def _inv3(a):
    det = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
           - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
           + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    inv = np.empty((3, 3))
    inv[0, 0] = (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) / det
    inv[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) / det
    inv[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) / det
    inv[1, 0] = (a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) / det
    inv[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) / det
    inv[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) / det
    inv[2, 0] = (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) / det
    inv[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) / det
    inv[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) / det
    return inv


@njit(cache=True)
def baumgarte_step_kernel(r_prev, omega, rho, dt):
    """One explicit Euler step of R with the orthonormality-restoring term:
    Rdot = R (S(omega) + (rho/2)((R^T R)^-1 - I)).
    """
    g = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            g[a, b] = r_prev[0, a] * r_prev[0, b] + r_prev[1, a] * r_prev[1, b] + r_prev[2, a] * r_prev[2, b]
    ginv = _inv3(g)
    half_rho = 0.5 * rho
    m = np.empty((3, 3))
    m[0, 0] = half_rho * (ginv[0, 0] - 1.0)
    m[0, 1] = -omega[2] + half_rho * ginv[0, 1]
    m[0, 2] = omega[1] + half_rho * ginv[0, 2]
    m[1, 0] = omega[2] + half_rho * ginv[1, 0]
    m[1, 1] = half_rho * (ginv[1, 1] - 1.0)
    m[1, 2] = -omega[0] + half_rho * ginv[1, 2]
    m[2, 0] = -omega[1] + half_rho * ginv[2, 0]
    m[2, 1] = omega[0] + half_rho * ginv[2, 1]
    m[2, 2] = half_rho * (ginv[2, 2] - 1.0)
    return r_prev + dt * np.dot(r_prev, m)


@njit(cache=True)
def baumgarte_path_kernel(r0, omegas, rho, dt):
    """Integrate a whole angular-velocity sequence; returns the final matrix
    and the worst Frobenius orthonormality error seen at any step.
    """
    r = r0.copy()
    max_err = 0.0
    for k in range(omegas.shape[0]):
        r = baumgarte_step_kernel(r, omegas[k], rho, dt)
        err = 0.0
        for a in range(3):
            for b in range(3):
                gab = r[0, a] * r[0, b] + r[1, a] * r[1, b] + r[2, a] * r[2, b]
                if a == b:
                    gab -= 1.0
                err += gab * gab
        err = np.sqrt(err)
        if err > max_err:
            max_err = err
    return r, max_err
