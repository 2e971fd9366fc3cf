# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step kernels.

Every routine here has a twin in ``_kernels_py`` that performs the same
floating-point operations in the same order, so both backends produce
bit-identical results.
"""

from libc.math cimport sqrt, exp, log1p, fabs


def physics_step(double[:, ::1] pos, double[:, ::1] vel, double[:, ::1] force,
                 const double[::1] radius, const double[::1] mass,
                 const double[::1] max_speed, const unsigned char[::1] movable,
                 const unsigned char[::1] collide, double dt, double damping,
                 double contact_force, double contact_margin):
    """Advance the particle world one tick in place.

    ``force`` holds the action forces on entry and the total forces on exit.
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t a, b
    cdef double dx, dy, dist, x, pen, fx, fy, speed
    for a in range(n):
        for b in range(a + 1, n):
            if not (collide[a] and collide[b]):
                continue
            dx = pos[a, 0] - pos[b, 0]
            dy = pos[a, 1] - pos[b, 1]
            dist = sqrt(dx * dx + dy * dy)
            if dist == 0.0:
                continue
            x = -(dist - (radius[a] + radius[b])) / contact_margin
            if x > 0.0:
                pen = (x + log1p(exp(-x))) * contact_margin
            else:
                pen = log1p(exp(x)) * contact_margin
            fx = contact_force * dx / dist * pen
            fy = contact_force * dy / dist * pen
            if movable[a]:
                force[a, 0] = fx + force[a, 0]
                force[a, 1] = fy + force[a, 1]
            if movable[b]:
                force[b, 0] = -fx + force[b, 0]
                force[b, 1] = -fy + force[b, 1]
    for a in range(n):
        if not movable[a]:
            continue
        vel[a, 0] = vel[a, 0] * (1.0 - damping)
        vel[a, 1] = vel[a, 1] * (1.0 - damping)
        vel[a, 0] = vel[a, 0] + force[a, 0] / mass[a] * dt
        vel[a, 1] = vel[a, 1] + force[a, 1] / mass[a] * dt
        speed = sqrt(vel[a, 0] * vel[a, 0] + vel[a, 1] * vel[a, 1])
        if speed > max_speed[a]:
            vel[a, 0] = vel[a, 0] / speed * max_speed[a]
            vel[a, 1] = vel[a, 1] / speed * max_speed[a]
        pos[a, 0] = pos[a, 0] + vel[a, 0] * dt
        pos[a, 1] = pos[a, 1] + vel[a, 1] * dt


def knn_mean_distance(const double[:, ::1] memory, Py_ssize_t count,
                      const double[::1] query, Py_ssize_t k):
    """Mean Euclidean distance from ``query`` to its ``k`` nearest rows.

    Only the first ``count`` rows of ``memory`` are live. ``k`` is capped at
    ``count``; the caller handles ``count == 0``.
    """
    cdef Py_ssize_t d = query.shape[0]
    cdef Py_ssize_t i, j, filled = 0
    cdef double s, diff, total
    if k > count:
        k = count
    if k <= 0:
        return 0.0
    cdef double[64] stack_best
    cdef double* best = stack_best
    cdef list heap_fallback
    if k > 64:
        # rare: large neighbour counts go through a Python list
        heap_fallback = []
        for i in range(count):
            s = 0.0
            for j in range(d):
                diff = memory[i, j] - query[j]
                s += diff * diff
            heap_fallback.append(sqrt(s))
        heap_fallback.sort()
        total = 0.0
        for i in range(k):
            total += <double>heap_fallback[i]
        return total / k
    for i in range(count):
        s = 0.0
        for j in range(d):
            diff = memory[i, j] - query[j]
            s += diff * diff
        s = sqrt(s)
        # insertion into the ascending list of the k best so far
        if filled < k:
            j = filled
            filled += 1
        elif s < best[k - 1]:
            j = k - 1
        else:
            continue
        while j > 0 and best[j - 1] > s:
            best[j] = best[j - 1]
            j -= 1
        best[j] = s
    total = 0.0
    for i in range(k):
        total += best[i]
    return total / k


def max_cosine(const double[:, ::1] reps, Py_ssize_t count, const double[::1] unit_query):
    """Index and value of the largest dot product between ``unit_query`` and live rows.

    Returns ``(-1, -inf)`` when nothing is stored; ties keep the lowest index.
    """
    cdef Py_ssize_t d = unit_query.shape[0]
    cdef Py_ssize_t i, j, best_i = -1
    cdef double s, best = -float("inf")
    for i in range(count):
        s = 0.0
        for j in range(d):
            s += reps[i, j] * unit_query[j]
        if s > best:
            best = s
            best_i = i
    return best_i, best


cdef double[5] _DX = [0.0, -1.0, 1.0, 0.0, 0.0]
cdef double[5] _DY = [0.0, 0.0, 0.0, -1.0, 1.0]


def flee_action(const double[:, ::1] pos, const double[:, ::1] vel, Py_ssize_t n_pursuers,
                Py_ssize_t evader, double accel, double mass, double max_speed,
                double dt, double damping, double bound):
    """Evader move 1..4 best aligned with fleeing the nearest pursuer.

    Moves whose contact-free landing point leaves ``[-bound, bound]^2`` are
    skipped unless all four do. Ties keep the lowest index.
    """
    cdef Py_ssize_t i, a, nearest = 0, best_a = -1, best_any = -1
    cdef double dx, dy, d, best_d = float("inf")
    cdef double ax, ay, vx, vy, speed, px, py, score
    cdef double best_score = -float("inf"), best_any_score = -float("inf")
    cdef double ex = pos[evader, 0], ey = pos[evader, 1]
    for i in range(n_pursuers):
        dx = pos[i, 0] - ex
        dy = pos[i, 1] - ey
        d = dx * dx + dy * dy
        if d < best_d:
            best_d = d
            nearest = i
    ax = ex - pos[nearest, 0]
    ay = ey - pos[nearest, 1]
    for a in range(1, 5):
        score = _DX[a] * ax + _DY[a] * ay
        vx = vel[evader, 0] * (1.0 - damping) + _DX[a] * accel / mass * dt
        vy = vel[evader, 1] * (1.0 - damping) + _DY[a] * accel / mass * dt
        speed = sqrt(vx * vx + vy * vy)
        if speed > max_speed:
            vx = vx / speed * max_speed
            vy = vy / speed * max_speed
        px = ex + vx * dt
        py = ey + vy * dt
        if score > best_any_score:
            best_any_score = score
            best_any = a
        if fabs(px) <= bound and fabs(py) <= bound and score > best_score:
            best_score = score
            best_a = a
    return best_a if best_a >= 0 else best_any
