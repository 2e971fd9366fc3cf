"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Operation order mirrors the Cython source exactly; keep the two in sync.
"""

from __future__ import annotations

import math

import numpy as np


def physics_step(pos, vel, force, radius, mass, max_speed, movable, collide,
                 dt, damping, contact_force, contact_margin):
    n = pos.shape[0]
    p = pos.tolist()
    v = vel.tolist()
    f = force.tolist()
    rad = radius.tolist()
    for a in range(n):
        if not collide[a]:
            continue
        pa = p[a]
        for b in range(a + 1, n):
            if not collide[b]:
                continue
            dx = pa[0] - p[b][0]
            dy = pa[1] - p[b][1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist == 0.0:
                continue
            x = -(dist - (rad[a] + rad[b])) / contact_margin
            if x > 0.0:
                pen = (x + math.log1p(math.exp(-x))) * contact_margin
            else:
                pen = math.log1p(math.exp(x)) * contact_margin
            fx = contact_force * dx / dist * pen
            fy = contact_force * dy / dist * pen
            if movable[a]:
                f[a][0] = fx + f[a][0]
                f[a][1] = fy + f[a][1]
            if movable[b]:
                f[b][0] = -fx + f[b][0]
                f[b][1] = -fy + f[b][1]
    for a in range(n):
        if not movable[a]:
            continue
        va = v[a]
        m = float(mass[a])
        vx = va[0] * (1.0 - damping)
        vy = va[1] * (1.0 - damping)
        vx = vx + f[a][0] / m * dt
        vy = vy + f[a][1] / m * dt
        speed = math.sqrt(vx * vx + vy * vy)
        cap = float(max_speed[a])
        if speed > cap:
            vx = vx / speed * cap
            vy = vy / speed * cap
        v[a] = [vx, vy]
        p[a] = [p[a][0] + vx * dt, p[a][1] + vy * dt]
    pos[...] = p
    vel[...] = v
    force[...] = f


def _sq_distances(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    # accumulate one coordinate at a time: same summation order as the C loop
    acc = np.zeros(rows.shape[0])
    for j in range(query.shape[0]):
        diff = rows[:, j] - query[j]
        acc += diff * diff
    return acc


def knn_mean_distance(memory, count, query, k):
    k = min(k, count)
    if k <= 0:
        return 0.0
    dists = np.sqrt(_sq_distances(memory[:count], query))
    nearest = np.sort(dists)[:k].tolist()
    total = 0.0
    for value in nearest:
        total += value
    return total / k


def max_cosine(reps, count, unit_query):
    if count == 0:
        return -1, -math.inf
    acc = np.zeros(count)
    for j in range(unit_query.shape[0]):
        acc += reps[:count, j] * unit_query[j]
    best_i = int(np.argmax(acc))
    return best_i, float(acc[best_i])


_DX = (0.0, -1.0, 1.0, 0.0, 0.0)
_DY = (0.0, 0.0, 0.0, -1.0, 1.0)


def flee_action(pos, vel, n_pursuers, evader, accel, mass, max_speed, dt, damping, bound):
    ex, ey = float(pos[evader, 0]), float(pos[evader, 1])
    nearest, best_d = 0, math.inf
    for i in range(n_pursuers):
        dx = float(pos[i, 0]) - ex
        dy = float(pos[i, 1]) - ey
        d = dx * dx + dy * dy
        if d < best_d:
            nearest, best_d = i, d
    ax = ex - float(pos[nearest, 0])
    ay = ey - float(pos[nearest, 1])
    v0x, v0y = float(vel[evader, 0]), float(vel[evader, 1])
    best_a = best_any = -1
    best_score = best_any_score = -math.inf
    for a in range(1, 5):
        score = _DX[a] * ax + _DY[a] * ay
        vx = v0x * (1.0 - damping) + _DX[a] * accel / mass * dt
        vy = v0y * (1.0 - damping) + _DY[a] * accel / mass * dt
        speed = math.sqrt(vx * vx + vy * vy)
        if speed > max_speed:
            vx = vx / speed * max_speed
            vy = vy / speed * max_speed
        px = ex + vx * dt
        py = ey + vy * dt
        if score > best_any_score:
            best_any_score, best_any = score, a
        if abs(px) <= bound and abs(py) <= bound and score > best_score:
            best_score, best_a = score, a
    return best_a if best_a >= 0 else best_any
