# ---- harness prelude: helpers the prompt declares as predefined ----
import numpy as np
import itertools
from typing import Tuple
from scipy.optimize import linprog

def verify_circles(circles: np.ndarray) -> bool:
    """Checks that the circles are disjoint and lie inside a unit square."""
    for circle1, circle2 in itertools.combinations(circles, 2):
        center_distance = np.sqrt((circle1[0] - circle2[0])**2 + (circle1[1] - circle2[1])**2)
        if center_distance < circle1[2] + circle2[2]:
            return False
    for x, y, r in circles:
        if x - r < 0 or y - r < 0 or x + r > 1 or y + r > 1:
            return False
    return True

def compute_max_radii(centers):
    n = len(centers)
    centers = np.array(centers)

    # upper bounds from boundary constraints
    u = np.min(np.vstack([centers[:, 0], 1 - centers[:, 0],
                          centers[:, 1], 1 - centers[:, 1]]), axis=0)

    # Objective: maximize sum r_i -> minimize -sum r_i
    c = -np.ones(n)

    # Constraints A_ub @ r <= b_ub
    A = []
    b = []

    # boundary constraints: r_i <= u_i
    for i in range(n):
        row = np.zeros(n)
        row[i] = 1.0
        A.append(row)
        b.append(u[i])

    # pairwise non-overlap constraints: r_i + r_j <= d_ij
    for i in range(n):
        for j in range(i + 1, n):
            dij = np.linalg.norm(centers[i] - centers[j])
            if dij < u[i] + u[j]:  # only add if potentially active
                row = np.zeros(n)
                row[i] = 1.0
                row[j] = 1.0
                A.append(row)
                b.append(dij)

    A = np.array(A)
    b = np.array(b)

    # bounds: r_i >= 0
    bounds = [(0, None) for _ in range(n)]

    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")

    if not res.success:
        raise RuntimeError("LP solver failed: " + res.message)

    radii = res.x
    return radii


