# ---- harness prelude: helpers the prompt declares as predefined ----
import numpy as np
import itertools
from typing import Tuple

def verify_circles(circles: np.ndarray) -> bool:
    """Checks that the circles are disjoint and lie inside a unit square.

    Args:
      circles: A numpy array of shape (num_circles, 3), where each row is
        of the form (x, y, radius), specifying a circle.

    Returns:
      True if all circles are disjoint and fully inside the unit square,
      False otherwise.
    """
    # Check pairwise disjointness.
    for circle1, circle2 in itertools.combinations(circles, 2):
        center_distance = np.sqrt((circle1[0] - circle2[0])**2 + (circle1[1] - circle2[1])**2)
        radii_sum = circle1[2] + circle2[2]
        if center_distance < radii_sum:  # Overlap
            return False

    # Check all circles lie inside the unit square [0,1]x[0,1].
    for circle in circles:
        x, y, r = circle
        if x - r < 0 or y - r < 0 or x + r > 1 or y + r > 1:
            return False

    return True


