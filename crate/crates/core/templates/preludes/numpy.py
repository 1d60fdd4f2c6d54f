# ---- harness prelude ----
import numpy as np
from typing import List, Tuple


