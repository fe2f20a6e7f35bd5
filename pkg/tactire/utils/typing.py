from typing import Mapping, Tuple

import jax

# {"weights": (K, D), "bias": (K,)} logistic-regression parameters
Params = Mapping[str, jax.typing.ArrayLike]
# closed span of experiment time, ms
TimeRange = Tuple[float, float]
# (x, y) in the ground frame, m
Point = Tuple[float, float]
