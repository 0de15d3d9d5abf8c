"""A smooth branch of the argument that ignores a small arc around -1.

``arg_rho(rho)`` matches the principal argument outside the arc of
radius ``rho`` around -1 and interpolates smoothly inside it.  Applied
to unitaries, its commutator with a second matrix grows roughly like
1/rho in the worst case; the random probe below usually stays far below
that bound.

Run with ``python demos/smooth_argument.py``.
"""

import numpy as np

from acu import arg_rho
from acu.scalar_functions import arg_minus, commutator_ratio_probe, sample_circle_minus_gap


def main() -> None:
    for rho in (0.4, 0.2, 0.1, 0.05):
        z = sample_circle_minus_gap(rho, 5000)
        err = np.max(np.abs(arg_rho(rho)(z) - arg_minus(z)))
        probe = commutator_ratio_probe(arg_rho(rho), trials=30, n=10, gap_rho=rho)
        print(f"rho={rho:<5} max deviation off the gap {err:.1e}   worst commutator ratio {probe['max']:.2f}")


if __name__ == "__main__":
    main()
