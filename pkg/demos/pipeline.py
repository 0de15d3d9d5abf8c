"""End to end: exactly commuting unitaries next to an almost commuting pair.

Two instances are processed.  A random commuting pair with a small
perturbation shows the typical case, and the doubled clock/shift pair at
m=8 shows the hardest case that still finishes in seconds.  Every number
printed is measured on the returned matrices.

Run with ``python demos/pipeline.py``.
"""

from acu import InstanceSpec, approximate, make_instance


def show(spec: InstanceSpec) -> None:
    u, v, meta = make_instance(spec)
    u2, v2, rep = approximate(u, v)
    print(f"{meta['label']}: size {meta['n']}, commutator {rep.delta:.3g}")
    print(f"  distance to output  u: {rep.distance_u:.4g}  v: {rep.distance_v:.4g}")
    print(f"  output commutator {rep.commutator_residual:.2e}, amplified size {rep.n_total}, {rep.runtime_ms / 1000:.1f} s")
    for flag in rep.flags:
        print(f"  flag: {flag}")


def main() -> None:
    show(InstanceSpec("perturbed_commuting", 6, scale=1e-3, seed=3))
    show(InstanceSpec("doubled", 8))


if __name__ == "__main__":
    main()
