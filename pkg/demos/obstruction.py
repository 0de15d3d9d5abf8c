"""Why the clock and shift pair cannot be pushed to a commuting pair.

The clock and shift unitaries of size m almost commute, with commutator
norm |1 - exp(2*pi*i/m)|.  Both integer invariants are -1, and the path
builder refuses them.  Doubling with the adjoint pair cancels the
invariant, and a path to the identity then exists.

Run with ``python demos/obstruction.py``.
"""

from acu import build_homotopy, invariant_report, voiculescu
from acu.errors import PreconditionError
from acu.generators import doubled_voiculescu
from acu.linalg import comm_norm


def main() -> None:
    for m in (8, 16, 32):
        u, v = voiculescu(m)
        rep = invariant_report(u, v)
        print(f"clock/shift m={m:3d}  commutator={comm_norm(u, v):.4f}  winding={rep.winding}  isospec={rep.isospec}")

    u, v = voiculescu(16)
    try:
        build_homotopy(u, v)
    except PreconditionError as exc:
        print(f"path builder refuses the m=16 pair: {exc}")

    u, v = doubled_voiculescu(16)
    rep = invariant_report(u, v)
    path, cert = build_homotopy(u, v)
    print(f"doubled m=16 (size {u.shape[0]}): isospec={rep.isospec}, path with N={cert.N}")
    print(f"  largest sampled commutator along the path: {cert.max_commutator_sampled:.4f}")
    print(f"  stage boundaries: {path.stage_boundaries}")


if __name__ == "__main__":
    main()
