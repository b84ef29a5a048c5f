"""Locate the n = 3, m = 2 disk by shooting from the axis and report its data."""
import argparse
import json

import numpy as np

from quasi_einstein import ode, verify
from quasi_einstein.model import ModelSpec, validate_spec


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--bracket", type=float, nargs=2, default=[0.2, 0.3])
    p.add_argument("--out", help="write trajectory CSV and JSON with this prefix")
    args = p.parse_args()
    spec = validate_spec(ModelSpec(n=3, m=2.0, lam=args.lam, mu=args.mu, boundary=True))
    traj = ode.find_disk(spec, tuple(args.bracket))
    meta = traj.meta
    print(f"w(0)         = {meta['w0']:.12g}")
    print(f"boundary t_b = {meta['t_b']:.12g}")
    print(f"psi(t_b)     = {meta['psi_b']:.12g}")
    print(f"matching residual = {meta['match_residual']:.3e}")
    mu = np.asarray(traj.invariants["mu"])
    mu = mu[traj.regular_mask() & np.isfinite(mu)]
    print(f"mu spread over regular samples = {np.ptp(mu):.3e}")
    model = ode.rotsym_model(traj, "disk")
    result = verify.run_suite([verify.Target("disk", model, verify._samples_for(model),
                                             stencil_tol=verify.TOL_FD)])
    for r in result.reports:
        print(r.line())
    if args.out:
        traj.to_csv(args.out + ".csv")
        ode.atomic_write(args.out + ".json", json.dumps(traj.to_json(), indent=2))


if __name__ == "__main__":
    main()
