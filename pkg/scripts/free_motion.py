"""Free motion from the uniform point: quadratic geodesic vs free KL flow.

The quadratic geodesic reaches the boundary tangentially.  The free KL flow is
run in replicator form: its companion χ = e_q(v) reaches the boundary first,
which is where the score velocity blows up while q is still interior.
"""
import argparse
from pathlib import Path

import numpy as np

from statbundle import artifacts, oracles
from statbundle.integrate import IntegratorConfig, integrate
from statbundle.mechanics import KLParams, QuadraticParams, SystemSpec, zero_potential


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/free_motion")
    ap.add_argument("--t-end", type=float, default=8.0)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    q0, w0 = oracles.TERNARY_Q0, oracles.TERNARY_W0
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10)
    t_eval = np.linspace(0, args.t_end, 801)
    systems = {
        "quadratic": SystemSpec("quadratic_lagrangian", QuadraticParams(1.0, 0.0), zero_potential()),
        "kl": SystemSpec("kl_replicator", KLParams(1.0, 1.0, 1.0), zero_potential()),
    }
    for name, sys in systems.items():
        tr = integrate(sys, sys.state_from_velocity(q0, w0), (0, args.t_end), cfg, t_eval=t_eval)
        artifacts.write_trajectory_csv(out / f"{name}.csv", sys, tr)
        artifacts.write_json(out / f"{name}.json", artifacts.summary(sys, tr))
        artifacts.write_svg(out / f"{name}.svg", sys, tr, title=f"free {name} motion")
        q_end, aux_end = sys.split(tr.states[-1])
        extra = (f"max |v| = {np.abs(aux_end).max():.3g}" if sys.aux_kind == "velocity"
                 else f"min χ = {aux_end.min():.2e}")
        print(f"{name:>9}: {tr.reason} at t = {tr.times[-1]:.4f}, min q = {q_end.min():.2e}, {extra}")

    gp = oracles.GeodesicParams.from_velocity(q0, w0)
    print(f"closed-form boundary time of the quadratic geodesic: {gp.first_boundary_time():.4f}")


if __name__ == "__main__":
    main()
