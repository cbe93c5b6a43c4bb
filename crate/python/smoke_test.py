"""Smoke test for the singular_cs_py extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`
or `pip install` of the wheel from `maturin build`.
"""

import math
import sys

import singular_cs_py as scs


def check(name, cond, detail=""):
    print(f"{'ok  ' if cond else 'FAIL'} {name} {detail}")
    return cond


def main():
    results = []

    k = scs.Kernel.singular(0.5)
    results.append(check("kernel", abs(k(4.0) - 0.5) < 1e-15 and k.is_singular, repr(k)))

    o = scs.two_particle_sticking(1.0, -2.0, 0.5)
    results.append(check("sticking", o.sticks and abs(o.t_event - 1.0) < 1e-8, repr(o)))
    o = scs.two_particle_sticking(1.0, 1.0, 0.5)
    results.append(check("no collision", not o.collides and o.limit_distance > 1.0, repr(o)))

    ens = scs.Ensemble.random(6, 2, seed=3)
    traj = scs.integrate_cs(ens, scs.Kernel.singular(1.5), 5.0, samples=10)
    p0, p1 = traj.states[0].momentum(), traj.states[-1].momentum()
    drift = max(abs(a - b) for a, b in zip(p0, p1))
    dv0, dv1 = traj.states[0].diameters()[1], traj.states[-1].diameters()[1]
    results.append(check("cs momentum", drift < 1e-10, f"drift={drift:.2e}"))
    results.append(check("cs velocity alignment", dv1 < dv0, f"{dv0:.3f} -> {dv1:.3f}"))
    results.append(check("trajectory samples", len(traj) == 11))

    d = scs.d1_distance([[0.0]], [[0.0]], [[0.5]], [[0.0]])
    results.append(check("d1 shift", abs(d - 0.5) < 1e-9, f"{d}"))

    n = 64
    xs = [2 * math.pi * j / n for j in range(n)]
    rho = [1.0 + 0.3 * math.sin(x) for x in xs]
    u = [0.1 * math.cos(x) for x in xs]
    floor = scs.torus_density_floor(rho, u, 1.0, full_length=True)
    snaps = scs.torus_run(rho, u, 1.0, [0.0, 0.5, 1.0])
    mass = [sum(s.rho) * 2 * math.pi / n for s in snaps]
    results.append(check("torus mass", max(mass) - min(mass) < 1e-10, f"{mass[0]:.12f}"))
    results.append(check("torus floor", min(min(s.rho) for s in snaps) >= floor - 1e-12, f"floor={floor:.4f}"))
    results.append(check("psi_m at gamma=1", abs(scs.periodic_kernel_infimum(1.0) - 1 / (4 * math.pi)) < 1e-12))

    run = scs.line_run(1, -1.0, [0.0, 1.0], half_width=5.0, dx=0.05, dt=0.05)
    results.append(check("line run", len(run.snapshots) == 2 and run.max_mass_drift < 1e-10,
                         f"gap={run.snapshots[-1].linf_gap:.2e}"))
    results.append(check("barenblatt", abs(scs.barenblatt(0.0, 1.0, 1.0) - 1.0) < 1e-15))

    try:
        scs.Kernel.singular(-1.0)
        results.append(check("bad exponent rejected", False))
    except ValueError:
        results.append(check("bad exponent rejected", True))

    failed = results.count(False)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
