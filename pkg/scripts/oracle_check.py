"""Two-atom check: moment-engine steady state and spectrum against the exact Liouvillian.

    python scripts/oracle_check.py --trials 5
"""
import argparse

import numpy as np

from corrsteady import cumulant as cu
from corrsteady import oracle as orc
from corrsteady import spectrum as sp
from corrsteady.models import f1_model, two_level_model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    omega = np.linspace(-40, 40, 1601)
    for k in range(args.trials):
        w = rng.uniform(0.1, 1, 5)
        for model in (two_level_model(2, *w[:4], nu=rng.uniform(0, 3)),
                      f1_model(2, rng.uniform(0, np.pi / 2), w[0], w[1], gamma=w[2])):
            ex = orc.exact_steady(model, 2)
            eqs = cu.build_moment_system(model)
            st = cu.evolve_to_steady(eqs)
            S = sp.compute_spectrum(sp.linearized_qrt_system(eqs, st, "pair"), omega).S
            S_ex = orc.exact_spectrum(model, omega, ex).S
            print(f"{model.variant:9s} trial {k}: |rho2 diff| = {np.max(np.abs(st.rho2 - ex.rho)):.1e}, "
                  f"|S diff|/max S = {np.max(np.abs(S - S_ex)) / S_ex.max():.1e}")


if __name__ == "__main__":
    main()
