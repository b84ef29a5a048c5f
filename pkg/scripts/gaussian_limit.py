"""Print the sup distance of w^m to the Gaussian limit for growing m."""
import argparse

from quasi_einstein.catalog import gaussian_limit_family


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    p.add_argument("--window", type=float, nargs=2, default=[-1.0, 1.0])
    args = p.parse_args()
    fam = gaussian_limit_family(args.lam, args.n, tuple(args.m), tuple(args.window))
    print(f"lambda={fam.lam:g} n={fam.n} window={fam.window}")
    for m, d in zip(fam.m_list, fam.sup_distance):
        print(f"m={m:>10g}  sup|w^m - exp(-lam t^2/2)| = {d:.6e}")


if __name__ == "__main__":
    main()
