"""Run the full check suite over every catalog entry and the negative controls.

Writes a JSON report and exits non-zero on any unexpected result.
"""
import argparse
import json
import sys

from quasi_einstein import verify


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=25)
    p.add_argument("--report", default="catalog-certificate.json")
    args = p.parse_args()
    result = verify.run_suite(verify.default_targets(), samples=args.samples)
    for r in result.reports:
        print(r.line())
    s = result.summary()
    print(json.dumps(s))
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=2)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
