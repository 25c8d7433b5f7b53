"""Command-line entry point.

Every command writing files also writes ``<output>.meta.json`` with the
parameters, the constants used and the library version.  Exit codes:
0 success, 1 usage error, 2 numerical non-convergence, 3 resource exhaustion.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import EMB, constants, wave_number
from .cocycle import (
    DEFAULT_KSTAR_MAX,
    DEFAULT_TOL,
    MAX_STEPS,
    MIN_STEPS,
    NonConvergenceError,
    amplitudes,
    peak_list,
    write_peaks_csv,
    write_peaks_json,
)
from .finite import amplitude_estimate, intensity_scan
from .inflation import LETTERS, pf_data, word_length
from .windows import (
    estimate_volumes,
    exact_volumes,
    ft_grid,
    iterate_ifs,
    write_clouds_csv,
    write_grid_csv,
    write_grid_pgms,
)

log = logging.getLogger("plasticdiff")

EXIT_USAGE, EXIT_NONCONVERGED, EXIT_RESOURCES = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_weights(tokens: list[str]) -> tuple[complex, complex, complex]:
    """Weights as ``1,1,1`` (three reals), ``1,0,1,0,1,0`` (re,im pairs) or
    three tokens each ``re`` or ``re,im``."""
    try:
        if len(tokens) == 1:
            vals = [float(x) for x in tokens[0].split(",")]
            if len(vals) == 3:
                return tuple(complex(v) for v in vals)
            if len(vals) == 6:
                return tuple(complex(vals[i], vals[i + 1]) for i in range(0, 6, 2))
        elif len(tokens) == 3:
            out = []
            for t in tokens:
                parts = [float(x) for x in t.split(",")]
                if len(parts) == 1:
                    out.append(complex(parts[0]))
                elif len(parts) == 2:
                    out.append(complex(parts[0], parts[1]))
                else:
                    raise ValueError
            return tuple(out)
    except ValueError:
        pass
    raise UsageError(f"cannot parse weights {' '.join(tokens)!r}")


def parse_int_list(text: str) -> list[int]:
    """``18,24,30`` or ``18:42:6`` (inclusive range with step)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0:
                raise ValueError
            vals = list(range(start, stop + 1, step))
        else:
            vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def parse_miller(tokens: list[str]) -> tuple[int, int, int]:
    try:
        vals = [int(x) for t in tokens for x in t.split(",") if x]
    except ValueError:
        raise UsageError(f"bad Miller index {' '.join(tokens)!r}") from None
    if len(vals) != 3:
        raise UsageError("Miller index needs three integers")
    return tuple(vals)


def _complex_json(h):
    return [[z.real, z.imag] for z in h]


def _constants_record() -> dict:
    c = asdict(constants())
    c["volumes"] = list(c["volumes"])
    pf = pf_data()
    c["u"] = pf.u.tolist()
    c["v"] = pf.v.tolist()
    c["alpha_re"] = EMB.alpha_re
    return c


def write_metadata(path, command: str, params: dict) -> Path:
    meta = Path(f"{path}.meta.json")
    record = {
        "command": command,
        "parameters": params,
        "constants": _constants_record(),
        "version": __version__,
    }
    meta.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return meta


# -- commands -----------------------------------------------------------------

def cmd_info(args) -> int:
    c = constants()
    pf = pf_data()
    b = c.beta
    lines = [
        f"beta                 = {b:.15f}   (real root of x^3 - x - 1)",
        f"beta^3 - beta - 1    = {b**3 - b - 1:.3e}",
        f"alpha                = {EMB.alpha_re:.15f} + {EMB.alpha_im:.15f} i",
        f"|alpha|^2            = {EMB.alpha_abs2:.15f}   (= 1/beta = beta^2 - 1)",
        f"mean spacing s_bar   = {c.mean_spacing:.15f}   (4 + 2 beta - 3 beta^2)",
        f"dens(Lambda)         = {c.density:.15f}   ((3 + beta + 7 beta^2)/23)",
        f"dens(lattice)        = {c.lattice_density:.15f}   (2/sqrt(23))",
        f"Im(alpha)            = {c.alpha_im:.15f}",
        f"module generator     = {c.module_generator:.15f}   ((5 - 6 beta + 4 beta^2)/23)",
        "v (frequencies)      = " + ", ".join(f"{x:.15f}" for x in pf.v),
        "u (left PF vector)   = " + ", ".join(f"{x:.15f}" for x in pf.u),
        "vol(W_a, W_b, W_c)   = " + ", ".join(f"{x:.15f}" for x in exact_volumes()),
    ]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text(json.dumps(_constants_record(), indent=1, sort_keys=True) + "\n")
        write_metadata(args.out, "info", {})
    return 0


def cmd_peaks(args) -> int:
    if (args.kmax < 0 or args.kstar_max <= 0 or args.imin < 0 or args.tol <= 0
            or args.max_steps < MIN_STEPS):
        raise UsageError(f"need kmax >= 0, kstar-max > 0, imin >= 0, tol > 0, max-steps >= {MIN_STEPS}")
    h = parse_weights(args.h)
    peaks = peak_list(args.kmax, args.kstar_max, args.imin, h, tol=args.tol,
                      workers=args.threads, max_steps=args.max_steps)
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    (write_peaks_json if fmt == "json" else write_peaks_csv)(peaks, args.out)
    write_metadata(args.out, "peaks", {
        "kmax": args.kmax, "kstar_max": args.kstar_max, "imin": args.imin,
        "h": _complex_json(h), "tol": args.tol, "max_steps": args.max_steps, "format": fmt,
        "threads": args.threads,
    })
    log.info("wrote %d peaks to %s", len(peaks), args.out)
    bad = [p.miller for p in peaks if not p.converged]
    if bad:
        log.error("%d peaks did not converge, first %s", len(bad), bad[0])
        return EXIT_NONCONVERGED
    return 0


def cmd_finite_scan(args) -> int:
    if args.m < 0 or args.samples < 2 or not args.k_from < args.k_to or args.scale <= 0:
        raise UsageError("need m >= 0, samples >= 2, k-from < k-to and scale > 0")
    if args.seed not in LETTERS:
        raise UsageError(f"seed must be one of a, b, c, not {args.seed!r}")
    h = parse_weights(args.h)
    log.info("patch rho^%d(%s) has %d points", args.m, args.seed, word_length(args.m, args.seed))
    scan = intensity_scan(args.m, args.seed, args.k_from, args.k_to, args.samples, h,
                          workers=args.threads, method=args.method)
    scan.intensities = scan.intensities * args.scale
    scan.to_csv(args.out)
    write_metadata(args.out, "finite-scan", {
        "m": args.m, "seed": args.seed, "k_from": args.k_from, "k_to": args.k_to,
        "samples": args.samples, "h": _complex_json(h), "method": args.method, "scale": args.scale,
        "points": word_length(args.m, args.seed),
    })
    return 0


def cmd_peak_compare(args) -> int:
    miller = parse_miller(args.miller)
    ms = parse_int_list(args.m_list)
    if any(m < 0 for m in ms):
        raise UsageError("depths must be non-negative")
    h = parse_weights(args.h)
    exact = complex(np.dot(np.asarray(h, dtype=complex), amplitudes(miller, tol=args.tol)))
    rows = []
    for m in ms:
        est = amplitude_estimate(m, "a", miller, h)
        rows.append((m, est, abs(est - exact)))
        log.info("m=%d  estimate=%s  |diff|=%.3e", m, est, abs(est - exact))
    with open(args.out, "w", newline="") as fh:
        fh.write("m,re_estimate,im_estimate,re_exact,im_exact,abs_diff\n")
        for m, est, d in rows:
            fh.write(f"{m},{est.real!r},{est.imag!r},{exact.real!r},{exact.imag!r},{d!r}\n")
    write_metadata(args.out, "peak-compare", {
        "miller": list(miller), "m_list": ms, "h": _complex_json(h), "tol": args.tol,
        "k": wave_number(miller).k,
    })
    return 0


def cmd_window(args) -> int:
    if args.depth < 0:
        raise UsageError("depth must be non-negative")
    if args.letter != "all" and args.letter not in LETTERS:
        raise UsageError(f"letter must be a, b, c or all, not {args.letter!r}")
    clouds = iterate_ifs(args.depth, dedupe=args.dedupe)
    chosen = LETTERS if args.letter == "all" else args.letter
    write_clouds_csv([clouds[l] for l in chosen], args.out)
    est = estimate_volumes(clouds, args.cell)
    exact = exact_volumes()
    for l, e, x in zip(LETTERS, est, exact):
        log.info("W_%s: %d points, box-count area %.6f, exact %.6f (ratio %.4f)",
                 l, len(clouds[l]), e, x, e / x)
    write_metadata(args.out, "window", {
        "depth": args.depth, "letter": args.letter, "cell": args.cell, "dedupe": args.dedupe,
        "counts": {l: len(clouds[l]) for l in LETTERS},
        "box_count_volumes": est.tolist(),
    })
    return 0


def cmd_ft_grid(args) -> int:
    xmin, xmax, ymin, ymax = args.box
    if not (xmin < xmax and ymin < ymax):
        raise UsageError("box needs xmin < xmax and ymin < ymax")
    if args.samples < 2 or args.tol <= 0 or args.max_steps < MIN_STEPS:
        raise UsageError(f"need samples >= 2, tol > 0 and max-steps >= {MIN_STEPS}")
    if args.letter not in LETTERS:
        raise UsageError(f"letter must be a, b or c, not {args.letter!r}")
    grid = ft_grid(args.box, args.samples, args.letter, tol=args.tol, max_steps=args.max_steps)
    csv_path = f"{args.out_prefix}.csv"
    write_grid_csv(grid, csv_path)
    mag, arg = write_grid_pgms(grid, args.out_prefix)
    n_bad = int((~grid.converged).sum())
    write_metadata(args.out_prefix, "ft-grid", {
        "letter": args.letter, "box": list(args.box), "samples": args.samples, "tol": args.tol,
        "max_steps": args.max_steps,
        "files": [csv_path, mag, arg], "unconverged_nodes": n_bad,
        "max_abs": float(grid.magnitude.max()),
    })
    if n_bad:
        log.error("%d grid nodes did not converge", n_bad)
        return EXIT_NONCONVERGED
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="plasticdiff", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads for parallel sections")
    p.add_argument("--log-level", default="INFO")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("info", help="print derived constants")
    s.add_argument("--out", help="optional JSON dump of the constants")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("peaks", help="Bragg peak list from the cocycle")
    s.add_argument("--kmax", type=float, required=True)
    s.add_argument("--kstar-max", type=float, default=DEFAULT_KSTAR_MAX)
    s.add_argument("--imin", type=float, default=1e-6)
    s.add_argument("--h", nargs="+", default=["1,1,1"])
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-steps", type=int, default=MAX_STEPS)
    s.add_argument("--format", choices=["csv", "json"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_peaks)

    s = sub.add_parser("finite-scan", help="finite-patch intensity I_m(k)")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--seed", default="a")
    s.add_argument("--k-from", type=float, required=True)
    s.add_argument("--k-to", type=float, required=True)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--h", nargs="+", default=["1,1,1"])
    s.add_argument("--method", choices=["direct", "recursive"], default="direct")
    s.add_argument("--scale", type=float, default=1.0, help="plot-side factor applied to intensities")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_finite_scan)

    s = sub.add_parser("peak-compare", help="finite estimates against one exact amplitude")
    s.add_argument("--miller", nargs="+", required=True)
    s.add_argument("--m-list", required=True, help="e.g. 18,24,30 or 18:42:6")
    s.add_argument("--h", nargs="+", default=["1,1,1"])
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_peak_compare)

    s = sub.add_parser("window", help="IFS point clouds of the windows")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--letter", default="all")
    s.add_argument("--cell", type=float, default=0.01)
    s.add_argument("--dedupe", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_window)

    s = sub.add_parser("ft-grid", help="window Fourier transform on a grid")
    s.add_argument("--letter", default="b")
    s.add_argument("--box", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                   default=[-4.0, 4.0, -4.0, 4.0])
    s.add_argument("--samples", type=int, default=256)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-steps", type=int, default=MAX_STEPS)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_ft_grid)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"plasticdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"plasticdiff: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except MemoryError as exc:
        print(f"plasticdiff: resource exhaustion: {exc}", file=sys.stderr)
        return EXIT_RESOURCES


if __name__ == "__main__":
    sys.exit(main())
