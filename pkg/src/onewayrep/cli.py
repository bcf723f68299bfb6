"""Command-line front end.

Exit codes: 0 success, 1 a requested numerical validation failed,
2 usage or input error. Every output embeds the package version and the
full parameter set, and carries no timestamps, so identical invocations
produce byte-identical files.
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__, config
from .codes import CodeError, error_family, kl_check, resolve_code
from .fock import FockBasis, to_json
from .loss import representation_equivalence_report
from .repeater import build_direct, build_swap, verify_action
from . import rates

log = logging.getLogger("onewayrep")


class UsageError(Exception):
    pass


def parse_range(text):
    """``lo:hi:step`` to an inclusive grid."""
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
        return rates.grid_from_range(lo, hi, step)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"malformed range {text!r} (expected lo:hi:step): {exc}") from None


@dataclass
class RunConfig:
    command: str
    code: str = None
    eta: float = None
    eta_c: object = None
    sep: object = None
    alpha: float = rates.DEFAULT_ALPHA
    modes: int = None
    cutoff: int = None
    kind: str = None
    ancilla_k: int = 1
    segments: int = None
    max_km: float = None
    optimize_sep: bool = False
    per_mode: bool = True
    include_no_loss: bool = False
    n_max: int = rates.MAX_SEGMENTS
    states: int = 20
    trials: int = 100
    out: str = None
    tol: float = None
    seed: int = config.DEFAULT_SEED
    jobs: int = 1

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise UsageError(msg)

        if self.eta is not None:
            need(0 < self.eta <= 1, f"--eta must lie in (0, 1], got {self.eta}")
        if isinstance(self.eta_c, float):
            need(0 < self.eta_c <= 1, f"--eta-c must lie in (0, 1], got {self.eta_c}")
        if isinstance(self.eta_c, np.ndarray):
            need(self.eta_c.size and self.eta_c.min() > 0 and self.eta_c.max() <= 1, "--eta-c grid must lie in (0, 1]")
        if isinstance(self.sep, float):
            need(self.sep > 0, f"--sep must be positive, got {self.sep}")
        if isinstance(self.sep, np.ndarray):
            need(self.sep.size and self.sep.min() > 0, "--sep grid must be positive")
        need(self.alpha >= 0, f"--alpha must be non-negative, got {self.alpha}")
        for name in ("modes", "ancilla_k", "max_km", "n_max", "states", "trials", "jobs"):
            v = getattr(self, name)
            need(v is None or v > 0, f"--{name.replace('_', '-')} must be positive, got {v}")
        for name in ("cutoff", "segments"):
            v = getattr(self, name)
            need(v is None or v >= 0, f"--{name} must be non-negative, got {v}")
        need(self.tol is None or self.tol > 0, f"--tol must be positive, got {self.tol}")
        return self

    def params(self):
        # Where the output goes is not part of the run, so it is left out
        # and identical runs give identical bytes wherever they are written.
        out = {}
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = [float(v[0]), float(v[-1]), int(v.size)]
            out[f.name] = v
        return out


def _common(p):
    p.add_argument("--out", help="write output here instead of standard output")
    p.add_argument("--tol", type=float, help="override the validation tolerance")
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="seed for randomized checks")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for scans")
    p.add_argument("--config", help="JSON file of option values (keys as option names with underscores)")


def build_parser():
    parser = argparse.ArgumentParser(prog="onewayrep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"onewayrep {__version__}")
    top = parser.add_subparsers(dest="group", required=True)

    channel = top.add_parser("channel").add_subparsers(dest="action", required=True)
    p = channel.add_parser("compare", help="cross-check Kraus, beamsplitter and master-equation loss")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--cutoff", type=int, default=3)
    p.add_argument("--states", type=int, default=20)
    _common(p)

    codes = top.add_parser("codes").add_subparsers(dest="action", required=True)
    p = codes.add_parser("validate", help="Knill-Laflamme check for single-photon loss")
    p.add_argument("--code", required=True, help="built-in code name or path to a code JSON file")
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--include-no-loss", action="store_true")
    _common(p)

    rep = top.add_parser("repeater").add_subparsers(dest="action", required=True)
    p = rep.add_parser("build", help="synthesize a repeater Hamiltonian and verify its action")
    p.add_argument("--code", required=True)
    p.add_argument("--kind", choices=("direct", "swap"), required=True)
    p.add_argument("--ancilla-k", type=int, default=1)
    p.add_argument("--trials", type=int, default=100)
    _common(p)

    scan = top.add_parser("scan").add_subparsers(dest="action", required=True)
    p = scan.add_parser("region", help="where the chain beats the repeaterless bound")
    p.add_argument("--code", required=True)
    p.add_argument("--eta-c", type=parse_range, help="lo:hi:step")
    p.add_argument("--sep", type=parse_range, help="lo:hi:step in km")
    p.add_argument("--alpha", type=float, default=rates.DEFAULT_ALPHA)
    p.add_argument("--n-max", type=int, default=rates.MAX_SEGMENTS)
    _common(p)

    rate = top.add_parser("rate").add_subparsers(dest="action", required=True)
    p = rate.add_parser("curve", help="key rate versus distance")
    p.add_argument("--code", required=True)
    p.add_argument("--eta-c", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sep", type=float)
    g.add_argument("--optimize-sep", action="store_true")
    p.add_argument("--max-km", type=float, required=True)
    p.add_argument("--alpha", type=float, default=rates.DEFAULT_ALPHA)
    p.add_argument("--no-per-mode", dest="per_mode", action="store_false")
    _common(p)

    chain = top.add_parser("chain").add_subparsers(dest="action", required=True)
    p = chain.add_parser("simulate", help="density-matrix simulation segment by segment")
    p.add_argument("--code", required=True)
    p.add_argument("--eta-c", type=float, required=True)
    p.add_argument("--sep", type=float, required=True)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--alpha", type=float, default=rates.DEFAULT_ALPHA)
    p.add_argument("--no-per-mode", dest="per_mode", action="store_false")
    _common(p)
    return parser


def _merge_config_file(ns):
    path = getattr(ns, "config", None)
    if not path:
        return
    try:
        with open(path) as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    known = set(vars(ns))
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for k, v in values.items():
        if k in ("eta_c", "sep") and isinstance(v, str):
            try:
                v = parse_range(v)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(str(exc)) from None
        setattr(ns, k, v)


def _to_config(ns):
    _merge_config_file(ns)
    values = {k: v for k, v in vars(ns).items() if k not in ("group", "action", "config")}
    names = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(command=f"{ns.group} {ns.action}", **{k: v for k, v in values.items() if k in names})
    return cfg.validate()


def _header(cfg):
    return f"# onewayrep {__version__} {json.dumps(cfg.params(), sort_keys=True)}"


def _emit(cfg, text):
    if cfg.out:
        try:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {cfg.out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(cfg, header, rows, comments=()):
    buf = io.StringIO()
    buf.write(_header(cfg) + "\n")
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return repr(float(x))


def _code(cfg):
    try:
        return resolve_code(cfg.code)
    except (CodeError, OSError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from None


def run_channel_compare(cfg):
    try:
        basis = FockBasis(cfg.modes, cfg.cutoff)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = representation_equivalence_report(cfg.eta, basis, n_states=cfg.states, seed=cfg.seed)
    report.update(version=__version__)
    _emit(cfg, _json_text(report))
    return 0


def run_codes_validate(cfg):
    code = _code(cfg)
    report = kl_check(code, error_family(code.basis, cfg.eta), cfg.include_no_loss, tol=cfg.tol)
    out = report.as_dict()
    out.update(version=__version__, params=cfg.params())
    _emit(cfg, _json_text(out))
    return 0 if report.passed else 1


def run_repeater_build(cfg):
    code = _code(cfg)
    try:
        spec = build_direct(code, cfg.ancilla_k) if cfg.kind == "direct" else build_swap(code)
    except (CodeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    tol = config.EXACT if cfg.tol is None else cfg.tol
    action = verify_action(spec, cfg.trials, np.random.default_rng(cfg.seed))
    report = {
        "version": __version__,
        "params": cfg.params(),
        "code": code.name,
        "kind": spec.kind,
        "system_dim": spec.system_dim,
        "ancilla_dim": spec.ancilla_dim,
        "joint_dim": spec.joint_dim,
        "projector_rank": spec.projector_rank,
        "idempotency_residual": spec.idempotency_residual(),
        "unitarity_residual": spec.unitarity_residual(),
        "action_residual": action,
    }
    report["pass"] = max(report["idempotency_residual"], report["unitarity_residual"], action) <= tol
    sys.stdout.write(_json_text(report))
    if cfg.out:
        dump = dict(report)
        dump["hamiltonian"] = to_json(code.basis, spec.hamiltonian)
        dump["unitary"] = to_json(code.basis, spec.unitary)
        _emit(cfg, _json_text(dump))
    return 0 if report["pass"] else 1


def run_scan_region(cfg):
    code = _code(cfg)
    single = rates.code_photon_number(code) is None
    if cfg.eta_c is None:
        cfg.eta_c = rates.grid_from_range(*(rates.SINGLE_MODE_ETA_C if single else rates.DEFAULT_ETA_C_RANGE))
    if cfg.sep is None:
        cfg.sep = rates.grid_from_range(*(rates.SINGLE_MODE_SEP if single else rates.DEFAULT_SEP_RANGE))
    res = rates.region_scan(code, cfg.eta_c, cfg.sep, cfg.alpha, cfg.n_max, cfg.jobs)
    eta_min, l_min = res.min_eta_c()
    comments = [
        f"max_tolerable_coupling_loss={_fmt(res.max_tolerable_coupling_loss)}"
        f" threshold_eta_c={_fmt(eta_min)} at_L_km={_fmt(l_min)}"
        f" grid_max_tolerable_coupling_loss={_fmt(res.grid_max_tolerable_coupling_loss)}"
        f" monotone={int(res.monotone)} beating_points={int(res.beats.sum())}",
        "beat criterion: " + ("some n <= n_max beats the bound at n*L" if single else "p_s(eta_c*eta_s) > eta_s"),
    ]
    flags = res.boundary_flags()
    rows = []
    for i, ec in enumerate(res.eta_c):
        for j, L in enumerate(res.L):
            rows.append([_fmt(ec), _fmt(L), int(res.beats[i, j]), int(flags[i, j])])
    _emit(cfg, _csv_text(cfg, ["eta_c", "L_km", "beats", "boundary"], rows, comments))
    return 0


def run_rate_curve(cfg):
    code = _code(cfg)
    curve = rates.rate_vs_distance(
        code, cfg.eta_c, cfg.max_km, L=cfg.sep, optimize=cfg.optimize_sep, alpha=cfg.alpha, per_mode=cfg.per_mode
    )
    cross = curve.crossover()
    comments = [
        f"separation_km={_fmt(curve.L)} optimized={int(curve.optimized)} per_mode={int(curve.per_mode)}"
        f" crossover_km={'none' if cross is None else _fmt(cross)}"
    ]
    rows = [[_fmt(x), n, _fmt(L), _fmt(r), _fmt(b)] for x, n, L, r, b in curve.points]
    _emit(cfg, _csv_text(cfg, ["x_km", "n", "L_km", "rate_per_mode", "plob_bound"], rows, comments))
    return 0


def run_chain_simulate(cfg):
    code = _code(cfg)
    model = rates.SegmentModel(code, cfg.eta_c, cfg.sep, cfg.alpha)
    div = code.modes if cfg.per_mode else 1
    rows = []
    for state in rates.iterate_chain(model, cfg.segments):
        p, rho2 = state.conditional_logical_state()
        r = rates.six_state_rate(rho2) if p > 0 else 0.0
        rows.append([state.n, _fmt(p), _fmt(r), _fmt(p * r / div)])
    _emit(cfg, _csv_text(cfg, ["n", "in_code_weight", "six_state_rate", "rate_per_mode"], rows))
    return 0


HANDLERS = {
    "channel compare": run_channel_compare,
    "codes validate": run_codes_validate,
    "repeater build": run_repeater_build,
    "scan region": run_scan_region,
    "rate curve": run_rate_curve,
    "chain simulate": run_chain_simulate,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _to_config(ns)
        return HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
