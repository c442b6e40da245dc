"""Command-line harness: ``dichotomy <subcommand> [flags]``.

Flags may also come from a key=value file given with --config; flags on
the command line win.  Every CSV starts with ``# config: {...}``.

Exit codes: 0 success, 2 invalid config, 3 numerical abort, 4 a check failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import BACKEND, __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
SUBCOMMANDS = ("lyapunov", "sweep", "spectrum", "hormander", "boundary", "fisher", "certificate",
               "control", "hit-check")


class ConfigError(ValueError):
    pass


class CheckFailed(AssertionError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    system: str = "electrodynamics"
    eps: list[float] = field(default_factory=lambda: [1.0])
    T: float = 1e4
    dt: float = 1e-3
    seed: int = 0
    batches: int = 16
    burn_in: float = 0.1
    bins: int = 32
    shards: int = 8
    exclusion: float = 1e-3
    tolerance: float = 1e-8
    samples: int = 1000
    renorm_interval: int = 16
    budget: float = 50.0
    variant: str = "base"
    check: Optional[str] = None
    max_rel: Optional[float] = None
    threads: int = 1
    out: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("threads")        # results do not depend on the worker count
        d["backend"] = BACKEND
        d["version"] = __version__
        return d


# -- parsing ---------------------------------------------------------------

def _eps_list(s: str) -> list[float]:
    try:
        vals = [float(eval_fraction(t)) for t in str(s).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {s!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty epsilon list")
    return vals


def eval_fraction(tok: str) -> float:
    """'0.25' or '1/4'."""
    tok = tok.strip()
    if "/" in tok:
        a, b = tok.split("/", 1)
        return float(a) / float(b)
    return float(tok)


def _float(s):
    try:
        return float(eval_fraction(s))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def _int(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    return int(v)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_FLAGS = {
    "system": dict(type=str), "eps": dict(type=_eps_list), "T": dict(type=_float), "dt": dict(type=_float),
    "seed": dict(type=_int), "batches": dict(type=_int), "burn_in": dict(type=_float), "bins": dict(type=_int),
    "shards": dict(type=_int), "exclusion": dict(type=_float), "tolerance": dict(type=_float),
    "samples": dict(type=_int), "renorm_interval": dict(type=_int), "budget": dict(type=_float),
    "variant": dict(type=str, choices=["base", "bundle"]), "check": dict(type=str),
    "max_rel": dict(type=_float), "threads": dict(type=_int), "out": dict(type=str),
}

_DEFAULTS = {
    "sweep": {"system": "example1", "eps": [1.0, 0.5, 0.25]},
    "hormander": {"samples": 1000},
    "boundary": {"samples": 100},
    "fisher": {"system": "example1", "T": 5e4, "dt": 5e-3},
    "hit-check": {"eps": [0.01, 0.05, 0.1, 0.2]},
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dichotomy", description="Lyapunov dichotomy experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} backend)")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None, help="key=value file; flags win")
        for key, kw in _FLAGS.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None, **kw)
    return p


def read_config_file(path: str) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    with fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in _FLAGS:
                raise ConfigError(f"{path}:{ln}: unknown key {k!r}")
            try:
                conv = _FLAGS[k]["type"](v)
            except argparse.ArgumentTypeError as e:
                raise ConfigError(f"{path}:{ln}: {e}") from None
            out[k] = conv
    return out


def resolve_config(argv: Sequence[str]) -> RunConfig:
    from .lyapunov import default_threads

    ns = build_parser().parse_args(list(argv))
    vals = {"threads": default_threads()}
    vals.update(_DEFAULTS.get(ns.subcommand, {}))
    if ns.config:
        vals.update(read_config_file(ns.config))
    vals.update({k: v for k, v in vars(ns).items() if k in _FLAGS and v is not None})
    cfg = RunConfig(ns.subcommand, **vals)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    from .vector_fields import CATALOG

    if cfg.system not in CATALOG:
        raise ConfigError(f"unknown system {cfg.system!r}; known: {sorted(CATALOG)}")
    for name in ("T", "dt", "budget"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive and finite")
    if any(not (math.isfinite(e) and e >= 0) for e in cfg.eps):
        raise ConfigError("epsilon values must be finite and nonnegative")
    for name in ("batches", "bins", "shards", "samples", "renorm_interval", "threads"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    if not 0 <= cfg.burn_in < 1:
        raise ConfigError("burn-in must lie in [0, 1)")


# -- output ----------------------------------------------------------------

def _open_out(cfg: RunConfig):
    if cfg.out is None:
        return None
    try:
        return open(cfg.out, "w", newline="")
    except OSError as e:
        raise ConfigError(f"cannot write output: {e}") from None


def _write_csv(cfg: RunConfig, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    import csv

    fh = _open_out(cfg)
    if fh is None:
        return
    from .sde import config_line

    with fh:
        fh.write(config_line(cfg.to_dict()) + "\n")
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _integrator(cfg: RunConfig):
    from .sde import IntegratorConfig

    try:
        return IntegratorConfig(dt=cfg.dt, seed=cfg.seed, renorm_interval=cfg.renorm_interval)
    except ValueError as e:
        raise ConfigError(str(e)) from None


# -- commands --------------------------------------------------------------

def cmd_lyapunov(cfg: RunConfig) -> str:
    from .lyapunov import top_exponent

    eps = cfg.eps[0]
    est = top_exponent(cfg.system, eps, cfg.T, _integrator(cfg), batches=cfg.batches, burn_in=cfg.burn_in)
    _write_csv(cfg, ["system", "epsilon", "lambda1", "stderr", "batches", "T", "dt", "seed"],
               [[cfg.system, eps, est.lam, est.stderr, est.batches, est.T, est.dt, est.seed]])
    if cfg.check == "positive" and not est.lam > 3 * est.stderr:
        raise CheckFailed(f"lambda1 = {est.lam:.6g} not 3 stderr above 0 (stderr {est.stderr:.3g})")
    return f"{cfg.system} eps={eps:g}: lambda1 = {est.lam:.6g} +- {est.stderr:.3g} (T={est.T:g}, dt={est.dt:g})"


def cmd_sweep(cfg: RunConfig) -> str:
    from .lyapunov import epsilon_sweep

    res = epsilon_sweep(cfg.system, cfg.eps, cfg.T, _integrator(cfg), batches=cfg.batches,
                        burn_in=cfg.burn_in, threads=cfg.threads)
    fh = _open_out(cfg)
    if fh is not None:
        fh.close()
        res.write_csv(cfg.out, cfg.to_dict())
    r, s = res.ratios(), res.ratio_stderrs()
    if cfg.check:
        _sweep_check(cfg.check, r, s)
    return f"{cfg.system} sweep: ratios " + ", ".join(f"{a:.4g}+-{b:.2g}" for a, b in zip(r, s))


def _sweep_check(kind: str, r, s) -> None:
    import numpy as np

    if kind == "linear":
        spread = (r.max() - r.min()) / abs(r.mean())
        worst = max(abs(r[i] - r[j]) / math.hypot(s[i], s[j]) for i in range(len(r)) for j in range(i))
        if spread >= 0.05 or worst > 3:
            raise CheckFailed(f"ratio not constant: spread {spread:.3g}, worst gap {worst:.2f} stderr")
    elif kind == "superlinear":
        for i in range(1, len(r)):
            if not r[i] - r[i - 1] > 3 * math.hypot(s[i], s[i - 1]):
                raise CheckFailed(f"ratio gap {i} not above 3 joint stderr")
    elif kind == "positive":
        bad = np.nonzero(r <= 3 * s)[0]
        if bad.size:
            raise CheckFailed(f"rows {list(bad)} not 3 stderr above 0")
    else:
        raise ConfigError(f"unknown sweep check {kind!r}; use linear, superlinear or positive")


def cmd_spectrum(cfg: RunConfig) -> str:
    from .lyapunov import combined, spectrum_qr, sum_exponent

    ic = _integrator(cfg)
    eps = cfg.eps[0]
    spec = spectrum_qr(cfg.system, eps, cfg.T, ic, batches=cfg.batches, burn_in=cfg.burn_in)
    tot = combined(spec)
    div = sum_exponent(cfg.system, eps, cfg.T, ic, batches=cfg.batches, burn_in=cfg.burn_in)
    rows = [[i + 1, e.lam, e.stderr] for i, e in enumerate(spec)]
    rows.append(["sum", tot.lam, tot.stderr])
    rows.append(["divergence", div.lam, div.stderr])
    _write_csv(cfg, ["index", "lambda", "stderr"], rows)
    if cfg.check == "sum-zero":
        if div.lam != 0.0 or abs(tot.lam) > 3 * tot.stderr:
            raise CheckFailed(f"spectrum sum {tot.lam:.3g} +- {tot.stderr:.3g}, divergence {div.lam:.3g}")
    return (f"{cfg.system} eps={eps:g}: spectrum " + ", ".join(f"{e.lam:.5g}" for e in spec)
            + f"; sum {tot.lam:.3g} +- {tot.stderr:.2g}; divergence rate {div.lam:.3g}")


def cmd_hormander(cfg: RunConfig) -> str:
    from .lie import spanning_scan
    from .sde import config_line

    reps = spanning_scan(cfg.system if cfg.system.startswith("electrodynamics") else "electrodynamics",
                         cfg.samples, cfg.exclusion, cfg.tolerance, seed=cfg.seed, threads=cfg.threads)
    fh = _open_out(cfg)
    if fh is not None:
        fh.close()
        from .lie import write_scan_csv

        write_scan_csv(cfg.out, reps, config_line(cfg.to_dict()))
    low = [r for r in reps if r.rank < 5 or not r.smallest_singular_value > cfg.tolerance * r.largest_singular_value]
    worst = min(r.smallest_singular_value / r.largest_singular_value for r in reps)
    msg = f"hormander: {len(reps) - len(low)}/{len(reps)} states of rank 5; min sv ratio {worst:.3g}"
    if low:
        raise CheckFailed(msg)
    return msg


def cmd_boundary(cfg: RunConfig) -> str:
    import numpy as np

    from .lie import boundary_check
    from .state_space import TorusPoint

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(0, 3000))))
    rows = []
    for i in range(cfg.samples):
        x = TorusPoint(tuple(rng.uniform(0, 2 * math.pi, 3)))
        sign = 1 if i % 2 == 0 else -1
        rows.append(list(x.coords) + [sign, boundary_check(x, sign)])
    _write_csv(cfg, ["x1", "x2", "x3", "sign", "value"], rows)
    dev = max(abs(r[-1] - 1.0) for r in rows)
    msg = f"boundary: {cfg.samples} points on v3 = +-1, max |value - 1| = {dev:.3g}"
    if dev > 1e-10:
        raise CheckFailed(msg)
    return msg


def cmd_fisher(cfg: RunConfig) -> str:
    from .lyapunov import top_exponent
    from .stationary import accumulate, fisher_information

    ic = _integrator(cfg)
    eps = cfg.eps[0]
    hd = accumulate(cfg.system, eps, cfg.T, ic, cfg.bins, shards=cfg.shards, burn_in=cfg.burn_in,
                    threads=cfg.threads)
    fi = fisher_information(hd, cfg.system, eps)
    lam = top_exponent(cfg.system, eps, cfg.T, ic, batches=cfg.batches, burn_in=cfg.burn_in)
    from .vector_fields import get_system

    n = get_system(cfg.system).dim
    # with a zero sum exponent the identity reads n lambda1 = eps FI
    rhs = eps * fi.value
    rel = abs(n * lam.lam - rhs) / abs(n * lam.lam) if lam.lam else math.inf
    rows = [[f"X{k + 1}", c] for k, c in enumerate(fi.contributions)]
    rows += [["FI", fi.value], ["n*lambda1", n * lam.lam], ["lambda1_stderr", lam.stderr], ["rel_gap", rel],
             ["min_hits", hd.min_hits()]]
    _write_csv(cfg, ["quantity", "value"], rows)
    msg = (f"{cfg.system} eps={eps:g}: eps*FI = {rhs:.5g}, n*lambda1 = {n * lam.lam:.5g} +- "
           f"{n * lam.stderr:.2g}, relative gap {rel:.3g} (B={cfg.bins}, min hits {hd.min_hits()})")
    if cfg.max_rel is not None and not rel < cfg.max_rel:
        raise CheckFailed(msg)
    return msg


def cmd_certificate(cfg: RunConfig) -> str:
    from .certificate import render_report

    text, summary = render_report()
    fh = _open_out(cfg)
    if fh is not None:
        with fh:
            fh.write(text + "\n")
    else:
        print(text)
    return ("certificate: displayed system " + summary["displayed_4row"]
            + ("; agrees" if summary["agrees_with_claim"] else "; disagrees")
            + " with the claimed inconsistency; float cross-check "
            + ("agrees" if summary["float_agrees"] else "DISAGREES") + " " + json.dumps(summary, sort_keys=True))


def cmd_control(cfg: RunConfig) -> str:
    from . import control as C

    if cfg.variant == "base":
        reps = C.reach_scan(C.base_grid(), C.default_targets(), cfg.budget, min(cfg.dt, 1e-3), threads=1)
    else:
        import numpy as np

        from .state_space import random_bundle_state

        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(0, 4000))))
        starts = [random_bundle_state(rng, 3) for _ in range(cfg.samples if cfg.samples < 1000 else 16)]
        tg = [C.TargetBox.cube((1.0, 2.0, 3.0, 0.0, 0.0, 1.0), math.pi / 4, 0.3)]
        reps = C.reach_scan(starts, tg, cfg.budget, min(cfg.dt, 1e-3), threads=cfg.threads)
    fh = _open_out(cfg)
    if fh is not None:
        fh.close()
        C.write_reach_csv(cfg.out, reps, cfg.to_dict())
    ok = sum(r.reached for r in reps)
    msg = f"control ({cfg.variant}): {ok}/{len(reps)} targets reached within budget {cfg.budget:g}"
    if ok < len(reps):
        raise CheckFailed(msg + "; first failure: " + next(r.stage for r in reps if not r.reached))
    return msg


def cmd_hit_check(cfg: RunConfig) -> str:
    from .control import hit_estimate_check

    res = []
    for e in cfg.eps:
        try:
            res.append(hit_estimate_check(e))
        except ValueError as err:
            raise ConfigError(str(err)) from None
    _write_csv(cfg, ["epsilon", "t_hit", "v1_at_hit", "t_bound", "v1_bound", "monotone", "ok"],
               [[r.eps, r.t_hit, r.v1_at_hit, r.t_bound, r.v1_bound, int(r.monotone), int(r.ok)] for r in res])
    msg = "hit-check: " + ", ".join(f"eps={r.eps:g} v1={r.v1_at_hit:.4g}<{r.v1_bound:.3g} "
                                    f"t={r.t_hit:.4g}<={r.t_bound:.5g}" for r in res)
    if not all(r.ok for r in res):
        raise CheckFailed(msg)
    return msg


COMMANDS = {
    "lyapunov": cmd_lyapunov, "sweep": cmd_sweep, "spectrum": cmd_spectrum, "hormander": cmd_hormander,
    "boundary": cmd_boundary, "fisher": cmd_fisher, "certificate": cmd_certificate, "control": cmd_control,
    "hit-check": cmd_hit_check,
}


def run(argv: Sequence[str]) -> int:
    from .sde import NumericalAbort

    try:
        cfg = resolve_config(argv)
        line = COMMANDS[cfg.subcommand](cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    except (NumericalAbort, FloatingPointError) as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(line)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    code = run(sys.argv[1:] if argv is None else argv)
    if argv is None:
        sys.exit(code)
    return code
