"""Command-line entry point.

Every subcommand reads a :class:`RunConfig` built from (lowest to highest
priority) built-in defaults, an optional JSON config file and explicit flags.
Randomized subcommands always run with a recorded seed: if none is given one
is generated and printed to stderr.

Exit codes: 0 ok (failed verdicts are data), 2 config error, 3 guard
exceeded, 4 retry exhaustion.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .antichain import PAIR_GUARD, SIZE_GUARD, check_hit_conclusion, check_main_conclusion, max_antichain
from .containers import (
    PipelineParams,
    failed_invariants,
    random_two_linked,
    run_pipeline,
    verify_container,
    weak_container,
)
from .errors import GuardExceeded, RetryExhausted
from .experiments import (
    audit_failures,
    audit_rows_to_csv,
    expectation_audit,
    inequality_audit,
    rows_to_csv,
    rows_to_json,
    sweep,
    two_layer_scan,
)
from .lattice import Family, MiddleGraph, closure, parse_mask, read_family, shadow, write_family
from .sampler import derive_stream, sample_family

OUT_DIR_ENV = "SPERNER_LAB_OUT"
COMMANDS = ("sample", "width", "shadow", "closure", "container", "verify", "sweep", "audit", "scan")
RANDOMIZED = {"sample", "container", "sweep", "audit", "scan"}

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_RETRY = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All settings of one run.  ``canonical()`` is stable across parse cycles."""

    command: str
    n: Optional[list[int]] = None
    k: Optional[int] = None
    p: Optional[list[float]] = None
    trials: int = 100
    seed: Optional[int] = None
    family: Optional[str] = None
    container: Optional[str] = None
    forest: Optional[str] = None
    direction: str = "auto"
    kind: Optional[str] = None
    check: str = "none"
    exhaustive: bool = False
    layer: Optional[int] = None
    size: Optional[int] = None
    stage: str = "full"
    generator: str = "random"
    c: float = 0.01
    K: float = 3.0
    threads: int = 1
    size_guard: int = SIZE_GUARD
    pair_guard: int = PAIR_GUARD
    retry_cap: int = 1000
    out: Optional[str] = None
    trace_out: Optional[str] = None
    format: str = "csv"

    def canonical(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("config has no command")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_canonical(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.seed is not None and not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for q in self.p or []:
            if not 0.0 <= q <= 1.0:
                raise ConfigError(f"p must lie in [0, 1], got {q}")

    @property
    def single_n(self) -> int:
        if not self.n or len(self.n) != 1:
            raise ConfigError(f"{self.command} needs exactly one --n")
        return self.n[0]

    @property
    def single_p(self) -> float:
        if not self.p or len(self.p) != 1:
            raise ConfigError(f"{self.command} needs exactly one --p")
        return self.p[0]

    def need(self, *names: str) -> None:
        missing = [nm for nm in names if getattr(self, nm) is None]
        if missing:
            raise ConfigError(f"{self.command} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))


def parse_int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON config file; explicit flags win")
    common.add_argument("--n", type=parse_int_list, help="ground set size (list or range for sweep)")
    common.add_argument("--k", type=int, help="layer or middle-graph parameter")
    common.add_argument("--p", type=parse_float_list, help="probability (comma list for sweep)")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--family", help="'all', 'layer:k', inline '{1,2};{2,3}', or a file")
    common.add_argument("--out", help=f"output path (relative paths go under ${OUT_DIR_ENV} if set)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--threads", type=int)
    common.add_argument("--trace-out", dest="trace_out")
    common.add_argument("--size-guard", dest="size_guard", type=int)
    common.add_argument("--pair-guard", dest="pair_guard", type=int)
    common.add_argument("--retry-cap", dest="retry_cap", type=int)

    ap = argparse.ArgumentParser(prog="sperner-lab", description="Antichains in random subfamilies of P(n).")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("sample", parents=[common], help="sample P(n)_p (--n) or V(M(k))_p (--k)")

    p = sub.add_parser("width", parents=[common], help="exact width and a maximum antichain")
    p.add_argument("--check", choices=["none", "main", "hit"], default=S)
    p.add_argument("--exhaustive", action="store_true", default=S)

    for name in ("shadow", "closure"):
        p = sub.add_parser(name, parents=[common], help=f"{name} of a uniform family")
        p.add_argument("--dir", dest="direction", choices=["auto", "lower", "upper"], default=S)

    p = sub.add_parser("container", parents=[common], help="weak / strong container pipeline on M(k)")
    p.add_argument("--size", type=int, default=S, help="size of a random 2-linked A when --family is absent")
    p.add_argument("--stage", choices=["weak", "full"], default=S)

    p = sub.add_parser("verify", parents=[common], help="check a container pair (S, F) against A")
    p.add_argument("--container", default=S, help="family spec of S")
    p.add_argument("--forest", default=S, help="family spec of F")
    p.add_argument("--kind", choices=["weak", "strong"], default=S)
    p.add_argument("--K", type=float, default=S)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo verdict sweep")
    p.add_argument("--kind", choices=["main", "hit"], default=S)

    p = sub.add_parser("audit", parents=[common], help="inequality audit, or expectation audit with --layer")
    p.add_argument("--kind", choices=["inequality", "isolated", "nearly_isolated"], default=S)
    p.add_argument("--layer", type=int, default=S)

    p = sub.add_parser("scan", parents=[common], help="2-layer expansion scan on M(k)")
    p.add_argument("--c", type=float, default=S)
    p.add_argument("--generator", choices=["enumeration", "random"], default=S)
    p.add_argument("--size", type=int, default=S, help="max size of random A")
    return ap


def load_config(argv: Sequence[str]) -> RunConfig:
    ap = build_parser()
    ns = vars(ap.parse_args(list(argv)))
    data: dict = {}
    cfg_path = ns.pop("config", None)
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.pop("command", None)
    data.update(ns)
    return RunConfig.from_dict(data)


def resolve_family(spec: str, n: int) -> Family:
    """Parse a family spec against ground size ``n``."""
    s = spec.strip()
    if s == "all":
        return Family.full(n)
    if s.startswith("layer:"):
        return Family.layer(n, int(s[6:]))
    path = Path(s)
    if path.is_file():
        return read_family(path, n)
    items = [t for t in s.split(";") if t.strip()]
    return Family(n, tuple(parse_mask(t, n) for t in items))


def _out_path(path: Optional[str]) -> Optional[Path]:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(cfg: RunConfig, text: str) -> None:
    path = _out_path(cfg.out)
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        path.write_text(text)


def _family_arg(cfg: RunConfig, n: int) -> Family:
    cfg.need("family")
    return resolve_family(cfg.family, n)


def cmd_sample(cfg: RunConfig) -> str:
    if cfg.k is not None:
        ground, n = f"M({cfg.k})", MiddleGraph(cfg.k).n
    else:
        n = cfg.single_n
        ground = f"P({n})"
    X = sample_family(ground, cfg.single_p, derive_stream(cfg.seed, 0))
    path = _out_path(cfg.out)
    if path is None:
        for line in X.to_text_lines():
            print(line)
    else:
        write_family(path, X)
    return f"sample {ground} p={cfg.single_p}: {len(X)} sets, seed {cfg.seed}"


def cmd_width(cfg: RunConfig) -> str:
    n = cfg.single_n
    X = _family_arg(cfg, n)
    res = max_antichain(X, cfg.size_guard, cfg.pair_guard)
    summary = f"width {res.width}"
    payload = res.to_dict()
    if cfg.check != "none":
        fn = check_main_conclusion if cfg.check == "main" else check_hit_conclusion
        chk = fn(X, exhaustive=cfg.exhaustive)
        payload["check"] = {"kind": cfg.check, "verdict": chk.verdict.value,
                            "reference": chk.reference, "layer": chk.layer}
        summary += f"; {cfg.check} conclusion {chk.verdict.value}"
    if cfg.out:
        _emit(cfg, json.dumps(payload, indent=1))
    return summary


def _lattice_op(cfg: RunConfig, op) -> str:
    n = cfg.single_n
    A = _family_arg(cfg, n)
    if cfg.k is not None and A.uniform_layer() not in (None, cfg.k):
        raise ConfigError(f"family lies in layer {A.uniform_layer()}, not --k {cfg.k}")
    B = op(A, cfg.direction)
    path = _out_path(cfg.out)
    if path is None:
        for line in B.to_text_lines():
            print(line)
    else:
        write_family(path, B)
    return f"{cfg.command}: {len(B)} sets"


def _container_A(cfg: RunConfig) -> Family:
    M = MiddleGraph(cfg.k)
    if cfg.family is not None:
        return resolve_family(cfg.family, M.n)
    size = cfg.size if cfg.size is not None else M.part_size // 4
    return random_two_linked(cfg.k, size, derive_stream(cfg.seed, 1))


def cmd_container(cfg: RunConfig) -> str:
    cfg.need("k")
    params = PipelineParams(cfg.k, retry_cap=cfg.retry_cap)
    A = _container_A(cfg)
    rng = derive_stream(cfg.seed, 0)
    if cfg.stage == "weak":
        S, F, trace = weak_container(A, params, rng)
    else:
        S, F, trace = run_pipeline(A, params, rng)
    bad = failed_invariants(trace)
    if cfg.trace_out:
        _out_path(cfg.trace_out).write_text(trace.to_json(indent=1))
    if cfg.out:
        _emit(cfg, json.dumps({"A": A.to_text_lines(), "S": S.to_text_lines(), "F": F.to_text_lines()},
                              indent=1))
    status = "all invariants hold" if not bad else "failed: " + ", ".join(bad)
    return (f"container k={cfg.k} stage={cfg.stage}: |A|={trace.a} t={trace.t} |S|={len(S)} "
            f"|F|={len(F)}; {status}")


def cmd_verify(cfg: RunConfig) -> str:
    cfg.need("k", "family", "container", "forest")
    n = MiddleGraph(cfg.k).n
    A, S, F = (resolve_family(s, n) for s in (cfg.family, cfg.container, cfg.forest))
    kind = cfg.kind or "strong"
    rep = verify_container(A, S, F, kind, cfg.K, cfg.k)
    payload = {"kind": kind, "K": cfg.K, "t": rep.t, "excess": rep.excess, "deficit": rep.deficit,
               "measured_K": rep.measured_K, "checks": rep.checks, "passed": rep.passed}
    _emit(cfg, json.dumps(payload, indent=1, ensure_ascii=False))
    return f"verify {kind}: {'pass' if rep.passed else 'fail'}, measured K={rep.measured_K:.4g}"


def cmd_sweep(cfg: RunConfig) -> str:
    cfg.need("n", "p")
    kind = cfg.kind or "main"
    rows = sweep(kind, cfg.n, cfg.p, cfg.trials, cfg.seed, threads=cfg.threads)
    _emit(cfg, rows_to_csv(rows) if cfg.format == "csv" else rows_to_json(rows))
    return f"sweep {kind}: {len(rows)} rows, seed {cfg.seed}"


def cmd_audit(cfg: RunConfig) -> str:
    kind = cfg.kind or "inequality"
    if kind == "inequality":
        rows = inequality_audit()
        bad = audit_failures(rows)
        if cfg.format == "csv":
            _emit(cfg, audit_rows_to_csv(rows))
        else:
            _emit(cfg, json.dumps([r.to_dict() for r in rows], indent=1))
        return f"audit: {len(rows)} rows, {len(bad)} failing"
    cfg.need("layer")
    row = expectation_audit(cfg.single_n, cfg.single_p, cfg.layer, kind, cfg.trials, cfg.seed)
    if cfg.format == "csv":
        _emit(cfg, audit_rows_to_csv([row]))
    else:
        _emit(cfg, json.dumps(row.to_dict(), indent=1))
    return f"audit {kind}: mean {row.lhs:.6g} vs exact {row.rhs:.6g}, {'pass' if row.passed else 'fail'}"


def cmd_scan(cfg: RunConfig) -> str:
    cfg.need("k")
    rep = two_layer_scan(cfg.k, cfg.single_p, cfg.c, cfg.trials, cfg.generator, cfg.seed, max_size=cfg.size)
    _emit(cfg, json.dumps(rep.to_dict(), indent=1))
    flag = " (p <= 1/2, outside regime)" if rep.outside_regime else ""
    return f"scan k={cfg.k}: {rep.violations}/{rep.evaluated} violations{flag}"


HANDLERS = {
    "sample": cmd_sample,
    "width": cmd_width,
    "shadow": lambda cfg: _lattice_op(cfg, shadow),
    "closure": lambda cfg: _lattice_op(cfg, closure),
    "container": cmd_container,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "audit": cmd_audit,
    "scan": cmd_scan,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = load_config(argv)
        randomized = cfg.command in RANDOMIZED and not (cfg.command == "audit" and cfg.kind in (None, "inequality"))
        if randomized and cfg.seed is None:
            cfg.seed = secrets.randbits(63)
            print(f"seed: {cfg.seed}", file=sys.stderr)
        summary = HANDLERS[cfg.command](cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except GuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except RetryExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRY
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
