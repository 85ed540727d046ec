"""Benchmark harness: periodic Poisson + multilevel BDDC + PCG, rows as CSV."""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import oracle as dense
from .bddc import setup
from .hierarchy import HierarchySpec, build_hierarchy
from .krylov import pcg
from .mesh_fe import random_zero_mean_rhs

COLUMNS = ["L", "ratio", "coarse_space", "iter", "cond_est", "cond_exact",
           "n", "n_gamma", "wall_time", "converged"]
DEFAULT_MAX_DOFS = 20_000_000


@dataclass(frozen=True)

class RunConfig:
    dim: int = 2
    levels: int = 2
    ratio: int | tuple[int, ...] = 3
    coarse_space: str = "C"
    tol: float = 1e-8
    seed: int = 42
    maxit: int = 500
    oracle: bool = False
    max_dofs: int = DEFAULT_MAX_DOFS
    oracle_cap: int = dense.DEFAULT_CAP
    audit_dir: str | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        self.hierarchy_spec()

    @property
    def ratios(self) -> tuple[int, ...]:
        if isinstance(self.ratio, int):
            return (self.ratio,) * (self.levels - 1)
        return tuple(self.ratio)

    @property
    def ratio_label(self) -> str:
        r = self.ratios
        return str(r[0]) if len(set(r)) == 1 else ":".join(map(str, r))

    def hierarchy_spec(self) -> HierarchySpec:
        return HierarchySpec(self.dim, self.levels, self.ratios, self.coarse_space)

    @property
    def n(self) -> int:
        return self.hierarchy_spec().cells_per_axis ** self.dim


@dataclass

class ResultRow:
    L: int
    ratio: str
    coarse_space: str
    iter: int | None = None
    cond_est: float | None = None
    cond_exact: float | None = None
    n: int | None = None
    n_gamma: int | None = None
    wall_time: float | None = None
    converged: bool = False
    audit: dict | None = field(default=None, repr=False)
    audit_path: str | None = None
    error: str | None = None

    def csv_fields(self, timing: bool = True) -> list[str]:
        def num(x):
            return "" if x is None else f"{x:#.4g}"
        return [
            str(self.L), self.ratio, self.coarse_space,
            "" if self.iter is None else str(self.iter),
            num(self.cond_est), num(self.cond_exact),
            "" if self.n is None else str(self.n),
            "" if self.n_gamma is None else str(self.n_gamma),
            f"{self.wall_time:.3f}" if timing and self.wall_time is not None else "",
            "true" if self.converged else "false",
        ]


def run(config: RunConfig) -> ResultRow:
    """One experiment: build, precondition, solve, optionally audit densely."""
    row = ResultRow(config.levels, config.ratio_label, config.coarse_space)
    if config.n > config.max_dofs:
        raise ValueError(
            f"{config.n} dofs exceeds the size budget of {config.max_dofs}; "
            "raise --max-dofs to run it anyway")
    t0 = time.perf_counter()
    try:
        hier = build_hierarchy(config.hierarchy_spec())
        prec = setup(hier)
        b = random_zero_mean_rhs(hier.n, config.seed)
        A = prec.A
        _, rep = pcg(A.dot, prec.apply, b, config.tol, config.maxit, seed=config.seed)
    except Exception as exc:
        raise RuntimeError(f"run failed for {config}: {exc}") from exc
    row.wall_time = time.perf_counter() - t0
    row.iter, row.cond_est, row.converged = rep.iterations, rep.cond_est, rep.converged
    row.n, row.n_gamma = hier.n, hier.n_gamma

    if config.oracle and hier.n <= config.oracle_cap:
        B = dense.materialize(prec.apply, hier.n, config.oracle_cap)
        ev = dense.spectrum(A.toarray(), B)
        row.cond_exact = float(ev[-1] / ev[0])
        sub = dense.dense_level_one(config.dim, hier.grid.cells_per_axis, config.ratios[0], config.coarse_space)
        B2 = B if config.levels == 2 else None
        report = dense.audit_multispace_assumptions(sub, B2)
        report.entries["multilevel_lambda_min"] = float(ev[0])
        report.entries["multilevel_kappa"] = row.cond_exact
        row.audit = report.entries
        out_dir = Path(config.audit_dir or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / (f"audit_{config.dim}d_L{config.levels}_r{config.ratio_label.replace(':', '-')}"
                          f"_{config.coarse_space}.txt")
        path.write_text(report.to_text())
        row.audit_path = str(path)
    return row


AXES = {"L": "levels", "levels": "levels", "r": "ratio", "ratio": "ratio",
        "coarse_space": "coarse_space", "coarse-space": "coarse_space", "cs": "coarse_space"}


def parse_sweep(text: str):
    axis, _, values = text.partition("=")
    if axis.strip() not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; use L, r or coarse_space")
    field_name = AXES[axis.strip()]
    vals = [v.strip() for v in values.split(",") if v.strip()]
    if field_name != "coarse_space":
        vals = [int(v) for v in vals]
    return field_name, vals


def sweep(template: RunConfig, axis: str, values, stream=None, timing: bool = True):
    """Run one config per value of ``axis``; returns (csv_text, rows, failures)."""
    field_name = AXES[axis]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    rows, failures = [], []
    for v in values:
        # label by the requested variant even if it turns out to be invalid
        label = ResultRow(
            v if field_name == "levels" else template.levels,
            str(v) if field_name == "ratio" else template.ratio_label,
            v if field_name == "coarse_space" else template.coarse_space)
        try:
            cfg = replace(template, **{field_name: v})
            label = ResultRow(cfg.levels, cfg.ratio_label, cfg.coarse_space)
            row = run(cfg)
        except Exception as exc:
            label.error = str(exc)
            failures.append(label)
            row = label
            print(f"error: {exc}", file=sys.stderr)
        rows.append(row)
        writer.writerow(row.csv_fields(timing))
        if stream is not None:
            print(",".join(row.csv_fields(timing)), file=stream, flush=True)
    return buf.getvalue(), rows, failures


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines mirroring the long option names."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed config line: {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlbddc-bench",
                                description="Multilevel BDDC on periodic Poisson problems.")
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--ratio", help="uniform ratio or comma list per level")
    p.add_argument("--coarse-space", choices=["C", "E", "CE", "CEF"])
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--maxit", type=int)
    p.add_argument("--oracle", action="store_true", default=None,
                   help="append the dense exact condition number and audit (small n only)")
    p.add_argument("--max-dofs", type=int)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--sweep", help="axis=v1,v2,... with axis in {L, r, coarse_space}")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time blank for byte-stable CSV")
    return p


def _parse_ratio(value):
    if isinstance(value, int):
        return value
    parts = [int(v) for v in str(value).replace(":", ",").split(",") if v.strip()]
    return parts[0] if len(parts) == 1 else tuple(parts)


def config_from_args(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("dim", "levels", "ratio", "coarse_space", "tol", "seed", "maxit", "oracle", "max_dofs"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    kinds = {"dim": int, "levels": int, "tol": float, "seed": int, "maxit": int, "max_dofs": int,
             "coarse_space": str, "ratio": _parse_ratio,
             "oracle": lambda v: v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")}
    unknown = set(values) - set(kinds)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kw = {k: kinds[k](v) for k, v in values.items()}
    if args.out and kw.get("oracle"):
        kw["audit_dir"] = str(Path(args.out).resolve().parent)
    if "ratio" not in kw or not isinstance(kw["ratio"], tuple):
        return RunConfig(**kw)
    kw.setdefault("levels", len(kw["ratio"]) + 1)
    return RunConfig(**kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        template = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.sweep:
        axis, values = parse_sweep(args.sweep)
    else:
        axis, values = "levels", [template.levels]
    text, rows, failures = sweep(template, axis, values, timing=not args.no_timing)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for row in rows:
        if row.audit_path:
            print(f"audit report: {row.audit_path}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
