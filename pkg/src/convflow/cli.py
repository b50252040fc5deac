"""Command-line front end.

Usage::

    convflow evolve --group 2 --mu 0.75,0.25 --t 0.5 --steps 10
    convflow report basic-sets --group 4
    convflow report jacobian --group 2,2 --mu uniform --t 0.9
    convflow report witness --group 2,2 --mu 0,0,1,0 --t 0.5

Data goes to stdout (or ``--out``), diagnostics to stderr. Exit codes: 0 success,
2 input error, 3 capacity, 4 numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .errors import ConvFlowError, InvalidSpecError
from .groups import AbelianGroup
from .limits import (
    PROBE_T,
    basic_sets,
    cokernel,
    fixed_points,
    is_acyclic,
    kernel,
    nonsurjectivity_witness,
    predict_omega_limit,
)
from .measures import ProbabilityMeasure, dirac, tv_distance, uniform, convolve
from .semigroup import (
    delta_power,
    delta_power_complement,
    differential,
    fixed_point_differential,
    q_map,
    tangent_spectrum,
)

REPORT_KINDS = ("limit", "jacobian", "basic-sets", "fixed-points", "cokernel", "kernel", "acyclic", "witness")


@dataclass(frozen=True)
class RunConfig:
    group: AbelianGroup | None
    mu: ProbabilityMeasure | None
    ts: tuple[float, ...]
    steps: int
    tol: float
    fmt: str
    seed: int
    out: Path | None
    parallel: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise InvalidSpecError("--tol must be positive")
        for t in self.ts:
            if not 0.0 <= t < 1.0:
                raise InvalidSpecError(f"--t values must lie in [0, 1), got {t}")
        if self.steps < 0:
            raise InvalidSpecError("--steps must be >= 0")

    def require_mu(self) -> ProbabilityMeasure:
        if self.mu is None:
            raise InvalidSpecError("this command needs --mu")
        return self.mu

    def require_group(self) -> AbelianGroup:
        if self.group is None:
            raise InvalidSpecError("this command needs --group (or a measure file)")
        return self.group

    def single_t(self, default: float | None = None) -> float:
        if not self.ts:
            if default is None:
                raise InvalidSpecError("this command needs --t")
            return default
        if len(self.ts) > 1:
            raise InvalidSpecError("this command takes a single --t value")
        return self.ts[0]


def parse_group(text: str) -> AbelianGroup:
    text = text.strip()
    try:
        if text.startswith("{"):
            return AbelianGroup.from_json(json.loads(text))
        if text.startswith("["):
            return AbelianGroup(tuple(json.loads(text)))
        return AbelianGroup(tuple(int(x) for x in text.split(",")))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConvFlowError):
            raise
        raise InvalidSpecError(f"cannot parse group {text!r}") from exc


def parse_measure(text: str, group: AbelianGroup | None) -> ProbabilityMeasure:
    """``uniform``, ``delta:<index>``, comma-separated weights, a JSON list, or a measure file."""
    text = text.strip()
    path = Path(text[1:] if text.startswith("@") else text)
    if text.startswith("@") or (path.suffix == ".json" and path.exists()):
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise InvalidSpecError(f"cannot read measure file {path}: {exc}") from exc
        mu = ProbabilityMeasure.from_json(data)
        if group is not None and mu.group != group:
            raise InvalidSpecError("measure file group differs from --group")
        return mu
    if group is None:
        raise InvalidSpecError("inline measures need --group")
    if text == "uniform":
        return uniform(group)
    if text.startswith("delta:"):
        try:
            return dirac(group, int(text.split(":", 1)[1]))
        except ValueError as exc:
            raise InvalidSpecError(f"bad delta spec {text!r}") from exc
    try:
        weights = json.loads(text) if text.startswith("[") else [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InvalidSpecError(f"cannot parse weights {text!r}") from exc
    return ProbabilityMeasure(group, weights)


def _parse_ts(text: str | None) -> tuple[float, ...]:
    if text is None:
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise InvalidSpecError(f"cannot parse --t {text!r}") from exc


# ---------------------------------------------------------------------------
# commands


def _trajectory(mu: ProbabilityMeasure, t: float, steps: int) -> list[list[float]]:
    attractor = predict_omega_limit(mu).predicted
    rows = []
    for n in range(steps + 1):
        t_eff = delta_power(t, n)
        # 1-(1-t)^n rounds to 1.0 for large n; pass (1-t)^n exactly
        state = q_map(t_eff, mu, complement=delta_power_complement(t, n))
        tv = min(tv_distance(state, a) for a in attractor) if attractor else float("nan")
        rows.append([n, t_eff, *state.weights.tolist(), tv])
    return rows


def cmd_evolve(config: RunConfig) -> str:
    mu = config.require_mu()
    ts = config.ts or (0.5,)
    if config.parallel and len(ts) > 1:
        with ThreadPoolExecutor() as pool:
            runs = list(pool.map(lambda t: _trajectory(mu, t, config.steps), ts))
    else:
        runs = [_trajectory(mu, t, config.steps) for t in ts]
    G = mu.group
    header = ["step", "t_effective"] + [f"w_{G.label(g)}" for g in G.elements] + ["tv_to_attractor"]
    if len(ts) > 1:
        header = ["t"] + header
        runs = [[[t] + row for row in rows] for t, rows in zip(ts, runs)]
    rows = [row for rows in runs for row in rows]
    if config.fmt == "json":
        return json.dumps({"columns": header, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, int) else repr(float(v)) for v in row])
    return buf.getvalue()


def _jacobian_report(config: RunConfig) -> dict:
    mu = config.require_mu()
    t = config.single_t()
    D = differential(t, mu)
    doc = {
        "t": t,
        "mu": mu.to_json(),
        "matrix": D.matrix.tolist(),
        "tangent_eigenvalues": [[float(z.real), float(z.imag)] for z in tangent_spectrum(t, mu)],
    }
    idempotent = tv_distance(convolve(mu, mu), mu) <= 1e-10
    doc["fixed_point"] = idempotent
    if idempotent:
        doc["closed_form_matrix"] = fixed_point_differential(t, mu).matrix.tolist()
    return doc


def cmd_report(config: RunConfig, kind: str) -> str:
    if kind == "limit":
        doc = predict_omega_limit(config.require_mu(), config.single_t(PROBE_T),
                                  tol=config.tol, max_iter=max(config.steps, 1)).to_json()
    elif kind == "jacobian":
        doc = _jacobian_report(config)
    elif kind == "basic-sets":
        doc = basic_sets(config.require_group(), t=config.single_t(0.5), seed=config.seed).to_json()
    elif kind == "fixed-points":
        G = config.require_group()
        doc = {"group": G.to_json(), "fixed_points": [p.to_json() for p in fixed_points(G)]}
    elif kind == "cokernel":
        doc = cokernel(config.require_mu()).to_json()
    elif kind == "kernel":
        doc = kernel(config.require_mu()).to_json()
    elif kind == "acyclic":
        doc = is_acyclic(config.require_mu()).to_json()
    elif kind == "witness":
        mu = config.require_mu()
        doc = nonsurjectivity_witness(mu.group, mu, config.single_t()).to_json()
    else:
        raise InvalidSpecError(f"unknown report kind {kind!r}")
    return json.dumps({"kind": kind, "report": doc}, indent=2) + "\n"


# ---------------------------------------------------------------------------
# click wiring


def _common(f):
    options = [
        click.option("--group", "group_text", help="Cyclic orders, e.g. 4 or 2,2, or group JSON."),
        click.option("--mu", "mu_text", help="uniform, delta:<i>, weights w0,w1,..., or a measure JSON file."),
        click.option("--t", "t_text", help="Flow time in [0,1); comma list for evolve sweeps."),
        click.option("--steps", type=int, default=None, help="Iteration count."),
        click.option("--tol", type=float, default=1e-12, show_default=True, help="Convergence tolerance."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None),
        click.option("--seed", type=int, default=0, show_default=True, help="RNG seed for sampling."),
        click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _build_config(group_text, mu_text, t_text, steps, tol, fmt, seed, out, parallel=False,
                  default_steps=10, default_fmt="json") -> RunConfig:
    group = parse_group(group_text) if group_text else None
    mu = parse_measure(mu_text, group) if mu_text else None
    if group is None and mu is not None:
        group = mu.group
    return RunConfig(group, mu, _parse_ts(t_text), default_steps if steps is None else steps,
                     tol, fmt or default_fmt, seed, out, parallel)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text)


def _run(fn):
    try:
        fn()
    except ConvFlowError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except np.linalg.LinAlgError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(4)


@click.group()
def main():
    """Rational flow on the convolution algebra of a finite abelian group."""


@main.command()
@_common
@click.option("--parallel", is_flag=True, help="Run several --t values concurrently.")
def evolve(group_text, mu_text, t_text, steps, tol, fmt, seed, out, parallel):
    """Trajectory Q_{t^n}(mu) for n = 0..steps as CSV (default) or JSON."""
    def go():
        cfg = _build_config(group_text, mu_text, t_text, steps, tol, fmt, seed, out, parallel,
                            default_fmt="csv")
        _emit(cmd_evolve(cfg), cfg.out)
    _run(go)


@main.command()
@click.argument("kind", type=click.Choice(REPORT_KINDS))
@_common
def report(kind, group_text, mu_text, t_text, steps, tol, fmt, seed, out):
    """JSON report of the given KIND."""
    def go():
        cfg = _build_config(group_text, mu_text, t_text, steps, tol, fmt, seed, out,
                            default_steps=10_000)
        if cfg.fmt != "json":
            raise InvalidSpecError("reports are JSON only")
        _emit(cmd_report(cfg, kind), cfg.out)
    _run(go)


if __name__ == "__main__":
    main()
