"""Command-line entry point: ``fissura run <config> [--override k=v ...] [--quiet]``.

Exit status: 0 when every check passes, 1 when a run finished but a
reported check failed, 2 on solver non-convergence, 3 on configuration
errors.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from typing import Optional, Sequence

from . import io as fio
from .scenarios import ConfigError, ScenarioConfig, ScenarioResult, read_config, run_scenario

EXIT_OK, EXIT_CHECK_FAILED, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("fissura")


def thread_limit():
    """Cap BLAS/OpenMP pools when FISSURA_THREADS is set."""
    raw = os.environ.get("FISSURA_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError("FISSURA_THREADS", f"expected a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def write_artifacts(cfg: ScenarioConfig, res: ScenarioResult) -> list[str]:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    written = []
    for k, (u, v) in enumerate(res.steps):
        written.append(fio.write_fields(u, v, u.grid, os.path.join(out, f"fields_{k:03d}.vtk")))
    written.append(fio.write_history(res.history, os.path.join(out, "history.csv")))
    written.append(fio.write_summary(res.rows, os.path.join(out, "summary.csv")))
    if cfg.figures:
        from . import plotting

        if res.steps:
            written.append(plotting.plot_phase(res.steps[-1][1], os.path.join(out, "phase.png")))
        if res.history:
            written.append(plotting.plot_history(res.history, os.path.join(out, "history.png")))
        if "recovery" in res.plots:
            written.append(plotting.plot_recovery(*res.plots["recovery"], os.path.join(out, "recovery.png")))
        if "profile" in res.plots:
            written.append(plotting.plot_profile(res.plots["profile"], os.path.join(out, "profile.png")))
        if "lemma" in res.plots:
            written.append(plotting.plot_lemma(res.plots["lemma"], os.path.join(out, "lemma.png")))
    return written


def run(config_path: str, overrides: Sequence[str] = (), quiet: bool = False) -> int:
    try:
        cfg = read_config(config_path, tuple(overrides))
        limiter = thread_limit()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with limiter:
        res = run_scenario(cfg)
    written = write_artifacts(cfg, res)
    if not quiet:
        sys.stdout.write(fio.render_summary(res.rows))
        for path in written:
            print(f"wrote {path}")
    for line in res.diagnostics:
        print(line, file=sys.stderr)
    if not res.converged:
        return EXIT_NOT_CONVERGED
    if any(r.status == "FAIL" for r in res.rows):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fissura", description="Phase-field fracture scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a config file")
    r.add_argument("config")
    r.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--quiet", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    return run(args.config, args.override, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
