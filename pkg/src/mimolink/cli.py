"""Experiment orchestration: config parsing, seeded sweeps, CSV emission.

Subcommands:
  ber       Monte Carlo bit error rate sweep of the iterative receiver
  rates     expected outage-rate curves of both decoders vs the outage
            capacity and the perfect-CSI ergodic capacity
  selftest  run the invariant/oracle suites and exit nonzero on failure

Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy.
Output CSVs are reproducible byte-for-byte for a fixed (config, seed),
independent of worker count; pass --timing to append a wall-clock
trailer comment (which is inherently non-reproducible).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bicm import BerConfig, simulate_ber
from .channel import ChannelParams
from .numerics import Seed
from .rates import DegenerateConfigError, expected_rate_curves

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CSV_HEADER = "snr_db,eb_n0_db,series,value,ci_low,ci_high,n_trials,seed"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated settings of one ber or rates run."""

    mode: str
    mt: int = 2
    mr: int = 2
    pilots: int = 2
    labeling: str = "gray"
    metrics: tuple[str, ...] = ("mismatched", "improved", "perfect_csi")
    snr_db: tuple[float, ...] = ()
    gamma_qos: float = 0.01
    frames: int = 1000
    outer: int = 200
    inner: int = 2000
    iters: int = 4
    frame_symbols: int = 50
    seed: int = 0
    workers: int = 1
    out: str = "-"
    max_log: bool = False
    fading: str = "per_symbol"
    timing: bool = False

    def validate(self):
        if self.mode not in ("ber", "rates"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mt < 1 or self.mr < 1:
            raise ConfigError("antenna counts must be >= 1")
        if self.pilots < self.mt:
            raise ConfigError(f"N >= M_T required (pilots={self.pilots}, mt={self.mt})")
        if not self.snr_db:
            raise ConfigError("empty SNR grid")
        if self.mode == "rates" and self.mt != self.mr:
            raise ConfigError("rates mode requires mt == mr")
        if not 0.0 <= self.gamma_qos < 1.0:
            raise ConfigError("gamma_qos must lie in [0, 1)")
        if self.mode == "ber":
            if self.frames < 1:
                raise ConfigError("frames must be >= 1")
            if self.iters < 1:
                raise ConfigError("iters must be >= 1")
            if self.labeling not in ("gray", "set_partition"):
                raise ConfigError(f"unknown labeling {self.labeling!r}")
            for m in self.metrics:
                if m not in ("mismatched", "improved", "perfect_csi"):
                    raise ConfigError(f"unknown metric {m!r}")
        else:
            if self.outer < 1 or self.inner < 100:
                raise ConfigError("need outer >= 1 and inner >= 100")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


def parse_grid(text: str) -> tuple[float, ...]:
    """SNR grid 'start:step:stop' (stop included when reachable) or one value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return (float(parts[0]),)
        if len(parts) != 3:
            raise ValueError
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; expected start:step:stop") from None
    if step <= 0:
        raise ConfigError("grid step must be positive")
    if stop < start:
        raise ConfigError("grid stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


_FIELD_PARSERS = {
    "mt": int, "mr": int, "pilots": int, "frames": int, "outer": int,
    "inner": int, "iters": int, "frame_symbols": int, "seed": int,
    "workers": int, "gamma_qos": float, "labeling": str, "out": str,
    "fading": str, "snr_db": parse_grid,
    "metrics": lambda s: tuple(m.strip() for m in s.split(",") if m.strip()),
    "max_log": lambda s: s.lower() in ("1", "true", "yes"),
    "timing": lambda s: s.lower() in ("1", "true", "yes"),
}


def _read_config_file(path: str) -> dict:
    values = {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](raw.strip())
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {e}") from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimolink",
                                 description="MIMO-BICM link simulator and "
                                             "outage-rate toolkit")
    sub = ap.add_subparsers(dest="mode", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--mt", type=int, help="transmit antennas")
        p.add_argument("--mr", type=int, help="receive antennas")
        p.add_argument("--pilots", type=int, help="training vectors per estimate")
        p.add_argument("--snr-db", dest="snr_db", help="grid start:step:stop")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--out", help="output CSV path ('-' for stdout)")
        p.add_argument("--timing", action="store_true", default=None,
                       help="append wall-clock trailer comment")

    ber = sub.add_parser("ber", help="bit error rate sweep")
    common(ber)
    ber.add_argument("--labeling", choices=("gray", "set_partition"))
    ber.add_argument("--metrics", help="comma list of mismatched,improved,perfect_csi")
    ber.add_argument("--frames", type=int, help="frames per SNR point")
    ber.add_argument("--iters", type=int, help="demap/decode iterations")
    ber.add_argument("--frame-symbols", dest="frame_symbols", type=int,
                     help="compound symbols per frame (L)")
    ber.add_argument("--max-log", dest="max_log", action="store_true", default=None,
                     help="max-log demapping instead of exact sums")
    ber.add_argument("--fading", choices=("per_symbol", "per_frame"),
                     help="channel change granularity")

    rates = sub.add_parser("rates", help="expected outage-rate curves")
    common(rates)
    rates.add_argument("--gamma-qos", dest="gamma_qos", type=float,
                       help="outage probability in [0,1)")
    rates.add_argument("--outer", type=int, help="channel-estimate draws per point")
    rates.add_argument("--inner", type=int, help="posterior draws per estimate")

    st = sub.add_parser("selftest", help="run invariant/oracle suites")
    st.add_argument("--quick", action="store_true", help="reduced case counts")
    return ap


def parse_config(argv) -> ExperimentConfig:
    """CLI flags override config-file values, which override defaults."""
    ns = _build_parser().parse_args(argv)
    if ns.mode == "selftest":
        raise ConfigError("selftest takes no experiment config")
    return _config_from_namespace(ns)


def _config_from_namespace(ns) -> ExperimentConfig:
    values = {}
    if ns.config:
        values.update(_read_config_file(ns.config))
    for key in _FIELD_PARSERS:
        if not hasattr(ns, key):
            continue
        flag = getattr(ns, key)
        if flag is None:
            continue
        # strings from the command line still need their field parser
        values[key] = _FIELD_PARSERS[key](flag) if isinstance(flag, str) else flag
    return ExperimentConfig(mode=ns.mode, **values).validate()


def _git_rev() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _config_echo(cfg: ExperimentConfig) -> str:
    pairs = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "snr_db":
            v = ";".join(f"{x:g}" for x in v)
        elif f.name == "metrics":
            v = ",".join(v)
        pairs.append(f"{f.name}={v}")
    return " ".join(pairs)


def _emit_csv(cfg: ExperimentConfig, rows: list[tuple], elapsed: float | None):
    lines = [
        f"# mimolink {cfg.mode} v{__version__}",
        f"# config: {_config_echo(cfg)}",
        f"# git_rev: {_git_rev()}",
        CSV_HEADER,
    ]
    for r in rows:
        snr, ebn0, series, value, lo, hi, n, seed = r
        lines.append(f"{snr:.10g},{ebn0:.10g},{series},{value:.10g},"
                     f"{lo:.10g},{hi:.10g},{n},{seed}")
    if elapsed is not None:
        lines.append(f"# wall_clock_s: {elapsed:.3f}")
    text = "\n".join(lines) + "\n"
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)


def run_ber(cfg: ExperimentConfig) -> list[tuple]:
    sim = BerConfig(
        n_tx=cfg.mt, n_rx=cfg.mr, n_pilots=cfg.pilots, labeling=cfg.labeling,
        snr_db=cfg.snr_db, metrics=cfg.metrics, frames=cfg.frames,
        iterations=cfg.iters, frame_symbols=cfg.frame_symbols,
        seed=cfg.seed, workers=cfg.workers, max_log=cfg.max_log,
        fading=cfg.fading)
    points = simulate_ber(sim)
    return [(p.snr_db, p.eb_n0_db, p.series, p.ber, p.ci_low, p.ci_high,
             p.n_bits, cfg.seed) for p in points]


def run_rates(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    root = Seed(cfg.seed)
    for i, snr_db in enumerate(cfg.snr_db):
        noise_var = cfg.mt / (10.0 ** (snr_db / 10.0))
        params = ChannelParams(cfg.mt, cfg.mr, 1.0, noise_var, 1.0, 1.0, cfg.pilots)
        curves = expected_rate_curves(params, cfg.gamma_qos, cfg.outer, cfg.inner,
                                      root.child(i), workers=cfg.workers)
        ebn0 = snr_db  # rates plots are parameterized directly by SNR
        for series in ("mismatched", "improved", "eio_capacity", "perfect_csi"):
            mean, se = curves[series]
            rows.append((snr_db, ebn0, series, mean, mean - 2 * se, mean + 2 * se,
                         cfg.outer, cfg.seed))
    return rows


def main(argv=None) -> int:
    ns = _build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    if ns.mode == "selftest":
        from . import selftest
        return selftest.run(quick=ns.quick)
    try:
        cfg = _config_from_namespace(ns)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        rows = run_ber(cfg) if cfg.mode == "ber" else run_rates(cfg)
    except DegenerateConfigError as e:
        print(f"numerical degeneracy: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    elapsed = time.perf_counter() - t0 if cfg.timing else None
    _emit_csv(cfg, rows, elapsed)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
