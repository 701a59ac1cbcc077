"""Command-line entry point.

Subcommands: ``simulate``, ``infer``, ``oracle``, ``bench``, ``diagnose``.

Exit codes:

====  =======================================================
0     success
1     other package error (e.g. replay mismatch)
2     configuration error (bad flags, config file, contract)
3     ingestion error (model or data file)
4     improper gamma full conditional
5     infeasible interval (attempt budget exhausted)
6     runaway simulation (event cap) or count overflow
====  =======================================================
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, bench, cme, diagnostics, formats, gibbs, rng, ssa
from .errors import (
    ConfigError,
    ConservationError,
    ContractError,
    CountOverflowError,
    DecodeError,
    ImproperPosteriorError,
    InfeasibleIntervalError,
    IngestionError,
    KinbayesError,
    ModelSyntaxError,
    RateUnderflowError,
    RunawaySimulationError,
)
from .network import load_network
from .sampler import IntervalProblem, SamplerConfig

log = logging.getLogger("kinbayes")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_IMPROPER = 4
EXIT_INFEASIBLE = 5
EXIT_RUNAWAY = 6

EXIT_CODES = [
    ((ImproperPosteriorError, RateUnderflowError), EXIT_IMPROPER),
    (InfeasibleIntervalError, EXIT_INFEASIBLE),
    ((RunawaySimulationError, CountOverflowError), EXIT_RUNAWAY),
    ((IngestionError, ModelSyntaxError, ConservationError, DecodeError), EXIT_INGESTION),
    ((ConfigError, ContractError), EXIT_CONFIG),
    (KinbayesError, EXIT_OTHER),
]


def exit_code_for(exc: BaseException) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    raise exc


# -- config ----------------------------------------------------------------------


@dataclass
class InferConfig:
    model: str = ""
    data: str = ""
    prior: str = "improper"
    theta_init: str = ""
    burn_in: int = 0
    iterations: int = 0
    thin: int = 1
    seed: int = 1
    workers: int = 1
    mode: str = "deterministic"
    max_attempts: int = 10**7
    batch_size: int = 32
    output: str = "out"

    # keys that cannot change deterministic results stay out of the hash
    UNHASHED = ("workers", "output")


def _coerce(cfg_cls, values: dict, base_dir: Path | None):
    kwargs = {}
    known = {f.name: f for f in fields(cfg_cls)}
    for key, raw in values.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        typ = known[name].type
        try:
            if typ in ("int", int):
                kwargs[name] = int(float(raw)) if "e" in str(raw).lower() else int(raw)
            else:
                kwargs[name] = str(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} needs an integer, got {raw!r}") from None
        if name in ("model", "data") and base_dir is not None and kwargs[name]:
            p = Path(kwargs[name])
            kwargs[name] = str(p if p.is_absolute() else base_dir / p)
    return kwargs


def parse_priors(text: str, m: int) -> list[gibbs.GammaPrior]:
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("empty prior specification")
    if len(tokens) == 1:
        tokens = tokens * m
    if len(tokens) != m:
        raise ConfigError(f"prior lists {len(tokens)} entries for {m} reactions")
    out = []
    for t in tokens:
        if t == "improper":
            out.append(gibbs.GammaPrior(0.0, 0.0))
            continue
        a, sep, b = t.partition(":")
        try:
            out.append(gibbs.GammaPrior(float(a), float(b)))
        except (ValueError, ContractError):
            raise ConfigError(f"bad prior {t!r}; use 'improper' or 'alpha:beta'") from None
        if not sep:
            raise ConfigError(f"bad prior {t!r}; use 'improper' or 'alpha:beta'")
    return out


def parse_floats(text: str, m: int | None = None, what="theta") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"bad {what} list {text!r}") from None
    if m is not None and len(vals) == 1 and m > 1 and what == "theta_init":
        vals = vals * m
    if m is not None and len(vals) != m:
        raise ConfigError(f"{what} needs {m} values, got {len(vals)}")
    if any(not (v > 0 and np.isfinite(v)) for v in vals):
        raise ConfigError(f"{what} values must be positive")
    return vals


def parse_state(text: str, network) -> tuple[int, ...]:
    """``E=120,S=301,...`` or a plain comma list in species order."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if all("=" in p for p in parts):
            d = {k.strip(): int(v) for k, v in (p.split("=") for p in parts)}
            missing = [s for s in network.species if s not in d]
            if missing or set(d) - set(network.species):
                raise ConfigError(f"state {text!r} must assign exactly the species {network.species}")
            return tuple(d[s] for s in network.species)
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"bad state {text!r}") from None
    if len(vals) != network.n_species:
        raise ConfigError(f"state needs {network.n_species} counts")
    return vals


def _fmt_state(x) -> str:
    return "(" + " ".join(str(int(c)) for c in x) + ")"


def _require_file(path, what):
    if not path:
        raise ConfigError(f"{what} path is required")
    if not Path(path).is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return path


# -- infer -------------------------------------------------------------------


def load_infer_config(args) -> InferConfig:
    values = {}
    base = None
    if args.config:
        cpath = Path(_require_file(args.config, "config"))
        values.update(formats.read_key_value(cpath))
        base = cpath.parent
    file_kwargs = _coerce(InferConfig, values, base)
    flag_values = {
        f.name: getattr(args, f.name)
        for f in fields(InferConfig)
        if getattr(args, f.name, None) is not None
    }
    cfg = InferConfig(**{**file_kwargs, **_coerce(InferConfig, flag_values, None)})
    for name in ("burn_in", "iterations", "max_attempts", "batch_size", "workers"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be >= 0")
    if cfg.thin < 1:
        raise ConfigError("thin must be >= 1")
    if cfg.iterations and cfg.iterations < cfg.thin:
        raise ConfigError("iterations must be >= thin")
    if cfg.workers < 1 or cfg.batch_size < 1:
        raise ConfigError("workers and batch_size must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    _require_file(cfg.model, "model")
    _require_file(cfg.data, "data")
    return cfg


def command_infer(cfg: InferConfig) -> int:
    network = load_network(cfg.model)
    obs = formats.load_observations(cfg.data, network)
    m = network.n_reactions
    priors = parse_priors(cfg.prior, m)
    theta_init = parse_floats(cfg.theta_init, m, "theta_init") if cfg.theta_init else (1.0,) * m
    try:
        sampler_cfg = SamplerConfig(cfg.batch_size, cfg.max_attempts, cfg.mode, cfg.workers)
        run = gibbs.RunConfig(cfg.burn_in, cfg.iterations, cfg.thin, theta_init)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc

    hashed = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name not in InferConfig.UNHASHED}
    hashed["model"] = Path(cfg.model).read_text(encoding="utf-8")
    hashed["data"] = Path(cfg.data).read_text(encoding="utf-8")
    meta = formats.metadata_lines(cfg.seed, formats.config_hash(hashed))

    total = cfg.burn_in + cfg.iterations
    step = max(1, total // 10)

    def progress(done, total):
        if done % step == 0 or done == total:
            log.info("gibbs iteration %d / %d", done, total)

    telemetry: list = []
    samples = gibbs.run_chain(
        network, obs, priors, run, cfg.seed, sampler_cfg, telemetry=telemetry, progress=progress
    )
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_posterior(out / "posterior.csv", samples, m, meta)
    formats.write_streams(out / "streams.csv", samples, meta)

    summary = list(meta) + ["quantity,mean,q0.025,q0.5,q0.975"]
    if samples:
        cols = {f"theta_{j + 1}": [s.theta[j] for s in samples] for j in range(m)}
        cols["K_D"] = [s.K_D for s in samples]
        cols["K_M"] = [s.K_M for s in samples]
        for name, vals in cols.items():
            if np.all(np.isnan(vals)):
                continue
            sm = diagnostics.summarize(vals)
            qs = ",".join(repr(sm.quantiles[q]) for q in (0.025, 0.5, 0.975))
            summary.append(f"{name},{sm.mean!r},{qs}")
    formats.write_text(out / "summary.csv", summary)

    tel = list(meta) + ["iteration,interval,attempts,simulations,wall_time"]
    for rec in telemetry:
        tel.append(
            f"{rec['iteration']},{rec['interval']},{rec['attempts']},"
            f"{rec['simulations']},{rec['wall_time']:.6f}"
        )
    formats.write_text(out / "telemetry.csv", tel)
    means = gibbs.mean_attempts(telemetry, obs.n_intervals)
    log.info("mean attempts per interval: %s", np.array2string(means, precision=1))
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def command_simulate(args) -> int:
    network = load_network(_require_file(args.model, "model"))
    theta = parse_floats(args.theta, network.n_reactions)
    if args.t_end is None or not args.t_end > args.t_start:
        raise ConfigError("t_end must be greater than t_start")
    if args.n_paths < 0:
        raise ConfigError("n_paths must be >= 0")
    if args.init:
        x0 = parse_state(args.init, network)
    elif network.initial_state is not None:
        x0 = network.initial_state
    else:
        raise ConfigError("no initial state: give --init or an 'init:' line in the model")
    if args.n_paths == 0:
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"tool": f"kinbayes {__version__}", "seed": args.seed,
            "theta": ",".join(repr(t) for t in theta)}
    for k in range(args.n_paths):
        stream = rng.make_stream(args.seed, rng.stream_id_for(rng.DOMAIN_MISC, 0, k))
        _, traj = ssa.simulate(network, theta, x0, args.t_start, args.t_end, stream,
                               mode="trajectory", max_events=args.max_events)
        with open(out / f"path_{k}.csv", "w", encoding="utf-8", newline="\n") as fh:
            ssa.write_trajectory(fh, network, traj, meta)
        if args.observe_every:
            grid = np.arange(args.t_start, args.t_end + 1e-9 * args.t_end, args.observe_every)
            states = traj.state_at(network, grid)
            lines = [f"# {k_}: {v}" for k_, v in meta.items()]
            lines.append(",".join(["time"] + list(network.species)))
            for t, x in zip(grid.tolist(), states.tolist()):
                lines.append(",".join([repr(t)] + [str(c) for c in x]))
            formats.write_text(out / f"observations_{k}.csv", lines)
    return EXIT_OK


# -- oracle --------------------------------------------------------------------


def _max_counts(text, network):
    if not text:
        return None
    bounds = [None] * network.n_species
    for part in text.split(","):
        name, _, val = part.partition("=")
        try:
            bounds[network.species_index(name.strip())] = int(val)
        except (ValueError, ContractError):
            raise ConfigError(f"bad bound {part!r}; use NAME=COUNT") from None
    return bounds


def command_oracle(args) -> int:
    network = load_network(_require_file(args.model, "model"))
    theta = parse_floats(args.theta, network.n_reactions)
    x0 = parse_state(args.init, network) if args.init else network.initial_state
    if x0 is None:
        raise ConfigError("no initial state: give --init or an 'init:' line in the model")
    bounds = _max_counts(args.max_count, network)
    if args.t is None or args.t < 0:
        raise ConfigError("--t must be >= 0")
    lines = []
    if args.bridge_at is not None:
        if not args.end:
            raise ConfigError("--bridge-at needs --end")
        x1 = parse_state(args.end, network)
        space, p = cme.bridge_distribution(network, theta, x0, x1, args.t, args.bridge_at,
                                           cap=args.cap, max_counts=bounds)
        lines = cme.format_distribution(space, p)
    elif args.end:
        x1 = parse_state(args.end, network)
        p = cme.endpoint_probability(network, theta, x0, x1, args.t, cap=args.cap, max_counts=bounds)
        lines = [f"{_fmt_state(x1)},{p!r}"]
    else:
        space, p = cme.transient_distribution(network, theta, x0, args.t, cap=args.cap,
                                              max_counts=bounds)
        lines = cme.format_distribution(space, p)
    text = formats.rows_to_text(["state_tuple,probability"] + lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- bench ---------------------------------------------------------------------


def command_bench(args) -> int:
    if args.bench_command == "amdahl":
        try:
            value = bench.amdahl_speedup(args.P, args.C)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
        print(repr(value))
        return EXIT_OK
    network = load_network(_require_file(args.model, "model"))
    theta = parse_floats(args.theta, network.n_reactions)
    values = parse_floats(args.values, None, "values")
    start = parse_state(args.start, network)
    end = parse_state(args.end, network)
    workers = [int(w) for w in args.workers.split(",")]
    spec = bench.SweepSpec(
        network, theta, args.index, values,
        IntervalProblem(start, end, args.t_start, args.t_end),
        replicates=args.replicates, master_seed=args.seed, mode=args.mode,
        timing_repeats=args.timing_repeats,
    )
    rows = bench.run_sweep(spec, workers)
    lines = [f"# tool: kinbayes {__version__}", f"# seed: {args.seed}",
             f"# host_cores: {os.cpu_count()}", f"# mode: {args.mode}"]
    lines += bench.sweep_rows(rows)
    text = formats.rows_to_text(lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- diagnose ------------------------------------------------------------------


def command_diagnose(args) -> int:
    if args.diag_command == "gr":
        tables = [formats.read_posterior(_require_file(p, "chain")) for p in args.chains]
        header = tables[0][0]
        if any(t[0] != header for t in tables):
            raise IngestionError("chain files have different columns")
        n = min(t[1].shape[0] for t in tables)
        lines = ["quantity,rhat"]
        for k, name in enumerate(header):
            if name == "iteration":
                continue
            chains = np.array([t[1][:n, k] for t in tables])
            if np.any(np.isnan(chains)):
                continue
            lines.append(f"{name},{diagnostics.gelman_rubin(chains)!r}")
        sys.stdout.write(formats.rows_to_text(lines))
        return EXIT_OK
    if args.diag_command == "histogram":
        header, data = formats.read_posterior(_require_file(args.posterior, "posterior"))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for k, name in enumerate(header):
            if name == "iteration" or data.shape[0] == 0 or np.any(np.isnan(data[:, k])):
                continue
            rows = ["bin_left,bin_right,count"] + [
                f"{lo!r},{hi!r},{c}" for lo, hi, c in diagnostics.histogram(data[:, k], args.bins)
            ]
            formats.write_text(out / f"hist_{name}.csv", rows)
        return EXIT_OK
    # bands
    network = load_network(_require_file(args.model, "model"))
    obs = formats.load_observations(_require_file(args.data, "data"), network)
    samples = formats.load_samples(_require_file(args.posterior, "posterior"),
                                   _require_file(args.streams, "streams"))
    if args.max_samples and len(samples) > args.max_samples:
        idx = np.linspace(0, len(samples) - 1, args.max_samples).astype(int)
        samples = [samples[i] for i in idx]
    grid = np.arange(obs.times[0], obs.times[-1] + 1e-9, args.grid_step)
    band = diagnostics.trajectory_bands(samples, network, obs, grid, (args.lower, args.upper))
    lines = ["time,species,lower,median,upper"] + diagnostics.band_rows(band)
    formats.write_text(args.out, lines)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kinbayes", description="Bayesian rate inference for stochastic reaction networks."
    )
    p.add_argument("--version", action="version", version=f"kinbayes {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="forward-simulate trajectories")
    s.add_argument("--model", required=True)
    s.add_argument("--theta", required=True, help="comma-separated rates")
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--t-start", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--n-paths", type=int, default=1)
    s.add_argument("--init", help="initial state, e.g. E=120,S=301,ES=0,P=0")
    s.add_argument("--observe-every", type=float, help="also write observations on this grid")
    s.add_argument("--max-events", type=int, default=ssa.DEFAULT_MAX_EVENTS)
    s.add_argument("--out", default="sim")

    i = sub.add_parser("infer", help="run the data-augmentation Gibbs sampler")
    i.add_argument("--config", help="key = value file; flags override it")
    i.add_argument("--model")
    i.add_argument("--data")
    i.add_argument("--prior", help="'improper' or alpha:beta, per reaction or one for all")
    i.add_argument("--theta-init", dest="theta_init")
    i.add_argument("--burn-in", dest="burn_in", type=int)
    i.add_argument("--iterations", type=int)
    i.add_argument("--thin", type=int)
    i.add_argument("--seed", type=int)
    i.add_argument("--workers", type=int)
    i.add_argument("--mode", choices=["deterministic", "fast"])
    i.add_argument("--max-attempts", dest="max_attempts", type=int)
    i.add_argument("--batch-size", dest="batch_size", type=int)
    i.add_argument("--output")

    o = sub.add_parser("oracle", help="exact CME distributions for small systems")
    o.add_argument("--model", required=True)
    o.add_argument("--theta", required=True)
    o.add_argument("--t", type=float, required=True, help="time (or interval length)")
    o.add_argument("--init")
    o.add_argument("--end", help="end state: print its transition probability")
    o.add_argument("--bridge-at", type=float, help="interior time for the bridge law")
    o.add_argument("--max-count", help="truncate the space, e.g. A=20")
    o.add_argument("--cap", type=int, default=cme.DEFAULT_CAP)
    o.add_argument("--out")

    b = sub.add_parser("bench", help="Amdahl bound and acceptance sweeps")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    ba = bsub.add_parser("amdahl")
    ba.add_argument("--P", type=float, required=True)
    ba.add_argument("--C", type=int, required=True)
    bs = bsub.add_parser("sweep")
    bs.add_argument("--model", required=True)
    bs.add_argument("--theta", required=True)
    bs.add_argument("--index", type=int, required=True, help="0-based swept rate")
    bs.add_argument("--values", required=True)
    bs.add_argument("--start", required=True)
    bs.add_argument("--end", required=True)
    bs.add_argument("--t-start", type=float, default=0.0)
    bs.add_argument("--t-end", type=float, required=True)
    bs.add_argument("--replicates", type=int, default=20)
    bs.add_argument("--timing-repeats", type=int, default=5)
    bs.add_argument("--workers", default="8")
    bs.add_argument("--mode", choices=["deterministic", "fast"], default="fast")
    bs.add_argument("--seed", type=int, default=1)
    bs.add_argument("--out")

    d = sub.add_parser("diagnose", help="convergence diagnostics and summaries")
    dsub = d.add_subparsers(dest="diag_command", required=True)
    dg = dsub.add_parser("gr")
    dg.add_argument("chains", nargs="+")
    dh = dsub.add_parser("histogram")
    dh.add_argument("posterior")
    dh.add_argument("--bins", type=int, default=30)
    dh.add_argument("--out", default="histograms")
    db = dsub.add_parser("bands")
    db.add_argument("--model", required=True)
    db.add_argument("--data", required=True)
    db.add_argument("--posterior", required=True)
    db.add_argument("--streams", required=True)
    db.add_argument("--grid-step", type=float, default=1.0)
    db.add_argument("--lower", type=float, default=0.025)
    db.add_argument("--upper", type=float, default=0.975)
    db.add_argument("--max-samples", type=int, default=500)
    db.add_argument("--out", default="bands.csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        if args.command == "infer":
            return command_infer(load_infer_config(args))
        if args.command == "simulate":
            return command_simulate(args)
        if args.command == "oracle":
            return command_oracle(args)
        if args.command == "bench":
            return command_bench(args)
        return command_diagnose(args)
    except KinbayesError as exc:
        code = exit_code_for(exc)
        print(f"kinbayes: error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
