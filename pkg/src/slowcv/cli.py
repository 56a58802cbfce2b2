"""Config-driven experiment runner.

Usage::

    python -m slowcv simulate --config cfg.json --out runs/data
    python -m slowcv train    --config cfg.json --out runs/ae
    python -m slowcv oracle   --config cfg.json --out runs/fd
    python -m slowcv mep      --config cfg.json --out runs/path
    python -m slowcv evaluate --config cfg.json --out runs/eval
    python -m slowcv reproduce example1-ae --out runs/ex1-ae

Exit codes: 0 on success, 2 on a configuration error, 3 on a numerical failure.

Every artifact except ``run.log`` is a deterministic function of the
config, so two runs of the same config give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import oracle as orc
from .config import BUILTIN, ExperimentConfig, builtin_config, load_config, parse_config
from .errors import ConfigError, NumericalError, SlowCVError
from .mep import string_method
from .net import MlpSpec, load_model, save_model
from .potentials import default_domain, eval_potential
from .sampler import Dataset, lag_for, lagged_pairs, load_dataset, save_dataset, simulate, subsample
from .training import (
    TrainConfig,
    eigenvalue_estimate,
    export_decoder_curve,
    export_grid,
    train_autoencoder,
    train_eigenfunctions,
)

log = logging.getLogger("slowcv")

VERB_TASKS = {
    "train": ("train_ae", "train_tlae", "train_eigen_transfer", "train_eigen_generator"),
    "oracle": ("oracle_report",),
    "mep": ("mep",),
    "evaluate": ("evaluate",),
}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    t = cfg.training
    return TrainConfig(t.lr, t.batch_size, t.epochs, t.seed, t.alpha, tuple(t.omegas), t.k, t.var_guard)


def sample_dataset(cfg: ExperimentConfig) -> Dataset:
    s = cfg.sampling
    log.info("simulating %d steps of %s (beta=%g, seed=%d)", s.n_steps, cfg.potential.kind, cfg.thermo.beta, s.seed)
    traj = simulate(cfg.potential, cfg.thermo, s.x0, s.dt, s.n_steps, s.seed)
    return subsample(traj, s.stride, include_initial=False)


def _lag(cfg: ExperimentConfig, d: Dataset) -> int:
    t = cfg.training
    if t.lag is not None:
        return t.lag
    return lag_for(d, t.tau or 0.0)


def _export_bounds(cfg: ExperimentConfig):
    return cfg.export.bounds or default_domain(cfg.potential)


def _progress(every: int):
    def report(rec):
        if rec["epoch"] % every == 0:
            log.info("epoch %d  loss %.6g", rec["epoch"], rec["loss"])
    return report


def _fd_reference(cfg: ExperimentConfig) -> dict:
    _, _, res = orc.generator_spectrum(cfg.potential, cfg.thermo, cfg.oracle.resolution, max(2, cfg.oracle.n_eigs),
                                       cfg.oracle.bounds)
    return {"lambda": [float(v) for v in res.values], "resolution": list(cfg.oracle.resolution)}


def _eigen_summary(cfg, models, d, pairs, beta):
    est = eigenvalue_estimate(models, d, pairs, beta, cfg.training.var_guard)
    out = {"estimates": est}
    if cfg.export.fd_check:
        ref = _fd_reference(cfg)
        out["fd"] = ref
        lam = ref["lambda"][1:1 + len(models)]
        if pairs is not None:
            out["fd"]["nu"] = [float(np.exp(-pairs.tau * v)) for v in lam]
    return out


def _run_train(cfg: ExperimentConfig, out: Path) -> dict:
    d = sample_dataset(cfg)
    save_dataset(d, out / "dataset.csv")
    tc = _train_config(cfg)
    arch = cfg.architecture
    bounds = _export_bounds(cfg)
    progress = _progress(max(1, tc.epochs // 10))
    summary = {"task": cfg.task, "n_points": len(d)}
    if cfg.task in ("train_ae", "train_tlae"):
        enc_spec, dec_spec = MlpSpec(arch.encoder), MlpSpec(arch.decoder)
        if cfg.task == "train_tlae":
            pairs = lagged_pairs(d, _lag(cfg, d))
            data = pairs
            summary.update(lag=pairs.lag_steps, tau=pairs.tau)
        else:
            data = d
        result = train_autoencoder(data, enc_spec, dec_spec, tc, progress)
        enc, dec = result.models
        save_model(enc, out / "encoder.json")
        save_model(dec, out / "decoder.json")
        export_grid(enc.forward, bounds, cfg.export.resolution, out / "encoder_grid.csv")
        export_decoder_curve(enc, dec, d, out / "decoder_curve.csv")
        _, residual, _ = orc.pca(d, 1)
        summary.update(final_loss=result.history[-1]["loss"], pca_residual_per_point=residual / len(d))
        if cfg.task == "train_tlae":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cm = orc.conditional_moments(data, enc)
            dev = np.linalg.norm(dec.forward(cm.z_center[:, None]) - cm.mean_y, axis=1)
            summary["conditional_max_deviation"] = float(dev.max())
    else:
        spec = MlpSpec(arch.eigen)
        if cfg.task == "train_eigen_transfer":
            pairs = lagged_pairs(d, _lag(cfg, d))
            result = train_eigenfunctions(pairs, spec, tc, "transfer", cfg.thermo.beta, progress)
            summary.update(lag=pairs.lag_steps, tau=pairs.tau)
            summary.update(_eigen_summary(cfg, result.models, pairs.x, pairs, None))
        else:
            result = train_eigenfunctions(d, spec, tc, "generator", cfg.thermo.beta, progress)
            summary.update(_eigen_summary(cfg, result.models, d, None, cfg.thermo.beta))
        for i, m in enumerate(result.models, start=1):
            save_model(m, out / f"f{i}.json")
            export_grid(m.forward, bounds, cfg.export.resolution, out / f"f{i}_grid.csv")
        summary["final_loss"] = result.history[-1]["loss"]
    write_json(out / "metrics.json", result.history)
    return summary


def _run_oracle(cfg: ExperimentConfig, out: Path) -> dict:
    o = cfg.oracle
    g, op, res = orc.generator_spectrum(cfg.potential, cfg.thermo, o.resolution, o.n_eigs, o.bounds)
    res.save(out / "fd_eigen")
    summary = {"task": cfg.task, "fd_lambda": [float(v) for v in res.values]}
    summary["resolution_change"] = orc.resolution_check(cfg.potential, cfg.thermo, o.resolution, o.bounds)
    if o.ulam_bins is not None:
        d = sample_dataset(cfg)
        pairs = lagged_pairs(d, max(1, _lag(cfg, d)))
        bins = orc.BinSpec(o.bounds or default_domain(cfg.potential), *o.ulam_bins)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u = orc.ulam_transfer(pairs, bins)
        u.save(out / "ulam")
        ev = u.eigs(min(o.n_eigs, u.n_states))
        summary["ulam"] = {"tau": pairs.tau, "nu": [float(v) for v in ev.values],
                           "fd_nu": [float(np.exp(-pairs.tau * v)) for v in res.values]}
    return summary


def _run_mep(cfg: ExperimentConfig, out: Path) -> dict:
    m = cfg.mep
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = string_method(cfg.potential, m.a, m.b, m.M, m.step, m.max_iters, m.tol)
    for w in caught:
        log.warning("%s", w.message)
    path.save(out / "path.csv")
    energies = eval_potential(cfg.potential, path.nodes)
    return {"task": cfg.task, "converged": path.converged, "iterations": path.iterations,
            "max_energy": float(energies.max()), "saddle_node": path.nodes[int(np.argmax(energies))].tolist()}


def _run_evaluate(cfg: ExperimentConfig, out: Path) -> dict:
    src = Path(cfg.evaluate.run_dir)
    if not (src / "config.json").exists():
        raise ConfigError(f"{src} is not a run directory (config.json missing)")
    run_cfg = parse_config(json.loads((src / "config.json").read_text()))
    d = load_dataset(src / "dataset.csv")
    summary = {"task": cfg.task, "run_dir": str(src), "run_task": run_cfg.task}
    # physics from the evaluated run, reference settings from this config
    ref_cfg = replace(run_cfg, oracle=cfg.oracle, export=cfg.export)
    if run_cfg.task.startswith("train_eigen"):
        models = [load_model(p) for p in sorted(src.glob("f*.json"), key=lambda p: int(p.stem[1:]))]
        if run_cfg.task == "train_eigen_transfer":
            pairs = lagged_pairs(d, _lag(run_cfg, d))
            summary.update(_eigen_summary(ref_cfg, models, pairs.x, pairs, None))
        else:
            summary.update(_eigen_summary(ref_cfg, models, d, None, run_cfg.thermo.beta))
    elif run_cfg.task in ("train_ae", "train_tlae"):
        enc, dec = load_model(src / "encoder.json"), load_model(src / "decoder.json")
        rec = dec.forward(enc.forward(d.points))
        _, residual, _ = orc.pca(d, 1)
        curve = export_decoder_curve(enc, dec, d, out / "decoder_curve.csv")
        summary.update(reconstruction=float(np.mean(np.sum((rec - d.points) ** 2, axis=1))),
                       pca_residual_per_point=residual / len(d),
                       decoder_curve_ends=[curve[0, 1:].tolist(), curve[-1, 1:].tolist()])
    else:
        raise ConfigError(f"cannot evaluate a {run_cfg.task!r} run")
    return summary


def run(cfg: ExperimentConfig, out, *, verb: str | None = None, quiet: bool = True) -> Path:
    """Execute one experiment and write its artifacts into ``out``.

    Artifacts: ``config.json`` (the config as given), ``summary.json``,
    ``run.log`` and, depending on the task, ``dataset.csv`` (+ ``.json``),
    ``metrics.json``, model checkpoints and grid CSVs.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.raw)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    console = None if quiet else logging.StreamHandler(sys.stderr)
    log.addHandler(handler)
    if console is not None:
        console.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(console)
    log.setLevel(logging.INFO)
    start = time.perf_counter()
    try:
        log.info("%s: task %s -> %s", verb or "run", cfg.task, out)
        if verb == "simulate":
            d = sample_dataset(cfg)
            save_dataset(d, out / "dataset.csv")
            summary = {"task": "simulate", "n_points": len(d)}
        elif cfg.task.startswith("train_"):
            summary = _run_train(cfg, out)
        elif cfg.task == "oracle_report":
            summary = _run_oracle(cfg, out)
        elif cfg.task == "mep":
            summary = _run_mep(cfg, out)
        else:
            summary = _run_evaluate(cfg, out)
        write_json(out / "summary.json", summary)
        log.info("done in %.1f s", time.perf_counter() - start)
    except Exception as exc:
        log.error("failed: %s", exc)
        raise
    finally:
        log.removeHandler(handler)
        handler.close()
        if console is not None:
            log.removeHandler(console)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowcv", description="Collective-variable experiments on 2D potentials.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("simulate", "train", "oracle", "mep", "evaluate"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="artifact directory (overrides the config's 'out')")
        sp.add_argument("--quiet", action="store_true", help="no progress output")
    sp = sub.add_parser("reproduce", help="run a bundled reproduction config")
    sp.add_argument("name", choices=sorted(BUILTIN))
    sp.add_argument("--out", help="artifact directory (default runs/<name>)")
    sp.add_argument("--quiet", action="store_true")
    return ap


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    if args.verb == "reproduce":
        cfg = parse_config(builtin_config(args.name))
        return cfg, Path(args.out or Path("runs") / args.name)
    cfg = load_config(args.config)
    allowed = VERB_TASKS.get(args.verb)
    if allowed is not None and cfg.task not in allowed:
        raise ConfigError(f"verb {args.verb!r} cannot run task {cfg.task!r}")
    out = args.out or cfg.out
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    return cfg, Path(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _resolve(args)
        run(cfg, out, verb=args.verb, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SlowCVError as exc:
        # value errors raised by a module (lag too large, too few samples, ...)
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
