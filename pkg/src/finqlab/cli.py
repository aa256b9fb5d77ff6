"""Command-line pipeline: data generation, training, evaluation, shot-noise
and mitigation experiments, circuit compression, and report emission.

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 non-convergence.
Every command writes a run manifest; ``finqlab replay`` re-runs one.
All randomness flows from ``--seed`` (or the FINQBIT_SEED environment
variable), fanned out internally via numpy SeedSequence spawning.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bsm, compression, experiments, model, plots, training
from .bsm import DatasetFormatError
from .manifest import RunManifest, Timed, load_manifest
from .training import DivergenceError


class NonConvergenceError(RuntimeError):
    """A fit failed to reach its tolerance within budget."""

    def __init__(self, message: str, outputs: list[str] | None = None):
        super().__init__(message)
        self.outputs = outputs or []


DEFAULT_SEED = 0

# per-command config keys holding output paths (used by replay --out-dir)
_OUTPUT_KEYS = {
    "generate": ["out"],
    "train": ["out", "report", "history"],
    "evaluate": ["out"],
    "shots": ["out_dir"],
    "stability": ["out_dir"],
    "converge": ["out_dir"],
    "mitigate": ["out_dir"],
    "compress": ["out_dir"],
    "report": ["out"],
}


def _seed_default() -> int:
    env = os.environ.get("FINQBIT_SEED")
    return int(env) if env else DEFAULT_SEED


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _load_params(path):
    with open(path) as fh:
        return model.load_params(fh.read())


def _points_from_cfg(cfg) -> list[bsm.MarketPoint]:
    return experiments.benchmark_points(
        moneyness=cfg["moneyness"], maturity=cfg["maturity"], rate=cfg["rate"], vol=cfg["vol"]
    )


# ---------------------------------------------------------------- generate


def run_generate(cfg: dict) -> list[str]:
    dataset = bsm.generate_dataset(cfg["n"], cfg["seed"])
    bsm.save_dataset(dataset, cfg["out"])
    return [cfg["out"]]


# ------------------------------------------------------------------- train

_TRAIN_DEFAULTS = {
    "variant": "finqbit",
    "layers": None,
    "learning_rate": 0.05,
    "max_iters": 1000,
    "batch": None,
    "restarts": 5,
    "early_stop_patience": 100,
    "val_fraction": 0.1,
}


def _train_config(cfg: dict) -> training.TrainConfig:
    return training.TrainConfig(
        target=cfg["variant"],
        layers=cfg["layers"],
        learning_rate=cfg["learning_rate"],
        max_iters=cfg["max_iters"],
        batch=cfg["batch"],
        restarts=cfg["restarts"],
        seed=cfg["seed"],
        early_stop_patience=cfg["early_stop_patience"],
    )


def run_train(cfg: dict) -> list[str]:
    dataset = bsm.load_dataset(cfg["train"])
    n_val = max(1, round(cfg["val_fraction"] * len(dataset)))
    # the split stream is kept clear of the restart streams (spawn keys 0..k-1)
    split_rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(1 << 20,)))
    order = split_rng.permutation(len(dataset))
    val_set = dataset.subset(order[:n_val])
    train_set = dataset.subset(order[n_val:])
    report = training.train(_train_config(cfg), train_set, val_set)

    outputs = [cfg["out"]]
    _write(cfg["out"], report.best_params.to_json() + "\n")
    if cfg.get("report"):
        _write(cfg["report"], report.to_json() + "\n")
        outputs.append(cfg["report"])
    if cfg.get("history"):
        _write(cfg["history"], report.history_csv())
        outputs.append(cfg["history"])
    best = report.restarts[report.restart_index]
    print(
        f"trained {cfg['variant']} (restart {report.restart_index}, "
        f"{best.iterations} iters): val MSE {best.best_val_mse:.3e}, "
        f"val R2 {report.final_metrics.r2:.5f}"
    )
    return outputs


# ---------------------------------------------------------------- evaluate


def run_evaluate(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    test = bsm.load_dataset(cfg["test"])
    preds = np.array([model.predict_price(x, params) for x in test.points])
    labels = test.label_vector()
    metrics = experiments.compute_metrics(preds, labels)
    regimes = experiments.regime_breakdown(preds, labels, test.points)
    variant = "finqbit" if isinstance(params, model.FinqbitParams) else params.variant
    payload = {
        "schema_version": 1,
        "variant": variant,
        "L": getattr(params, "L", None),
        "n_test": len(test),
        "metrics": metrics.to_dict(),
        "regimes": regimes.to_dict(),
    }
    _write(cfg["out"], json.dumps(payload, indent=2) + "\n")
    print(f"{'metric':<12}{'value':>12}")
    for key, value in metrics.to_dict().items():
        print(f"{key:<12}{value:>12.5f}")
    for name, value in (("otm", regimes.otm_mse), ("atm", regimes.atm_mse), ("itm", regimes.itm_mse)):
        shown = "absent" if value is None else f"{value:.6f}"
        print(f"{name + '_mse':<12}{shown:>12}")
    return [cfg["out"]]


# ------------------------------------------------------------------- shots


def run_shots(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    points = _points_from_cfg(cfg)
    streams = np.random.SeedSequence(cfg["seed"]).spawn(len(cfg["reps"]) * len(cfg["shots"]))
    grid = []
    k = 0
    for r in cfg["reps"]:
        for n in cfg["shots"]:
            grid.append(
                experiments.ShotGridConfig(
                    repetitions=r, shots=n, points=points, seed=streams[k].generate_state(1)[0]
                )
            )
            k += 1
    stats = experiments.run_shot_grid(params, grid)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "shot_grid.json", experiments.shot_grid_json(stats))
    _write(out_dir / "shot_grid.csv", experiments.shot_grid_csv(stats))
    for s in stats:
        print(
            f"R={s.repetitions:<4} N={s.shots:<6} MAE={s.mae:.4f} "
            f"std={s.std_dev:.4f} max={s.max_error:.4f} R2={s.r2:.3f}"
        )
    return [str(out_dir / "shot_grid.json"), str(out_dir / "shot_grid.csv")]


# --------------------------------------------------------------- stability


def _noise_channel(name: str) -> experiments.AssignmentMatrix | None:
    if name == "none":
        return None
    if name == "ankaa3":
        return experiments.RIGETTI_ANKAA3
    raise ValueError(f"unknown noise channel {name!r} (choose none|ankaa3)")


def run_stability(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    points = _points_from_cfg(cfg)
    track = experiments.stability_track(
        params,
        points,
        R=cfg["reps"],
        N=cfg["shots"],
        noise=_noise_channel(cfg["noise"]),
        seed=cfg["seed"],
    )
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "stability.csv", track.to_csv())
    _write(out_dir / "stability.json", track.to_json() + "\n")
    return [str(out_dir / "stability.csv"), str(out_dir / "stability.json")]


# ---------------------------------------------------------------- converge


def run_converge(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    point = bsm.MarketPoint(m=cfg["m"], T=cfg["maturity"], r=cfg["rate"], sigma=cfg["vol"])
    stats = experiments.convergence_analysis(
        params, point, shot_ladder=cfg["ladder"], R=cfg["reps"], seed=cfg["seed"]
    )
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "convergence.csv", stats.to_csv())
    for n, mu, sd in zip(stats.shots, stats.means, stats.stds):
        print(f"N={n:<6} mean={mu:.5f} std={sd:.5f}")
    return [str(out_dir / "convergence.csv")]


# ---------------------------------------------------------------- mitigate


def run_mitigate(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    points = _points_from_cfg(cfg)
    study = experiments.mitigation_study(params, points, experiments.RIGETTI_ANKAA3)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": 1, **study.to_dict()}
    _write(out_dir / "mitigation.json", json.dumps(payload, indent=2) + "\n")
    print(
        f"corrupted MSE {study.mse('corrupted'):.6f} -> mitigated {study.mse('mitigated'):.6f} "
        f"({study.improvement_pct():+.1f}% change in error)"
    )
    return [str(out_dir / "mitigation.json")]


# ---------------------------------------------------------------- compress


def run_compress(cfg: dict) -> list[str]:
    params = _load_params(cfg["params"])
    if not isinstance(params, model.FinqbitParams):
        raise ValueError("compression targets the 2-qubit model")
    points = _points_from_cfg(cfg)
    suite = compression.compress_benchmark_suite(
        params, points, seed=cfg["seed"], tol=cfg["tol"]
    )
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    rows = []
    from .simulator import expectation_z, run_circuit, to_qasm

    for point, (circuit, result) in zip(points, suite):
        qasm_path = out_dir / f"compressed_m{point.m:g}.qasm"
        _write(qasm_path, to_qasm(circuit))
        outputs.append(str(qasm_path))
        z_orig = model.raw_expectation(point, params)
        z_comp = expectation_z(run_circuit(circuit), 0)
        rows.append(
            {
                "m": point.m,
                "distance": result.distance,
                "iterations": result.iterations,
                "converged": result.converged,
                "cnot_count": circuit.cnot_count(),
                "z_original": z_orig,
                "z_compressed": z_comp,
                "angles": result.angles.angles.tolist(),
                "qasm": qasm_path.name,
            }
        )
        print(
            f"m={point.m:g}: distance={result.distance:.2e} iters={result.iterations} "
            f"|dz|={abs(z_orig - z_comp):.2e}"
        )
    _write(out_dir / "compression.json", json.dumps({"schema_version": 1, "points": rows}, indent=2) + "\n")
    outputs.append(str(out_dir / "compression.json"))
    if not all(r["converged"] for r in rows):
        raise NonConvergenceError("one or more compression fits missed tolerance", outputs)
    return outputs


# ------------------------------------------------------------------ report


def _fmt_cell(value, spec=".5f") -> str:
    if value is None:
        return "not run"
    return format(value, spec)


def _metrics_row(name: str, m: dict) -> str:
    return (
        f"| {name} | {_fmt_cell(m.get('mse'))} | {_fmt_cell(m.get('rmse'))} "
        f"| {_fmt_cell(m.get('mae'))} | {_fmt_cell(m.get('r2'))} |"
    )


def run_report(cfg: dict) -> list[str]:
    run_dir = Path(cfg["run_dir"])
    out_path = Path(cfg["out"])
    fig_dir = out_path.parent / "figures"
    tables_dir = out_path.parent / "tables"
    fig_dir.mkdir(parents=True, exist_ok=True)
    tables_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = [str(out_path)]
    lines = ["# Pricing-circuit experiment report", ""]

    def read_json(path):
        if not path.exists():
            return None
        with open(path) as fh:
            return json.load(fh)

    def discover(pattern):
        return sorted(p for p in run_dir.glob(pattern) if not p.name.endswith(".manifest.json"))

    evals = discover("eval_*.json")
    lines.append("## Global test-set metrics")
    lines.append("")
    lines.append("| model | MSE | RMSE | MAE | R2 |")
    lines.append("|---|---|---|---|---|")
    eval_rows = []
    for path in evals:
        obj = read_json(path)
        label = obj["variant"] + (f" (L={obj['L']})" if obj.get("L") else "")
        lines.append(_metrics_row(label, obj["metrics"]))
        eval_rows.append((label, obj))
    xgb = experiments.XGBOOST_REFERENCE
    lines.append(_metrics_row("XGBoost (external reference)", xgb["global"]))
    if not evals:
        lines.append("| (no eval results) | not run | not run | not run | not run |")
    lines.append("")

    lines.append("## Moneyness-regime MSE")
    lines.append("")
    lines.append("| model | OTM (m<0.95) | ATM | ITM (m>1.05) |")
    lines.append("|---|---|---|---|")
    for label, obj in eval_rows:
        reg = obj["regimes"]
        lines.append(
            f"| {label} | {_fmt_cell(reg['otm_mse'], '.6f')} "
            f"| {_fmt_cell(reg['atm_mse'], '.6f')} | {_fmt_cell(reg['itm_mse'], '.6f')} |"
        )
    ref = xgb["regimes"]
    lines.append(
        f"| XGBoost (external reference) | {ref['otm']:.6f} | {ref['atm']:.6f} | {ref['itm']:.6f} |"
    )
    if not eval_rows:
        lines.append("| (no eval results) | not run | not run | not run |")
    lines.append("")

    lines.append("## Shot-noise grid")
    lines.append("")
    grid = read_json(run_dir / "shot_grid.json")
    if grid:
        lines.append("| R | shots | MAE | Std. Dev | Max Error | R2 |")
        lines.append("|---|---|---|---|---|---|")
        for c in grid["cells"]:
            lines.append(
                f"| {c['repetitions']} | {c['shots']} | {c['mae']:.4f} | {c['std_dev']:.4f} "
                f"| {c['max_error']:.4f} | {c['r2']:.3f} |"
            )
        stats = [
            experiments.ExperimentStats(
                repetitions=c["repetitions"], shots=c["shots"], mae=c["mae"],
                std_dev=c["std_dev"], max_error=c["max_error"], r2=c["r2"],
            )
            for c in grid["cells"]
        ]
        plots.shot_noise(stats, fig_dir / "shot_noise.png")
        outputs.append(str(fig_dir / "shot_noise.png"))
        _write(tables_dir / "shot_grid.csv", experiments.shot_grid_csv(stats))
        outputs.append(str(tables_dir / "shot_grid.csv"))
    else:
        lines.append("not run")
    lines.append("")

    lines.append("## Readout-error mitigation")
    lines.append("")
    mit = read_json(run_dir / "mitigation.json")
    if mit:
        lines.append("| quantity | corrupted | mitigated |")
        lines.append("|---|---|---|")
        lines.append(f"| price MSE vs BSM | {mit['mse_corrupted']:.6f} | {mit['mse_mitigated']:.6f} |")
        lines.append(f"| error change from mitigation: {mit['improvement_pct']:+.1f}% | | |")
    else:
        lines.append("not run")
    lines.append("")

    lines.append("## Circuit compression (8 CNOT -> 3 CNOT)")
    lines.append("")
    comp = read_json(run_dir / "compression.json")
    if comp:
        lines.append("| m | distance | iterations | CNOTs | |z_orig - z_comp| |")
        lines.append("|---|---|---|---|---|")
        for row in comp["points"]:
            dz = abs(row["z_original"] - row["z_compressed"])
            lines.append(
                f"| {row['m']:g} | {row['distance']:.2e} | {row['iterations']} "
                f"| {row['cnot_count']} | {dz:.2e} |"
            )
    else:
        lines.append("not run")
    lines.append("")

    lines.append("## Benchmark-point valuation")
    lines.append("")
    params_files = discover("params*.json")
    if params_files:
        params = _load_params(params_files[0])
        points = experiments.benchmark_points()
        preds = [model.predict_price(x, params) for x in points]
        lines.append("| m | BSM | model | bias |")
        lines.append("|---|---|---|---|")
        for x, pred in zip(points, preds):
            truth = bsm.bsm_price(x).c_hat
            lines.append(f"| {x.m:g} | {truth:.4f} | {pred:.4f} | {pred - truth:+.4f} |")
        plots.price_curve(points, preds, fig_dir / "price_curve.png")
        outputs.append(str(fig_dir / "price_curve.png"))
    else:
        lines.append("not run")
    lines.append("")

    history_files = discover("history*.csv")
    if history_files:
        rows = []
        with open(history_files[0]) as fh:
            next(fh)
            for line in fh:
                i, t, v = line.strip().split(",")
                rows.append((int(i), float(t), float(v)))
        plots.loss_history(rows, fig_dir / "loss_history.png")
        outputs.append(str(fig_dir / "loss_history.png"))

    stability_path = run_dir / "stability.csv"
    if stability_path.exists():
        by_m: dict[float, list[float]] = {}
        with open(stability_path) as fh:
            next(fh)
            for line in fh:
                m, rep, price = line.strip().split(",")
                by_m.setdefault(float(m), []).append(float(price))
        # the manifest carries the non-moneyness point coordinates
        stab_manifest = read_json(run_dir / "manifest_stability.json")
        pt_cfg = (stab_manifest or {}).get("config", {})
        points = [
            bsm.MarketPoint(
                m=m,
                T=pt_cfg.get("maturity", 1.0),
                r=pt_cfg.get("rate", 0.05),
                sigma=pt_cfg.get("vol", 0.2),
            )
            for m in sorted(by_m)
        ]
        series = np.array([by_m[p.m] for p in points]).T
        track = experiments.StabilityTrack(points=points, series=series, shots=None, noise_applied=False)
        plots.stability(track, fig_dir / "stability.png")
        outputs.append(str(fig_dir / "stability.png"))

    conv_path = run_dir / "convergence.csv"
    if conv_path.exists():
        shots, means, stds = [], [], []
        with open(conv_path) as fh:
            next(fh)
            for line in fh:
                n, mu, sd = line.strip().split(",")
                shots.append(int(n)); means.append(float(mu)); stds.append(float(sd))
        stats = experiments.ConvergenceStats(
            point=bsm.MarketPoint(m=1.0, T=1.0, r=0.05, sigma=0.2),
            shots=shots, means=means, stds=stds,
        )
        plots.convergence(stats, fig_dir / "convergence.png")
        outputs.append(str(fig_dir / "convergence.png"))

    lines.append("Figures are written beside this file under `figures/`.")
    lines.append("")
    _write(out_path, "\n".join(lines))
    print(f"report written to {out_path}")
    return outputs


# ------------------------------------------------------------------ replay


def run_replay(cfg: dict) -> list[str]:
    manifest = load_manifest(cfg["manifest"])
    command = manifest.command
    if command not in _RUNNERS:
        raise ValueError(f"manifest names unknown command {command!r}")
    replay_cfg = dict(manifest.config)
    if cfg.get("out_dir"):
        base = Path(cfg["out_dir"])
        base.mkdir(parents=True, exist_ok=True)
        for key in _OUTPUT_KEYS.get(command, []):
            if replay_cfg.get(key):
                replay_cfg[key] = str(base / Path(replay_cfg[key]).name)
    outputs = _RUNNERS[command](replay_cfg)
    _write_manifest(command, replay_cfg, outputs, duration=0.0)
    return outputs


# ------------------------------------------------------------- entry point

_RUNNERS = {
    "generate": run_generate,
    "train": run_train,
    "evaluate": run_evaluate,
    "shots": run_shots,
    "stability": run_stability,
    "converge": run_converge,
    "mitigate": run_mitigate,
    "compress": run_compress,
    "report": run_report,
}

_INPUT_KEYS = {
    "train": ["train", "config"],
    "evaluate": ["params", "test"],
    "shots": ["params"],
    "stability": ["params"],
    "converge": ["params"],
    "mitigate": ["params"],
    "compress": ["params"],
    "report": ["run_dir"],
    "replay": ["manifest"],
}


def _manifest_path(command: str, cfg: dict) -> Path:
    if "out_dir" in cfg and cfg.get("out_dir"):
        return Path(cfg["out_dir"]) / f"manifest_{command}.json"
    primary = Path(cfg["out"])
    return primary.with_name(primary.name + ".manifest.json")


def _write_manifest(command: str, cfg: dict, outputs: list[str], duration: float) -> None:
    path = _manifest_path(command, cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    inputs = [cfg[k] for k in _INPUT_KEYS.get(command, []) if cfg.get(k)]
    RunManifest(
        command=command,
        config=cfg,
        seed=cfg.get("seed"),
        inputs=[str(p) for p in inputs],
        outputs=outputs,
        duration_s=round(duration, 6),
    ).write(path)


def _merge_train_config(args) -> dict:
    cfg = dict(_TRAIN_DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(_TRAIN_DEFAULTS) - {"seed"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in _TRAIN_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", _seed_default())
    cfg.update(
        {
            "train": args.train,
            "config": args.config,
            "out": args.out,
            "report": args.report,
            "history": args.history,
            "jobs": args.jobs,
        }
    )
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finqlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--jobs", type=int, default=1, help="worker cap (runs are sequential)")

    p = sub.add_parser("generate", help="generate a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("train", help="train a variant against a dataset")
    p.add_argument("--variant", choices=model.VARIANTS, default=None)
    p.add_argument("--L", dest="layers", type=int, default=None, help="layer count for 4-qubit variants")
    p.add_argument("--train", required=True, help="training dataset CSV")
    p.add_argument("--config", default=None, help="JSON config file (flags override it)")
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--iters", dest="max_iters", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--patience", dest="early_stop_patience", type=int, default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.add_argument("--out", required=True, help="output params JSON")
    p.add_argument("--report", default=None, help="output training report JSON")
    p.add_argument("--history", default=None, help="output loss-history CSV")
    add_common(p)

    p = sub.add_parser("evaluate", help="metrics + regime breakdown on a test set")
    p.add_argument("--params", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    add_common(p)

    def add_points(p):
        p.add_argument("--moneyness", type=_parse_floats, default=[0.8, 0.9, 1.0, 1.1, 1.2])
        p.add_argument("--maturity", type=float, default=1.0)
        p.add_argument("--rate", type=float, default=0.05)
        p.add_argument("--vol", type=float, default=0.2)

    p = sub.add_parser("shots", help="shot-noise grid over (R, N_shots)")
    p.add_argument("--params", required=True)
    p.add_argument("--reps", type=_parse_ints, default=[20, 50])
    p.add_argument("--shots", type=_parse_ints, default=[500, 2000, 5000])
    add_points(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common(p)

    p = sub.add_parser("stability", help="repetition-stability track")
    p.add_argument("--params", required=True)
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--shots", type=int, default=5000)
    p.add_argument("--noise", choices=["none", "ankaa3"], default="none")
    add_points(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common(p)

    p = sub.add_parser("converge", help="estimator convergence over a shot ladder")
    p.add_argument("--params", required=True)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--ladder", type=_parse_ints, default=[500, 2000, 5000])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--vol", type=float, default=0.2)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common(p)

    p = sub.add_parser("mitigate", help="forward-corrupt and mitigate readout errors")
    p.add_argument("--params", required=True)
    add_points(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common(p)

    p = sub.add_parser("compress", help="fit 3-CNOT blocks at the benchmark points")
    p.add_argument("--params", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    add_points(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common(p)

    p = sub.add_parser("report", help="consolidated markdown report with figures")
    p.add_argument("--run-dir", dest="run_dir", required=True)
    p.add_argument("--out", default=None, help="report path (default <run-dir>/report.md)")
    add_common(p, seed=False)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", dest="out_dir", default=None, help="rebase outputs into this directory")
    add_common(p, seed=False)

    return parser


def _config_from_args(command: str, args) -> dict:
    if command == "train":
        return _merge_train_config(args)
    cfg = {k: v for k, v in vars(args).items() if k not in ("command", "func")}
    if "seed" in cfg and cfg["seed"] is None:
        cfg["seed"] = _seed_default()
    if command == "report" and not cfg.get("out"):
        cfg["out"] = str(Path(cfg["run_dir"]) / "report.md")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = _config_from_args(command, args)
        if command == "replay":
            run_replay(cfg)
            return 0
        with Timed() as timer:
            outputs = _RUNNERS[command](cfg)
        _write_manifest(command, cfg, outputs, timer.duration)
        return 0
    except (DatasetFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        # partial results were written; record them before signalling failure
        _write_manifest(command, cfg, exc.outputs, 0.0)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
