"""Command-line entry point: ``dropoutts {synth,train,eval,ablate,analyze,paradox}``.

Settings resolve in three layers: built-in defaults, then the JSON file given
by ``--config``, then explicit flags. The resolved tree is hashed and the hash
is written into every output. Outputs go to ``--out``, or to
``$DROPOUTTS_OUT/<command>`` (default root ``./dropoutts_out``).

Only the stdlib is imported at module level so ``--threads`` can set the BLAS
thread variables before numpy loads.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

SCHEMA = "dropoutts.{}/1"
LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)
ENV_OUT = "DROPOUTTS_OUT"

DEFAULTS = {
    "seed": 0,
    "data": {"T": 5000, "C": 7, "L": 96, "H": 24, "stride": 2, "eval_stride": 4,
             "ratios": [0.7, 0.1, 0.2], "per_channel": True},
    "train": {"epochs": 60, "batch_size": 32, "learning_rate": 1e-3, "hidden": 256, "patience": 10,
              "mode": "adaptive", "p": 0.1, "gamma": 1.0, "alpha": 10.0, "w_s": 1.0, "b_s": 0.0,
              "p_min": 0.05, "p_max": 0.5, "detrend": "global_ols", "lognorm": True, "use_sfm": True},
    "synth": {"levels": [0.5], "T": 33600, "C": 7},
    "sweep": {"levels": list(LEVELS), "seeds": 5, "data_seed": 0},
    "analyze": {"keep": [0.01, 0.05, 0.10, 0.25, 1.0], "signal_fraction": 0.10, "T": 33600},
}


class CliError(Exception):
    pass


# -- config ------------------------------------------------------------------

def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for k, v in override.items():
        where = f"{path}{k}"
        if k not in base:
            raise CliError(f"unknown config key {where!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise CliError(f"config key {where!r} must be an object")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read config {path}: {e.strerror}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return cfg


def _flag_overrides(args) -> dict:
    """Explicit flags as a partial config tree (``None`` means not given)."""
    ov: dict = {"data": {}, "train": {}, "synth": {}, "sweep": {}, "analyze": {}}
    if args.seed is not None:
        ov["seed"] = args.seed
    for name, section, key in (
        ("T", "data", "T"), ("L", "data", "L"), ("H", "data", "H"), ("stride", "data", "stride"),
        ("epochs", "train", "epochs"), ("hidden", "train", "hidden"), ("lr", "train", "learning_rate"),
        ("batch_size", "train", "batch_size"), ("patience", "train", "patience"),
        ("mode", "train", "mode"), ("p", "train", "p"), ("gamma", "train", "gamma"),
        ("detrend", "train", "detrend"), ("seeds", "sweep", "seeds"), ("data_seed", "sweep", "data_seed"),
    ):
        v = getattr(args, name, None)
        if v is not None and not (name == "T" and args.command in ("synth", "analyze")):
            ov[section][key] = v
    sig = getattr(args, "sigma", None)
    if sig:
        key = "synth" if args.command == "synth" else "sweep"
        ov[key]["levels"] = sig
    if args.command in ("synth", "analyze") and getattr(args, "T", None) is not None:
        ov[args.command]["T"] = args.T
    if args.command == "synth" and args.C is not None:
        ov["synth"]["C"] = args.C
    return {k: v for k, v in ov.items() if v != {}}


def resolve_config(args) -> dict:
    cfg = _merge(DEFAULTS, _load_config(args.config))
    cfg = _merge(cfg, _flag_overrides(args))
    _validate(cfg, args.command)
    return cfg


def _positive_int(v, name):
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise CliError(f"{name} must be a positive integer, got {v!r}")


def _check_level(v):
    if not any(abs(float(v) - lv) < 1e-9 for lv in LEVELS):
        raise CliError(f"sigma level {v} is not one of {', '.join(map(str, LEVELS))}")


def _validate(cfg: dict, command: str):
    d, t = cfg["data"], cfg["train"]
    for k in ("T", "C", "L", "H", "stride", "eval_stride"):
        _positive_int(d[k], f"data.{k}")
    for k in ("epochs", "batch_size", "hidden", "patience"):
        _positive_int(t[k], f"train.{k}")
    _positive_int(cfg["sweep"]["seeds"], "sweep.seeds")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise CliError(f"seed must be a non-negative integer, got {cfg['seed']!r}")
    if not t["learning_rate"] > 0:
        raise CliError("train.learning_rate must be > 0")
    if t["mode"] not in ("none", "fixed", "adaptive"):
        raise CliError(f"train.mode must be none, fixed or adaptive, got {t['mode']!r}")
    if not 0.0 <= t["p"] < 1.0:
        raise CliError(f"dropout rate p must lie in [0, 1), got {t['p']}")
    if not 0.0 <= t["p_min"] < t["p_max"] < 1.0:
        raise CliError("need 0 <= p_min < p_max < 1")
    if t["detrend"] not in ("global_ols", "end_to_end", "none"):
        raise CliError(f"train.detrend must be global_ols, end_to_end or none, got {t['detrend']!r}")
    _positive_int(cfg["synth"]["T"], "synth.T")
    _positive_int(cfg["synth"]["C"], "synth.C")
    _positive_int(cfg["analyze"]["T"], "analyze.T")
    for lv in cfg["synth"]["levels"] + cfg["sweep"]["levels"]:
        _check_level(lv)
    for k in cfg["analyze"]["keep"]:
        if not 0.0 < k <= 1.0:
            raise CliError(f"keep fractions must lie in (0, 1], got {k}")


def config_hash(tree) -> str:
    text = json.dumps(tree, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# -- output helpers ------------------------------------------------------------

def _out_dir(args) -> Path:
    if args.out is not None:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(ENV_OUT, "dropoutts_out")) / args.command
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"cannot create output directory {out}: {e.strerror}") from e
    return out


def _write(path: Path, data: bytes):
    try:
        path.write_bytes(data)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror}") from e


def write_json(path: Path, kind: str, chash: str, payload: dict):
    doc = {"schema": SCHEMA.format(kind), "config_hash": chash, **payload}
    _write(path, (json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8"))


def write_table(path: Path, header, rows, chash: str):
    """RFC-4180 CSV with a trailing ``config_hash`` column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(list(header) + ["config_hash"])
    for r in rows:
        w.writerow([_cell(v) for v in r] + [chash])
    _write(path, buf.getvalue().encode("utf-8"))


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return v


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def write_manifest(out: Path, command: str, cfg: dict, chash: str, files):
    write_json(out / "manifest.json", "manifest", chash, {
        "command": command,
        "config": cfg,
        "files": {f: _file_digest(out / f) for f in sorted(files)},
    })


def _levels_tag(level: float) -> str:
    return f"sigma_{level:g}"


# -- commands ------------------------------------------------------------------

def cmd_synth(args, cfg, chash, out):
    from .synth import build_synth12

    s = cfg["synth"]
    levels = [float(v) for v in s["levels"]]
    written = []
    for lv in levels:
        target = out if len(levels) == 1 else out / _levels_tag(lv)
        ds = build_synth12(cfg["seed"], lv, T=s["T"], C=s["C"])
        try:
            prov = ds.write(target)
        except OSError as e:
            raise CliError(f"cannot write dataset to {target}: {e.strerror}") from e
        write_json(target / "stats.json", "synth", chash, {"sigma": lv, **prov})
        write_manifest(target, "synth", cfg, chash, ["clean.csv", "noisy.csv", "mask.csv", "stats.json"])
        written.append((lv, prov["stats"]["snr_db"]))
    for lv, snr in written:
        print(f"sigma {lv:g}: snr {snr:.2f} dB")


def _train_config(cfg, mode=None):
    from .forecaster import TrainConfig
    from .spectral import ScorerOptions, ScorerParams

    t = cfg["train"]
    scorer = ScorerParams(alpha=t["alpha"], w_s=t["w_s"], b_s=t["b_s"], gamma=t["gamma"],
                          p_min=t["p_min"], p_max=t["p_max"])
    opts = ScorerOptions(detrend=t["detrend"], lognorm=t["lognorm"], use_sfm=t["use_sfm"])
    return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], learning_rate=t["learning_rate"],
                       seed=cfg["seed"], dropout_mode=mode or t["mode"], fixed_p=t["p"], hidden=t["hidden"],
                       patience=t["patience"], scorer=scorer, scorer_options=opts,
                       normalization="per_channel" if cfg["data"]["per_channel"] else "global")


def _data_config(cfg):
    from .experiments import DataConfig

    d = cfg["data"]
    return DataConfig(T=d["T"], C=d["C"], L=d["L"], H=d["H"], stride=d["stride"],
                      eval_stride=d["eval_stride"], ratios=tuple(d["ratios"]), per_channel=d["per_channel"])


def _load_dataset(data_dir):
    from .series import load_csv

    d = Path(data_dir)
    if not (d / "noisy.csv").is_file():
        raise CliError(f"{d} has no noisy.csv (run `dropoutts synth` first)")
    noisy = load_csv(d / "noisy.csv")
    clean = load_csv(d / "clean.csv") if (d / "clean.csv").is_file() else None
    return noisy, clean, _file_digest(d / "noisy.csv")


def _prepare(args, cfg):
    """Windows for train/eval, from ``--data`` or generated for ``--sigma``."""
    from .experiments import prepare_windows
    from .synth import build_synth12

    dcfg = _data_config(cfg)
    if args.data is not None:
        noisy, clean, digest = _load_dataset(args.data)
        source = {"noisy_sha256": digest}
    else:
        levels = cfg["sweep"]["levels"] if args.sigma else [0.5]
        if len(levels) != 1:
            raise CliError("train/eval take a single --sigma level")
        ds = build_synth12(cfg["sweep"]["data_seed"], float(levels[0]), T=dcfg.T, C=dcfg.C)
        noisy, clean = ds.noisy, ds.clean
        source = {"synth_level": float(levels[0]), "synth_seed": cfg["sweep"]["data_seed"]}
    return prepare_windows(noisy, clean, dcfg), source


def cmd_train(args, cfg, chash, out):
    import time

    from .errors import DivergenceError
    from .experiments import run_once
    from .forecaster import WindowSet, evaluate

    data, source = _prepare(args, cfg)
    chash = config_hash({"config": cfg, "source": source})
    tc = _train_config(cfg)
    from dataclasses import replace
    tc = replace(tc, record_rates=tc.dropout_mode == "adaptive")
    t0 = time.perf_counter()
    try:
        model, scorer, report, test = run_once(data, tc)
    except DivergenceError as e:
        write_json(out / "error.json", "error", chash, {
            "error": str(e), "train_loss": getattr(e, "train_loss", []),
            "val_loss": getattr(e, "val_loss", [])})
        raise
    wall_ms = (time.perf_counter() - t0) * 1e3
    val = evaluate(model, WindowSet(data.val.X, data.val.Y))
    rep = report.to_dict()
    rep.pop("config_hash")
    payload = {
        "run_id": chash,
        "config": cfg,
        "source": source,
        **rep,
        "horizons": [{"h": test.horizon, "mse": test.mse, "mae": test.mae}],
        "target": "clean" if data.test.Y_clean is not None else "observed",
        "val": {"mse": val.mse, "mae": val.mae},
        "sigma": source.get("synth_level"),
    }
    write_json(out / "report.json", "report", chash, payload)
    _write(out / "model.bin", model.to_bytes())
    files = ["report.json", "model.bin"]
    if tc.dropout_mode == "adaptive":
        write_table(out / "rates.csv", ["epoch", "sample", "score", "s_hat", "p"], report.rate_log, chash)
        files.append("rates.csv")
    write_manifest(out, "train", cfg, chash, files)
    # wall-clock lives outside the hashed, byte-stable outputs
    write_json(out / "timing.json", "timing", chash, {"wall_ms": wall_ms})
    print(f"{tc.dropout_mode}: test mse {test.mse:.6f} mae {test.mae:.6f} "
          f"({report.epochs_run} epochs, best {report.best_epoch})")


def cmd_eval(args, cfg, chash, out):
    from .forecaster import MlpModel, WindowSet, evaluate

    if args.run is None:
        raise CliError("eval needs --run DIR (a train output directory)")
    run = Path(args.run)
    try:
        report = json.loads((run / "report.json").read_text(encoding="utf-8"))
        model = MlpModel.from_bytes((run / "model.bin").read_bytes())
    except OSError as e:
        raise CliError(f"cannot read run directory {run}: {e.strerror}") from e
    run_cfg = _merge(DEFAULTS, report["config"])
    if args.data is None and "synth_level" in report["source"]:
        args.sigma = [report["source"]["synth_level"]]
        run_cfg["sweep"]["levels"] = args.sigma
    data, source = _prepare(args, run_cfg)
    chash = config_hash({"run": report["config_hash"], "source": source})
    results = {}
    for name, ws in (("val", data.val), ("test", data.test)):
        observed = evaluate(model, WindowSet(ws.X, ws.Y))
        entry = {"observed": {"mse": observed.mse, "mae": observed.mae}}
        if ws.Y_clean is not None:
            clean = evaluate(model, ws)
            entry["clean"] = {"mse": clean.mse, "mae": clean.mae}
        results[name] = entry
    write_json(out / "eval.json", "eval", chash, {"run_id": report["config_hash"], "source": source,
                                                   "splits": results})
    write_manifest(out, "eval", run_cfg, chash, ["eval.json"])
    t = results["test"].get("clean", results["test"]["observed"])
    print(f"test mse {t['mse']:.6f} mae {t['mae']:.6f}")


def _summary_stats(values):
    import numpy as np

    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def cmd_paradox(args, cfg, chash, out):
    from .experiments import FIXED_RATES, paradox_sweep

    sw = cfg["sweep"]
    levels = tuple(float(v) for v in sw["levels"])
    rows = paradox_sweep(_train_config(cfg), _data_config(cfg), range(sw["seeds"]), levels=levels,
                         gamma=cfg["train"]["gamma"], data_seed=sw["data_seed"])
    write_table(out / "paradox_runs.csv", ["sigma", "config", "seed", "mse", "mae", "epochs"], rows, chash)
    names = [f"fixed_{p:g}" for p in FIXED_RATES] + ["adaptive"]
    header = ["sigma"] + [f"{n}_{s}" for n in names for s in ("mean", "std")]
    table = []
    for lv in levels:
        row = [lv]
        for n in names:
            row.extend(_summary_stats([r[3] for r in rows if r[0] == lv and r[1] == n]))
        table.append(row)
    write_table(out / "paradox.csv", header, table, chash)
    write_manifest(out, "paradox", cfg, chash, ["paradox_runs.csv", "paradox.csv"])
    for row in table:
        print(f"sigma {row[0]:g}: " + " ".join(f"{n}={row[1 + 2 * i]:.4f}" for i, n in enumerate(names)))


def cmd_ablate(args, cfg, chash, out):
    from .experiments import ABLATIONS, ablation_sweep

    sw = cfg["sweep"]
    levels = tuple(float(v) for v in sw["levels"])
    rows = ablation_sweep(_train_config(cfg, mode="adaptive"), _data_config(cfg), range(sw["seeds"]),
                          levels=levels, data_seed=sw["data_seed"])
    write_table(out / "ablation_runs.csv", ["sigma", "variant", "seed", "mse", "mae"], rows, chash)
    header = ["variant", "detrend", "lognorm", "sfm_anchor"] + [f"mse_{lv:g}" for lv in levels] \
        + ["mse_mean", "mae_mean"]
    table = []
    for name, detrend, lognorm, sfm in ABLATIONS:
        mine = [r for r in rows if r[1] == name]
        per_level = [_summary_stats([r[3] for r in mine if r[0] == lv])[0] for lv in levels]
        table.append([name, detrend, int(lognorm), int(sfm), *per_level,
                      _summary_stats([r[3] for r in mine])[0], _summary_stats([r[4] for r in mine])[0]])
    write_table(out / "ablation.csv", header, table, chash)
    write_manifest(out, "ablate", cfg, chash, ["ablation_runs.csv", "ablation.csv"])
    for row in table:
        print(f"{row[0]:<18} mse {row[-2]:.5f}")


def cmd_analyze(args, cfg, chash, out):
    import numpy as np

    from .analysis import (detrend_bench, sfm_snr_correlation, spectral_profile, sparsity_sweep,
                           synth_profile_points)
    from .series import load_csv
    from .spectral import noise_score
    from .synth import LEVELS as SYNTH_LEVELS
    from .synth import SignalSpec, gen_signal

    a = cfg["analyze"]
    if args.input is not None:
        try:
            ts = load_csv(args.input)
        except OSError as e:
            raise CliError(f"cannot read {args.input}: {e.strerror}") from e
        values = ts.values
        name = "input"
        chash = config_hash({"config": cfg, "input_sha256": _file_digest(Path(args.input))})
    else:
        values = gen_signal(SignalSpec(), a["T"], cfg["data"]["C"], cfg["seed"]).values
        name = "synth_clean"
    files = []

    rows = []
    for c in range(values.shape[1]):
        for rep in sparsity_sweep(values[:, c], tuple(a["keep"])):
            rows.append([c, rep.keep_fraction, rep.kept_bins, rep.correlation, rep.retained_energy,
                         rep.threshold])
    write_table(out / "sparsity.csv", ["channel", "keep_fraction", "kept_bins", "correlation",
                                       "retained_energy", "threshold"], rows, chash)
    files.append("sparsity.csv")

    pts = synth_profile_points(cfg["seed"], a["T"])
    labels = [f"synth_{_levels_tag(lv)}" for lv in SYNTH_LEVELS] + ["clean_periodic", "clean_am"]
    prof_rows = [[lab, s, n] for lab, (s, n) in zip(labels, pts)]
    if args.input is not None:
        sfm, snr = spectral_profile(values, a["signal_fraction"])
        prof_rows.append([name, sfm, snr])
        pts = pts + [(sfm, snr)]
    write_table(out / "profile.csv", ["dataset", "sfm", "snr_db"], prof_rows, chash)
    write_json(out / "correlation.json", "correlation", chash,
               {"points": len(pts), "pearson_r": sfm_snr_correlation(pts)})
    files += ["profile.csv", "correlation.json"]

    bench = detrend_bench()
    write_table(out / "detrend_bench.csv", ["scenario", "strategy", "edge_mae"],
                [[b.scenario, k, v] for b in bench for k, v in b.edge_mae.items()], chash)
    files.append("detrend_bench.csv")

    if args.plot_data:
        L = cfg["data"]["L"]
        dec = noise_score(values[:L]).decomposition
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["channel", "bin", "frequency", "amplitude", "mask", "config_hash"])
        K = dec.A.shape[0]
        for c in range(dec.A.shape[1]):
            for k in range(K):
                w.writerow([c, k, repr(k / L), repr(float(dec.A[k, c])), repr(float(dec.M[k, c])), chash])
        _write(out / "spectrum.csv", buf.getvalue().encode("utf-8"))
        files.append("spectrum.csv")
    write_manifest(out, "analyze", cfg, chash, files)
    corr = np.mean([r[3] for r in rows if abs(r[1] - 0.01) < 1e-12]) if 0.01 in a["keep"] else float("nan")
    print(f"{name}: mean top-1% correlation {corr:.4f}; "
          f"sfm/snr r = {sfm_snr_correlation(pts):.3f}; {len(bench) * 3} bench rows")


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
            "analyze": cmd_analyze, "paradox": cmd_paradox}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="JSON config tree; flags override it")
    shared.add_argument("--seed", type=int, help="master seed")
    shared.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT}/<command>)")
    shared.add_argument("--threads", type=int, help="BLAS threads (set before numpy loads)")

    ap = argparse.ArgumentParser(prog="dropoutts", description="Spectral sample-adaptive dropout toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def level(v):
        try:
            f = float(v)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {v!r}")
        if not any(abs(f - lv) < 1e-9 for lv in LEVELS):
            raise argparse.ArgumentTypeError(f"level {v} is not one of {', '.join(map(str, LEVELS))}")
        return f

    def training_flags(p):
        p.add_argument("--epochs", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--gamma", type=float, help="initial sensitivity gamma (pre-softplus)")
        p.add_argument("--T", type=int, help="series length when generating Synth-12 on the fly")
        p.add_argument("--L", type=int, help="look-back window")
        p.add_argument("--H", type=int, help="forecast horizon")
        p.add_argument("--stride", type=int, help="training window stride")
        p.add_argument("--data-seed", dest="data_seed", type=int)

    p = sub.add_parser("synth", parents=[shared], help="generate Synth-12 datasets")
    p.add_argument("--sigma", type=level, action="append", help="noise level (repeatable)")
    p.add_argument("--T", type=int)
    p.add_argument("--C", type=int)

    p = sub.add_parser("train", parents=[shared], help="train one forecaster")
    p.add_argument("--data", metavar="DIR", help="directory with noisy.csv (and clean.csv)")
    p.add_argument("--sigma", type=level, action="append", help="generate Synth-12 at this level instead")
    p.add_argument("--mode", choices=("none", "fixed", "adaptive"))
    p.add_argument("--p", type=float, help="fixed dropout rate")
    p.add_argument("--detrend", choices=("global_ols", "end_to_end", "none"))
    training_flags(p)

    p = sub.add_parser("eval", parents=[shared], help="evaluate a trained run")
    p.add_argument("--run", metavar="DIR", help="train output directory")
    p.add_argument("--data", metavar="DIR")
    p.add_argument("--sigma", type=level, action="append")

    for name, desc in (("ablate", "scorer component ablation"), ("paradox", "fixed vs adaptive dropout sweep")):
        p = sub.add_parser(name, parents=[shared], help=desc)
        p.add_argument("--sigma", type=level, action="append", help="restrict to these levels")
        p.add_argument("--seeds", type=int, help="number of training seeds")
        training_flags(p)

    p = sub.add_parser("analyze", parents=[shared], help="sparsity, SNR/SFM and detrending analyses")
    p.add_argument("--input", metavar="CSV", help="user series (header row, one column per channel)")
    p.add_argument("--T", type=int, help="length of the generated clean series")
    p.add_argument("--plot-data", dest="plot_data", action="store_true",
                   help="also write (frequency, amplitude, mask) triples for one window")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = resolve_config(args)
        out = _out_dir(args)
        COMMANDS[args.command](args, cfg, config_hash({"command": args.command, "config": cfg}), out)
    except CliError as e:
        print(f"dropoutts {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # any library error is fatal with a nonzero exit
        from .errors import DropoutTSError
        if isinstance(e, DropoutTSError):
            print(f"dropoutts {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
            return 1
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
