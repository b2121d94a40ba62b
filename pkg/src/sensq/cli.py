"""Command-line front end.

One JSON config file drives every subcommand; individual flags override
single values.  Exit codes: 0 success, 1 error, 2 query unsatisfiable,
3 inconclusive search.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attack import PerturbSpec, Trigger, attack_success_rate, synthetic_perturb, trojan_retrain
from .data import Dataset, gen_synthetic, load_csv, save_csv
from .encode import DeltaMode, QuerySpec
from .errors import SensqError
from .mlp import Mlp, forward_batch, sip
from .profiling import compute_dbias
from .report import render_markdown, scaling_report, write_run_report
from .search import Outcome, greedy_search, naive_search, verify_sample
from .solver import SolverConfig
from .train import TrainConfig, evaluate, train

log = logging.getLogger(__name__)

DEFAULT_CONFIG: dict = {
    "seed": 7,
    "out_dir": "runs/latest",
    "data": {"n_features": 10, "per_class": 50, "margin": 0.2, "csv": None},
    "train": {
        "architecture": [8, 6, 4, 1],
        "epochs": 20,
        "learning_rate": 0.2,
        "batch_size": 16,
    },
    "trigger": {"indices": [0, 1], "values": [1.0, 1.0], "target_label": 1},
    "retrain": {"epochs": 40, "learning_rate": 0.2, "stamp_fraction": 0.5},
    "perturb": {
        "inflate_fraction": 0.3,
        "inflate_range": [0.05, 0.25],
        "deflate_range": [-0.05, 0.0],
    },
    "query": {
        "base_sample": "auto",
        "gamma_radius": 0.3,
        "epsilon_z": 0.25,
        "theta": 0.01,
        "inflate_fraction": 0.3,
        "delta_e_range": [0.05, 0.25],
        "delta_d_range": [-0.05, 0.0],
        "delta_mode": "existential",
    },
    "schedule": [20, 60, 120],
    "solver": {"cmd": "z3", "args": ["-smt2", "{file}"], "seed": 0},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None, seed: int | None, out_dir: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        cfg = _merge(cfg, json.loads(Path(path).read_text()))
    if seed is not None:
        cfg["seed"] = seed
    if out_dir is not None:
        cfg["out_dir"] = out_dir
    return cfg


# -- config to typed objects --------------------------------------------------


def _train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        architecture=tuple(t["architecture"]),
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        seed=cfg["seed"],
    )


def _retrain_config(cfg: dict) -> TrainConfig:
    t, r = cfg["train"], cfg["retrain"]
    return TrainConfig(
        architecture=tuple(t["architecture"]),
        epochs=r["epochs"],
        learning_rate=r["learning_rate"],
        batch_size=t["batch_size"],
        seed=cfg["seed"],
    )


def _trigger(cfg: dict) -> Trigger:
    t = cfg["trigger"]
    return Trigger(tuple(t["indices"]), tuple(t["values"]), t["target_label"])


def _perturb_spec(cfg: dict) -> PerturbSpec:
    p = cfg["perturb"]
    return PerturbSpec(
        inflate_fraction=p["inflate_fraction"],
        inflate_range=tuple(p["inflate_range"]),
        deflate_range=tuple(p["deflate_range"]),
        seed=cfg["seed"],
    )


def pick_base_sample(m: Mlp, d: Dataset, selector) -> np.ndarray:
    """Config base_sample: an index, or "auto" for the label-0 sample whose
    logit sits nearest the decision boundary (keeps the modeled sensitivity
    healthy)."""
    if selector != "auto":
        return d.features[int(selector)]
    _, _, logits = forward_batch(m, d.features)
    mask = d.labels == 0
    if not mask.any():
        raise SensqError("no label-0 samples to pick a base sample from")
    candidates = np.flatnonzero(mask)
    return d.features[candidates[np.argmax(logits[candidates])]]


def _query_spec(cfg: dict, m: Mlp, d: Dataset) -> QuerySpec:
    qc = cfg["query"]
    x0 = pick_base_sample(m, d, qc["base_sample"])
    return QuerySpec(
        x0=tuple(x0),
        gamma_radius=qc["gamma_radius"],
        epsilon_z=qc["epsilon_z"],
        theta=qc["theta"],
        inflate_fraction=qc["inflate_fraction"],
        delta_e_range=tuple(qc["delta_e_range"]),
        delta_d_range=tuple(qc["delta_d_range"]),
        delta_mode=DeltaMode(qc["delta_mode"]),
    )


def _solver_config(cfg: dict) -> SolverConfig:
    s = cfg["solver"]
    base = SolverConfig.from_env(default_cmd=s["cmd"], seed=s.get("seed"))
    if base.cmd == s["cmd"]:
        base = SolverConfig(cmd=s["cmd"], args=tuple(s["args"]), seed=s.get("seed"))
    return base


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: dict, out: Path) -> Dataset:
    if cfg["data"].get("csv"):
        return load_csv(cfg["data"]["csv"])
    saved = out / "dataset.csv"
    if saved.exists():
        return load_csv(saved)
    dc = cfg["data"]
    d = gen_synthetic(dc["n_features"], dc["per_class"], dc["margin"], cfg["seed"])
    save_csv(d, saved)
    return d


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1))


# -- subcommands ---------------------------------------------------------------


def cmd_config(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    if args.dump:
        print(json.dumps(cfg, indent=1))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    d = _load_dataset(cfg, out)
    model = train(_train_config(cfg), d)
    model.save(out / "model_clean.json")
    metrics = evaluate(model, d)
    print(
        f"trained {model.dims_label} on {len(d)} samples: "
        f"accuracy={metrics.accuracy:.3f} precision={metrics.precision:.3f} "
        f"recall={metrics.recall:.3f}"
    )
    _write_json(
        out / "meta.json",
        {"network": model.dims_label, "seed": cfg["seed"], "config": cfg},
    )
    return 0


def cmd_attack(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    model = Mlp.load(args.model or out / "model_clean.json")
    d = _load_dataset(cfg, out)
    if args.method == "perturb":
        attacked, deltas = synthetic_perturb(model, _perturb_spec(cfg))
        attacked.save(out / "model_perturbed.json")
        _write_json(
            out / "model_perturbed.delta.json",
            {str(k): v for k, v in sorted(deltas.items())},
        )
        print(f"perturbed output weights saved; deltas on {len(deltas)} weights")
    else:
        trig = _trigger(cfg)
        attacked = trojan_retrain(
            model, d, trig, _retrain_config(cfg), cfg["retrain"]["stamp_fraction"]
        )
        attacked.save(out / "model_trojan.json")
        rate = attack_success_rate(attacked, d, trig)
        clean = evaluate(attacked, d)
        print(
            f"trojan retrained: attack_success={rate:.3f} "
            f"clean_accuracy={clean.accuracy:.3f}"
        )
    return 0


def cmd_profile(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    model = Mlp.load(args.model or out / "model_clean.json")
    d = _load_dataset(cfg, out)
    profile = compute_dbias(model, d)
    _write_json(out / "profile.json", profile.to_table())
    print(render_markdown(
        ("layer", "neuron", "#identity", "#zero", "direction", "d-bias"),
        [
            (r["layer"], r["neuron"], r["n_identity"], r["n_zero"], r["direction"], r["d_bias"])
            for r in profile.to_table()
        ],
    ))
    return 0


def _search_exit(outcome) -> int:
    if outcome.status is Outcome.FOUND:
        return 0
    return 2 if outcome.status is Outcome.UNSAT else 3


def cmd_find_sample(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    model = Mlp.load(args.model or out / "model_clean.json")
    d = _load_dataset(cfg, out)
    q = _query_spec(cfg, model, d)
    solver = _solver_config(cfg)
    _write_json(
        out / "meta.json",
        {"network": model.dims_label, "seed": cfg["seed"], "config": cfg},
    )
    if args.mode == "naive":
        timeout = cfg["schedule"][-1] if cfg["schedule"] else None
        outcome = naive_search(model, q, timeout, solver, run_dir=out)
    else:
        outcome = greedy_search(
            model, d, q, tuple(cfg["schedule"]), solver, run_dir=out
        )
    _write_json(out / "outcome.json", outcome.to_json_dict())
    print(
        f"search: {outcome.status.value}"
        + (f" at iteration {outcome.iteration}" if outcome.iteration else "")
        + f" in {outcome.total_runtime:.1f}s"
    )
    return _search_exit(outcome)


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    model = Mlp.load(args.model or out / "model_clean.json")
    suspect = Mlp.load(args.suspect)
    sample = _read_sample(args.sample or out / "outcome.json")
    verdict = verify_sample(model, suspect, sample, cfg["query"]["theta"])
    print(
        f"beta={verdict.beta:.6f} theta={cfg['query']['theta']} "
        f"flagged={verdict.flagged}"
    )
    verify_path = out / "verify.json"
    doc = json.loads(verify_path.read_text()) if verify_path.exists() else {
        "theta": cfg["query"]["theta"],
        "suspects": {},
    }
    doc["suspects"][args.name or Path(args.suspect).stem] = {
        "beta": verdict.beta,
        "flagged": verdict.flagged,
    }
    doc["sip"] = float(sip(model, sample))
    _write_json(verify_path, doc)
    return 0


def _read_sample(path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, list):
        return np.asarray(doc, dtype=np.float64)
    sample = doc.get("results", {}).get("sample") or doc.get("sample")
    if sample is None:
        raise SensqError(f"{path} holds no sample")
    return np.asarray(sample, dtype=np.float64)


def cmd_report(args) -> int:
    if args.scaling:
        rows = scaling_report([Mlp.load(p) for p in args.scaling])
        print(
            render_markdown(
                ("NN dimensions", "# params", "# ReLU nodes", "SMT lines", "SMT bytes"),
                [
                    (r["dims"], r["n_params"], r["n_relu_nodes"], r["script_lines"], r["script_bytes"])
                    for r in rows
                ],
            )
        )
        return 0
    report = write_run_report(args.run_dir)
    print(json.dumps(report["results"], indent=1))
    return 0


def cmd_end2end(args) -> int:
    cfg = load_config(args.config, args.seed, args.out_dir)
    out = _out_dir(cfg)
    d = _load_dataset(cfg, out)

    model = train(_train_config(cfg), d)
    model.save(out / "model_clean.json")
    metrics = evaluate(model, d)
    print(f"[1/6] trained {model.dims_label}: accuracy={metrics.accuracy:.3f}")

    perturbed, deltas = synthetic_perturb(model, _perturb_spec(cfg))
    perturbed.save(out / "model_perturbed.json")
    _write_json(
        out / "model_perturbed.delta.json",
        {str(k): v for k, v in sorted(deltas.items())},
    )
    trig = _trigger(cfg)
    trojan = trojan_retrain(
        model, d, trig, _retrain_config(cfg), cfg["retrain"]["stamp_fraction"]
    )
    trojan.save(out / "model_trojan.json")
    rate = attack_success_rate(trojan, d, trig)
    print(f"[2/6] attacks built: trojan success rate {rate:.2f}")

    profile = compute_dbias(model, d)
    _write_json(out / "profile.json", profile.to_table())
    print(f"[3/6] profiled {len(profile.nodes)} ReLU nodes")

    q = _query_spec(cfg, model, d)
    solver = _solver_config(cfg)
    _write_json(
        out / "meta.json",
        {"network": model.dims_label, "seed": cfg["seed"], "config": cfg},
    )
    outcome = greedy_search(model, d, q, tuple(cfg["schedule"]), solver, run_dir=out)
    _write_json(out / "outcome.json", outcome.to_json_dict())
    print(
        f"[4/6] search: {outcome.status.value}"
        + (f" at iteration {outcome.iteration}" if outcome.iteration else "")
    )
    if outcome.status is not Outcome.FOUND:
        write_run_report(out)
        return _search_exit(outcome)

    theta = cfg["query"]["theta"]
    verdicts = {
        "perturbed": verify_sample(model, perturbed, outcome.sample, theta),
        "trojan": verify_sample(model, trojan, outcome.sample, theta),
    }
    sample_sip = float(sip(model, outcome.sample))
    _write_json(
        out / "verify.json",
        {
            "theta": theta,
            "sip": sample_sip,
            "suspects": {
                name: {"beta": v.beta, "flagged": v.flagged}
                for name, v in verdicts.items()
            },
        },
    )
    for name, v in verdicts.items():
        print(f"[5/6] {name}: beta={v.beta:.5f} flagged={v.flagged}")
    print(f"[5/6] SIP={sample_sip:.2e} (innocent-perturbation guard)")

    report = write_run_report(out)
    print(f"[6/6] report written to {out / 'report.md'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensq",
        description="Synthesize and check solver-found sensitive samples "
        "for ReLU network integrity.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--out-dir", help="override output directory")

    p = sub.add_parser("config", help="show the resolved configuration")
    common(p)
    p.add_argument("--dump", action="store_true", help="print resolved config JSON")
    p.set_defaults(func=cmd_config)

    p = sub.add_parser("train", help="generate/load data and train the clean model")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="produce a tampered model")
    common(p)
    p.add_argument("--method", choices=("trojan", "perturb"), required=True)
    p.add_argument("--model", help="clean model path (default: out_dir/model_clean.json)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("profile", help="compute the ReLU decision-bias table")
    common(p)
    p.add_argument("--model")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("find-sample", help="search for a sensitive sample")
    common(p)
    p.add_argument("--mode", choices=("naive", "greedy"), default="greedy")
    p.add_argument("--model")
    p.set_defaults(func=cmd_find_sample)

    p = sub.add_parser("verify", help="check a suspect model with a found sample")
    common(p)
    p.add_argument("--suspect", required=True)
    p.add_argument("--model")
    p.add_argument("--sample", help="sample JSON (default: out_dir/outcome.json)")
    p.add_argument("--name", help="suspect name in verify.json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="emit report.json/report.md for a run")
    common(p)
    p.add_argument("--run-dir", help="run directory (default: config out_dir)")
    p.add_argument("--scaling", nargs="*", help="model files for the size table")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("end2end", help="train, attack, search, verify, report")
    common(p)
    p.set_defaults(func=cmd_end2end)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "report" and not args.scaling and not args.run_dir:
        cfg = load_config(args.config, args.seed, args.out_dir)
        args.run_dir = cfg["out_dir"]
    try:
        return args.func(args)
    except SensqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
