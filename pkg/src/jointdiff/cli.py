"""End-to-end pipeline driver.

Subcommands: generate (synthetic data + oracle sidecars), train (joint model
or marginal-product baseline), sample (per-unit joint draws to CSV), evaluate
(distributional metrics against an oracle or a reference CSV), report
(consolidate metric JSONs into one table).

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure. A global
--seed overrides every seed in the config; JOINTDIFF_OUTPUT_ROOT prefixes
relative output paths.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .autoreg import hierarchical_train
from .baselines import train_marginal_product
from .bundle import load_bundle, save_bundle
from .dataio import (
    read_dataset_csv,
    read_samples_csv,
    read_schema_json,
    write_dataset_csv,
    write_samples_csv,
    write_schema_json,
)
from .errors import ConfigError, DataError, JointDiffError, NumericError
from .metrics import empirical_kl, empirical_w1, mixed_density_fit, pehe
from .rngs import derive_rng
from .runconfig import RunConfig
from .synthgen import (
    BivariateNormalDgpConfig,
    PotentialOutcomeTable,
    RhoDgpConfig,
    bvn_sample_joint,
    generate_bvn_dataset,
    generate_rho_dataset,
    oracle_means,
    rho_sample_joint,
    split_indices,
    write_oracle_sidecar,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

OUTPUT_ROOT_ENV = "JOINTDIFF_OUTPUT_ROOT"


def _resolve_out(path: str) -> Path:
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _dgp_from_config(cfg: RunConfig):
    if cfg.dgp.kind == "rho":
        return RhoDgpConfig.create(
            d_x=cfg.dgp.d_x,
            rho=cfg.dgp.rho,
            sigma_noise=cfg.dgp.sigma_noise,
            coef_seed=cfg.dgp.coef_seed,
        )
    return BivariateNormalDgpConfig.create(
        d_x=cfg.dgp.d_x, coef_seed=cfg.dgp.coef_seed
    )


def _oracle_sampler(dgp_config):
    if isinstance(dgp_config, RhoDgpConfig):
        return rho_sample_joint
    return bvn_sample_joint


def cmd_generate(args) -> int:
    cfg = RunConfig.parse(args.config)
    if args.seed is not None:
        cfg.override_seed(args.seed)
    dgp = _dgp_from_config(cfg)
    if cfg.dgp.kind == "rho":
        dataset, table = generate_rho_dataset(dgp, cfg.dgp.n, cfg.dgp.data_seed)
    else:
        dataset, table = generate_bvn_dataset(dgp, cfg.dgp.n, cfg.dgp.data_seed)
    train_idx, test_idx = split_indices(
        dataset.n, cfg.dgp.test_fraction, cfg.dgp.data_seed
    )
    out_dir = _resolve_out(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_schema_json(dataset.schema, out_dir / "schema.json")
    for name, idx in (("train", train_idx), ("test", test_idx)):
        write_dataset_csv(dataset.subset(idx), out_dir / f"{name}.csv")
        sub_table = PotentialOutcomeTable(
            means=table.means[idx], draws=table.draws[idx]
        )
        write_oracle_sidecar(sub_table, out_dir / f"oracle_{name}.csv")
    for name in ("schema.json", "train.csv", "test.csv", "oracle_train.csv",
                 "oracle_test.csv"):
        print(f"{_sha256(out_dir / name)}  {out_dir / name}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = RunConfig.parse(args.config)
    if args.seed is not None:
        cfg.override_seed(args.seed)
    data_dir = Path(args.data)
    schema = read_schema_json(data_dir / "schema.json")
    train_set = read_dataset_csv(data_dir / "train.csv", schema)
    schedule = cfg.model.schedule()
    model_cfg = cfg.model.model_config()
    train_cfg = cfg.model.train_config()
    if args.baseline:
        model = train_marginal_product(
            train_set, schedule=schedule, model_cfg=model_cfg,
            train_cfg=train_cfg,
        )
    else:
        model = hierarchical_train(
            train_set, schedule=schedule, model_cfg=model_cfg,
            train_cfg=train_cfg,
        )
    out_dir = _resolve_out(args.out)
    save_bundle(model, out_dir)
    for slot, trace in enumerate(model.loss_traces):
        with open(out_dir / f"loss_trace_slot_{slot + 1}.csv", "w",
                  newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "loss"])
            for epoch, loss in enumerate(trace):
                writer.writerow([str(epoch), repr(loss)])
    print(f"model bundle written to {out_dir}")
    return EXIT_OK


def _sample_units(model, dataset, arms, n_per_unit, sample_seed, unit_ids,
                  threads):
    def one(job):
        unit, arm = job
        rng = derive_rng(sample_seed, 0, int(unit), arm)
        return model.sample_set(dataset.X[unit], arm, n_per_unit, rng)

    jobs = [(unit, arm) for unit in unit_ids for arm in arms]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(job) for job in jobs]
    rows = []
    for (unit, arm), sample in zip(jobs, results):
        for draw_id in range(sample.n):
            rows.append(
                (unit, arm, int(sample.ordering_ids[draw_id]), draw_id,
                 sample.draws[draw_id])
            )
    return rows


def cmd_sample(args) -> int:
    model = load_bundle(args.model)
    data_dir = Path(args.data)
    schema = read_schema_json(data_dir / "schema.json")
    if schema != model.schema:
        raise DataError("dataset schema does not match the model bundle")
    dataset = read_dataset_csv(data_dir / f"{args.split}.csv", schema)
    if dataset.covariate_dim != model.d_x:
        raise DataError(
            f"dataset covariate_dim {dataset.covariate_dim} != model "
            f"covariate_dim {model.d_x}"
        )
    arms = [0, 1] if args.arm == "both" else [int(args.arm)]
    unit_ids = range(dataset.n if args.max_units is None
                     else min(args.max_units, dataset.n))
    sample_seed = args.sample_seed if args.seed is None else args.seed
    rows = _sample_units(
        model, dataset, arms, args.n_per_unit, sample_seed, unit_ids,
        args.threads,
    )
    out_path = _resolve_out(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_samples_csv(out_path, schema, rows)
    print(f"{len(rows)} draws written to {out_path}")
    return EXIT_OK


def _group_by_unit_arm(unit, a, Y):
    groups = {}
    for key in sorted({(int(u), int(arm)) for u, arm in zip(unit, a)}):
        mask = (unit == key[0]) & (a == key[1])
        groups[key] = Y[mask]
    return groups


def _evaluate_split(schema, model_groups, ref_groups, w1_max_pairs, seed):
    """Per-arm mean W1/KL over units; returns (arm -> metrics, subsampled)."""
    per_arm = {0: {"w1": [], "kl": []}, 1: {"w1": [], "kl": []}}
    subsampled = False
    for key, model_draws in model_groups.items():
        unit, arm = key
        if key not in ref_groups:
            raise DataError(f"reference has no draws for unit {unit}, arm {arm}")
        ref_draws = ref_groups[key]
        res = empirical_w1(
            model_draws, ref_draws, schema, max_pairs=w1_max_pairs,
            seed=seed + unit,
        )
        subsampled = subsampled or res.subsampled
        per_arm[arm]["w1"].append(res.value)
        if model_draws.shape[0] >= 30 and ref_draws.shape[0] >= 30:
            p_hat = mixed_density_fit(model_draws, schema)
            q_hat = mixed_density_fit(ref_draws, schema)
            per_arm[arm]["kl"].append(empirical_kl(model_draws, p_hat, q_hat))
    out = {}
    for arm, vals in per_arm.items():
        if vals["w1"]:
            out[arm] = {
                "w1": float(np.mean(vals["w1"])),
                "kl": float(np.mean(vals["kl"])) if vals["kl"] else None,
                "units": len(vals["w1"]),
            }
    return out, subsampled


def _pehe_from_samples(schema, model_groups, dataset, dgp_config):
    """Average PEHE across continuous outcomes from both-arm sample groups."""
    units = sorted({unit for unit, _ in model_groups})
    both = [u for u in units if (u, 0) in model_groups and (u, 1) in model_groups]
    if not both:
        return None
    cont = schema.continuous_slots
    if not cont:
        return None
    pred = np.zeros((len(both), len(cont)))
    true = np.zeros((len(both), len(cont)))
    for row, unit in enumerate(both):
        x = dataset.X[unit]
        mean1 = model_groups[(unit, 1)].mean(axis=0)
        mean0 = model_groups[(unit, 0)].mean(axis=0)
        true_means = oracle_means(dgp_config, x, 1) - oracle_means(dgp_config, x, 0)
        for col, slot in enumerate(cont):
            pred[row, col] = mean1[slot] - mean0[slot]
            true[row, col] = true_means[slot]
    return pehe(pred, true)


def _load_split_samples(path, schema):
    unit, a, _, _, Y = read_samples_csv(path, schema)
    return _group_by_unit_arm(unit, a, Y)


def _oracle_groups(model_groups, dataset, dgp_config, eval_seed, split_tag):
    sampler = _oracle_sampler(dgp_config)
    groups = {}
    for (unit, arm), draws in model_groups.items():
        if unit >= dataset.n:
            raise DataError(f"sample unit {unit} outside dataset of {dataset.n}")
        rng = derive_rng(eval_seed, 1, split_tag, unit, arm)
        groups[(unit, arm)] = sampler(
            dgp_config, dataset.X[unit], arm, max(draws.shape[0], 1), rng
        )
    return groups


def cmd_evaluate(args) -> int:
    if not args.samples_in and not args.samples_out:
        raise ConfigError("provide --samples-in and/or --samples-out")
    need_oracle = args.reference == "oracle"
    if need_oracle and (not args.config or not args.data):
        raise ConfigError("--reference oracle needs --config and --data")
    cfg = RunConfig.parse(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.override_seed(args.seed)
    data_dir = Path(args.data) if args.data else None
    if data_dir is not None:
        schema = read_schema_json(data_dir / "schema.json")
    elif args.schema:
        schema = read_schema_json(args.schema)
    else:
        raise ConfigError("provide --data or --schema for the outcome schema")
    dgp_config = _dgp_from_config(cfg) if need_oracle else None

    report = {
        "method": args.method,
        "w1_in": None, "w1_out": None, "kl_in": None, "kl_out": None,
        "pehe": None,
        "arms": {"a0": {}, "a1": {}},
        "n": None,
        "seed": cfg.eval.eval_seed,
        "subsampled": False,
        "units": {},
    }

    for split, samples_path, ref_path, split_tag in (
        ("in", args.samples_in, args.reference_in, 0),
        ("out", args.samples_out, args.reference_out, 1),
    ):
        if not samples_path:
            continue
        model_groups = _load_split_samples(samples_path, schema)
        if not model_groups:
            raise DataError(f"{samples_path}: no draws to evaluate")
        report["n"] = max(
            report["n"] or 0, max(g.shape[0] for g in model_groups.values())
        )
        if need_oracle:
            split_name = "train" if split == "in" else "test"
            dataset = read_dataset_csv(data_dir / f"{split_name}.csv", schema)
            ref_groups = _oracle_groups(
                model_groups, dataset, dgp_config, cfg.eval.eval_seed, split_tag
            )
        else:
            if not ref_path:
                raise ConfigError(
                    f"--reference csv needs --reference-{split} for this split"
                )
            ref_groups = _load_split_samples(ref_path, schema)
        arm_metrics, subsampled = _evaluate_split(
            schema, model_groups, ref_groups, cfg.eval.w1_max_pairs,
            cfg.eval.eval_seed,
        )
        report["subsampled"] = report["subsampled"] or subsampled
        w1s, kls = [], []
        for arm, vals in arm_metrics.items():
            report["arms"][f"a{arm}"][f"w1_{split}"] = vals["w1"]
            report["arms"][f"a{arm}"][f"kl_{split}"] = vals["kl"]
            report["arms"][f"a{arm}"][f"units_{split}"] = vals["units"]
            w1s.append(vals["w1"])
            if vals["kl"] is not None:
                kls.append(vals["kl"])
        report[f"w1_{split}"] = float(np.mean(w1s)) if w1s else None
        report[f"kl_{split}"] = float(np.mean(kls)) if kls else None
        report["units"][split] = sum(v["units"] for v in arm_metrics.values())
        if need_oracle:
            pehe_value = _pehe_from_samples(
                schema, model_groups, dataset, dgp_config
            )
            # Out-of-sample PEHE wins when both splits are evaluated.
            if pehe_value is not None and (split == "out" or report["pehe"] is None):
                report["pehe"] = pehe_value

    out_path = _resolve_out(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"metrics report written to {out_path}")
    return EXIT_OK


REPORT_COLUMNS = [
    "method", "arm", "split",
    "w1_mean", "w1_std", "kl_mean", "kl_std", "pehe_mean", "pehe_std",
    "n_replicates",
]


def cmd_report(args) -> int:
    rows = {}
    for path in args.reports:
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read report {path}: {exc}") from exc
        if "arms" not in payload:
            raise DataError(f"{path}: not a metrics report")
        method = payload.get("method") or "model"
        for arm_name, arm_vals in payload["arms"].items():
            for split in ("in", "out"):
                w1 = arm_vals.get(f"w1_{split}")
                if w1 is None:
                    continue
                key = (method, arm_name, split)
                entry = rows.setdefault(key, {"w1": [], "kl": [], "pehe": []})
                entry["w1"].append(w1)
                if arm_vals.get(f"kl_{split}") is not None:
                    entry["kl"].append(arm_vals[f"kl_{split}"])
                if payload.get("pehe") is not None:
                    entry["pehe"].append(payload["pehe"])
    if not rows:
        raise DataError("no usable metric rows found in the given reports")

    def stats(values):
        if not values:
            return "", ""
        return repr(float(np.mean(values))), repr(float(np.std(values)))

    out_path = _resolve_out(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for key in sorted(rows):
            method, arm, split = key
            entry = rows[key]
            w1_mean, w1_std = stats(entry["w1"])
            kl_mean, kl_std = stats(entry["kl"])
            pehe_mean, pehe_std = stats(entry["pehe"])
            writer.writerow(
                [method, arm, split, w1_mean, w1_std, kl_mean, kl_std,
                 pehe_mean, pehe_std, str(len(entry["w1"]))]
            )
    print(f"consolidated table written to {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointdiff",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Default configuration:\n\n" + RunConfig.default_text(),
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override every seed in the config")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap for per-unit sampling")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default config file and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="write synthetic train/test data")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the joint model or the baseline")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", action="store_true",
                   help="train the product-of-marginals baseline")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw joint samples per unit")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("-a", "--arm", choices=("0", "1", "both"), default="both")
    p.add_argument("--n-per-unit", type=int, required=True)
    p.add_argument("--max-units", type=int, default=None)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score sample dumps against a reference")
    p.add_argument("--samples-in", help="sample CSV drawn at train units")
    p.add_argument("--samples-out", help="sample CSV drawn at test units")
    p.add_argument("--reference", choices=("oracle", "csv"), required=True)
    p.add_argument("--reference-in", help="reference CSV for the in split")
    p.add_argument("--reference-out", help="reference CSV for the out split")
    p.add_argument("--config", help="run config (required for oracle)")
    p.add_argument("--data", help="dataset directory (required for oracle)")
    p.add_argument("--schema", help="schema JSON when --data is absent")
    p.add_argument("--method", default="model", help="method label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="consolidate metric JSONs into a CSV")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(RunConfig.default_text())
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
