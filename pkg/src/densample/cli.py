"""Command-line pipeline: generate, sample, fit, evaluate, experiment, pca.

A JSON config file is the single source of truth for a run; a handful of
flags override individual keys. Every command writes a ``manifest.json``
echoing the resolved configuration, so each output table or figure is
traceable to the run that produced it, and reruns with the same config are
byte-identical (no timestamps in any output).

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation
failure. Failures print a single machine-readable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .dataset import (
    Dataset,
    IngestionConfig,
    SplitSpec,
    apply_standardization,
    filter_columns,
    fit_standardization,
    load_csv,
    train_test_split,
    write_csv,
)
from .errors import ValidationError
from .evaluation import (
    ExperimentSummary,
    evaluate_model,
    run_experiment,
    run_resplit_experiment,
    select_underrepresented,
)
from .neighbors import build_index, density_score_records
from .pca import fit_pca, project
from .regression import fit_ols, load_model, save_model
from .sampling import (
    STRATEGY_DENSITY,
    STRATEGY_RANDOM,
    SamplingPlan,
    draw_sample,
)
from .synth import SynthSpec, generate

_PLAN_KEYS = {
    "strategy",
    "edge_fraction",
    "random_fraction",
    "density_fraction",
    "k_mean",
    "k_density",
    "seed",
    "random_with_replacement",
}
_SYNTH_KEYS = {
    "n",
    "p",
    "cluster_fraction",
    "cluster_spread",
    "shell_radius_range",
    "true_coefficients",
    "true_intercept",
    "noise_sd",
    "curvature",
    "seed",
}


class RunConfig:
    """Parsed config file plus command-line overrides."""

    def __init__(self, raw: dict, path: Path | None = None):
        if not isinstance(raw, dict):
            raise ValidationError("config root must be a JSON object")
        self.raw = raw
        self.path = path

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        raw = {}
        path = None
        if args.config is not None:
            path = Path(args.config)
            if not path.is_file():
                raise ValidationError(f"config file not found: {path}")
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config file {path} is not valid JSON: {exc}")
        config = cls(raw, path)
        if getattr(args, "input", None):
            config.raw["input_csv"] = args.input
        if getattr(args, "out", None):
            config.raw["output_dir"] = args.out
        if getattr(args, "seed", None) is not None:
            config.raw["seed"] = args.seed
        if getattr(args, "no_plots", False):
            config.raw["plots"] = False
        return config

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key: str):
        if key not in self.raw:
            raise ValidationError(f"config key {key!r} is required for this command")
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.get("seed", 0))

    @property
    def plots(self) -> bool:
        return bool(self.get("plots", True))

    def output_dir(self) -> Path:
        out = Path(self.require("output_dir"))
        out.mkdir(parents=True, exist_ok=True)
        return out

    def input_csv(self) -> Path:
        path = Path(self.require("input_csv"))
        if not path.is_file():
            raise ValidationError(f"input file not found: {path}")
        return path

    def ingestion(self) -> IngestionConfig:
        section = self.require("ingestion")
        if not isinstance(section, dict) or "target_column" not in section:
            raise ValidationError("ingestion config must set 'target_column'")
        selected = section.get("selected_columns")
        return IngestionConfig(
            target_column=section["target_column"],
            selected_columns=None if selected is None else tuple(selected),
            excluded_columns=tuple(section.get("excluded_columns", ())),
            batch_column=section.get("batch_column"),
            row_id_column=section.get("row_id_column"),
        )

    def split_spec(self) -> SplitSpec:
        section = self.get("split", {})
        return SplitSpec(
            test_fraction=float(section.get("test_fraction", 0.2)),
            seed=int(section.get("seed", self.seed)),
            mode=section.get("mode", "row-random"),
        )

    def plans(self) -> list[SamplingPlan]:
        section = self.get("plans")
        if not section:
            raise ValidationError("config key 'plans' must list at least one strategy")
        plans = []
        for entry in section:
            if not isinstance(entry, dict) or "strategy" not in entry:
                raise ValidationError("each plan must be an object with a 'strategy'")
            unknown = set(entry) - _PLAN_KEYS
            if unknown:
                raise ValidationError(f"unknown plan keys: {sorted(unknown)}")
            entry = dict(entry)
            entry.setdefault("seed", self.seed)
            plans.append(SamplingPlan(**entry))
        return plans

    def synth_spec(self) -> SynthSpec:
        section = self.require("synth")
        if not isinstance(section, dict):
            raise ValidationError("config key 'synth' must be an object")
        unknown = set(section) - _SYNTH_KEYS
        if unknown:
            raise ValidationError(f"unknown synth keys: {sorted(unknown)}")
        section = dict(section)
        section.setdefault("seed", self.seed)
        if "shell_radius_range" in section:
            section["shell_radius_range"] = tuple(section["shell_radius_range"])
        if "true_coefficients" in section:
            section["true_coefficients"] = tuple(section["true_coefficients"])
        return SynthSpec(**section)

    def standardize(self) -> bool:
        return bool(self.get("standardize", True))


def _write_manifest(out: Path, command: str, resolved: dict) -> None:
    manifest = {"command": command, "version": __version__, "config": resolved}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load_filtered(config: RunConfig) -> tuple[Dataset, dict]:
    ingestion = config.ingestion()
    dataset = load_csv(
        config.input_csv(),
        ingestion.target_column,
        selected_columns=ingestion.selected_columns,
        excluded_columns=ingestion.excluded_columns,
        batch_column=ingestion.batch_column,
        row_id_column=ingestion.row_id_column,
    )
    dataset, report = filter_columns(dataset)
    return dataset, {"dropped_columns": [list(item) for item in report.dropped]}


def cmd_generate(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    spec = config.synth_spec()
    synth = generate(spec)
    write_csv(synth.dataset, out / "synthetic.csv")
    pd.DataFrame(
        {"row_id": synth.dataset.row_ids, "region": list(synth.region_labels)}
    ).to_csv(out / "region_labels.csv", index=False)
    _write_manifest(out, "generate", {"synth": vars_of_spec(spec)})
    print(f"wrote {synth.dataset.n} rows to {out / 'synthetic.csv'}")
    return 0


def vars_of_spec(spec: SynthSpec) -> dict:
    return {
        "n": spec.n,
        "p": spec.p,
        "cluster_fraction": spec.cluster_fraction,
        "cluster_spread": spec.cluster_spread,
        "shell_radius_range": list(spec.shell_radius_range),
        "true_coefficients": list(spec.true_coefficients),
        "true_intercept": spec.true_intercept,
        "noise_sd": spec.noise_sd,
        "curvature": spec.curvature,
        "seed": spec.seed,
    }


def _plan_dict(plan: SamplingPlan) -> dict:
    return {
        "strategy": plan.strategy,
        "edge_fraction": plan.edge_fraction,
        "random_fraction": plan.random_fraction,
        "density_fraction": plan.density_fraction,
        "k_mean": plan.k_mean,
        "k_density": plan.k_density,
        "seed": plan.seed,
        "random_with_replacement": plan.random_with_replacement,
    }


def cmd_sample(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    dataset, filter_info = _load_filtered(config)
    plans = config.plans()

    index = None
    if any(plan.strategy != STRATEGY_RANDOM for plan in plans):
        features = dataset.features
        if config.standardize():
            params = fit_standardization(dataset)
            features = apply_standardization(dataset, params).features
        index = build_index(features)

    for plan in plans:
        sampled = draw_sample(dataset, plan, index)
        stem = f"sample_{plan.strategy}"
        write_csv(sampled.dataset, out / f"{stem}.csv")
        pd.DataFrame(
            {
                "row_id": sampled.dataset.row_ids,
                "provenance": list(sampled.provenance),
                "source_row_ids": [
                    ";".join(str(i) for i in ids) for ids in sampled.sources
                ],
                "seed": plan.seed,
            }
        ).to_csv(out / f"{stem}_provenance.csv", index=False)
        if plan.strategy == STRATEGY_DENSITY and index is not None:
            records = density_score_records(index, plan.k_density)
            pd.DataFrame(
                {
                    "row_id": dataset.row_ids,
                    "mean_knn_distance": [r.mean_knn_distance for r in records],
                }
            ).to_csv(out / "density_scores.csv", index=False)
        print(f"{plan.strategy}: wrote {sampled.dataset.n} rows to {out / (stem + '.csv')}")

    _write_manifest(
        out,
        "sample",
        {
            "input_csv": str(config.input_csv()),
            "ingestion": config.raw.get("ingestion"),
            "standardize": config.standardize(),
            "plans": [_plan_dict(plan) for plan in plans],
            "filter": filter_info,
        },
    )
    return 0


def cmd_fit(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    dataset, filter_info = _load_filtered(config)
    model = fit_ols(dataset)
    save_model(model, out / "model.json")
    _write_manifest(
        out,
        "fit",
        {
            "input_csv": str(config.input_csv()),
            "ingestion": config.raw.get("ingestion"),
            "filter": filter_info,
            "training_n": model.training_n,
        },
    )
    print(f"fitted on {model.training_n} rows; wrote {out / 'model.json'}")
    return 0


def _write_residuals(path: Path, report) -> None:
    pd.DataFrame(
        {
            "row_id": report.row_ids,
            "truth": report.truths,
            "prediction": report.predictions,
            "residual": report.residuals,
        }
    ).to_csv(path, index=False)


def cmd_evaluate(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    model = load_model(config.require("model_path"))
    ingestion = config.ingestion()
    test = load_csv(
        config.input_csv(),
        ingestion.target_column,
        selected_columns=model.feature_names,
        batch_column=ingestion.batch_column,
        row_id_column=ingestion.row_id_column,
    )
    section = config.get("evaluation", {})
    subset_fraction = float(section.get("subset_fraction", 0.10))
    k_subset = int(section.get("k_subset", 100))

    rep = test
    if config.standardize():
        rep = apply_standardization(test, fit_standardization(test))
    subset_ids = select_underrepresented(rep, subset_fraction, k_subset)

    report = evaluate_model(model, test, subset_ids, strategy="model",
                            subset_fraction=subset_fraction)
    _write_residuals(out / "residuals.csv", report)
    _write_json(
        out / "evaluation_metrics.json",
        {
            "overall_rmse": report.overall_rmse,
            "underrepresented_rmse": report.underrepresented_rmse,
            "subset_fraction": subset_fraction,
            "k_subset": k_subset,
            "n_test": test.n,
            "subset_size": int(len(subset_ids)),
        },
    )
    _write_manifest(
        out,
        "evaluate",
        {
            "input_csv": str(config.input_csv()),
            "model_path": str(config.require("model_path")),
            "subset_fraction": subset_fraction,
            "k_subset": k_subset,
            "standardize": config.standardize(),
        },
    )
    print(
        f"overall_rmse={report.overall_rmse:.6g} "
        f"underrepresented_rmse={report.underrepresented_rmse:.6g}"
    )
    return 0


def _write_summary_outputs(out: Path, summary: ExperimentSummary) -> None:
    _write_json(out / "summary.json", summary.to_dict())
    boxplot_rows = []
    for result in summary.results:
        metrics = pd.DataFrame(
            {
                "iteration": np.arange(len(result.reports)),
                "seed": [r.seed for r in result.reports],
                "overall_rmse": [r.overall_rmse for r in result.reports],
                "underrepresented_rmse": [
                    r.underrepresented_rmse for r in result.reports
                ],
            }
        )
        metrics.to_csv(out / f"metrics_{result.strategy}.csv", index=False)
        for metric, quantiles in result.quantiles.items():
            boxplot_rows.append({"strategy": result.strategy, "metric": metric,
                                 **quantiles})
    pd.DataFrame(boxplot_rows).to_csv(out / "boxplot_table.csv", index=False)


def cmd_experiment(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    dataset, filter_info = _load_filtered(config)
    plans = config.plans()
    split = config.split_spec()
    section = config.get("evaluation", {})
    iterations = int(section.get("iterations", 10))
    base_seed = int(section.get("base_seed", config.seed))
    subset_fraction = float(section.get("subset_fraction", 0.10))
    k_subset = int(section.get("k_subset", 100))
    resplit = bool(section.get("resplit_per_iteration", False))

    common = dict(
        subset_fraction=subset_fraction,
        k_subset=k_subset,
        standardize=config.standardize(),
    )
    if resplit:
        summary = run_resplit_experiment(
            dataset, split, plans, iterations, base_seed, **common
        )
        test = None
    else:
        train, test = train_test_split(dataset, split)
        summary = run_experiment(train, test, plans, iterations, base_seed, **common)

    _write_summary_outputs(out, summary)
    for result in summary.results:
        _write_residuals(out / f"residuals_{result.strategy}.csv", result.reports[0])
    if test is not None:
        write_csv(test, out / "test_set.csv", row_id_column="row_id")

    if config.plots:
        from .plots import save_rmse_boxplots

        save_rmse_boxplots(summary, out / "rmse_boxplots.png")

    _write_manifest(
        out,
        "experiment",
        {
            "input_csv": str(config.input_csv()),
            "ingestion": config.raw.get("ingestion"),
            "filter": filter_info,
            "split": {
                "test_fraction": split.test_fraction,
                "seed": split.seed,
                "mode": split.mode,
            },
            "plans": [_plan_dict(plan) for plan in plans],
            "evaluation": {
                "iterations": iterations,
                "base_seed": base_seed,
                "subset_fraction": subset_fraction,
                "k_subset": k_subset,
                "resplit_per_iteration": resplit,
            },
            "standardize": config.standardize(),
            "plots": config.plots,
        },
    )
    for result in summary.results:
        med = result.quantiles
        print(
            f"{result.strategy}: overall median "
            f"{med['overall_rmse']['median']:.6g}, underrepresented median "
            f"{med['underrepresented_rmse']['median']:.6g}"
        )
    return 0


def _winner_column(scores_ids: np.ndarray, path_a, path_b) -> np.ndarray:
    frame_a = pd.read_csv(path_a).set_index("row_id")
    frame_b = pd.read_csv(path_b).set_index("row_id")
    missing = [i for i in scores_ids if i not in frame_a.index or i not in frame_b.index]
    if missing:
        raise ValidationError(
            f"residual files do not cover row ids (first missing: {missing[0]})"
        )
    abs_a = np.abs(frame_a.loc[scores_ids, "residual"].to_numpy())
    abs_b = np.abs(frame_b.loc[scores_ids, "residual"].to_numpy())
    winners = np.where(abs_a < abs_b, "a", "b").astype("<U3")
    winners[np.abs(abs_a - abs_b) <= 1e-12] = "tie"
    return winners


def cmd_pca(args) -> int:
    config = RunConfig.from_args(args)
    out = config.output_dir()
    dataset, filter_info = _load_filtered(config)
    section = config.get("pca", {})
    components = int(section.get("components", 4))
    scale = bool(section.get("scale", True))
    residuals_a = section.get("residuals_a")
    residuals_b = section.get("residuals_b")
    if (residuals_a is None) != (residuals_b is None):
        raise ValidationError("pca winner join needs both residuals_a and residuals_b")

    model = fit_pca(dataset.features, components, scale=scale, fitted_on="input")
    scores = project(model, dataset.features)

    table = {"row_id": dataset.row_ids}
    for j in range(components):
        table[f"pc{j + 1}"] = scores[:, j]
    if dataset.batch_labels is not None:
        table["batch"] = dataset.batch_labels
    winners = None
    if residuals_a is not None:
        winners = _winner_column(dataset.row_ids, residuals_a, residuals_b)
        table["winner"] = winners
    pd.DataFrame(table).to_csv(out / "pc_scores.csv", index=False)
    pd.DataFrame(
        {
            "component": np.arange(1, components + 1),
            "explained_variance_ratio": model.explained_variance_ratios,
        }
    ).to_csv(out / "explained_variance.csv", index=False)

    if config.plots:
        from .plots import save_pca_scatter

        ratios = model.explained_variance_ratios
        pairs = [(0, 1)] + ([(2, 3)] if components >= 4 else [])
        for i, j in pairs:
            save_pca_scatter(
                scores,
                out / f"pca_pc{i + 1}_pc{j + 1}.png",
                components=(i, j),
                ratios=ratios,
                batch_labels=dataset.batch_labels,
            )
            if winners is not None:
                save_pca_scatter(
                    scores,
                    out / f"pca_pc{i + 1}_pc{j + 1}_winners.png",
                    components=(i, j),
                    ratios=ratios,
                    winners=winners,
                )

    _write_manifest(
        out,
        "pca",
        {
            "input_csv": str(config.input_csv()),
            "ingestion": config.raw.get("ingestion"),
            "filter": filter_info,
            "components": components,
            "scale": scale,
            "residuals_a": residuals_a,
            "residuals_b": residuals_b,
            "explained_variance_ratios": [
                float(r) for r in model.explained_variance_ratios
            ],
        },
    )
    ratios = ", ".join(f"{r:.1%}" for r in model.explained_variance_ratios)
    print(f"explained variance ratios: {ratios}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densample",
        description="Rebalance imbalanced regression data by covariate-space "
        "sampling and quantify the accuracy trade-off.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--input", help="override config input_csv")
        p.add_argument("--out", help="override config output_dir")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
        p.set_defaults(func=func)
        return p

    add("generate", cmd_generate, "write a synthetic imbalanced dataset")
    add("sample", cmd_sample, "draw rebalanced samples from a dataset")
    add("fit", cmd_fit, "fit the least-squares model on a dataset")
    add("evaluate", cmd_evaluate, "score a saved model on a test dataset")
    add("experiment", cmd_experiment,
        "run the multi-iteration strategy comparison")
    add("pca", cmd_pca, "project covariates onto principal components")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(json.dumps({"error": str(exc), "code": 2}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": str(exc), "code": 1}), file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())
