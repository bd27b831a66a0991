from __future__ import annotations

import io
import json
from contextlib import contextmanager
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterator, Optional

import pandas as pd
import typer

from crr_core.config import Settings
from crr_core.exceptions import ConfigError, CrrError, SimConfigError
from crr_core.logging import get_logger
from crr_models.censoring import WeightMode
from crr_models.dataset import ClusteredDataset, load_dataset, save_dataset
from crr_models.fitter import FitResult, fit
from crr_models.gof import ALL, check_draws, export_test_process, run_gof
from crr_models.simgen import CovariateDesign, SimConfig, SimModel, Study, generate
from crr_models.variance import Clustering, coefficient_table, sandwich

from .manifest import RunManifest
from .models import TestChoice, VarianceChoice
from .replicate import check_quality, replicate_study
from .report import fit_payload, frame_records, gof_payload, model_table, render_document

app = typer.Typer(help="Marginal additive subdistribution hazards for clustered competing risks")

log = get_logger("crr.cli")

CLUSTERING = {
    VarianceChoice.CLUSTER: Clustering.BY_CLUSTER,
    VarianceChoice.INDIVIDUAL: Clustering.BY_INDIVIDUAL,
}


@contextmanager
def _errors() -> Iterator[None]:
    """Library errors become a message on stderr and the category's exit code."""
    try:
        yield
    except CrrError as e:
        typer.echo(f"error: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(code=e.exit_code) from e


def _settings() -> Settings:
    settings = Settings.from_env()
    get_logger("crr", settings.log_level)
    return settings


def _emit(document: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(document, nl=False)
        return
    out.write_text(document, encoding="utf-8")
    log.info("wrote %s", out)


def _load(data: Path, cluster_var: str, tau: Optional[float]) -> ClusteredDataset:
    return load_dataset(data, {"cluster": cluster_var}, tau)


def _fit(
    ds: ClusteredDataset, cause: int, mode: WeightMode, quadrature: int, settings: Settings
) -> FitResult:
    return fit(ds, cause, mode, Q=quadrature, ghat_floor=settings.ghat_floor)


def _covariate_names(ds: ClusteredDataset, covariate: str) -> list[str] | str:
    if covariate == ALL:
        return ALL
    if covariate in ds.names:
        return [covariate]
    if covariate.isdigit() and int(covariate) < ds.p:
        return [ds.names[int(covariate)]]
    raise typer.BadParameter(f"unknown covariate {covariate!r}; have {', '.join(ds.names)}")


@app.command("fit")
def fit_command(
    data: Path = typer.Argument(..., exists=True, dir_okay=False, help="Delimited dataset"),
    cause: int = typer.Option(1, "--cause", "-k"),
    mode: WeightMode = typer.Option(WeightMode.IPCW, "--mode"),
    cluster_var: str = typer.Option("cluster", "--cluster-var"),
    tau: Optional[float] = typer.Option(None, "--tau"),
    quadrature: Optional[int] = typer.Option(None, "--quadrature"),
    variance: VarianceChoice = typer.Option(VarianceChoice.CLUSTER, "--variance"),
    level: float = typer.Option(0.95, "--level"),
    with_gof: bool = typer.Option(False, "--with-gof", help="Attach the additivity tests"),
    draws: Optional[int] = typer.Option(None, "--draws"),
    seed: int = typer.Option(0, "--seed"),
    baseline_out: Optional[Path] = typer.Option(None, "--baseline-out"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
) -> None:
    """
    Fit the model for one cause and report estimates, robust SEs, Σ̂ and the baseline.
    """
    with _errors():
        settings = _settings()
        Q = quadrature or settings.quadrature
        B = settings.draws if draws is None else draws
        if with_gof:
            check_draws(B)
        ds = _load(data, cluster_var, tau)
        res = _fit(ds, cause, mode, Q, settings)
        parts = sandwich(ds, res, clustering=CLUSTERING[variance])
        coef = coefficient_table(res, parts, level)

        report = None
        if with_gof:
            report = run_gof(res, functional_form=False, B=B, seed=seed, keep_draws=0)

        manifest = RunManifest.for_run(
            "fit",
            {
                "cause": cause,
                "mode": mode,
                "cluster_var": cluster_var,
                "tau": tau,
                "quadrature": Q,
                "variance": variance,
                "level": level,
                "with_gof": with_gof,
                "draws": B if with_gof else None,
            },
            seed=seed if with_gof else None,
            inputs={"data": data},
        )
        sigma = pd.DataFrame(parts.Sigma, columns=list(ds.names))
        sigma.insert(0, "", list(ds.names))
        sections = [("coefficients", coef), ("sigma", sigma)]
        payload: dict[str, Any] = fit_payload(res, parts, coef)
        if report is not None:
            table = model_table(coef, report)
            sections.append(("model", table))
            payload["gof"] = gof_payload(report)
            payload["model"] = frame_records(table)

        if baseline_out is not None:
            res.baseline_curve().to_csv(baseline_out, index=False, float_format="%.17g")
        title = f"fit cause {cause} ({mode.value})"
        _emit(render_document(title, sections, payload, manifest), out)


@app.command("gof")
def gof_command(
    data: Path = typer.Argument(..., exists=True, dir_okay=False),
    cause: int = typer.Option(1, "--cause", "-k"),
    mode: WeightMode = typer.Option(WeightMode.IPCW, "--mode"),
    cluster_var: str = typer.Option("cluster", "--cluster-var"),
    tau: Optional[float] = typer.Option(None, "--tau"),
    quadrature: Optional[int] = typer.Option(None, "--quadrature"),
    test: TestChoice = typer.Option(TestChoice.ALL, "--test"),
    covariate: str = typer.Option(ALL, "--covariate"),
    draws: Optional[int] = typer.Option(None, "--draws"),
    seed: int = typer.Option(0, "--seed"),
    add_one: bool = typer.Option(False, "--pvalue-add-one", help="Report (1 + count)/(B + 1)"),
    export_processes: Optional[Path] = typer.Option(None, "--export-processes"),
    plot_draws: int = typer.Option(50, "--plot-draws"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
) -> None:
    """
    Supremum tests of the additive structure and of covariate functional forms.
    """
    with _errors():
        settings = _settings()
        Q = quadrature or settings.quadrature
        B = settings.draws if draws is None else draws
        check_draws(B)
        ds = _load(data, cluster_var, tau)
        names = _covariate_names(ds, covariate)
        res = _fit(ds, cause, mode, Q, settings)
        report = run_gof(
            res,
            additivity=test in (TestChoice.ADDITIVITY, TestChoice.ALL),
            functional_form=test in (TestChoice.FUNCTIONAL_FORM, TestChoice.ALL),
            covariates=names,
            B=B,
            seed=seed,
            add_one=add_one,
            keep_draws=plot_draws if export_processes is not None else 0,
        )

        if export_processes is not None:
            export_processes.mkdir(parents=True, exist_ok=True)
            for entry in report.entries:
                if entry.process is None:
                    continue
                target = export_processes / f"{entry.test.value}_{entry.covariate}.csv"
                frame = export_test_process(entry.process, plot_draws)
                frame.to_csv(target, index=False, float_format="%.17g")

        manifest = RunManifest.for_run(
            "gof",
            {
                "cause": cause,
                "mode": mode,
                "cluster_var": cluster_var,
                "tau": tau,
                "quadrature": Q,
                "test": test,
                "covariate": covariate,
                "draws": B,
                "add_one": add_one,
            },
            seed=seed,
            inputs={"data": data},
        )
        document = render_document(
            f"goodness of fit cause {cause} ({mode.value})",
            [("tests", report.to_frame())],
            gof_payload(report),
            manifest,
        )
        _emit(document, out)


def _floats(raw: Optional[str], flag: str) -> Optional[tuple[float, ...]]:
    if raw is None:
        return None
    try:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as e:
        raise typer.BadParameter(f"{flag} expects comma-separated numbers, got {raw!r}") from e


def _sim_config(config_file: Optional[Path], overrides: dict[str, Any]) -> SimConfig:
    """SimConfig defaults, then the JSON config file, then explicitly given flags."""
    values: dict[str, Any] = {}
    if config_file is not None:
        try:
            values.update(json.loads(config_file.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as e:
            raise SimConfigError(f"cannot read config file {config_file}: {e}") from e
        known = {f.name for f in fields(SimConfig)}
        unknown = set(values) - known
        if unknown:
            raise SimConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimConfig(**values)
    except (TypeError, ValueError) as e:
        raise SimConfigError(str(e)) from e


@app.command("simulate")
def simulate_command(
    model: Optional[SimModel] = typer.Option(None, "--model"),
    n: Optional[int] = typer.Option(None, "--n", help="Number of clusters"),
    m: Optional[int] = typer.Option(None, "--m", help="Cluster size"),
    rho: Optional[float] = typer.Option(None, "--rho"),
    theta: Optional[float] = typer.Option(None, "--theta"),
    beta1: Optional[str] = typer.Option(None, "--beta1", help="Comma-separated"),
    beta2: Optional[str] = typer.Option(None, "--beta2", help="Comma-separated"),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Censoring rate"),
    covariates: Optional[CovariateDesign] = typer.Option(None, "--covariates"),
    horizon: Optional[float] = typer.Option(None, "--horizon"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    replicate: Optional[int] = typer.Option(None, "--replicate"),
    config_file: Optional[Path] = typer.Option(None, "--config", exists=True, dir_okay=False),
    truth: bool = typer.Option(False, "--truth", help="Add ground-truth columns"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
) -> None:
    """
    Generate one clustered competing-risks dataset.
    """
    with _errors():
        _settings()
        config = _sim_config(
            config_file,
            {
                "model": model,
                "n_clusters": n,
                "cluster_size": m,
                "rho": rho,
                "theta": theta,
                "beta1": _floats(beta1, "--beta1"),
                "beta2": _floats(beta2, "--beta2"),
                "gamma": gamma,
                "covariates": covariates,
                "horizon": horizon,
                "seed": seed,
                "replicate": replicate,
            },
        )
        sim = generate(config)
        inputs = {"config": config_file} if config_file is not None else None
        manifest = RunManifest.for_run(
            "simulate", {**config.to_dict(), "truth": truth}, seed=config.seed, inputs=inputs
        )
        if out is None:
            buf = io.StringIO()
            save_dataset(sim.dataset, buf, sim.truth if truth else None, manifest.to_dict())
            typer.echo(buf.getvalue(), nl=False)
        else:
            save_dataset(sim.dataset, out, sim.truth if truth else None, manifest.to_dict())
            log.info("wrote %d subjects in %d clusters to %s", sim.dataset.N, sim.dataset.n, out)


@app.command("replicate")
def replicate_command(
    study: Study = typer.Option(..., "--study"),
    reps: int = typer.Option(100, "--reps"),
    parallel: Optional[int] = typer.Option(None, "--parallel"),
    seed: int = typer.Option(0, "--seed"),
    cell: Optional[str] = typer.Option(None, "--cell", help="Run only the cell with this label"),
    draws: Optional[int] = typer.Option(None, "--draws"),
    alpha: float = typer.Option(0.05, "--alpha"),
    add_one: bool = typer.Option(False, "--pvalue-add-one"),
    progress: bool = typer.Option(True, "--progress/--no-progress"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
) -> None:
    """
    Monte Carlo replication of a study: estimation arms for table1/table2, rejection rates
    for table3. Exits with 4 when more than 5% of replicates fail.
    """
    with _errors():
        settings = _settings()
        P = parallel or settings.parallel
        B = settings.draws if draws is None else draws
        if study is Study.TABLE3:
            check_draws(B)
        if not 0 < alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")

        summary = replicate_study(
            study,
            reps,
            seed,
            cell=cell,
            parallel=P,
            draws=B,
            alpha=alpha,
            Q=settings.quadrature,
            ghat_floor=settings.ghat_floor,
            add_one=add_one,
            progress=progress,
        )
        manifest = RunManifest.for_run(
            "replicate",
            {
                "study": study,
                "reps": reps,
                "cell": cell,
                "draws": B if study is Study.TABLE3 else None,
                "alpha": alpha,
                "add_one": add_one,
            },
            seed=seed,
        )
        payload = {
            "study": study.value,
            "reps": reps,
            "total": summary.total,
            "failed": summary.failed,
            "failure_share": summary.failure_share,
            "mcse_defined": summary.mcse_defined,
            "rows": summary.frame.to_dict(orient="records"),
        }
        document = render_document(
            f"replicate {study.value}", [("summary", summary.frame)], payload, manifest
        )
        _emit(document, out)
        check_quality(summary)


if __name__ == "__main__":
    app()
