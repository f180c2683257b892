"""Command-line entry points.

Every command writes into ``--out`` a ``manifest.json`` (config, config
hash, seeds, library versions, output checksums) and either its outputs or
an ``error.json`` describing the failing stage; failures exit nonzero.
Outputs carry no timestamps, so equal configs give byte-identical runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
import traceback
from importlib import metadata
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .community import (
    calibrate,
    classify_roles,
    role_adjacency,
    write_role_adjacency_tsv,
    write_trace_tsv,
)
from .measures import top_k, write_scores_tsv
from .network import build_network, read_transactions_csv, write_edge_list, write_transactions_csv
from .nullmodels import write_relations_tsv
from .pipeline import PipelineConfig, config_hash, detect_roles, load_config, score_network
from .simulator import WorldSpec, ground_truth, simulate, write_ground_truth
from .validation import run_validation

logger = logging.getLogger("compsub")


class StageError(click.ClickException):
    exit_code = 2

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.exc = exc


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, command: str, config: PipelineConfig, seeds: dict):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "error.json").unlink(missing_ok=True)
        self.command = command
        self.config = config
        self.seeds = seeds
        self.outputs: list = []
        self.stages: list = []

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_json(self, name: str, payload) -> None:
        self.path(name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def stage(self, name: str, fn, *args, **kwargs):
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:  # report and abort the run
            self.fail(name, exc)
            raise StageError(name, exc) from exc
        self.stages.append(name)
        return result

    def fail(self, stage: str, exc: BaseException) -> None:
        payload = {
            "command": self.command,
            "stage": stage,
            "error": type(exc).__name__,
            "message": str(exc),
            "path": getattr(exc, "filename", None),
        }
        (self.out / "error.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.debug("".join(traceback.format_exception(exc)))
        self.write_manifest(status="failed")

    def write_manifest(self, status: str = "ok") -> None:
        digests = {}
        for name in sorted(set(self.outputs)):
            p = self.out / name
            if p.exists():
                digests[name] = hashlib.sha256(p.read_bytes()).hexdigest()
        manifest = {
            "command": self.command,
            "status": status,
            "config": self.config.to_dict(),
            "config_hash": config_hash(self.config),
            "seeds": self.seeds,
            "stages": self.stages,
            "outputs": digests,
            "versions": {
                "compsub": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "click": metadata.version("click"),
            },
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                                                encoding="utf-8")


# --- shared options -------------------------------------------------------------

_FLAG_FIELDS = {
    "seed": "seed",
    "null_model": "null_model",
    "measure": "measure",
    "alpha_m": "alpha_m",
    "alpha_l": "alpha_l",
    "qc": "q_c",
    "qs": "q_s",
    "threads": "threads",
}


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file."),
        click.option("--seed", type=int, help="Seed for the simulator and community detection."),
        click.option("--null-model", type=click.Choice(["er", "bicm-poisson", "bicm-chernoff"])),
        click.option("--measure", type=click.Choice(
            ["original", "original_directed", "randomised_config", "randomised_config_directed"])),
        click.option("--alpha-m", type=float, help="Significance level for complements."),
        click.option("--alpha-l", type=float, help="Significance level for substitutes."),
        click.option("--qc", type=float, help="Complement threshold quantile."),
        click.option("--qs", type=float, help="Substitute threshold quantile."),
        click.option("--threads", type=int, help="Worker cap."),
        click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def resolve_config(config_path, **flags) -> PipelineConfig:
    """Config file values overridden by any flag that was given."""
    try:
        base = load_config(config_path) if config_path else PipelineConfig()
        changes = {_FLAG_FIELDS[k]: v for k, v in flags.items() if k in _FLAG_FIELDS and v is not None}
        return base.replace(**changes) if changes else base
    except FileNotFoundError as exc:
        raise click.ClickException(f"config file not found: {exc.filename}") from exc
    except (ValueError, TypeError) as exc:
        raise click.ClickException(f"invalid configuration: {exc}") from exc


def _start(command, out, config_path, input_path=None, **flags):
    config = resolve_config(config_path, **flags)
    if input_path is not None:
        config = config.replace(transactions=str(input_path))
    run = Run(Path(out), command, config, {"detector": config.seed})
    return config, run


def _load_network(run: Run, config: PipelineConfig):
    if not config.transactions:
        run.fail("ingest", FileNotFoundError("no transactions file given (--input or config 'transactions')"))
        raise click.ClickException("no transactions file given")
    records = run.stage("ingest", read_transactions_csv, config.transactions)
    net = run.stage("build", build_network, records, config.frequency_filter)
    return records, net


# --- writers --------------------------------------------------------------------


def _write_network(run: Run, net) -> None:
    run.write_json("network_stats.json", net.summary())
    write_edge_list(net, run.path("edges.tsv"))


def _write_topk(run: Run, scored, k: int) -> None:
    comp = top_k(scored.wc, k)
    subs = top_k(scored.ws, k)
    labels = scored.labels
    with run.path("topk.tsv").open("w", encoding="utf-8") as fh:
        fh.write("query\trank\tcomplement\tcomplement_score\tsubstitute\tsubstitute_score\n")
        for j, q in enumerate(labels):
            for r in range(k):
                c = comp[j][r] if r < len(comp[j]) else None
                s = subs[j][r] if r < len(subs[j]) else None
                if c is None and s is None:
                    break
                fh.write("\t".join([
                    q, str(r + 1),
                    labels[c[0]] if c else "", f"{c[1]:.6f}" if c else "",
                    labels[s[0]] if s else "", f"{s[1]:.6f}" if s else "",
                ]) + "\n")


def _write_roles(run: Run, scored, roles: dict, ratio: float) -> None:
    rows = []
    for kind, part in roles.items():
        run.write_json(f"partition_{kind}.json", part.to_dict())
        w = scored.wc.values if kind == "comp" else scored.ws.values
        adj = role_adjacency(w, part, drop_isolated=True)
        write_role_adjacency_tsv(adj, run.path(f"role_adjacency_{kind}.tsv"))
        for r, cls in zip(adj.roles, classify_roles(adj, ratio)):
            rows.append((kind, int(r), int(adj.sizes[list(adj.roles).index(r)]), cls.value))
    with run.path("role_classes.tsv").open("w", encoding="utf-8") as fh:
        fh.write("network\trole\tsize\tclass\n")
        for row in rows:
            fh.write("\t".join(map(str, row)) + "\n")


def recovery_report(scored, truth: dict) -> dict:
    """Compare positive score pairs with known complement / substitute pairs."""
    labels = scored.labels
    out = {}
    for kind, mat, key in (("complement", scored.wc, "complement_pairs"), ("substitute", scored.ws, "substitute_pairs")):
        found = {tuple(sorted((labels[i], labels[j]))) for i, j in mat.positive_pairs()}
        true = {tuple(sorted(p)) for p in truth[key]}
        out[kind] = {
            "n_true": len(true),
            "n_found": len(found),
            "true_positives": len(found & true),
            "false_positives": sorted(map(list, found - true)),
            "missed": sorted(map(list, true - found)),
            "exact": found == true,
        }
    return out


# --- commands -------------------------------------------------------------------


@click.group()
@click.version_option(__version__, prog_name="compsub")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Complement and substitute extraction from transaction data."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@main.command("simulate")
@common_options
@click.option("--n-transactions", type=int, default=None, help="Number of simulated draws.")
def simulate_cmd(config_path, out, n_transactions, **flags):
    """Simulate the illustrative shopper world."""
    config, run = _start("simulate", out, config_path, **flags)
    if flags.get("seed") is None and "seed" not in config.world:
        raise click.UsageError("simulate needs --seed or world.seed in the config")
    world = dict(config.world)
    world.setdefault("seed", config.seed)
    if flags.get("seed") is not None:
        world["seed"] = flags["seed"]
    if n_transactions is not None:
        world["n_transactions"] = n_transactions
    run.config = config.replace(world=world)
    run.seeds = {"world": world["seed"]}
    spec = run.stage("simulate", lambda: WorldSpec(**{k: tuple(v) if isinstance(v, list) else v
                                                      for k, v in world.items()}))
    result = run.stage("generate", simulate, spec)
    write_transactions_csv(result.records, run.path("transactions.csv"))
    write_ground_truth(spec, run.path("ground_truth.json"), result.n_empty)
    run.write_manifest()
    click.echo(f"wrote {len(result.records)} purchase rows ({result.n_empty} empty draws dropped) to {out}")


@main.command("build")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Transactions CSV.")
def build_cmd(config_path, out, input_path, **flags):
    """Build the product-purchase network and report its statistics."""
    config, run = _start("build", out, config_path, input_path, **flags)
    _, net = _load_network(run, config)
    _write_network(run, net)
    run.write_manifest()


@main.command("relations")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
def relations_cmd(config_path, out, input_path, **flags):
    """Run the null-model test and export relation pairs."""
    config, run = _start("relations", out, config_path, input_path, **flags)
    _, net = _load_network(run, config)
    from .nullmodels import relation_matrices

    rel = run.stage("relations", relation_matrices, net, config.null_spec)
    write_relations_tsv(rel, net.product_labels, run.path("relations.tsv"))
    run.write_manifest()


@main.command("scores")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
def scores_cmd(config_path, out, input_path, **flags):
    """Compute complementarity and substitutability scores."""
    config, run = _start("scores", out, config_path, input_path, **flags)
    _, net = _load_network(run, config)
    scored = run.stage("scores", score_network, net, config)
    write_scores_tsv(scored.wc, scored.labels, run.path("wc.tsv"))
    write_scores_tsv(scored.ws, scored.labels, run.path("ws.tsv"))
    _write_topk(run, scored, config.top_k)
    run.write_manifest()


@main.command("roles")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
def roles_cmd(config_path, out, input_path, **flags):
    """Detect complement and substitute roles."""
    config, run = _start("roles", out, config_path, input_path, **flags)
    _, net = _load_network(run, config)
    scored = run.stage("scores", score_network, net, config)
    roles = run.stage("roles", detect_roles, scored, config)
    _write_roles(run, scored, roles, config.dominance_ratio)
    run.write_manifest()


def _run_calibration(run: Run, net, config: PipelineConfig) -> PipelineConfig:
    res = run.stage(
        "calibrate", calibrate, net, None, config.calibration_grid(), config.baseline_values(), config.nmi_floor,
        config.null_model, config.measure, config.seed, config.n_trials,
    )
    write_trace_tsv(res, run.path("calibration_trace.tsv"))
    run.write_json("calibration.json", {
        "alpha_m": res.alpha_m, "alpha_l": res.alpha_l, "q_c": res.q_c, "q_s": res.q_s,
        "theta_c": res.theta_c, "theta_s": res.theta_s, "baseline_retained": res.fell_back,
    })
    return config.replace(alpha_m=res.alpha_m, alpha_l=res.alpha_l, q_c=res.q_c, q_s=res.q_s)


@main.command("calibrate")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
def calibrate_cmd(config_path, out, input_path, **flags):
    """Select significance levels and thresholds by partition stability."""
    config, run = _start("calibrate", out, config_path, input_path, **flags)
    _, net = _load_network(run, config)
    _run_calibration(run, net, config)
    run.write_manifest()


@main.command("validate")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
@click.option("--flavour", type=click.Path(dir_okay=False), help="CSV ingredient,compound.")
@click.option("--recipes", type=click.Path(dir_okay=False), help="cuisine<TAB>ingredient;... per line.")
@click.option("--matches", type=click.Path(dir_okay=False), help="CSV product_id,flavour_ingredients,recipe_ingredient.")
@click.option("--hierarchy", type=click.Path(dir_okay=False), help="CSV product_id,L1,L2,L3,L4.")
@click.option("--split-date", help="ISO date splitting the data for the robustness check.")
def validate_cmd(config_path, out, input_path, flavour, recipes, matches, hierarchy, split_date, **flags):
    """External validation reports."""
    config, run = _start("validate", out, config_path, input_path, **flags)
    extra = {k: v for k, v in dict(flavour=flavour, recipes=recipes, matches=matches, hierarchy=hierarchy,
                                   split_date=split_date).items() if v is not None}
    config = config.replace(**extra)
    run.config = config
    records, net = _load_network(run, config)
    notices = run.stage("validate", run_validation, records, net, config, run.out)
    run.outputs.extend(notices.pop("files"))
    for n in notices["notices"]:
        click.echo(n)
    run.write_manifest()


@main.command("pipeline")
@common_options
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
@click.option("--truth", type=click.Path(dir_okay=False), help="Ground-truth JSON for a recovery report.")
@click.option("--calibrate/--no-calibrate", "do_calibrate", default=None, help="Calibrate parameters first.")
def pipeline_cmd(config_path, out, input_path, truth, do_calibrate, **flags):
    """Build, test, score, and extract roles in one run."""
    config, run = _start("pipeline", out, config_path, input_path, **flags)
    if do_calibrate is not None:
        config = config.replace(calibrate=do_calibrate)
        run.config = config
    _, net = _load_network(run, config)
    _write_network(run, net)
    if config.calibrate:
        config = _run_calibration(run, net, config)
    scored = run.stage("scores", score_network, net, config)
    write_relations_tsv(scored.relations, scored.labels, run.path("relations.tsv"))
    write_scores_tsv(scored.wc, scored.labels, run.path("wc.tsv"))
    write_scores_tsv(scored.ws, scored.labels, run.path("ws.tsv"))
    _write_topk(run, scored, config.top_k)
    roles = run.stage("roles", detect_roles, scored, config)
    _write_roles(run, scored, roles, config.dominance_ratio)
    if truth:
        gt = run.stage("truth", lambda: json.loads(Path(truth).read_text(encoding="utf-8")))
        report = recovery_report(scored, gt)
        run.write_json("recovery.json", report)
        click.echo(f"complements exact: {report['complement']['exact']}; "
                   f"substitutes exact: {report['substitute']['exact']}")
    run.write_manifest()


def run_cli(argv=None) -> int:
    try:
        main.main(args=argv, prog_name="compsub", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 1
    return 0


__all__ = ["main", "run_cli", "recovery_report", "resolve_config", "ground_truth"]

if __name__ == "__main__":  # pragma: no cover
    sys.exit(run_cli())
