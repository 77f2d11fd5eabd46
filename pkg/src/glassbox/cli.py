"""Command-line entry points for the full pipeline.

Every command accepts the same configuration flags (unused ones are simply
carried into provenance), plus --home / $GLASSBOX_HOME for the artifact root.
"""

import functools
import json

import click

from . import pipeline
from .config import PipelineConfig, resolve_home
from .errors import GlassboxError

# (config field, flag, type, help) — flags mirror the config field names,
# except the single-letter fields which get readable spellings.
_OPTIONS = [
    ("gamma", "--gamma", float, "activation threshold on z/mu"),
    ("k", "--top-k", int, "frequent features kept per class"),
    ("l", "--top-l", int, "features reported per inference"),
    ("stats_top_n", "--stats-top-n", int,
     "per-class statistics pool size (0 = use every sample)"),
    ("rf_tau", "--rf-tau", float, "receptive-field intensity cutoff"),
    ("rf_radius", "--rf-radius", int, "receptive-field dilation radius"),
    ("num_classes", "--num-classes", int, "classes in the dataset"),
    ("pool_size", "--pool-size", int, "size of the attribute pool"),
    ("attributes_per_class", "--attributes-per-class", int,
     "attributes composing each class"),
    ("train_per_class", "--train-per-class", int, "training samples per class"),
    ("test_per_class", "--test-per-class", int, "test samples per class"),
    ("distractor_probability", "--distractor-probability", float,
     "chance of one off-class attribute per sample"),
    ("noise_level", "--noise-level", float, "uniform pixel noise amplitude"),
    ("architecture", "--architecture", click.Choice(["reference", "small"]),
     "network size"),
    ("epochs", "--epochs", int, "training epochs"),
    ("batch_size", "--batch-size", int, "training batch size"),
    ("learning_rate", "--learning-rate", float, "SGD learning rate"),
    ("auto_threshold", "--auto-threshold", float,
     "co-occurrence precision needed to auto-assign a label"),
    ("images_per_feature", "--images-per-feature", int,
     "annotation images sampled per feature"),
    ("workers_per_question", "--workers-per-question", int,
     "responses collected per (sample, question)"),
    ("pcr_overlap", "--pcr-overlap", float,
     "attribute overlap fraction the PCR oracle requires"),
    ("diagnose_low", "--diagnose-low", float, "low-ratio diagnosis threshold"),
    ("bins", "--bins", int, "joint-distribution bins per axis"),
    ("ablation_max_deleted", "--ablation-max-deleted", int,
     "deepest point of the deletion curves"),
    ("ablation_trials", "--ablation-trials", int,
     "random draws averaged per deletion count"),
    ("seed", "--seed", int, "root seed for data, init, and shuffling"),
]


def _config_flags(fn):
    for name, flag, ftype, help_text in reversed(_OPTIONS):
        fn = click.option(flag, name, type=ftype, default=None,
                          help=help_text)(fn)
    fn = click.option("--home", "home", type=click.Path(), default=None,
                      help="artifact directory (default $GLASSBOX_HOME)")(fn)
    return fn


def _build(kwargs):
    home = resolve_home(kwargs.pop("home"))
    overrides = {k: v for k, v in kwargs.items() if v is not None}
    if overrides.get("stats_top_n") == 0:
        overrides["stats_top_n"] = None
    return PipelineConfig(**overrides), home


def _command(name, fn):
    """Wrap a pipeline stage: build config, run, echo the result as JSON."""

    @main.command(name)
    @_config_flags
    @functools.wraps(fn)
    def run(**kwargs):
        cfg, home = _build(kwargs)
        try:
            result = fn(cfg, home)
        except GlassboxError as e:
            raise click.ClickException(str(e)) from e
        click.echo(json.dumps(result, sort_keys=True))

    return run


@click.group()
def main():
    """Train a small convnet and inspect what its features respond to."""


_command("gen-data", pipeline.cmd_gen_data)
_command("train", pipeline.cmd_train)
_command("analyze", pipeline.cmd_analyze)
_command("rf", pipeline.cmd_rf)
_command("ablate", pipeline.cmd_ablate)
_command("annotate-export", pipeline.cmd_annotate_export)
_command("auto-annotate", pipeline.cmd_auto_annotate)


@main.command("consistency")
@_config_flags
@click.option("--oracle", is_flag=True,
              help="score with geometric oracles instead of worker responses")
def consistency(oracle, **kwargs):
    cfg, home = _build(kwargs)
    try:
        result = pipeline.cmd_consistency(cfg, home, oracle=oracle)
    except GlassboxError as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps(result, sort_keys=True))


@main.command("report")
@_config_flags
def report(**kwargs):
    from .report import generate_report

    cfg, home = _build(kwargs)
    try:
        result = generate_report(cfg, home)
    except GlassboxError as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps(result, sort_keys=True))


@main.command("serve")
@_config_flags
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--ui", "ui_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of built UI assets to serve at /.")
def serve(host, port, ui_dir, **kwargs):
    import uvicorn

    from .server import create_app

    cfg, home = _build(kwargs)
    uvicorn.run(create_app(home, cfg, ui=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
