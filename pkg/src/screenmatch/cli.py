"""Command line entry point wiring all modules together.

Exit codes: 0 success, 1 data error (structured JSON on stderr), 2 usage
error. All randomness flows from one ``--seed`` through named derivation,
so identical argv + seed produce byte-identical artifacts; metadata lines
never contain timestamps.
"""

import dataclasses
import functools
import json
import sys
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import __version__
from .encoder import EncoderConfig, init_model, load_checkpoint, save_checkpoint
from .errors import ScreenMatchError
from .evaluator import (
    category_report,
    evaluate_dataset,
    load_dataset,
    write_report_csv,
)
from .featurize import DEFAULT_TEXT_ENCODER, encoder_tag, tokenize_screen
from .matcher import MatchParams, correspond, heuristic_correspond, match_embeddings
from .screen import load_screen
from .service import OverlayGates, ServiceStore, entry_uid
from .synthcorpus import CorpusConfig, generate_pairs
from .trainer import TrainConfig, train, write_history_csv

DEFAULT_SEED = 0


def _fail(exc: BaseException) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "reason": str(exc)}),
               err=True)
    sys.exit(1)


def _data_errors(fn):
    """Map domain and I/O failures to exit code 1 with structured stderr."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ScreenMatchError, OSError, json.JSONDecodeError,
                tomllib.TOMLDecodeError, KeyError, ValueError) as exc:
            _fail(exc)
    return wrapper


def _read_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _dataclass_from_table(cls, table: dict, **overrides):
    """Build a config dataclass from a TOML table, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    merged = dict(table)
    merged.update(overrides)
    for key in ("translate_max", "categories"):
        if isinstance(merged.get(key), list):
            merged[key] = tuple(merged[key])
    return cls(**merged)


def _screen_paths(source: str) -> list:
    """A directory (or its screens/ subdir) or a single JSON file."""
    p = Path(source)
    if p.is_dir():
        if (p / "screens").is_dir():
            p = p / "screens"
        paths = sorted(p.glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no screen documents under {source}")
        return paths
    return [p]


def _write_json(doc: dict, out: str) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _metadata_line(seed: int, **extra) -> str:
    parts = [f"package={__version__}", f"seed={seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts) + "\n"


@click.group()
@click.version_option(__version__, prog_name="screenmatch")
def main():
    """Screen correspondence toolkit: corpus, training, matching, serving."""


@main.command("gen-corpus")
@click.option("--config", "config_path", default=None,
              help="TOML file with a [corpus] table.")
@click.option("--out", "out_dir", required=True)
@click.option("--seed", type=int, default=None,
              help=f"Overrides the config seed (default {DEFAULT_SEED}).")
@_data_errors
def gen_corpus(config_path, out_dir, seed):
    """Generate synthetic screens/, pairs/ and a manifest."""
    table = {}
    if config_path is not None:
        doc = _read_toml(config_path)
        table = doc.get("corpus", doc)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    cfg = _dataclass_from_table(CorpusConfig, table, **overrides)
    manifest = generate_pairs(cfg, out_dir)
    click.echo(json.dumps(manifest, sort_keys=True))


@main.command("train")
@click.option("--corpus", "corpus_dir", required=True)
@click.option("--val", "val_dir", required=True)
@click.option("--config", "config_path", default=None,
              help="TOML file with [model] and [train] tables.")
@click.option("--out", "out_ckpt", required=True)
@click.option("--history", "history_path", default=None,
              help="History CSV path (default: <out>.history.csv).")
@click.option("--no-relative", is_flag=True)
@click.option("--no-appearance", is_flag=True)
@click.option("--no-text", is_flag=True)
@click.option("--seed", type=int, default=DEFAULT_SEED)
@_data_errors
def train_cmd(corpus_dir, val_dir, config_path, out_ckpt, history_path,
              no_relative, no_appearance, no_text, seed):
    """Train the masked-reconstruction encoder on a screen corpus."""
    doc = _read_toml(config_path) if config_path else {}
    model_overrides = {"seed": seed}
    if no_relative:
        model_overrides["use_relative"] = False
    if no_appearance:
        model_overrides["use_appearance"] = False
    if no_text:
        model_overrides["use_text"] = False
    enc_cfg = _dataclass_from_table(EncoderConfig, doc.get("model", {}),
                                    **model_overrides)
    train_cfg = _dataclass_from_table(TrainConfig, doc.get("train", {}),
                                      seed=seed)
    corpus = [load_screen(p) for p in _screen_paths(corpus_dir)]
    val = [load_screen(p) for p in _screen_paths(val_dir)]
    model = init_model(enc_cfg)
    model, history = train(model, corpus, val, train_cfg)
    save_checkpoint(model, out_ckpt, encoder_tag(DEFAULT_TEXT_ENCODER))
    history_path = history_path or f"{out_ckpt}.history.csv"
    write_history_csv(history, history_path)
    with open(history_path, "r+", encoding="utf-8") as fh:
        body = fh.read()
        fh.seek(0)
        fh.write(_metadata_line(seed, model_version=model.model_version()) + body)
    best = min(history, key=lambda h: h.val_total)
    click.echo(json.dumps({
        "checkpoint": str(out_ckpt),
        "history": str(history_path),
        "model_version": model.model_version(),
        "epochs": len(history),
        "best_val_total": round(best.val_total, 6),
        "seed": seed,
    }, sort_keys=True))


@main.command("match")
@click.option("--screen-a", "screen_a", required=True)
@click.option("--screen-b", "screen_b", required=True)
@click.option("--model", "model_path", default=None)
@click.option("--heuristic", is_flag=True)
@click.option("--greedy", is_flag=True)
@click.option("-k", type=int, default=5, show_default=True)
@click.option("-c", type=float, default=0.4, show_default=True)
@click.option("--out", default="-", help="Mapping JSON path ('-' = stdout).")
@click.option("--seed", type=int, default=DEFAULT_SEED)
@_data_errors
def match_cmd(screen_a, screen_b, model_path, heuristic, greedy, k, c, out, seed):
    """Compute a correspondence mapping between two screen documents."""
    if not heuristic and model_path is None:
        raise click.UsageError("either --model CKPT or --heuristic is required")
    a, b = load_screen(screen_a), load_screen(screen_b)
    params = MatchParams(k=k, c=c,
                         assignment="greedy" if greedy else "optimal")
    if heuristic:
        mapping = heuristic_correspond(a, b, params)
    else:
        model = load_checkpoint(model_path)
        mapping = correspond(a, b, model, DEFAULT_TEXT_ENCODER, params)
    doc = mapping.as_dict()
    doc["meta"] = {"package": __version__, "seed": seed}
    _write_json(doc, out)


@main.command("eval")
@click.option("--pairs", "pairs_dir", required=True)
@click.option("--model", "model_path", default=None)
@click.option("--heuristic", is_flag=True)
@click.option("--ablation", multiple=True,
              type=click.Choice(["appearance", "text"]),
              help="Drop a modality at featurization (repeatable).")
@click.option("--greedy", is_flag=True)
@click.option("--skip-easy", is_flag=True,
              help="Skip same-screen pairs solvable from boxes alone.")
@click.option("-k", type=int, default=5, show_default=True)
@click.option("-c", type=float, default=0.4, show_default=True)
@click.option("--report", "report_path", required=True)
@click.option("--seed", type=int, default=DEFAULT_SEED)
@_data_errors
def eval_cmd(pairs_dir, model_path, heuristic, ablation, greedy, skip_easy,
             k, c, report_path, seed):
    """Score a correspondence pipeline against a labeled pair dataset."""
    if not heuristic and model_path is None:
        raise click.UsageError("either --model CKPT or --heuristic is required")
    dataset = load_dataset(pairs_dir)
    params = MatchParams(k=k, c=c,
                         assignment="greedy" if greedy else "optimal")
    if heuristic:
        def correspond_fn(a, b):
            return heuristic_correspond(a, b, params)
        version = "heuristic"
    else:
        model = load_checkpoint(model_path)
        mod_cfg = model.cfg.modalities()
        if ablation:
            mod_cfg = dataclasses.replace(
                mod_cfg,
                use_appearance=mod_cfg.use_appearance and "appearance" not in ablation,
                use_text=mod_cfg.use_text and "text" not in ablation)
        version = model.model_version()

        def correspond_fn(a, b):
            emb_a = model.embed_screen(a.screen_id, tuple(a.element_ids()),
                                       tokenize_screen(a, DEFAULT_TEXT_ENCODER, mod_cfg))
            emb_b = model.embed_screen(b.screen_id, tuple(b.element_ids()),
                                       tokenize_screen(b, DEFAULT_TEXT_ENCODER, mod_cfg))
            return match_embeddings(emb_a, emb_b, params, version)

    results = evaluate_dataset(dataset, correspond_fn, skip_easy=skip_easy)
    rows = category_report(results)
    write_report_csv(rows, report_path)
    with open(report_path, "r+", encoding="utf-8") as fh:
        body = fh.read()
        fh.seek(0)
        fh.write(_metadata_line(seed, model_version=version,
                                ablation=",".join(ablation) or "none") + body)
    overall = rows[-1]
    click.echo(json.dumps({
        "report": str(report_path),
        "model_version": version,
        "pairs": overall.n_pairs,
        "precision": round(overall.precision, 4),
        "recall": round(overall.recall, 4),
        "f1": round(overall.f1, 4),
    }, sort_keys=True))


@main.command("index")
@click.option("--store", "store_dir", required=True)
@click.option("--model", "model_path", required=True)
@click.argument("sources", nargs=-1, required=True)
@_data_errors
def index_cmd(store_dir, model_path, sources):
    """Embed and index screen documents into a store directory."""
    model = load_checkpoint(model_path)
    store = ServiceStore(store_dir)
    for source in sources:
        for path in _screen_paths(source):
            screen = load_screen(path)
            screen_id, element_ids = store.index_screen(screen, model)
            click.echo(json.dumps({"screen_id": screen_id,
                                   "elements": len(element_ids)},
                                  sort_keys=True))


@main.command("serve")
@click.option("--store", "store_dir", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8420, show_default=True)
@_data_errors
def serve_cmd(store_dir, model_path, host, port):
    """Serve the HTTP API over a store directory."""
    import uvicorn

    from .service.http import create_app

    model = load_checkpoint(model_path)
    store = ServiceStore(store_dir)
    app = create_app(store, model)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("annotate")
@click.option("--store", "store_dir", required=True)
@click.option("--screen-id", required=True)
@click.option("--element-id", required=True)
@click.option("--text", required=True)
@click.option("--author", default="")
@_data_errors
def annotate_cmd(store_dir, screen_id, element_id, text, author):
    """Attach an instruction to an indexed element."""
    from .service import Annotation

    store = ServiceStore(store_dir)
    ann = store.add_annotation(Annotation(screen_id=screen_id,
                                          element_id=element_id,
                                          text=text, author=author))
    click.echo(json.dumps({"uid": entry_uid(ann.screen_id, ann.element_id),
                           **ann.as_dict()}, sort_keys=True))


@main.command("overlay")
@click.option("--store", "store_dir", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--screen", "screen_path", required=True)
@click.option("--d-screen", type=float, default=0.5, show_default=True)
@click.option("--n-min", type=int, default=2, show_default=True)
@click.option("--s-min", type=float, default=0.5, show_default=True)
@click.option("--out", default="-")
@_data_errors
def overlay_cmd(store_dir, model_path, screen_path, d_screen, n_min, s_min, out):
    """Transfer stored annotations onto a target screen."""
    model = load_checkpoint(model_path)
    store = ServiceStore(store_dir)
    target = load_screen(screen_path)
    gates = OverlayGates(d_screen=d_screen, n_min=n_min, s_min=s_min)
    spec = store.transfer_overlay(target, model, gates=gates)
    _write_json(spec.as_dict(), out)


@main.command("replay")
@click.option("--store", "store_dir", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--trace", "trace_id", required=True)
@click.option("--step", "step_index", type=int, default=0, show_default=True)
@click.option("--screen", "screen_path", required=True,
              help="Live screen document to replay against.")
@click.option("--out", default="-")
@_data_errors
def replay_cmd(store_dir, model_path, trace_id, step_index, screen_path, out):
    """Locate a recorded trace step's target on a live screen."""
    model = load_checkpoint(model_path)
    store = ServiceStore(store_dir)
    steps = store.get_trace(trace_id)
    matching = [st for st in steps if st.index == step_index]
    if not matching:
        from .errors import UnknownId
        raise UnknownId(f"trace {trace_id!r} has no step {step_index}")
    live = load_screen(screen_path)
    result = store.replay_step(matching[0], live, model)
    _write_json(result.as_dict(), out)


if __name__ == "__main__":
    main()
