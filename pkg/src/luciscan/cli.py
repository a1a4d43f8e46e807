"""Command-line interface: ``luciscan scan|selftest|dump-cfg|dump-reaching|bench``.

Exit codes: 0 = clean, 1 = findings present (or self-test failures),
2 = fatal error (unreadable root, invalid configuration).
"""

from __future__ import annotations

import json
import logging
import sys
import tempfile
from pathlib import Path

import click

from . import __version__
from .cfg.builder import build_cfgs
from .cfg.dot import to_dot
from .cfg.functions import build_function_dictionary
from .cfg.inline import DEFAULT_MAX_INLINE_DEPTH, expand
from .dataflow import analyze, dump_reaching
from .frontend.files import DEFAULT_PATTERNS, RootNotFound
from .frontend.lexer import LuaSyntaxError
from .frontend.parser import parse_chunk
from .frontend.prescan import DEFAULT_FIXUPS, FixupError, load_fixup_table, prescan_source
from .pipeline import ConfigInvalid, LlmOptions, ScanConfig, scan
from .report.emit import emit
from .taint.triggers import ConfigError

EXIT_CLEAN, EXIT_FINDINGS, EXIT_FATAL = 0, 1, 2

# accepted config-file keys (flag names); LLM entries map to their LlmOptions field
CONFIG_KEYS = {
    "luci_only": "luci_only", "include": "include", "exclude": "exclude",
    "trigger_words": "trigger_words", "fixups": "fixups", "no_framework_rules": "framework_rules",
    "inline_depth": "inline_depth", "no_dict_approx": "dict_approx", "format": "output_format",
    "output": "output", "workers": "workers", "timings": "timings", "llm_prune": None,
    "llm_endpoint": "endpoint", "llm_model": "model", "llm_votes": "votes",
}
LLM_FLAGS = ("llm_endpoint", "llm_model", "llm_votes")


def fatal(message: str) -> None:
    click.echo(f"luciscan: error: {message}", err=True)
    sys.exit(EXIT_FATAL)


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        fatal(f"cannot read config file {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        fatal(f"{path}:{e.lineno}: invalid JSON: {e.msg}")
    if not isinstance(data, dict):
        fatal(f"{path}: top level must be an object")
    out = {}
    for key, value in data.items():
        norm = key.replace("-", "_")
        if norm not in CONFIG_KEYS:
            fatal(f"{path}: unknown configuration key {key!r}")
        out[norm] = value
    return out


def build_config(root: str, options: dict, file_options: dict) -> ScanConfig:
    """Merge config-file values under explicit flags and validate flag combinations."""
    merged = dict(file_options)
    for key, value in options.items():
        if value is not None and value != () and value is not False:
            merged[key] = value
    llm_prune = bool(merged.get("llm_prune"))
    given_llm = [k for k in LLM_FLAGS if merged.get(k) is not None]
    if given_llm and not llm_prune:
        flags = ", ".join("--" + k.replace("_", "-") for k in given_llm)
        raise ConfigInvalid(f"{flags} requires --llm-prune")
    llm = None
    if llm_prune:
        llm = LlmOptions()
        for k in LLM_FLAGS:
            if merged.get(k) is not None:
                setattr(llm, CONFIG_KEYS[k], merged[k])
    include = merged.get("include") or DEFAULT_PATTERNS
    config = ScanConfig(
        root=root,
        luci_only=bool(merged.get("luci_only", False)),
        include=tuple([include] if isinstance(include, str) else include),
        exclude=tuple(merged.get("exclude") or ()),
        trigger_words=merged.get("trigger_words"),
        fixups=merged.get("fixups"),
        framework_rules=not merged.get("no_framework_rules", False),
        inline_depth=int(merged.get("inline_depth", DEFAULT_MAX_INLINE_DEPTH)),
        dict_approx=not merged.get("no_dict_approx", False),
        llm=llm,
        output_format=merged.get("format", "json"),
        output=merged.get("output"),
        workers=int(merged.get("workers", 1)),
        timings=bool(merged.get("timings", False)),
    )
    config.validate()
    return config


@click.group()
@click.version_option(__version__, prog_name="luciscan")
@click.option("-v", "--verbose", count=True, help="Log progress to standard error (repeat for debug).")
def main(verbose: int) -> None:
    """Static taint analysis for Lua / LuCI firmware trees."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("scan")
@click.argument("root", type=click.Path())
@click.option("--luci-only", is_flag=True, default=None, help="Restrict to the usr/lib/lua/luci subtree when present.")
@click.option("--include", multiple=True, help=f"Glob of files to scan (repeatable; default {DEFAULT_PATTERNS[0]}).")
@click.option("--exclude", multiple=True, help="Glob of files to skip (repeatable).")
@click.option("--trigger-words", type=click.Path(), help="JSON file extending the source/sink/sanitizer vocabulary.")
@click.option("--fixups", type=click.Path(), help="Escape fixup table (FROM<TAB>TO per line).")
@click.option("--no-framework-rules", is_flag=True, default=None, help="Report flows regardless of web reachability.")
@click.option("--inline-depth", type=int, help=f"Maximum inlining depth (default {DEFAULT_MAX_INLINE_DEPTH}).")
@click.option("--no-dict-approx", is_flag=True, default=None,
              help="Keep every function definition instance in the dictionary (slower).")
@click.option("--llm-prune", is_flag=True, default=None, help="Label findings by LLM majority vote.")
@click.option("--llm-endpoint", help="OpenAI-compatible chat-completions URL.")
@click.option("--llm-model", help="Model name sent to the endpoint.")
@click.option("--llm-votes", type=int, help="Votes per finding (default 5).")
@click.option("--format", "format", type=click.Choice(["json", "text"]), help="Report format (default json).")
@click.option("--output", "-o", type=click.Path(), help="Write the report here instead of standard output.")
@click.option("--workers", "-j", type=int, help="Worker processes (default 1).")
@click.option("--timings", is_flag=True, default=None, help="Include wall times and peak RSS in stats.")
@click.option("--config", "config_file", type=click.Path(), help="JSON file with the same keys as the flags.")
def scan_cmd(root, config_file, **options):
    """Scan ROOT and report source-to-sink flows."""
    file_options = _load_config_file(config_file) if config_file else {}
    try:
        config = build_config(root, options, file_options)
        result = scan(config)
    except (ConfigInvalid, ConfigError, FixupError, RootNotFound) as e:
        fatal(str(e))
    data = emit(result.report, config.output_format)
    if config.output:
        try:
            Path(config.output).write_bytes(data)
        except OSError as e:
            fatal(f"cannot write {config.output}: {e.strerror}")
    else:
        click.echo(data.decode("utf-8"), nl=False)
    sys.exit(result.exit_code)


@main.command("selftest")
@click.argument("corpus", required=False, type=click.Path(exists=True, file_okay=False))
@click.option("--trigger-words", type=click.Path(), help="Override the corpus trigger_words.json.")
@click.option("--no-framework-rules", is_flag=True, help="Compare against the rules-off expectations.")
@click.option("--figures", type=click.Path(file_okay=False), help="Write recall CSV and chart here.")
def selftest_cmd(corpus, trigger_words, no_framework_rules, figures):
    """Run the annotated fixture corpus (default: the shipped one) and print recall per type."""
    from .selftest import format_table, run_selftest, write_figures
    try:
        summary = run_selftest(Path(corpus) if corpus else None, trigger_words, not no_framework_rules)
    except ConfigError as e:
        fatal(str(e))
    click.echo(format_table(summary), nl=False)
    if figures:
        for p in write_figures(summary, Path(figures)):
            click.echo(f"wrote {p}")
    sys.exit(summary.exit_code)


def _load_file_cfgs(path: str, fixups: str | None) -> list:
    table = load_fixup_table(fixups) if fixups else DEFAULT_FIXUPS
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        fatal(f"cannot read {path}: {e.strerror}")
    text = prescan_source(raw, table)[0].decode("latin-1")
    try:
        chunk = parse_chunk(text, path)
    except LuaSyntaxError as e:
        fatal(f"{path}:{e.line}:{e.col}: {e.message}")
    return build_cfgs(chunk, text, path)


def _select(cfgs: list, function: str | None) -> list:
    if function is None:
        return cfgs
    chosen = [c for c in cfgs if c.name == function]
    if not chosen:
        fatal(f"no function named {function!r}; available: {', '.join(c.name for c in cfgs)}")
    return chosen


@main.command("dump-cfg")
@click.argument("path", type=click.Path())
@click.option("--function", "function", help="Only this function (default: every Cfg in the file).")
@click.option("--inline", is_flag=True, help="Show graphs after callee inlining.")
@click.option("--inline-depth", type=int, default=DEFAULT_MAX_INLINE_DEPTH, show_default=True)
@click.option("--fixups", type=click.Path())
def dump_cfg_cmd(path, function, inline, inline_depth, fixups):
    """Print the control-flow graphs of a Lua file in DOT format."""
    cfgs = _load_file_cfgs(path, fixups)
    selected = _select(cfgs, function)
    if inline:
        fdict = build_function_dictionary(cfgs)
        selected = [expand(c, fdict, inline_depth) for c in selected]
    click.echo(to_dot(selected), nl=False)


@main.command("dump-reaching")
@click.argument("path", type=click.Path())
@click.option("--function", "function", help="Only this function (default: every Cfg in the file).")
@click.option("--fixups", type=click.Path())
def dump_reaching_cmd(path, function, fixups):
    """Print the reaching-definitions table (node id -> assignment ids) of each Cfg."""
    for cfg in _select(_load_file_cfgs(path, fixups), function):
        click.echo(dump_reaching(cfg, analyze(cfg)), nl=False)


@main.command("bench")
@click.option("--images", type=int, default=4, show_default=True, help="Copies of the module set.")
@click.option("--functions", type=int, default=200, show_default=True, help="Distinct functions per image.")
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Write CSV and chart here.")
def bench_cmd(images, functions, repeats, seed, out_dir):
    """Time the approximate and exact function dictionaries on a generated tree."""
    from .bench import generate_tree, run_bench, write_outputs
    with tempfile.TemporaryDirectory(prefix="luciscan-bench-") as tmp:
        shape = generate_tree(Path(tmp), images=images, functions=functions, seed=seed)
        result = run_bench(Path(tmp), repeats=repeats, shape=shape)
    d = result.to_dict()
    click.echo(f"instances={d['instances']} approx={d['approx_best_s']}s exact={d['exact_best_s']}s "
               f"reduction={100 * d['reduction']:.1f}% identical_findings={d['identical_findings']}")
    if out_dir:
        for p in write_outputs(result, Path(out_dir)):
            click.echo(f"wrote {p}")
    sys.exit(EXIT_CLEAN if result.identical else EXIT_FINDINGS)


if __name__ == "__main__":
    main()
