"""Approximate vs. exact function-dictionary benchmark on a synthetic firmware tree.

The generated tree imitates a vendor corpus: several firmware "images" each
carry a copy of the same LuCI controller modules (same function names,
different paths), and functions call each other densely so that inlining
performs many dictionary lookups. The exact dictionary keeps every
definition instance and resolves a name by scanning all of them; the
approximate dictionary keeps one entry per name.
"""

from __future__ import annotations

import csv
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from .pipeline import ScanConfig, scan

SINKS = ("os.execute", "io.popen", "luci.sys.call", "os.remove")
# library calls typical of LuCI code; none is defined in the tree, so each
# one is an unresolved lookup during call-site indexing and inlining
LIBRARY = ("string.lower", "string.upper", "string.len", "string.reverse", "tostring",
           "luci.util.trim", "luci.util.split", "luci.util.pcdata", "table.concat",
           "luci.http.urlencode", "nixio.fs.access", "luci.ip.checkip4")


def generate_tree(dest: Path, images: int = 4, functions: int = 200, modules: int = 10,
                  fanout: int = 2, library_calls: int = 8, sink_every: int = 12, seed: int = 0) -> dict:
    """Write the synthetic tree; returns a description of its shape."""
    rng = random.Random(seed)
    dest = Path(dest)
    names = [f"bm{i:03d}" for i in range(functions)]
    per_module = max(1, functions // modules)
    bodies = {}
    for i, name in enumerate(names):
        callees = rng.sample([n for n in names if n != name], fanout)
        lines = [f"function {name}(arg)"]
        if i % 7 == 0:
            lines.append("    local v = luci.http.formvalue(\"p\")")
        else:
            lines.append(f"    local v = \"{name}\" .. arg")
        libs = rng.sample(LIBRARY, min(library_calls, len(LIBRARY)))
        lines.append("    local meta = { " + ", ".join(f"{f}(arg)" for f in libs) + " }")
        for c in callees:
            lines.append(f"    {c}(v)")
        if i % sink_every == 0:
            lines.append(f"    {SINKS[i % len(SINKS)]}(\"/bin/x \" .. v)")
        lines.append("end")
        bodies[name] = lines
    module_texts = []
    for m in range(0, functions, per_module):
        chunk = names[m:m + per_module]
        text = [f"module(\"luci.controller.bench.m{m // per_module:02d}\", package.seeall)", ""]
        for n in chunk:
            text.extend(bodies[n])
            text.append("")
        module_texts.append("\n".join(text))
    files = 0
    for img in range(images):
        base = dest / f"image{img:02d}" / "usr/lib/lua/luci/controller/bench"
        base.mkdir(parents=True, exist_ok=True)
        for k, text in enumerate(module_texts):
            (base / f"m{k:02d}.lua").write_text(text, encoding="utf-8")
            files += 1
    return {"images": images, "functions": functions, "instances": images * functions,
            "files": files, "fanout": fanout, "library_calls": library_calls, "seed": seed}


@dataclass
class BenchResult:
    shape: dict
    approx_s: list = field(default_factory=list)
    exact_s: list = field(default_factory=list)
    approx_findings: int = 0
    exact_findings: int = 0
    identical: bool = False

    @property
    def approx_best(self) -> float:
        return min(self.approx_s)

    @property
    def exact_best(self) -> float:
        return min(self.exact_s)

    @property
    def reduction(self) -> float:
        """Fraction of the exact-mode wall time saved by the approximate dictionary."""
        return 1.0 - self.approx_best / self.exact_best if self.exact_best else 0.0

    def to_dict(self) -> dict:
        return {**self.shape, "approx_s": self.approx_s, "exact_s": self.exact_s,
                "approx_best_s": round(self.approx_best, 4), "exact_best_s": round(self.exact_best, 4),
                "reduction": round(self.reduction, 4), "approx_findings": self.approx_findings,
                "exact_findings": self.exact_findings, "identical_findings": self.identical}


def _finding_set(report) -> set:
    return {(f.type, f.file, f.function, f.sink["name"], f.sink["line"], f.sink["arg"], f.source["name"])
            for f in report.findings}


def run_bench(root: Path, repeats: int = 1, inline_depth: int = 3, shape: dict | None = None) -> BenchResult:
    res = BenchResult(shape or {})
    sets = {}
    for approx, times in ((True, res.approx_s), (False, res.exact_s)):
        for _ in range(repeats):
            t = time.perf_counter()
            out = scan(ScanConfig(str(root), inline_depth=inline_depth, dict_approx=approx))
            times.append(round(time.perf_counter() - t, 4))
        sets[approx] = _finding_set(out.report)
    res.approx_findings, res.exact_findings = len(sets[True]), len(sets[False])
    res.identical = sets[True] == sets[False]
    return res


def write_outputs(result: BenchResult, out_dir: Path) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "bench_dictionary.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "run", "seconds", "findings"])
        for i, s in enumerate(result.approx_s):
            w.writerow(["approximate", i, s, result.approx_findings])
        for i, s in enumerate(result.exact_s):
            w.writerow(["exact", i, s, result.exact_findings])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(["approximate", "exact"], [result.approx_best, result.exact_best], color=["tab:green", "tab:gray"])
    ax.set_ylabel("wall time (s, best of runs)")
    ax.set_title(f"{result.shape.get('instances', '?')} function instances: "
                 f"{100 * result.reduction:.0f}% less time")
    fig.tight_layout()
    png_path = out_dir / "bench_dictionary.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]
