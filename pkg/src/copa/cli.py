"""Command-line front end.

Four subcommands: ``gen-synth`` writes a synthetic embedding file, ``adapt``
runs an episodic benchmark and writes a JSON-lines report, ``gap-shift``
sweeps the gap scale factor and writes a CSV curve, ``verify`` runs the
randomized bound suites. Every command is deterministic given its flags
(reports are byte-identical across runs, also with ``--jobs`` > 1) and every
report embeds a manifest record describing the run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence,
4 verifier violation.

An optional ``--config FILE`` supplies defaults as ``key = value`` lines
(keys are the long flag names, ``#`` starts a comment); explicit flags
override the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .adapt import METHODS, AdaptConfig, adapt_episode
from .errors import CopaError, DataError, DivergenceError, VerificationError
from .gap import aggregate, gap_shift_curve
from .sampler import (
    FIVEWAY_1SHOT,
    VARY_WAY_5SHOT,
    VARY_WAY_VARY_SHOT,
    TaskProtocol,
    episode_views,
    sample_episode,
)
from .store import EmbeddingSet, SynthSpec, generate_synthetic, load, save
from .verify import SUITE_NAMES, run_all_suites

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFY = 4

_PROTOCOLS = {
    "vary": VARY_WAY_VARY_SHOT,
    "vary-5shot": VARY_WAY_5SHOT,
    "5way-1shot": FIVEWAY_1SHOT,
}
_METHOD_FLAGS = {m.replace("_", "-"): m for m in METHODS}
DEFAULT_LAMBDA_GRID = "-1,-0.5,0,0.5,1,1.5,2,3"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict[str, str]:
    """Parse a `key = value` config file; comments start with #."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _UsageError(f"{path}:{lineno}: expected `key = value`")
                key, value = line.split("=", 1)
                values[key.strip().replace("_", "-")] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from exc
    return values


class _Options:
    """Declared options with flag > config-file > default resolution."""

    def __init__(self):
        self.specs: dict[str, tuple] = {}

    def add(self, parser, name: str, type_fn, default, help: str, choices=None):
        flag = "--" + name
        self.specs[name] = (type_fn, default)
        kwargs = {"default": None, "help": help, "dest": name.replace("-", "_")}
        if type_fn is bool:
            kwargs["action"] = "store_const"
            kwargs["const"] = True
        else:
            kwargs["type"] = str
            if choices:
                kwargs["metavar"] = "{" + ",".join(choices) + "}"
        parser.add_argument(flag, **kwargs)
        if choices:
            self.specs[name] = (type_fn, default, tuple(choices))

    def resolve(self, args: argparse.Namespace) -> dict:
        config = read_config(args.config) if getattr(args, "config", None) else {}
        unknown = set(config) - set(self.specs)
        if unknown:
            raise _UsageError(f"unknown config keys: {sorted(unknown)}")
        out = {}
        for name, spec in self.specs.items():
            type_fn, default = spec[0], spec[1]
            choices = spec[2] if len(spec) > 2 else None
            raw = getattr(args, name.replace("-", "_"))
            if raw is None and name in config:
                raw = config[name]
            if raw is None:
                value = default
            elif isinstance(raw, str):
                try:
                    value = _parse_bool(raw) if type_fn is bool else type_fn(raw)
                except ValueError as exc:
                    raise _UsageError(f"--{name}: {exc}") from exc
            else:
                value = raw
            if choices is not None and value is not None and value not in choices:
                raise _UsageError(f"--{name}: {value!r} is not one of {choices}")
            out[name.replace("-", "_")] = value
        return out


def _manifest(command: str, params: dict, input_path: str | None) -> dict:
    manifest = {
        "type": "manifest",
        "command": command,
        "artifact_version": __version__,
        # everything that shapes the run; the report destination is not part
        # of the experiment, so identical runs give identical reports
        "parameters": {k: params[k] for k in sorted(params) if k != "out"},
        "seed": params.get("seed"),
    }
    if input_path is not None:
        digest = hashlib.sha256(open(input_path, "rb").read()).hexdigest()
        manifest["input_digest"] = f"sha256:{digest}"
    return manifest


def _json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=False, separators=(", ", ": "))


def _build_parser() -> tuple[_Parser, dict[str, _Options]]:
    parser = _Parser(prog="copa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    options: dict[str, _Options] = {}

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key = value defaults file")
        opts = _Options()
        options[name] = opts
        return p, opts

    p, o = command("gen-synth", "write a deterministic synthetic embedding file")
    o.add(p, "dim", int, None, "embedding dimension")
    o.add(p, "classes", int, None, "number of classes")
    o.add(p, "per-class", int, None, "samples per class")
    o.add(p, "spread", float, 0.3, "intra-class gaussian std")
    o.add(p, "offset", float, 0.5, "shared positive mean shift")
    o.add(p, "seed", int, 0, "generator seed")
    o.add(p, "format", str, "binary", "file format", choices=("binary", "csv"))
    o.add(p, "out", str, None, "output path")

    p, o = command("adapt", "run an episodic adaptation benchmark")
    o.add(p, "input", str, None, "embedding file")
    o.add(p, "format", str, "binary", "embedding file format", choices=("binary", "csv"))
    o.add(p, "method", str, "url", "adaptation method",
          choices=tuple(_METHOD_FLAGS))
    o.add(p, "episodes", int, 100, "number of episodes")
    o.add(p, "protocol", str, "vary", "task protocol", choices=tuple(_PROTOCOLS))
    o.add(p, "seed", int, 0, "episode sampling seed")
    o.add(p, "iterations", int, 50, "adaptation steps per episode")
    o.add(p, "lr", float, 1e-3, "learning rate")
    o.add(p, "weight-decay", float, 0.1, "decoupled weight decay")
    o.add(p, "temperature", float, 0.2, "SCE temperature")
    o.add(p, "max-ways", int, 50, "maximum way count")
    o.add(p, "query-per-class", int, 10, "query samples per class")
    o.add(p, "max-support-total", int, 500, "total support cap")
    o.add(p, "max-support-per-class", int, 100, "per-class support cap")
    o.add(p, "jobs", int, 1, "parallel workers")
    o.add(p, "out", str, None, "report path (JSON lines); stdout if omitted")

    p, o = command("gap-shift", "sweep the gap scale factor and record query loss")
    o.add(p, "input", str, None, "embedding file")
    o.add(p, "format", str, "binary", "embedding file format", choices=("binary", "csv"))
    o.add(p, "episodes", int, 100, "number of episodes")
    o.add(p, "lambdas", str, DEFAULT_LAMBDA_GRID, "comma-separated scale factors")
    o.add(p, "protocol", str, "vary", "task protocol", choices=tuple(_PROTOCOLS))
    o.add(p, "seed", int, 0, "episode sampling seed")
    o.add(p, "max-ways", int, 50, "maximum way count")
    o.add(p, "query-per-class", int, 10, "query samples per class")
    o.add(p, "max-support-total", int, 500, "total support cap")
    o.add(p, "max-support-per-class", int, 100, "per-class support cap")
    o.add(p, "out", str, None, "curve path (CSV); stdout if omitted")

    p, o = command("verify", "run the randomized bound-verifier suites")
    o.add(p, "trials", int, 1000, "trials per suite")
    o.add(p, "seed", int, 0, "suite seed")
    o.add(p, "dims", str, "4,8,16", "comma-separated candidate dimensions")
    o.add(p, "inject-fault", bool, False,
          "self-test: perturb a tight bound by -1e-3 and expect failure")

    return parser, options


def _protocol_from(params: dict) -> TaskProtocol:
    return TaskProtocol(
        kind=_PROTOCOLS[params["protocol"]],
        max_ways=params["max_ways"],
        query_per_class=params["query_per_class"],
        max_support_total=params["max_support_total"],
        max_support_per_class=params["max_support_per_class"],
        seed=params["seed"],
    )


def _require(params: dict, names: list[str]) -> None:
    missing = [n for n in names if params[n.replace("-", "_")] is None]
    if missing:
        raise _UsageError("missing required flag(s): " + ", ".join("--" + n for n in missing))


def _write_lines(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_gen_synth(params: dict) -> int:
    _require(params, ["dim", "classes", "per-class", "out"])
    spec = SynthSpec(
        dim=params["dim"],
        n_classes=params["classes"],
        samples_per_class=params["per_class"],
        cluster_spread=params["spread"],
        cone_offset=params["offset"],
        seed=params["seed"],
    )
    save(generate_synthetic(spec), params["out"], params["format"])
    return EXIT_OK


_WORKER: dict = {}


def _init_worker(emb: EmbeddingSet, protocol: TaskProtocol, config: AdaptConfig):
    _WORKER["emb"] = emb
    _WORKER["protocol"] = protocol
    _WORKER["config"] = config


def _run_episode_record(index: int) -> dict:
    emb, protocol, config = _WORKER["emb"], _WORKER["protocol"], _WORKER["config"]
    return episode_record(emb, protocol, config, index)


def episode_record(
    emb: EmbeddingSet, protocol: TaskProtocol, config: AdaptConfig, index: int
) -> dict:
    task = sample_episode(emb, protocol, index)
    views = episode_views(emb, task)
    try:
        result = adapt_episode(*views, config)
    except DivergenceError as exc:
        raise DivergenceError(f"episode {index}: {exc}") from exc
    return {
        "type": "episode",
        "episode": index,
        "accuracy": result.query_accuracy,
        "gap_before": result.initial_gap,
        "gap_after": result.final_gap,
        "final_loss": result.final_loss,
    }


class _RecordView:
    def __init__(self, record: dict):
        self.query_accuracy = record["accuracy"]
        self.initial_gap = record["gap_before"]
        self.final_gap = record["gap_after"]


def cmd_adapt(params: dict) -> int:
    _require(params, ["input"])
    if params["episodes"] < 1:
        raise _UsageError("--episodes must be >= 1")
    if params["jobs"] < 1:
        raise _UsageError("--jobs must be >= 1")
    emb = load(params["input"], params["format"])
    protocol = _protocol_from(params)
    config = AdaptConfig(
        method=_METHOD_FLAGS[params["method"]],
        iterations=params["iterations"],
        learning_rate=params["lr"],
        weight_decay=params["weight_decay"],
        temperature=params["temperature"],
        seed=params["seed"],
    )
    indices = range(params["episodes"])
    if params["jobs"] == 1:
        records = [episode_record(emb, protocol, config, i) for i in indices]
    else:
        with ProcessPoolExecutor(
            max_workers=params["jobs"],
            initializer=_init_worker,
            initargs=(emb, protocol, config),
        ) as pool:
            records = list(pool.map(_run_episode_record, indices))
    records.sort(key=lambda r: r["episode"])

    lines = [_json_line(_manifest("adapt", params, params["input"]))]
    lines += [_json_line(r) for r in records]
    if len(records) >= 2:
        stats = aggregate([_RecordView(r) for r in records])
        lines.append(
            _json_line(
                {
                    "type": "summary",
                    "episodes": stats.n_episodes,
                    "mean_accuracy": stats.mean_accuracy,
                    "ci95_halfwidth": stats.ci95_halfwidth,
                    "mean_gap_before": stats.mean_gap_before,
                    "mean_gap_after": stats.mean_gap_after,
                }
            )
        )
    _write_lines(lines, params["out"])
    return EXIT_OK


def _parse_lambda_grid(text: str) -> list[float]:
    try:
        grid = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise _UsageError(f"--lambdas: {exc}") from exc
    if not grid:
        raise _UsageError("--lambdas: empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise _UsageError("--lambdas: grid must be strictly increasing")
    return grid


def cmd_gap_shift(params: dict) -> int:
    _require(params, ["input"])
    if params["episodes"] < 1:
        raise _UsageError("--episodes must be >= 1")
    grid = _parse_lambda_grid(params["lambdas"])
    emb = load(params["input"], params["format"])
    protocol = _protocol_from(params)
    totals = np.zeros(len(grid), dtype=np.float64)
    for index in range(params["episodes"]):
        task = sample_episode(emb, protocol, index)
        support, s_labels, query, q_labels = episode_views(emb, task)
        curve = gap_shift_curve(support, s_labels, query, q_labels, grid)
        totals += np.array(curve.losses)
    means = totals / params["episodes"]
    argmin = grid[int(np.argmin(means))]

    lines = ["# manifest: " + _json_line(_manifest("gap-shift", params, params["input"]))]
    lines.append("lambda,loss")
    lines += [f"{lam!r},{loss!r}" for lam, loss in zip(grid, means)]
    lines.append(f"# argmin_lambda: {argmin!r}")
    _write_lines(lines, params["out"])
    return EXIT_OK


def cmd_verify(params: dict) -> int:
    if params["trials"] < 1:
        raise _UsageError("--trials must be >= 1")
    try:
        dims = tuple(int(part) for part in params["dims"].split(",") if part.strip())
    except ValueError as exc:
        raise _UsageError(f"--dims: {exc}") from exc
    if not dims or any(d < 2 for d in dims):
        raise _UsageError("--dims must list integers >= 2")
    outcomes = run_all_suites(
        params["trials"], params["seed"], dims, inject_fault=params["inject_fault"]
    )
    by_name = {o.name: o for o in outcomes}
    print(", ".join(f"{name}: {by_name[name].passed}/{by_name[name].total}" for name in SUITE_NAMES))
    violations = [v for o in outcomes for v in o.violations]
    for violation in violations:
        print("violation: " + json.dumps(violation, sort_keys=True))
    if violations:
        raise VerificationError(f"{len(violations)} bound violation(s)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser, options = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (gen-synth, adapt, gap-shift, verify)")
        params = options[args.command].resolve(args)
        handler = {
            "gen-synth": cmd_gen_synth,
            "adapt": cmd_adapt,
            "gap-shift": cmd_gap_shift,
            "verify": cmd_verify,
        }[args.command]
        return handler(params)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CopaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
