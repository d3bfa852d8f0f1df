"""Command-line front end: ``chirex toroid``, ``chirex ext`` and ``chirex report``.

Exit codes: 0 when every requested check passes, 1 when a check fails (or
is inconclusive where that matters), 2 for an invalid configuration or a
malformed certificate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from typing import Sequence

from . import __version__
from .extension import Extension, ExtensionError, ExtensionSpec
from .lattice import LatticeError, LatticeSpec
from .permengine import default_threads
from .toroid import ToroidContext, ToroidError
from .verifier import (
    ALL_CHECKS,
    FAIL,
    PASS,
    certify,
    check_eta,
    check_toroid,
)

log = logging.getLogger("chirex")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

TOROID_CHECKS = ("toroid", "eta")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int | None = None
    a: int | None = None
    k: int | None = None
    p: int | None = None
    checks: tuple[str, ...] = ALL_CHECKS
    mode: str = "full"
    seed: int = 0
    samples: int = 100_000
    threads: int = field(default_factory=default_threads)
    allow_small_a: bool = False
    strict: bool = False
    output: str | None = None
    format: str = "text"
    timing: bool = True

    def lattice(self) -> LatticeSpec:
        for name in ("n", "a", "k"):
            if getattr(self, name) is None:
                raise ConfigError(f"--{name} is required")
        return LatticeSpec(self.n, self.a, self.k, allow_small_a=self.allow_small_a)

    def validate(self, allowed: Sequence[str]) -> None:
        bad = [c for c in self.checks if c not in allowed]
        if bad:
            raise ConfigError(f"unknown checks {bad}; choose from {list(allowed)} or 'all'")
        if self.mode not in ("full", "sampled"):
            raise ConfigError(f"mode must be 'full' or 'sampled', got {self.mode!r}")
        if self.format not in ("json", "text"):
            raise ConfigError(f"format must be 'json' or 'text', got {self.format!r}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")


def parse_checks(raw, allowed: Sequence[str]) -> tuple[str, ...]:
    items = raw.split(",") if isinstance(raw, str) else list(raw)
    items = [str(c).strip() for c in items if str(c).strip()]
    if not items:
        raise ConfigError("empty check list")
    if "all" in items:
        return tuple(allowed)
    return tuple(c for c in allowed if c in items) + tuple(c for c in items if c not in allowed)


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return data


def build_config(args: argparse.Namespace, allowed: Sequence[str]) -> RunConfig:
    """Config file values first, then every flag the user actually gave."""
    merged: dict = {}
    if args.config:
        merged.update(_load_config_file(args.config))
    for name in ("n", "a", "k", "p", "checks", "mode", "seed", "samples", "threads", "output"):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    for name in ("allow_small_a", "strict"):
        if getattr(args, name, False):
            merged[name] = True
    if args.json:
        merged["format"] = "json"
    if args.no_timing:
        merged["timing"] = False
    if "checks" in merged:
        merged["checks"] = parse_checks(merged["checks"], allowed)
    else:
        merged["checks"] = tuple(allowed)
    for name in ("n", "a", "k", "p", "seed", "samples", "threads"):
        if name in merged and merged[name] is not None and not isinstance(merged[name], int):
            raise ConfigError(f"{name} must be an integer, got {merged[name]!r}")
    cfg = RunConfig(**merged)
    cfg.validate(allowed)
    return cfg


# ------------------------------------------------------------------ commands


def _emit(cfg: RunConfig, payload: dict, text: str) -> None:
    out = json.dumps(payload, indent=2) + "\n" if cfg.format == "json" else text
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _check_lines(checks: Sequence[dict]) -> list[str]:
    lines = []
    width = max((len(c["name"]) for c in checks), default=0)
    for c in checks:
        line = f"  {c['name']:<{width}}  {c['status']}"
        if "runtime_ms" in c:
            line += f"  ({c['runtime_ms']:.0f} ms)"
        lines.append(line)
        witness = c.get("details", {}).get("witness")
        if c["status"] != PASS and witness is not None:
            lines.append(f"  {'':<{width}}  witness: {json.dumps(witness)}")
    return lines


def cmd_toroid(cfg: RunConfig) -> int:
    ctx = ToroidContext(cfg.lattice())
    results = [check_toroid(ctx, seed=cfg.seed)]
    if "eta" in cfg.checks:
        results.append(check_eta(ctx, seed=cfg.seed))
    checks = [r.to_json() for r in results]
    if not cfg.timing:
        for c in checks:
            c.pop("runtime_ms", None)
    payload = dict(ctx.describe(), checks=checks)
    spec = ctx.spec
    text = "\n".join(
        [f"toroid n={spec.n} a={spec.a} k={spec.k}",
         f"  white flags {ctx.W}, schlafli {{{','.join(map(str, ctx.schlafli))}}}"]
        + _check_lines(checks)
    ) + "\n"
    _emit(cfg, payload, text)
    return EXIT_OK if all(r.status == PASS for r in results) else EXIT_FAIL


def cmd_ext(cfg: RunConfig) -> int:
    if cfg.p is None:
        raise ConfigError("--p is required")
    ctx = ToroidContext(cfg.lattice())
    ext = Extension(ctx, ExtensionSpec(ctx.spec, cfg.p))
    cert = certify(ext, checks=cfg.checks, mode=cfg.mode, seed=cfg.seed, samples=cfg.samples, threads=cfg.threads)
    payload = cert.to_json(timing=cfg.timing)
    _emit(cfg, payload, render_certificate(payload))
    return ext_exit_code(cert.checks, cfg.strict)


def ext_exit_code(results, strict: bool) -> int:
    for r in results:
        if r.status == PASS:
            continue
        if r.name == "chirality" and r.status != FAIL and not strict:
            continue
        return EXIT_FAIL
    return EXIT_OK


CERTIFICATE_SCHEMA = {
    "type": "object",
    "required": ["spec", "conforming", "checks", "conclusion", "schlafli"],
    "properties": {
        "spec": {
            "type": "object",
            "required": ["toroid", "p"],
            "properties": {
                "toroid": {
                    "type": "object",
                    "required": ["n", "a", "k"],
                    "properties": {k: {"type": "integer"} for k in ("n", "a", "k")},
                },
                "p": {"type": "integer", "minimum": 1},
            },
        },
        "conforming": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "status", "details"],
                "properties": {
                    "name": {"type": "string"},
                    "status": {"type": "string"},
                    "details": {"type": "object"},
                    "runtime_ms": {"type": "number"},
                },
            },
        },
        "conclusion": {"type": "string"},
        "schlafli": {"type": "array", "items": {"type": ["integer", "null"]}},
        "facets": {"type": "string"},
        "citations": {"type": "array", "items": {"type": "string"}},
    },
}


def load_certificate(path: str) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read certificate {path}: {exc}") from exc
    try:
        jsonschema.validate(data, CERTIFICATE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"malformed certificate {path}: {exc.message}") from exc
    return data


def render_certificate(cert: dict) -> str:
    spec = cert["spec"]
    t = spec["toroid"]
    schlafli = ",".join("?" if v is None else str(v) for v in cert["schlafli"])
    lines = [
        f"extension n={t['n']} a={t['a']} k={t['k']} p={spec['p']}",
        f"  facets {cert.get('facets', '?')}, schlafli {{{schlafli}}}",
        f"  conforming {str(cert['conforming']).lower()}",
    ]
    lines += _check_lines(cert["checks"])
    lines.append(f"conclusion: {cert['conclusion']}")
    return "\n".join(lines) + "\n"


def cmd_report(path: str) -> int:
    cert = load_certificate(path)
    sys.stdout.write(render_certificate(cert))
    return EXIT_OK


# ---------------------------------------------------------------------- main


def _add_run_flags(sp: argparse.ArgumentParser, with_p: bool) -> None:
    sp.add_argument("--n", type=int, help="rank of the facet tessellation (n >= 2)")
    sp.add_argument("--a", type=int, help="lattice scale")
    sp.add_argument("--k", type=int, help="lattice family: 1, 2 or n")
    if with_p:
        sp.add_argument("--p", type=int, help="number of level triples")
    sp.add_argument("--checks", help="comma-separated checks, or 'all'")
    sp.add_argument("--mode", choices=("full", "sampled"))
    sp.add_argument("--samples", type=int, help="points per relation in sampled mode")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="worker threads (default $CHIREX_THREADS or 1)")
    sp.add_argument("--allow-small-a", action="store_true", help="accept a < 6n+1")
    sp.add_argument("--strict", action="store_true", help="treat inconclusive chirality as failure")
    sp.add_argument("-o", "--output", help="write the report here instead of stdout")
    sp.add_argument("--json", action="store_true", help="emit JSON")
    sp.add_argument("--no-timing", action="store_true", help="drop runtime fields")
    sp.add_argument("--config", help="JSON file with run settings; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chirex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chirex {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("toroid", help="build and check a cubic toroid"), with_p=False)
    _add_run_flags(sub.add_parser("ext", help="build an extension and certify it"), with_p=True)
    rep = sub.add_parser("report", help="summarise a certificate JSON file")
    rep.add_argument("certificate")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.certificate)
        if args.command == "toroid":
            return cmd_toroid(build_config(args, TOROID_CHECKS))
        return cmd_ext(build_config(args, ALL_CHECKS))
    except (ConfigError, LatticeError, ExtensionError, ToroidError) as exc:
        print(f"chirex: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
