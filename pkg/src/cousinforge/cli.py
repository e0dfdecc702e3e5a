"""Command line: build complexes, apply maps, run check suites, evaluate fractions.

Every artifact is canonical JSON (sorted keys) carrying ``"schema": "v1"``.
Exit codes: 0 success, 1 check failure, 2 parse or input error, 3 window or
bound too small.
"""

from __future__ import annotations

import json
import re
import sys

import click

from . import suites
from .cousin import (CousinComplex, ModulePresentation, cousin_E_pid, dumps, homology, homology_json,
                     is_residual)
from .errors import CousinForgeError, NotSystemOfParameters, ParseError, WindowTooSmall
from .exact.pid import PIDDesc, PrimeBound
from .genfrac import normalize, parse_fraction, power_series_over
from .variance import SchemeMapDesc, apply_map
from .zerodim import LocalRingDesc, ZModule, _parse_mono, double_dual_evaluation, matlis_dual

EXIT_CHECK, EXIT_PARSE, EXIT_WINDOW = 1, 2, 3


class _Group(click.Group):
    """Maps library errors to exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except WindowTooSmall as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_WINDOW)
        except (CousinForgeError, json.JSONDecodeError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_PARSE)


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# descriptions


def parse_pid_module(pid: PIDDesc, text: str) -> ModulePresentation:
    """``Z``, ``Z^2``, ``Z/12``, ``Z^2+Z/4`` (and ``Q[y]/(y^2)`` over Q[y])."""
    name = pid.name()
    rank, inv = 0, []
    for part in _split_sum(text.replace(" ", "")):
        if part == "0":
            continue
        if not part.startswith(name):
            raise ParseError(f"module summand {part!r} is not over {name}")
        rest = part[len(name):]
        if rest == "":
            rank += 1
        elif re.fullmatch(r"\^\d+", rest):
            rank += int(rest[1:])
        elif rest.startswith("/"):
            g = rest[1:]
            if g.startswith("(") and g.endswith(")"):
                g = g[1:-1]
            inv.append(pid.decode(g))
        else:
            raise ParseError(f"cannot parse module summand {part!r}")
    return ModulePresentation.from_rows(pid, rank + len(inv),
                                        [[d if i == j else pid.zero for j in range(rank + len(inv))]
                                         for i, d in enumerate(inv, start=rank)]) if inv else \
        ModulePresentation(pid, rank)


def _split_sum(text: str) -> list:
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "+" and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    return out + [cur]


def parse_bound(pid: PIDDesc, text: str):
    try:
        parts = [int(x) for x in str(text).split(",")]
    except ValueError as exc:
        raise ParseError(f"bad bound {text!r}") from exc
    if pid.is_integers:
        return parts[0]
    return PrimeBound(parts[0], parts[1] if len(parts) > 1 else 1)


def parse_map(text: str) -> SchemeMapDesc:
    """``smooth-A1:T``, ``closed:3,9``, ``section:2``, ``localization:(3)``,
    ``completion:(y)``, ``open:η,(2)``, ``identity`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return SchemeMapDesc.from_json(json.loads(text))
    kind, _, arg = text.partition(":")
    if kind == "smooth-A1":
        return SchemeMapDesc.smooth_a1(arg or "T")
    if kind == "closed":
        return SchemeMapDesc.closed_immersion(*[g for g in arg.split(",") if g])
    if kind == "section":
        return SchemeMapDesc.section(int(arg or 0))
    if kind == "localization":
        return SchemeMapDesc.localization(arg)
    if kind == "completion":
        return SchemeMapDesc.completion(arg)
    if kind == "open":
        return SchemeMapDesc.open([x for x in arg.split(",") if x])
    if kind == "identity":
        return SchemeMapDesc.identity()
    raise ParseError(f"unknown map {text!r}")


def job_from_options(ring, module, bound, maps=()) -> dict:
    return {"ring": ring, "module": module, "bound": str(bound), "maps": [parse_map(m).to_json() for m in maps]}


def build_from_job(job: dict) -> CousinComplex:
    pid = PIDDesc.parse(job["ring"])
    C = cousin_E_pid(pid, parse_pid_module(pid, job.get("module", job["ring"])), parse_bound(pid, job["bound"]))
    for m in job.get("maps", ()):
        C = apply_map(SchemeMapDesc.from_json(m), C)
    return C


def _load_job(input_path, ring, module, bound, maps=()) -> dict:
    if input_path:
        with open(input_path, encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("schema") != "v1":
            raise ParseError("artifact lacks schema v1")
        job = dict(data.get("job", data))
        job["maps"] = list(job.get("maps", ())) + [parse_map(m).to_json() for m in maps]
        return job
    if not ring:
        raise ParseError("give --input or --ring")
    return job_from_options(ring, module or ring, bound, maps)


def complex_artifact(job: dict, C: CousinComplex, N: int) -> dict:
    out = {"schema": "v1", "kind": "cousin-artifact", "job": job, "complex": C.to_json(N),
           "residual": is_residual(C, N).to_json()}
    try:
        out["homology"] = homology_json(homology(C, N))
    except (CousinForgeError, NotImplementedError):
        out["homology"] = None
    return out


_source = [
    click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="A previous artifact or job JSON."),
    click.option("--ring", default=None, help="Z or Q[y]."),
    click.option("--module", default=None, help="For example Z^2+Z/12."),
    click.option("--bound", default="7", show_default=True, help="Prime bound B (Q[y]: height,degree)."),
    click.option("--window", "N", type=int, default=2, show_default=True, help="Element window for checks."),
    click.option("-o", "--output", default=None, type=click.Path(dir_okay=False)),
]


def source_options(fn):
    for opt in reversed(_source):
        fn = opt(fn)
    return fn


# commands


@click.group(cls=_Group)
@click.version_option(package_name="cousinforge")
def cli():
    """Generalized fractions and Cousin complexes, exactly."""


@cli.command("build-E")
@source_options
def build_e(input_path, ring, module, bound, N, output):
    """Build the Cousin complex E(M) over Spec R."""
    job = _load_job(input_path, ring, module, bound)
    _emit(dumps(complex_artifact(job, build_from_job(job), N)), output)


@cli.command("apply-sharp")
@source_options
@click.option("--map", "maps", multiple=True, required=True,
              help="smooth-A1:T, closed:3, section:0, localization:(3), completion:(3), open:η,(2) or JSON.")
def apply_sharp(input_path, ring, module, bound, N, output, maps):
    """Apply maps, in the order given, to a built complex."""
    job = _load_job(input_path, ring, module, bound, maps)
    _emit(dumps(complex_artifact(job, build_from_job(job), N)), output)


@cli.command("homology")
@source_options
def homology_cmd(input_path, ring, module, bound, N, output):
    """Cohomology of the materialized window over the base PID."""
    job = _load_job(input_path, ring, module, bound)
    H = homology(build_from_job(job), N)
    _emit(dumps({"schema": "v1", "kind": "homology", "job": job, "homology": homology_json(H)}), output)


@cli.command("poset-dot")
@source_options
def poset_dot(input_path, ring, module, bound, N, output):
    """DOT picture of the materialized poset with Delta."""
    job = _load_job(input_path, ring, module, bound)
    C = build_from_job(job)
    _emit(C.poset.to_dot(C.delta), output)


@cli.command("check")
@click.argument("suite", type=click.Choice(sorted(suites.SUITES) + ["all"]))
@click.option("--seed", type=int, default=None, help="Seed for randomized suites.")
@click.option("--depth", type=int, default=3, show_default=True, help="Chain depth (pseudofunctor).")
@click.option("--drop-twist", is_flag=True, help="Debug: suppress the twist sign (pseudofunctor).")
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False))
def check(suite, seed, depth, drop_twist, output):
    """Run a named check suite; exit 1 when a check fails."""
    names = sorted(suites.SUITES) if suite == "all" else [suite]
    reports = []
    for name in names:
        fn = suites.SUITES[name]
        kw = {}
        if name == "pseudofunctor":
            kw.update(depth=depth, drop_twist=drop_twist)
        if seed is not None and name in _SEEDED:
            kw["seed"] = seed
        reports.append(fn(**kw))
    payload = reports[0].to_json() if len(reports) == 1 else \
        {"schema": "v1", "ok": all(r.ok for r in reports), "suites": [r.to_json() for r in reports]}
    _emit(dumps(payload), output)
    if not all(r.ok for r in reports):
        sys.exit(EXIT_CHECK)


_SEEDED = {"sign-law", "iteration", "pseudofunctor", "retract", "matlis", "exactness"}


@cli.command("dual")
@click.option("--ring", required=True, help="Local ring, e.g. Q[[T1,T2]]/(T1^3).")
@click.option("--cyclic", default=None, help="Monomial ideal J for the module R/J, e.g. T1^2,T2.")
@click.option("--module", "module_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="ZModule JSON.")
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False))
def dual(ring, cyclic, module_path, output):
    """Matlis dual of a finite-length module and the double-dual evaluation."""
    R = LocalRingDesc.parse(ring)
    if module_path:
        with open(module_path, encoding="utf-8") as fh:
            M = ZModule.from_json(json.load(fh))
    elif cyclic is not None:
        M = ZModule.cyclic(R, [_parse_mono(m.strip(), R.variables) for m in cyclic.split(",") if m.strip()])
    else:
        raise ParseError("give --cyclic or --module")
    _, lenD, lenDD, iso = double_dual_evaluation(M)
    out = {"schema": "v1", "kind": "matlis", "module": M.to_json(), "dual": matlis_dual(M).to_json(),
           "double_dual": {"length": lenDD, "dual_length": lenD, "is_iso": bool(iso)}}
    _emit(dumps(out), output)
    if not iso:
        sys.exit(EXIT_CHECK)


@cli.group("fractions")
def fractions():
    """Generalized fractions."""


_RING_RE = re.compile(r"^(?P<A>.*)\[\[(?P<T>[^\[\]]*)\]\](?:/\((?P<I>.*)\s+on\s+M\))?$")


def parse_fraction_ring(text: str):
    """``A[[T..]]/(J on M)``: B = A[[T..]], numerator module M = A/J (A/m when J is absent)."""
    m = _RING_RE.match(text.strip())
    if not m:
        raise ParseError(f"cannot parse fraction ring {text!r}")
    A = LocalRingDesc.parse(m.group("A"))
    tvars = [v.strip() for v in m.group("T").split(",") if v.strip()]
    if m.group("I"):
        J = [_parse_mono(x.strip(), A.variables) for x in m.group("I").split(",") if x.strip()]
    else:
        J = [tuple(1 if i == j else 0 for i in range(A.r)) for j in range(A.r)]
    M = ZModule.cyclic(A, J) if A.r else ZModule(A, {}, labels=["1"], dim=1)
    return M, power_series_over(A, tvars), tvars


_FRAC_HEAD = re.compile(r"^\s*\[(?P<num>[^/\]]*?)(?P<rest>\s*(?:⊗|\(x\))[^/\]]*/.*|\s*/.*)$")


def _with_basis(expr: str) -> str:
    """A numerator without basis names is an element of the cyclic module: multiply by e0."""
    m = _FRAC_HEAD.match(expr)
    if not m:
        raise ParseError(f"cannot parse fraction {expr!r}")
    num = m.group("num").strip()
    if re.search(r"\be\d+\b", num):
        return expr
    return f"[({num})*e0{m.group('rest')}"


def format_class(elem, M: ZModule) -> str:
    """Normal form with the cyclic module's monomial labels, e.g. ``[1/T] + [u/T^2]``."""
    if elem.is_zero():
        return "0"
    fld = elem.module.field
    tv = elem.module.new_vars
    from .zerodim import _mono_str

    parts = []
    for key in sorted(elem.coeffs, key=lambda k: (k[1], repr(k[0]))):
        bk, alpha = key
        c = fld.encode(elem.coeffs[key])
        if c.endswith("/1"):
            c = c[:-2]
        sym = f"[{M.labels[bk]}/{_mono_str(tv, alpha)}]"
        parts.append(sym if c == "1" else f"-{sym}" if c == "-1" else f"({c})*{sym}")
    return " + ".join(parts)


@fractions.command("eval")
@click.argument("expression")
@click.option("--ring", required=True, help='For example "Q[[u]][[T]]/(u^2 on M)".')
@click.option("--window", type=int, default=None, help="Window N (default: COUSINFORGE_WINDOW or 8).")
@click.option("--json", "as_json", is_flag=True, help="Emit a JSON artifact.")
def fractions_eval(expression, ring, window, as_json):
    """Normal form of a generalized fraction."""
    M, B, tvars = parse_fraction_ring(ring)
    f = parse_fraction(_with_basis(expression), M, B, tvars)
    try:
        cls = normalize(f, window)
    except NotSystemOfParameters as exc:
        if "no c <=" in str(exc):
            raise WindowTooSmall(str(exc)) from exc
        raise
    text = format_class(cls, M)
    if as_json:
        click.echo(dumps({"schema": "v1", "kind": "fraction-class", "input": expression, "ring": ring,
                          "fraction": str(f), "class": text}), nl=False)
    else:
        click.echo(text)


@cli.command("run")
@click.argument("jobfile", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def run(ctx, jobfile):
    """Run a JobSpec JSON: {"schema": "v1", "command": ..., "parameters": {...}, "output": ...}."""
    with open(jobfile, encoding="utf-8") as fh:
        spec = json.load(fh)
    if spec.get("schema") != "v1":
        raise ParseError("job lacks schema v1")
    command = spec.get("command")
    params = dict(spec.get("parameters", {}))
    if spec.get("output"):
        params["output"] = spec["output"]
    if spec.get("input"):
        params["input_path"] = spec["input"]
    if command == "fractions":
        target = fractions_eval
    elif command in cli.commands and command != "run":
        target = cli.commands[command]
    else:
        raise ParseError(f"unknown command {command!r}")
    defaults = {p.name: p.default for p in target.params}
    defaults.update(params)
    if "maps" in defaults and isinstance(defaults["maps"], str):
        defaults["maps"] = (defaults["maps"],)
    ctx.invoke(target, **defaults)


def main():
    cli(prog_name="cousinforge")


if __name__ == "__main__":
    main()
