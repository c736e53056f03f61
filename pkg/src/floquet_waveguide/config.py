"""Run configuration: YAML schema, validation with line numbers, problem construction.

Example::

    geometry:
      L: pi
      boundary: dirichlet        # dirichlet | neumann | mixed | quasi_periodic
      beta: null                 # required for quasi_periodic
    physics:
      omega2: 2.0
      permittivity:
        kind: constant           # constant | grid | fourier
        value: 1.0
      sweep:                     # optional, used by the sweep subcommand
        parameter: omega2        # omega2 | beta
        start: 0.5
        stop: 4.5
        step: 0.1
    numerics:
      M1: 3
      M2: 6
      N_tr: 6
      im_max: null
      tolerances: {cluster: 1.0e-6}
    trace:
      kind: robin                # robin | dirichlet | neumann | custom
      kappa_R: 1.0
    outputs:
      format: json               # json | csv
      grid: {x1: [0, 2, 40], x2: [0, pi, 40]}

Scalars may be written as arithmetic in ``pi``, e.g. ``pi/2``.  Complex
values are ``[re, im]`` pairs.  Grid permittivities take ``values`` (rows
along x2, columns along x1) or ``csv``, a path relative to the config file.
"""

from __future__ import annotations

import ast
import hashlib
import math
import operator
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .cell import PermittivityCell
from .charvals import Tolerances
from .cross_section import BCKind, BoundaryCondition
from .exceptions import ConfigError, SymmetryError
from .halfguide import TraceOperatorSpec
from .problem import Problem

__all__ = ["RunConfig", "SweepSpec", "load_config", "parse_config", "evaluate_expr"]

_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}
_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def evaluate_expr(text: str) -> float:
    """Evaluate a restricted arithmetic expression such as ``"3*pi/2"``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression element {ast.dump(node)}")

    return float(ev(ast.parse(text, mode="eval")))


class _Node:
    """A YAML value together with where it came from."""

    def __init__(self, value, line, path):
        self.value, self.line, self.path = value, line, path

    def fail(self, msg):
        raise ConfigError(f"line {self.line}: {self.path}: {msg}")


def _wrap(node, path="config", line=None):
    # block mappings start at their first key; report the owning key instead
    line = line or node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: {path}: duplicate key {key!r}")
            out[key] = _wrap(v, f"{path}.{key}", k.start_mark.line + 1)
        return _Node(out, line, path)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_wrap(v, f"{path}[{i}]") for i, v in enumerate(node.value)], line, path)
    scalar = yaml.safe_load(yaml.serialize(node)) if node.tag != "tag:yaml.org,2002:str" else node.value
    return _Node(scalar, line, path)


class _Section:
    def __init__(self, node: _Node, allowed):
        if not isinstance(node.value, dict):
            node.fail("expected a mapping")
        unknown = set(node.value) - set(allowed)
        if unknown:
            key = sorted(unknown)[0]
            node.value[key].fail(f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        self.node = node

    def get(self, key, default=None):
        return self.node.value.get(key, default)

    def require(self, key):
        if key not in self.node.value:
            self.node.fail(f"missing required key {key!r}")
        return self.node.value[key]


def _real(node: _Node, positive=False, allow_none=False):
    v = node.value
    if v is None and allow_none:
        return None
    try:
        x = evaluate_expr(v) if isinstance(v, str) else float(v)
    except (TypeError, ValueError, SyntaxError, ZeroDivisionError) as exc:
        node.fail(f"expected a real number, got {v!r} ({exc})")
    if not math.isfinite(x):
        node.fail(f"expected a finite number, got {v!r}")
    if positive and not x > 0:
        node.fail(f"expected a positive number, got {v!r}")
    return x


def _int(node: _Node, minimum=0):
    v = node.value
    if isinstance(v, bool) or not isinstance(v, int):
        node.fail(f"expected an integer, got {v!r}")
    if v < minimum:
        node.fail(f"expected an integer >= {minimum}, got {v}")
    return v


def _complex(node: _Node):
    v = node.value
    if isinstance(v, list):
        if len(v) != 2:
            node.fail("complex values are written as [re, im]")
        return complex(_real(v[0]), _real(v[1]))
    return complex(_real(node))


def _matrix(node: _Node, dtype=float):
    if not isinstance(node.value, list) or not all(isinstance(r.value, list) for r in node.value):
        node.fail("expected a list of rows")
    rows = [[(_complex(x) if dtype is complex else _real(x)) for x in r.value] for r in node.value]
    if len({len(r) for r in rows}) != 1:
        node.fail("rows have different lengths")
    return np.array(rows, dtype=dtype)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    step: float

    def values(self) -> list:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    problem: Problem
    trace: TraceOperatorSpec
    N_tr: int
    tolerances: Tolerances
    out_format: str = "json"
    grid: tuple = ((0.0, 2.0, 40), (0.0, math.pi, 40))
    sweep: SweepSpec | None = None
    config_hash: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With the offending line number and key path.
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if root is None:
        raise ConfigError("line 1: config: empty configuration")
    top = _Section(_wrap(root), ("geometry", "physics", "numerics", "trace", "outputs"))

    geo = _Section(top.require("geometry"), ("L", "boundary", "beta"))
    L = _real(geo.require("L"), positive=True)
    bnode = geo.require("boundary")
    try:
        kind = BCKind(str(bnode.value).lower())
    except ValueError:
        bnode.fail(f"unknown boundary kind {bnode.value!r} (allowed: {', '.join(k.value for k in BCKind)})")
    beta_node = geo.get("beta")
    beta = _real(beta_node, allow_none=True) if beta_node is not None else None
    if kind is BCKind.QUASI_PERIODIC:
        if beta is None:
            geo.node.fail("quasi_periodic boundary requires beta")
        if not 0.0 <= beta < 2 * math.pi:
            beta_node.fail(f"beta={beta} outside [0, 2*pi)")
        bc = BoundaryCondition(kind, beta)
    else:
        if beta is not None:
            beta_node.fail(f"beta is only allowed with quasi_periodic boundaries, not {kind.value}")
        bc = BoundaryCondition(kind)

    phys = _Section(top.require("physics"), ("omega2", "permittivity", "sweep"))
    omega2 = _real(phys.require("omega2"), positive=True)
    pnode = phys.require("permittivity")
    perm = _Section(pnode, ("kind", "value", "values", "csv", "coeffs"))
    pkind = str(perm.require("kind").value)
    try:
        if pkind == "constant":
            eps = PermittivityCell.constant(_real(perm.require("value"), positive=True), L)
        elif pkind == "grid":
            if perm.get("csv") is not None:
                path = Path(base_dir) / str(perm.get("csv").value)
                if not path.exists():
                    perm.get("csv").fail(f"file not found: {path}")
                values = np.loadtxt(path, delimiter=",", ndmin=2)
            else:
                values = _matrix(perm.require("values"))
            eps = PermittivityCell.grid(values, L)
        elif pkind == "fourier":
            eps = PermittivityCell.separable_fourier(_matrix(perm.require("coeffs"), complex), L)
        else:
            perm.require("kind").fail(f"unknown permittivity kind {pkind!r} (allowed: constant, grid, fourier)")
    except ValueError as exc:
        pnode.fail(str(exc))

    sweep = None
    if phys.get("sweep") is not None:
        sw = _Section(phys.get("sweep"), ("parameter", "start", "stop", "step"))
        par = str(sw.require("parameter").value)
        if par not in ("omega2", "beta"):
            sw.require("parameter").fail(f"sweep parameter must be omega2 or beta, got {par!r}")
        if par == "beta" and kind is not BCKind.QUASI_PERIODIC:
            sw.require("parameter").fail("a beta sweep needs a quasi_periodic boundary")
        sweep = SweepSpec(par, _real(sw.require("start")), _real(sw.require("stop")),
                          _real(sw.require("step"), positive=True))
        if sweep.stop < sweep.start:
            sw.node.fail("sweep stop is below start")

    num = _Section(top.require("numerics"), ("M1", "M2", "N_tr", "im_max", "tolerances"))
    M1 = _int(num.require("M1"), 0)
    M2 = _int(num.require("M2"), 2)
    N_tr = _int(num.get("N_tr"), 1) if num.get("N_tr") is not None else M2
    if N_tr > M2:
        num.get("N_tr").fail(f"N_tr={N_tr} exceeds M2={M2}")
    im_node = num.get("im_max")
    im_max = _real(im_node, positive=True, allow_none=True) if im_node is not None else None
    tol_kw = {}
    if num.get("tolerances") is not None:
        names = [f.name for f in fields(Tolerances)]
        tsec = _Section(num.get("tolerances"), names)
        tol_kw = {k: _real(v, positive=True) for k, v in tsec.node.value.items()}
    tol = Tolerances(**tol_kw)
    if (2 * M1 + 1) * M2 < 8:
        num.node.fail(f"truncation dimension {(2 * M1 + 1) * M2} < 8")

    trace = TraceOperatorSpec.robin()
    if top.get("trace") is not None:
        tr = _Section(top.get("trace"), ("kind", "kappa_R", "theta_D", "theta_N"))
        tkind = str(tr.get("kind").value) if tr.get("kind") is not None else "robin"
        if tkind == "robin":
            kr = _real(tr.get("kappa_R"), positive=True) if tr.get("kappa_R") is not None else 1.0
            trace = TraceOperatorSpec.robin(kr)
        elif tkind == "dirichlet":
            trace = TraceOperatorSpec.dirichlet()
        elif tkind == "neumann":
            trace = TraceOperatorSpec.neumann()
        elif tkind == "custom":
            tD, tN = _complex(tr.require("theta_D")), _complex(tr.require("theta_N"))
            if abs(tD) + abs(tN) == 0:
                tr.node.fail("theta_D and theta_N must not both vanish")
            trace = TraceOperatorSpec(tD, tN)
        else:
            tr.get("kind").fail(f"unknown trace kind {tkind!r} (allowed: robin, dirichlet, neumann, custom)")

    out_format, grid = "json", ((0.0, 2.0, 40), (0.0, L, 40))
    if top.get("outputs") is not None:
        out = _Section(top.get("outputs"), ("format", "grid"))
        if out.get("format") is not None:
            out_format = str(out.get("format").value)
            if out_format not in ("json", "csv"):
                out.get("format").fail(f"format must be json or csv, got {out_format!r}")
        if out.get("grid") is not None:
            g = _Section(out.get("grid"), ("x1", "x2"))
            axes = []
            for key in ("x1", "x2"):
                ax = g.require(key)
                if not isinstance(ax.value, list) or len(ax.value) != 3:
                    ax.fail("grid axes are written as [start, stop, count]")
                axes.append((_real(ax.value[0]), _real(ax.value[1]), _int(ax.value[2], 1)))
            grid = tuple(axes)

    try:
        problem = Problem(L=L, bc=bc, eps=eps, omega2=omega2, M1=M1, M2=M2, im_max=im_max, tol=tol)
    except SymmetryError as exc:
        pnode.fail(str(exc))
    return RunConfig(
        problem=problem,
        trace=trace,
        N_tr=N_tr,
        tolerances=tol,
        out_format=out_format,
        grid=grid,
        sweep=sweep,
        config_hash=hashlib.sha256(text.encode()).hexdigest(),
        raw=yaml.safe_load(text),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
