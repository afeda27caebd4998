"""Experiment configuration: schema, defaults and object builders.

Configs are JSON. Complex numbers are written as a number or [re, im];
points in C^2 as a list of two complex numbers. Unknown keys are errors.
"""

from __future__ import annotations

import json
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from . import geometry as geo
from . import transform as tr
from . import xfunctions as xf
from .distributions import Density, PointMass, Term, TestDistribution
from .numerics import SGrid, sphere_grid

EXPERIMENTS = (
    "transform",
    "invert",
    "calibrate",
    "duality",
    "lemma1",
    "dual-bound",
    "support-forward",
    "support-converse",
    "real-bridge",
    "geometry",
)


def _pair(v):
    if isinstance(v, bool):
        raise ValueError("expected a number or [re, im]")
    if isinstance(v, (int, float)):
        return (float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return (float(v[0]), float(v[1]))
    raise ValueError("expected a number or [re, im]")


Cplx = Annotated[tuple[float, float], BeforeValidator(_pair)]
Point = Annotated[list[Cplx], Field(min_length=2, max_length=2)]
Index = Annotated[list[Annotated[int, Field(ge=0)]], Field(min_length=2, max_length=2)]


def cplx(v) -> complex:
    return complex(v[0], v[1])


def point(v) -> tuple:
    return tuple(cplx(c) for c in v)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------- grids


class SphereCfg(Strict):
    n_eta: int = Field(16, ge=4)
    n_theta: int = Field(16, ge=4)
    section: bool = True

    def build(self):
        return sphere_grid(self.n_eta, self.n_theta, section=self.section)


class SGridCfg(Strict):
    center: Cplx = (0.0, 0.0)
    extent: float = Field(6.0, gt=0)
    count: int = Field(129, ge=9)

    @field_validator("count")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("count must be odd")
        return v

    def build(self):
        return SGrid(cplx(self.center), self.extent, self.count)


class QuadCfg(Strict):
    cutoff: float = Field(6.0, gt=0)
    n_r: int = Field(64, ge=1)
    n_phi: int = Field(64, ge=1)

    def build(self):
        return tr.QuadParams(self.cutoff, self.n_r, self.n_phi)


class VolumeCfg(Strict):
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    extent: float = Field(2.0, gt=0)
    count: int = Field(9, ge=2)

    def build(self):
        return tr.VolumeGrid(point(self.center), self.extent, self.count)


# ---------------------------------------------------------------- test functions


class GaussianCfg(Strict):
    kind: Literal["gaussian"]
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    width: float = Field(1.0, gt=0)
    amp: Cplx = (1.0, 0.0)


class GaussianPolyCfg(Strict):
    kind: Literal["gaussian-poly"]
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    width: float = Field(1.0, gt=0)
    p: Index = [0, 0]
    q: Index = [0, 0]
    amp: Cplx = (1.0, 0.0)


class BumpCfg(Strict):
    kind: Literal["bump"]
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    radius: float = Field(1.0, gt=0)
    amp: Cplx = (1.0, 0.0)


class DerivativeCfg(Strict):
    kind: Literal["derivative"]
    p: Index = [0, 0]
    q: Index = [0, 0]
    base: "FunctionCfg"


class TermCfg(Strict):
    coef: Cplx = (1.0, 0.0)
    fn: "FunctionCfg"


class CombinationCfg(Strict):
    kind: Literal["combination"]
    terms: list[TermCfg] = Field(min_length=1)


class ZeroCfg(Strict):
    kind: Literal["zero"]


FunctionCfg = Annotated[
    Union[GaussianCfg, GaussianPolyCfg, BumpCfg, DerivativeCfg, CombinationCfg, ZeroCfg],
    Field(discriminator="kind"),
]
DerivativeCfg.model_rebuild()
TermCfg.model_rebuild()


def build_function(c) -> tr.TestFunction:
    if c.kind == "gaussian":
        return tr.Gaussian(point(c.center), c.width, cplx(c.amp))
    if c.kind == "gaussian-poly":
        return tr.GaussianPoly(point(c.center), c.width, c.p, c.q, cplx(c.amp))
    if c.kind == "bump":
        return tr.Bump(point(c.center), c.radius, cplx(c.amp))
    if c.kind == "derivative":
        return tr.DerivativeOf(build_function(c.base), c.p, c.q)
    if c.kind == "combination":
        return tr.Combination([(cplx(t.coef), build_function(t.fn)) for t in c.terms])
    return tr.Zero()


# ---------------------------------------------------------------- functions on X


class WindowCfg(Strict):
    w0: Point
    inner: float = Field(ge=0)
    outer: float = Field(gt=0)

    @model_validator(mode="after")
    def _order(self):
        if not self.inner < self.outer:
            raise ValueError("window needs inner < outer")
        return self


class GaussianSCfg(Strict):
    kind: Literal["gaussian-s"]
    width: float = Field(1.0, gt=0)
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    amp: Cplx = (1.0, 0.0)
    cutoff: tuple[float, float] | None = None
    window: WindowCfg | None = None


class BumpSCfg(Strict):
    kind: Literal["bump-s"]
    radius: float = Field(1.0, gt=0)
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    amp: Cplx = (1.0, 0.0)
    window: WindowCfg | None = None


class IndicatorCfg(Strict):
    kind: Literal["indicator"]
    radius: float = Field(gt=0)


class ConstantCfg(Strict):
    kind: Literal["constant"]
    value: Cplx = (1.0, 0.0)


XCfg = Annotated[Union[GaussianSCfg, BumpSCfg, IndicatorCfg, ConstantCfg], Field(discriminator="kind")]


def _window(w):
    return None if w is None else xf.Window(point(w.w0), w.inner, w.outer)


def build_x(c) -> xf.XFunction:
    if c.kind == "gaussian-s":
        return xf.gaussian_s(c.width, point(c.center), cplx(c.amp), c.cutoff, _window(c.window))
    if c.kind == "bump-s":
        return xf.bump_s(c.radius, point(c.center), cplx(c.amp), _window(c.window))
    if c.kind == "indicator":
        return xf.Indicator(c.radius)
    return xf.Constant(cplx(c.value))


# ---------------------------------------------------------------- compact sets


class BallArgs(Strict):
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    radius: float = Field(ge=0)


class PointArgs(Strict):
    at: Point


class AnnulusArgs(Strict):
    rin: float = Field(ge=0)
    rout: float = Field(gt=0)
    center: Point = [(0.0, 0.0), (0.0, 0.0)]

    @model_validator(mode="after")
    def _order(self):
        if self.rin > self.rout:
            raise ValueError("annulus needs rin <= rout")
        return self


class PolydiscArgs(Strict):
    center: Point = [(0.0, 0.0), (0.0, 0.0)]
    radii: tuple[float, float]


class DilationArgs(Strict):
    base: "SetCfg"
    eps: float = Field(gt=0)


class SetCfg(Strict):
    ball: BallArgs | None = None
    point: PointArgs | None = None
    union: list["SetCfg"] | None = None
    annulus2d: AnnulusArgs | None = None
    polydisc: PolydiscArgs | None = None
    dilation: DilationArgs | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("ball", "point", "union", "annulus2d", "polydisc", "dilation") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"a set needs exactly one kind, got {given or 'none'}")
        if self.union is not None and not self.union:
            raise ValueError("union needs at least one part")
        return self


DilationArgs.model_rebuild()
SetCfg.model_rebuild()


def build_set(c: SetCfg) -> geo.CompactSet:
    if c.ball is not None:
        return geo.Ball(point(c.ball.center), c.ball.radius)
    if c.point is not None:
        return geo.FinitePointSet([point(c.point.at)])
    if c.union is not None:
        return geo.Union([build_set(p) for p in c.union])
    if c.annulus2d is not None:
        a = c.annulus2d
        return geo.EmbeddedAnnulus(a.rin, a.rout, point(a.center))
    if c.polydisc is not None:
        return geo.Polydisc(point(c.polydisc.center), c.polydisc.radii)
    return geo.dilate(build_set(c.dilation.base), c.dilation.eps)


# ---------------------------------------------------------------- distributions


class PointMassCfg(Strict):
    at: Point
    weight: Cplx = (1.0, 0.0)


class MeasureCfg(Strict):
    point: PointMassCfg | None = None
    density: FunctionCfg | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.point is None) == (self.density is None):
            raise ValueError("a measure is exactly one of 'point' or 'density'")
        return self


class DistTermCfg(Strict):
    p: Index = [0, 0]
    q: Index = [0, 0]
    measure: MeasureCfg

    @model_validator(mode="after")
    def _order(self):
        if sum(self.p) + sum(self.q) > 2:
            raise ValueError("derivative order above 2 is not supported")
        return self


def build_distribution(terms) -> TestDistribution:
    out = []
    for t in terms:
        if t.measure.point is not None:
            m = PointMass(point(t.measure.point.at), cplx(t.measure.point.weight))
        else:
            m = Density(build_function(t.measure.density))
        out.append(Term(tuple(t.p), tuple(t.q), m))
    return TestDistribution(out)


# ---------------------------------------------------------------- experiment parameters


class TransformParams(Strict):
    quad: QuadCfg = QuadCfg()
    s_radius: float = Field(3.0, gt=0)
    tol: float = Field(1e-8, gt=0)


class NamedFunction(Strict):
    name: str
    fn: FunctionCfg


class InvertParams(Strict):
    functions: list[NamedFunction] = Field(min_length=1)
    sphere: SphereCfg = SphereCfg()
    sgrid: SGridCfg = SGridCfg()
    volume: VolumeCfg = VolumeCfg()
    radius: float = Field(2.0, gt=0)
    tol: float = Field(0.02, gt=0)
    refine: bool = True
    dump_sinogram: bool = False
    dump_volume: bool = False


class CalibrateParams(Strict):
    radii: list[Annotated[float, Field(ge=0)]] = Field([0.0, 0.5, 1.0], min_length=1)
    sgrid: SGridCfg = SGridCfg(extent=1.5, count=129)
    sphere: SphereCfg = SphereCfg()
    tol: float = Field(1e-3, gt=0)
    refine_tol: float = Field(1e-4, gt=0)


class IdentityGridCfg(Strict):
    sphere_section: tuple[int, int] = (16, 16)
    ball_sphere: tuple[int, int] = (10, 12)
    ball_n_r: int = Field(32, ge=4)
    disk_n_r: int = Field(32, ge=4)
    disk_n_phi: int = Field(48, ge=4)
    quad: QuadCfg = QuadCfg(n_r=48, n_phi=48)

    def build(self):
        from .harness import IdentityGrids

        return IdentityGrids(self.sphere_section, self.ball_sphere, self.ball_n_r, self.disk_n_r, self.disk_n_phi, self.quad.build())


class DualityPair(Strict):
    phi: FunctionCfg
    f: XCfg | None = None  # None: f = 0


class DualityParams(Strict):
    pairs: list[DualityPair] = Field(min_length=1)
    grids: IdentityGridCfg = IdentityGridCfg()
    method: Literal["analytic", "quadrature"] = "analytic"
    tol: float = Field(1e-3, gt=0)


class Lemma1Pair(Strict):
    phi: FunctionCfg
    psi: XCfg


class ProbeCfg(Strict):
    count: int = Field(27, ge=1)
    radius: float = Field(2.0, gt=0)


class Lemma1Params(Strict):
    pairs: list[Lemma1Pair] = Field(min_length=1)
    probes: ProbeCfg = ProbeCfg()
    grids: IdentityGridCfg = IdentityGridCfg()
    method: Literal["analytic", "quadrature"] = "analytic"
    tol: float = Field(1e-3, gt=0)


class DualBoundParams(Strict):
    h: XCfg
    R: float = Field(gt=0)
    probes: list[Point] = Field(min_length=1)
    sphere: SphereCfg = SphereCfg(n_eta=32, n_theta=16)
    attain: list[Annotated[int, Field(ge=0)]] = []
    tol: float = Field(1e-6, ge=0)
    attain_tol: float = Field(1e-3, gt=0)


class SupportForwardParams(Strict):
    distribution: list[DistTermCfg]
    set: SetCfg
    margin: float = Field(gt=0)
    m: int | None = Field(10, ge=1)
    sphere: SphereCfg = SphereCfg()
    sgrid: SGridCfg = SGridCfg(extent=3.0, count=121)
    n_test: int = Field(20, ge=1)
    tol: float = Field(1e-8, gt=0)


class SupportConverseParams(Strict):
    distribution: list[DistTermCfg]
    set: SetCfg
    witness: Point
    inside: list[DistTermCfg] | None = None
    ms: list[Annotated[int, Field(ge=1)]] = [5, 10]
    directions: SphereCfg = SphereCfg()
    sphere: SphereCfg = SphereCfg(n_eta=12, n_theta=12)
    sgrid: SGridCfg = SGridCfg(extent=3.0, count=121)
    resolution: int = Field(128, ge=16)
    ratio_tol: float = Field(1e-2, gt=0)
    tol: float = Field(1e-8, gt=0)


class BridgeProbe(Strict):
    node: int = Field(ge=0)
    t: float


class RealBridgeParams(Strict):
    function: FunctionCfg
    sphere: SphereCfg = SphereCfg(n_eta=8, n_theta=8)
    sgrid: SGridCfg = SGridCfg(extent=6.0, count=241)
    probes: list[BridgeProbe] | None = None
    closed_form: Literal["gaussian"] | None = None
    tol: float = Field(1e-4, gt=0)


class GeometryParams(Strict):
    resolution: int = Field(128, ge=16)
    delta: float = Field(0.1, gt=0)
    directions: SphereCfg = SphereCfg(n_eta=32, n_theta=32)


PARAMS = {
    "transform": TransformParams,
    "invert": InvertParams,
    "calibrate": CalibrateParams,
    "duality": DualityParams,
    "lemma1": Lemma1Params,
    "dual-bound": DualBoundParams,
    "support-forward": SupportForwardParams,
    "support-converse": SupportConverseParams,
    "real-bridge": RealBridgeParams,
    "geometry": GeometryParams,
}


class ExperimentConfig(Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    name: str = Field(min_length=1)
    description: str = ""
    seed: int = Field(0, ge=0)
    params: Any = None

    @model_validator(mode="after")
    def _typed_params(self, info: ValidationInfo):
        if info.context and info.context.get("envelope_only"):
            return self
        model = PARAMS[self.experiment]
        if not isinstance(self.params, model):
            object.__setattr__(self, "params", model.model_validate(self.params if self.params is not None else {}))
        return self

    def echo(self) -> dict:
        """Fully defaulted config as plain JSON data (hashed into the report digest)."""
        return json.loads(self.model_dump_json())


class ConfigInvalid(ValueError):
    """Validation failure with dotted field locations."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in problems))


def _problems(err: ValidationError, prefix: str = "") -> list[tuple[str, str]]:
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        out.append(((prefix + "." + loc).strip(".") or "<root>", e["msg"]))
    return out


def load_config(data: dict) -> ExperimentConfig:
    """Validate a config dict; errors name the offending field path."""
    if not isinstance(data, dict):
        raise ConfigInvalid([("<root>", "config must be a JSON object")])
    envelope = {k: v for k, v in data.items() if k != "params"}
    try:
        ExperimentConfig.model_validate({**envelope, "params": None}, context={"envelope_only": True})
    except ValidationError as exc:
        raise ConfigInvalid(_problems(exc)) from None
    try:
        params = PARAMS[data["experiment"]].model_validate(data.get("params") or {})
    except ValidationError as exc:
        raise ConfigInvalid(_problems(exc, "params")) from None
    return ExperimentConfig.model_validate({**envelope, "params": params})


def apply_override(data: dict, assignment: str) -> dict:
    """Set a dotted key, e.g. ``params.sgrid.count=257``; values parse as JSON when possible."""
    if "=" not in assignment:
        raise ValueError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    if not all(parts):
        raise ValueError(f"bad override key {key!r}")
    node = data
    for p in parts[:-1]:
        if isinstance(node, list):
            node = node[int(p)]
            continue
        node = node.setdefault(p, {})
        if not isinstance(node, (dict, list)):
            raise ValueError(f"override path {key!r} passes through a non-object")
    if isinstance(node, list):
        node[int(parts[-1])] = value
    else:
        node[parts[-1]] = value
    return data
