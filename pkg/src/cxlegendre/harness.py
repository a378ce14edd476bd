"""Named verification scenarios, reports and refinement studies."""

import copy
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .domains import _complex_vector, domain_from_dict
from .coords import to_complex
from .errors import ConfigError
from .export import write_field, write_form, write_json, write_map, write_series
from .fields import Constant, GaussianBump, LinearField, PotentialField, QuadraticField, SphereFunction
from .geometry import (
    chart_overlap_consistency,
    differential_study,
    kahler_form_field,
    pullback_defect,
    smooth_tangent,
    sphere_volume,
    verify_isometry,
)
from .gradient_map import (
    GradientMapField,
    compose_check,
    injectivity_violations,
    jacobian_positivity_sweep,
    map_jacobians,
    transform_gradient_identity,
)
from .potentials import check_strong_psh, estimate_neighborhood, load_potential, potential_from_dict
from .transforms import (
    _brute_force_ball,
    _diastasis_objective,
    admissibility,
    admissibility_radius,
    brute_force_transform,
    complex_legendre_flat,
    diastasis_legendre,
    double_transform_defect,
    transform_field,
)

# Tolerances whose names end in "@h2" are multiplied by the squared grid step.
DEFAULT_TOLERANCES = {
    "strong-psh": 0.0,
    "neighborhood": 0.0,
    "flat-fixed-point": 1e-8,
    "transform-of-zero": 1e-8,
    "identity-map": 1e-9,
    "involution": 1e-6,
    "composition": 1e-6,
    "jacobian-positivity": 0.0,
    "implicit-jacobian@h2": 10.0,
    "gradient-identity@h2": 5.0,
    "injectivity": 0.5,
    "brute-force-agreement": 2.0,
    "chart-overlap": 1e-6,
    "pullback": 1e-3,
    "pullback-order": 1.8,
    "form-consistency": 1e-12,
    "differential-ratio-low": 8.0,
    "differential-ratio-high": 12.0,
    "isometry": 1e-3,
    "isometry-order": 1.8,
    "isometry-at-zero": 1e-12,
    "order-reversal": 1e-12,
    "envelope-upper-bound": 1e-9,
    "envelope-strict": -1e-3,
    "sphere-volume": 1e-4,
    "definition-equivalence": 1e-10,
}

ANCHORS = {
    "strong-psh": "reference potential is strongly plurisubharmonic on the domain",
    "neighborhood": "diastasis bounded below by C|z-q|^2 on a delta-tube",
    "transform": "Newton solves converge at every grid node",
    "admissibility": "perturbation lies in the C^2 ball where the transform is well posed",
    "flat-fixed-point": "flat complex transform fixes the reference potential",
    "transform-of-zero": "transform of the zero perturbation vanishes",
    "identity-map": "gradient map of the zero perturbation is the identity",
    "involution": "the transform is an involution on admissible perturbations",
    "composition": "G(L eta) inverts G(eta)",
    "jacobian-positivity": "gradient map Jacobian stays positive along t*eta",
    "implicit-jacobian": "grid Jacobian of G matches the implicit function formula",
    "gradient-identity": "grad L(eta)(q) = -grad_q D(G(q), q)",
    "injectivity": "gradient map is injective at grid scale",
    "brute-force-agreement": "Newton maximizer agrees with exhaustive search",
    "chart-overlap": "transform and gradient map agree across sphere charts",
    "pullback": "gradient map pulls omega_eta back to omega_{L eta}",
    "pullback-order": "pullback defect converges at second order",
    "form-consistency": "Hermitian and real 2-form representations agree",
    "differential": "dL(eta).chi = -chi o G(eta), first order in t",
    "isometry": "the transform is a Mabuchi isometry",
    "isometry-order": "isometry defect converges at quadrature order",
    "isometry-at-zero": "isometry is exact at the zero perturbation",
    "order-reversal": "eta1 <= eta2 implies L eta1 >= L eta2",
    "envelope-upper-bound": "L^2 eta <= eta for arbitrary continuous eta",
    "envelope-strict": "L^2 eta < eta at a non-convex spike",
    "sphere-volume": "Fubini-Study volume of the sphere is pi",
    "definition-equivalence": "diastasis transform equals flat transform of eta + phi minus phi",
}


# -- configuration ------------------------------------------------------------------

def _bump(amplitude=0.05, center=(0.1, 0.05), width=0.5):
    return {"family": "gaussian-bump", "amplitude": amplitude, "center": [list(center)], "width": width}


_EUCLID = {"variant": "euclidean", "dimension": 1}
_FS = {"variant": "fubini-study", "dimension": 1}
_UNIT = {"kind": "box", "center": [[0.0, 0.0]], "half_widths": [1.0]}
_SPHERE = {"kind": "sphere", "half_width": 1.5}
_SPHERE_BUMP = _bump(0.05, (0.0, 0.0), 0.6)

SCENARIO_DEFAULTS = {
    "euclidean-fixed-point": {"potential": _EUCLID, "domain": _UNIT, "perturbation": {"family": "zero"}},
    "fubini-study-fixed-point": {"potential": _FS, "domain": _UNIT, "perturbation": {"family": "zero"}},
    "sphere-fixed-point": {"potential": _FS, "domain": _SPHERE, "perturbation": {"family": "zero"}},
    "flat-involution": {"potential": _EUCLID, "domain": _UNIT, "perturbation": _bump()},
    "sphere-involution": {"potential": _FS, "domain": _SPHERE, "perturbation": _SPHERE_BUMP},
    "flat-pullback": {
        "potential": _EUCLID, "domain": _UNIT, "perturbation": _bump(width=1.0),
        "resolutions": [32, 48, 64],
    },
    "flat-pullback-c2": {
        "potential": {"variant": "euclidean", "dimension": 2},
        "domain": {"kind": "box", "center": [[0.0, 0.0], [0.0, 0.0]], "half_widths": [1.0, 1.0]},
        "perturbation": {"family": "gaussian-bump", "amplitude": 0.05,
                         "center": [[0.1, 0.05], [-0.05, 0.1]], "width": 1.0},
        "resolutions": [32],
    },
    "sphere-pullback": {"potential": _FS, "domain": _SPHERE, "perturbation": _SPHERE_BUMP},
    "differential": {
        "potential": _EUCLID, "domain": _UNIT, "perturbation": _bump(),
        "options": {"steps": [1e-2, 1e-3, 1e-4], "queries": 64},
    },
    "isometry": {
        "potential": _EUCLID, "domain": _UNIT, "perturbation": _bump(),
        "resolutions": [32, 48, 64], "options": {"pairs": 5, "margin": 0.2},
    },
    "order-properties": {
        "potential": _EUCLID, "domain": _UNIT, "perturbation": _bump(),
        "options": {"pairs": 100, "queries": 20, "spike": {"amplitude": 0.2, "center": [0.3, -0.2], "width": 0.15}},
    },
    "sphere-volume": {"potential": _FS, "domain": _SPHERE, "perturbation": {"family": "zero"}},
    "equivalence": {
        "potential": _EUCLID, "domain": _UNIT, "perturbation": _bump(), "options": {"queries": 100},
    },
}


def make_perturbation(recipe, dimension):
    """Build a perturbation field from a JSON recipe."""
    family = recipe.get("family", "zero")
    amp = float(recipe.get("amplitude", 0.0))
    center = _complex_vector(recipe.get("center", [[0.0, 0.0]] * dimension))
    if family == "zero":
        return Constant(0.0, dimension)
    if amp <= 0:
        raise ConfigError("perturbation amplitude must be positive")
    if center.shape[0] != dimension:
        raise ConfigError(f"perturbation center has {center.shape[0]} coordinates, expected {dimension}")
    if family == "gaussian-bump":
        return GaussianBump(amp, center, float(recipe.get("width", 0.5)))
    if family == "linear":
        direction = _complex_vector(recipe.get("direction", [[1.0, 0.0]] * dimension))
        return LinearField(amp, direction)
    if family == "quadratic":
        return QuadraticField(amp, center)
    raise ConfigError(f"unknown perturbation family {family!r}")


@dataclass
class ScenarioConfig:
    scenario: str
    potential: object
    domain: dict
    perturbation: dict = field(default_factory=lambda: {"family": "zero"})
    resolutions: tuple = (64,)
    tolerances: dict = field(default_factory=dict)
    output: str = None
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; see list-scenarios")
        res = tuple(int(r) for r in self.resolutions)
        if not res or any(r < 3 for r in res):
            raise ConfigError("resolutions must be integers >= 3")
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ConfigError("resolutions must be strictly increasing")
        self.resolutions = res
        for name, tol in self.tolerances.items():
            base = name if name in DEFAULT_TOLERANCES else name + "@h2"
            if base not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}")
            if not float(tol) > 0 and DEFAULT_TOLERANCES[base] > 0:
                raise ConfigError(f"tolerance {name!r} must be positive")
        if self.perturbation.get("family", "zero") != "zero" and not float(self.perturbation.get("amplitude", 0)) > 0:
            raise ConfigError("perturbation amplitude must be positive")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, spec):
        if "scenario" not in spec:
            raise ConfigError("config needs a 'scenario' entry")
        merged = copy.deepcopy(SCENARIO_DEFAULTS.get(spec["scenario"], {}))
        for key, value in spec.items():
            if key in ("options", "tolerances") and key in merged:
                merged[key].update(value)
            else:
                merged[key] = copy.deepcopy(value)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(merged) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "potential" not in merged or "domain" not in merged:
            raise ConfigError("config needs 'potential' and 'domain' entries")
        return cls(**merged)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            spec = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if isinstance(spec.get("potential"), str):
            spec["potential"] = str((path.parent / spec["potential"]).resolve())
        return cls.from_dict(spec)

    @classmethod
    def named(cls, scenario, **overrides):
        return cls.from_dict({"scenario": scenario, **overrides})

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "potential": self.potential,
            "domain": self.domain,
            "perturbation": self.perturbation,
            "resolutions": list(self.resolutions),
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
            "options": self.options,
        }

    def build_potential(self):
        if isinstance(self.potential, str):
            return load_potential(self.potential)
        return potential_from_dict(self.potential)

    def build_domain(self, points=None):
        spec = dict(self.domain)
        spec["points"] = int(points or self.resolutions[-1])
        return domain_from_dict(spec)

    def build_perturbation(self, dimension):
        return make_perturbation(self.perturbation, dimension)

    def tolerance(self, name, scale=1.0, step=None):
        if name in DEFAULT_TOLERANCES:
            tol = float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))
            return tol * scale if tol > 0 else tol
        coef = float(self.tolerances.get(name, DEFAULT_TOLERANCES[name + "@h2"]))
        return coef * scale * float(step) ** 2


# -- reports -------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    anchor: str
    defect: float
    tolerance: float
    passed: bool
    runtime: float = 0.0
    mean_defect: float = None
    detail: dict = field(default_factory=dict)
    error: str = None
    comparison: str = "below"

    def to_dict(self, runtime=True):
        out = {
            "check": self.name,
            "comparison": self.comparison,
            "anchor": self.anchor,
            "max_defect": _clean(self.defect),
            "mean_defect": _clean(self.mean_defect),
            "tolerance": _clean(self.tolerance),
            "pass": bool(self.passed),
            "detail": _clean(self.detail),
            "error": self.error,
        }
        if runtime:
            out["runtime"] = self.runtime
        return out


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def environment():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cxlegendre": __version__,
    }


@dataclass
class VerificationReport:
    scenario: str
    checks: list
    config: dict
    seed: int
    environment: dict = field(default_factory=environment)
    runtime: float = 0.0

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, runtime=True):
        out = {
            "scenario": self.scenario,
            "pass": self.passed,
            "seed": self.seed,
            "checks": [c.to_dict(runtime) for c in self.checks],
            "config": _clean(self.config),
            "environment": self.environment,
        }
        if runtime:
            out["runtime"] = self.runtime
        return out

    def to_json(self, runtime=True):
        return json.dumps(self.to_dict(runtime), indent=2, sort_keys=True) + "\n"

    def summary(self):
        lines = [f"scenario {self.scenario}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            tail = f"  ({c.error})" if c.error else ""
            lines.append(f"  [{flag}] {c.name}: {_fmt(c.defect)} vs {_fmt(c.tolerance)}{tail}")
        return "\n".join(lines)


def _fmt(x):
    return f"{x:.3e}" if isinstance(x, (float, int, np.floating)) and x is not None else str(x)


# -- check sessions --------------------------------------------------------------------

@dataclass
class Outcome:
    defect: float
    detail: dict = field(default_factory=dict)
    passed: bool = None
    mean: float = None


class Session:
    """Runs checks in order; an exception fails only its own check and the
    checks that declared it as a prerequisite."""

    def __init__(self, config, scale=1.0, points=None):
        self.config = config
        self.scale = scale
        self.points = points or config.resolutions[-1]
        self.checks = []
        self.values = {}
        self.broken = set()
        self.artifacts = {}

    def tol(self, name, step=None):
        return self.config.tolerance(name, self.scale, step)

    def run(self, name, fn, tolerance, compare="below", needs=(), key=None):
        key = key or name
        anchor = ANCHORS.get(name.split("[")[0], name)
        missing = [n for n in needs if n in self.broken]
        if missing:
            self.broken.add(key)
            self.checks.append(CheckResult(key, anchor, float("nan"), tolerance, False,
                                           error=f"skipped: prerequisite {', '.join(missing)} failed",
                                           comparison=compare))
            return None
        start = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:  # noqa: BLE001 - every failure becomes a report entry
            self.broken.add(key)
            self.checks.append(CheckResult(key, anchor, float("nan"), tolerance, False,
                                           time.perf_counter() - start,
                                           error=f"{type(exc).__name__}: {exc}", comparison=compare))
            return None
        elapsed = time.perf_counter() - start
        passed = out.passed
        if passed is None:
            if compare == "below":
                passed = out.defect < tolerance
            elif compare == "atleast":
                passed = out.defect >= tolerance
            else:
                passed = out.defect > tolerance
        self.checks.append(CheckResult(key, anchor, float(out.defect), tolerance, bool(passed),
                                       elapsed, out.mean, out.detail, comparison=compare))
        return out

    def put(self, name, value):
        self.values[name] = value
        return value


def _setup(s, potential, domain, eta=None):
    """Shared first steps: strong psh, neighborhood, admissibility."""

    def psh():
        return Outcome(check_strong_psh(potential, domain))

    def nb():
        est = s.put("nb", estimate_neighborhood(potential, domain))
        return Outcome(min(est.radius_delta, est.convexity_constant), est.to_dict())

    s.run("strong-psh", psh, s.tol("strong-psh"), "positive")
    s.run("neighborhood", nb, s.tol("neighborhood"), "positive", needs=("strong-psh",))
    if eta is not None:
        def adm():
            rep = admissibility(eta, potential, s.values["nb"], domain)
            return Outcome(rep.c2_norm, rep.to_dict(), passed=rep.admissible)

        nb_est = s.values.get("nb")
        eps = admissibility_radius(nb_est) if nb_est is not None else float("nan")
        s.run("admissibility", adm, eps, "measure", needs=("neighborhood",))


def _chart_views(domain, eta):
    """(label, field, box, mask) for every chart of the domain."""
    if domain.kind == "sphere":
        sf = eta if isinstance(eta, SphereFunction) else SphereFunction(eta)
        own = domain.own_mask(domain.chart.grid())
        return [(f"chart{i}", sf.chart(i), domain.chart, own) for i in range(2)]
    return [("", eta, domain, None)]


def _label(name, label):
    return f"{name}[{label}]" if label else name


# -- scenarios -------------------------------------------------------------------------

def _fixed_point(s):
    pot = s.config.build_potential()
    domain = s.config.build_domain(s.points)
    _setup(s, pot, domain)
    zero = Constant(0.0, pot.dimension)
    need = ("neighborhood",)
    for label, _, box, mask in _chart_views(domain, zero):
        q = box.grid()
        sel = np.ones(box.shape, bool) if mask is None else mask

        def flat(box=box, q=q, sel=sel):
            v, _ = complex_legendre_flat(PotentialField(pot), pot, s.values["nb"], q[sel])
            err = np.abs(v - pot.evaluate(q[sel]))
            return Outcome(float(np.max(err)), mean=float(np.mean(err)))

        def zero_transform(box=box, sel=sel, label=label):
            res = s.put(("res", label), transform_field(zero, pot, s.values["nb"], box))
            err = np.abs(res.transform.values[sel])
            return Outcome(float(np.max(err)), res.report.to_dict(), mean=float(np.mean(err)))

        def identity(q=q, sel=sel, label=label):
            err = np.linalg.norm(s.values[("res", label)].argmax - q, axis=-1)[sel]
            return Outcome(float(np.max(err)))

        s.run("flat-fixed-point", flat, s.tol("flat-fixed-point"), needs=need,
              key=_label("flat-fixed-point", label))
        tz = _label("transform-of-zero", label)
        s.run("transform-of-zero", zero_transform, s.tol("transform-of-zero"), needs=need, key=tz)
        s.run("identity-map", identity, s.tol("identity-map"), needs=(tz,),
              key=_label("identity-map", label))


def _brute_force_points(s, pot, eta, box, mask, count, per_axis):
    nb = s.values["nb"]
    rng = np.random.default_rng(s.config.seed)
    cand = box.grid()[box.interior_mask() & (True if mask is None else mask)]
    q = cand[rng.choice(len(cand), size=count, replace=False)]
    v_newton, z_newton = diastasis_legendre(eta, pot, nb, q)
    fun = _diastasis_objective(pot, eta, q)
    xb = _brute_force_ball(fun, q, nb.radius_delta, pot.dimension, per_axis)
    v_brute = fun(xb, np.arange(len(q)), 0)
    zb = to_complex(xb)
    step = 2 * nb.radius_delta / (per_axis - 1)
    dist = np.linalg.norm(zb - z_newton, axis=-1) / step
    gap = float(np.max(v_brute - v_newton))
    return Outcome(float(np.max(dist)), {"search_step": step, "value_excess": gap,
                                         "points": count},
                   passed=bool(np.max(dist) < s.tol("brute-force-agreement") and gap <= 1e-12))


def _involution(s):
    cfg = s.config
    pot = cfg.build_potential()
    domain = cfg.build_domain(s.points)
    eta = cfg.build_perturbation(pot.dimension)
    _setup(s, pot, domain, eta)
    need = ("neighborhood",)
    views = _chart_views(domain, eta)
    per_view = max(1, 20 // len(views))
    for label, f, box, mask in views:
        h = float(np.max(box.steps))
        sel = np.ones(box.shape, bool) if mask is None else mask
        tr_key = _label("transform", label)

        def transform(f=f, box=box, label=label):
            res = s.put(("res", label), transform_field(f, pot, s.values["nb"], box))
            gmap = GradientMapField(box, res.argmax, map_jacobians(res.argmax, box), res)
            s.put(("map", label), gmap)
            s.artifacts[f"transform{('-' + label) if label else ''}"] = (res, gmap)
            return Outcome(res.report.worst_grad_norm, res.report.to_dict(),
                           passed=not res.report.degraded.any())

        def involution(f=f, box=box, sel=sel):
            _, d = double_transform_defect(f, pot, s.values["nb"], box)
            err = np.abs(d[sel])
            return Outcome(float(np.max(err)), mean=float(np.mean(err)))

        def composition(f=f, box=box, sel=sel, label=label):
            _, d = compose_check(f, pot, s.values["nb"], box, s.values[("map", label)])
            return Outcome(float(np.max(d[sel])), mean=float(np.mean(d[sel])))

        def positivity(f=f, box=box, label=label):
            sw = jacobian_positivity_sweep(f, pot, s.values["nb"], box, seed=cfg.seed)
            s.put(("sweep", label), sw)
            return Outcome(sw.min_determinant, sw.to_dict())

        def implicit(label=label):
            sw = s.values[("sweep", label)]
            return Outcome(sw.implicit_mismatch)

        def grad_identity(f=f, box=box, label=label):
            return Outcome(transform_gradient_identity(f, pot, s.values["nb"], box, s.values[("res", label)]))

        def injective(label=label):
            return Outcome(float(injectivity_violations(s.values[("map", label)])))

        def brute(f=f, box=box, mask=mask):
            return _brute_force_points(s, pot, f, box, mask, per_view, 161 if pot.dimension == 1 else 15)

        s.run("transform", transform, 1e-10, "measure", needs=need, key=tr_key)
        s.run("involution", involution, s.tol("involution"), needs=need, key=_label("involution", label))
        s.run("composition", composition, s.tol("composition"), needs=(tr_key,), key=_label("composition", label))
        pos = _label("jacobian-positivity", label)
        s.run("jacobian-positivity", positivity, s.tol("jacobian-positivity"), "positive", needs=need, key=pos)
        s.run("implicit-jacobian", implicit, s.tol("implicit-jacobian", h), needs=(pos,),
              key=_label("implicit-jacobian", label))
        s.run("gradient-identity", grad_identity, s.tol("gradient-identity", h), needs=(tr_key,),
              key=_label("gradient-identity", label))
        s.run("injectivity", injective, s.tol("injectivity"), needs=(tr_key,), key=_label("injectivity", label))
        s.run("brute-force-agreement", brute, s.tol("brute-force-agreement"), needs=need,
              key=_label("brute-force-agreement", label))

    if domain.kind == "sphere":
        def overlap():
            res = (s.values[("res", "chart0")],)
            return Outcome(chart_overlap_consistency(eta, s.values["nb"], domain, res, pot))

        s.run("chart-overlap", overlap, s.tol("chart-overlap"), needs=("transform[chart0]",))


def _pullback(s):
    cfg = s.config
    pot = cfg.build_potential()
    domain = cfg.build_domain(s.points)
    eta = cfg.build_perturbation(pot.dimension)
    _setup(s, pot, domain, eta)
    for label, f, box, mask in _chart_views(domain, eta):
        def pull(f=f, box=box, mask=mask, label=label):
            r = pullback_defect(f, pot, s.values["nb"], box, mask=mask)
            s.put(("res", label), r.transform)
            if box.dimension == 1:
                s.artifacts[f"form{('-' + label) if label else ''}"] = kahler_form_field(r.transform.transform, pot)
            return Outcome(r.max_defect, {"grid_step": float(box.steps[0])}, mean=r.mean_defect)

        def forms(label=label):
            form = kahler_form_field(s.values[("res", label)].transform, pot)
            return Outcome(form.consistency(), {"min_eigenvalue": form.min_eigenvalue()})

        key = _label("pullback", label)
        s.run("pullback", pull, s.tol("pullback"), needs=("neighborhood",), key=key)
        s.run("form-consistency", forms, s.tol("form-consistency"), needs=(key,),
              key=_label("form-consistency", label))
    if domain.kind == "sphere":
        def overlap():
            res = (s.values[("res", "chart0")],)
            return Outcome(chart_overlap_consistency(eta, s.values["nb"], domain, res, pot))

        s.run("chart-overlap", overlap, s.tol("chart-overlap"), needs=("pullback[chart0]",))


def _differential(s):
    cfg = s.config
    pot = cfg.build_potential()
    box = cfg.build_domain(s.points)
    eta = cfg.build_perturbation(pot.dimension)
    _setup(s, pot, box, eta)
    opts = cfg.options

    def study():
        rng = np.random.default_rng(cfg.seed)
        m = int(opts.get("queries", 64))
        half = 0.7 * float(np.min(box.half_widths))
        x = rng.uniform(-half, half, size=(m, 2 * pot.dimension))
        q = box.center + x[:, :pot.dimension] + 1j * x[:, pot.dimension:]
        chi = smooth_tangent(box, cfg.seed, float(opts.get("margin", 0.2)))
        st = differential_study(eta, chi, pot, s.values["nb"], q, tuple(opts.get("steps", (1e-2, 1e-3, 1e-4))))
        lo, hi = s.tol("differential-ratio-low"), s.tol("differential-ratio-high")
        ok = all(lo <= r <= hi for r in st.ratios)
        worst = max(st.ratios, key=lambda r: abs(np.log(r / 10.0)))
        return Outcome(worst, st.to_dict(), passed=ok)

    s.run("differential", study, [s.tol("differential-ratio-low"), s.tol("differential-ratio-high")],
          "range", needs=("neighborhood",))


def _isometry(s):
    cfg = s.config
    pot = cfg.build_potential()
    box = cfg.build_domain(s.points)
    eta = cfg.build_perturbation(pot.dimension)
    _setup(s, pot, box, eta)
    opts = cfg.options
    pairs = int(opts.get("pairs", 5))
    margin = float(opts.get("margin", 0.2))

    def tangents(k):
        base = 1000 * cfg.seed + 2 * k
        return smooth_tangent(box, base, margin), smooth_tangent(box, base + 1, margin)

    def iso():
        res = transform_field(eta, pot, s.values["nb"], box)
        defects = []
        for k in range(pairs):
            chi, nu = tangents(k)
            defects.append(verify_isometry(eta, chi, nu, pot, s.values["nb"], box, res,
                                           interpolate=False).relative_defect)
        return Outcome(max(defects), {"pairs": defects}, mean=float(np.mean(defects)))

    def at_zero():
        zero = Constant(0.0, pot.dimension)
        chi, nu = tangents(0)
        r = verify_isometry(zero, chi, nu, pot, s.values["nb"], box, interpolate=False)
        return Outcome(r.relative_defect, r.to_dict())

    s.run("isometry", iso, s.tol("isometry"), needs=("neighborhood",))
    s.run("isometry-at-zero", at_zero, s.tol("isometry-at-zero"), needs=("neighborhood",))


def _order_properties(s):
    cfg = s.config
    pot = cfg.build_potential()
    box = cfg.build_domain(s.points)
    _setup(s, pot, box)
    opts = cfg.options
    n = pot.dimension

    def reversal():
        rng = np.random.default_rng(cfg.seed)
        half = 0.6 * float(np.min(box.half_widths))
        worst = -np.inf
        npairs = int(opts.get("pairs", 100))
        m = int(opts.get("queries", 20))
        for _ in range(npairs):
            c1 = box.center + rng.uniform(-half, half, n) + 1j * rng.uniform(-half, half, n)
            c2 = box.center + rng.uniform(-half, half, n) + 1j * rng.uniform(-half, half, n)
            eta1 = GaussianBump(rng.uniform(-0.04, 0.04), c1, rng.uniform(0.5, 0.9))
            eta2 = eta1 + GaussianBump(rng.uniform(0.001, 0.04), c2, rng.uniform(0.5, 0.9))
            x = rng.uniform(-half, half, size=(m, 2 * n))
            q = box.center + x[:, :n] + 1j * x[:, n:]
            v1 = diastasis_legendre(eta1, pot, s.values["nb"], q)[0]
            v2 = diastasis_legendre(eta2, pot, s.values["nb"], q)[0]
            worst = max(worst, float(np.max(v2 - v1)))
        return Outcome(max(worst, 0.0), {"pairs": npairs, "queries_per_pair": m, "max_increase": worst})

    spike_spec = opts.get("spike", {})
    spike = GaussianBump(float(spike_spec.get("amplitude", 0.2)),
                         _complex_vector([spike_spec.get("center", [0.3, -0.2])] * n),
                         float(spike_spec.get("width", 0.15)))

    def envelope():
        from .fields import SampledFunction

        sampled = SampledFunction.from_field(spike, box)
        once = brute_force_transform(sampled, pot, s.values["nb"])
        twice = brute_force_transform(SampledFunction(box, once), pot, s.values["nb"])
        d = s.put("envelope", twice - sampled.values)
        return Outcome(float(np.max(d)), mean=float(np.mean(d)))

    def strict():
        d = s.values["envelope"]
        k = np.unravel_index(int(np.argmax(spike.value(box.grid()))), box.shape)
        return Outcome(float(d[k]), {"spike_node": list(map(int, k))})

    s.run("order-reversal", reversal, s.tol("order-reversal"), needs=("neighborhood",))
    s.run("envelope-upper-bound", envelope, s.tol("envelope-upper-bound"), needs=("neighborhood",))
    s.run("envelope-strict", strict, s.tol("envelope-strict"), needs=("envelope-upper-bound",))


def _sphere_volume(s):
    pot = s.config.build_potential()
    domain = s.config.build_domain(s.points)

    def vol():
        v = sphere_volume(domain, pot)
        return Outcome(abs(v - np.pi) / np.pi, {"volume": v, "exact": np.pi})

    s.run("sphere-volume", vol, s.tol("sphere-volume"))


def _equivalence(s):
    cfg = s.config
    pot = cfg.build_potential()
    box = cfg.build_domain(s.points)
    eta = cfg.build_perturbation(pot.dimension)
    _setup(s, pot, box, eta)
    n = pot.dimension

    def compare():
        rng = np.random.default_rng(cfg.seed)
        m = int(cfg.options.get("queries", 100))
        half = float(np.min(box.half_widths))
        x = rng.uniform(-half, half, size=(m, 2 * n))
        q = box.center + x[:, :n] + 1j * x[:, n:]
        nb = s.values["nb"]
        v_d, z_d = diastasis_legendre(eta, pot, nb, q)
        psi = eta + PotentialField(pot)
        v_f, z_f = complex_legendre_flat(psi, pot, nb, q)
        err = np.abs(v_d - (v_f - pot.evaluate(q)))
        return Outcome(float(np.max(err)), {"argmax_gap": float(np.max(np.abs(z_d - z_f)))},
                       mean=float(np.mean(err)))

    s.run("definition-equivalence", compare, s.tol("definition-equivalence"), needs=("neighborhood",))


@dataclass(frozen=True)
class Scenario:
    runner: object
    description: str
    ordered: tuple = ()


SCENARIOS = {
    "euclidean-fixed-point": Scenario(_fixed_point, "flat and diastasis transforms fix the Euclidean potential"),
    "fubini-study-fixed-point": Scenario(_fixed_point, "fixed point for the Fubini-Study potential on a flat box"),
    "sphere-fixed-point": Scenario(_fixed_point, "fixed point on both charts of the sphere"),
    "flat-involution": Scenario(_involution, "involutivity and the inverse gradient map on a box"),
    "sphere-involution": Scenario(_involution, "involutivity and the inverse gradient map on the sphere"),
    "flat-pullback": Scenario(_pullback, "Monge-Ampere pullback identity on a box, with refinement order",
                              ("pullback",)),
    "flat-pullback-c2": Scenario(_pullback, "pullback identity in two complex dimensions"),
    "sphere-pullback": Scenario(_pullback, "pullback identity on both sphere charts"),
    "differential": Scenario(_differential, "derivative of the transform by difference quotients"),
    "isometry": Scenario(_isometry, "Mabuchi isometry for seeded random tangent pairs", ("isometry",)),
    "order-properties": Scenario(_order_properties, "order reversal and the L^2 eta <= eta envelope"),
    "sphere-volume": Scenario(_sphere_volume, "quadrature oracle: Fubini-Study volume pi"),
    "equivalence": Scenario(_equivalence, "diastasis transform against the flat transform of eta + phi"),
}


# -- running ---------------------------------------------------------------------------

def _session(config, points, scale):
    s = Session(config, scale, points)
    SCENARIOS[config.scenario].runner(s)
    return s


def _sessions(config, scale, jobs):
    if jobs > 1 and len(config.resolutions) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_session, config, r, scale) for r in config.resolutions]
            return [f.result() for f in futures]
    return [_session(config, r, scale) for r in config.resolutions]


def _grid_step(config, points):
    spec = dict(config.domain)
    spec["points"] = points
    d = domain_from_dict(spec)
    box = d.chart if d.kind == "sphere" else d
    return float(np.max(box.steps))


def fit_order(steps, defects):
    """Least-squares slope of log(defect) against log(step); None when the
    defects do not decrease strictly under refinement."""
    steps = np.asarray(steps, float)
    defects = np.asarray(defects, float)
    if len(defects) < 2 or not np.all(np.isfinite(defects)) or np.any(defects <= 0):
        return None
    order = np.argsort(-steps)
    d = defects[order]
    if np.any(np.diff(d) >= 0):
        return None
    return float(np.polyfit(np.log(steps[order]), np.log(d), 1)[0])


def run_scenario(config, tolerance_scale=1.0, jobs=1, out=None):
    """Run every check of a scenario; returns a VerificationReport.

    Scenarios with refinement checks run once per configured resolution and
    add a fitted-order check; all other checks report the finest grid.
    """
    start = time.perf_counter()
    spec = SCENARIOS[config.scenario]
    if spec.ordered and len(config.resolutions) >= 3:
        sessions = _sessions(config, tolerance_scale, jobs)
    else:
        sessions = [_session(config, config.resolutions[-1], tolerance_scale)]
    final = sessions[-1]
    checks = list(final.checks)
    if len(sessions) > 1:
        steps = [_grid_step(config, r) for r in config.resolutions]
        for name in spec.ordered:
            defects = [next((c.defect for c in sess.checks if c.name == name), float("nan")) for sess in sessions]
            fitted = fit_order(steps, defects)
            key = f"{name}-order"
            tol = config.tolerance(key)
            detail = {"resolutions": list(config.resolutions), "grid_steps": steps, "defects": defects}
            checks.append(CheckResult(
                key, ANCHORS[key], float("nan") if fitted is None else fitted, tol,
                fitted is not None and fitted >= tol, detail=detail,
                error=None if fitted is not None else "order indeterminate: defects not monotone",
                comparison="atleast",
            ))
    report = VerificationReport(config.scenario, checks, config.to_dict(), config.seed)
    report.runtime = time.perf_counter() - start
    out = out or config.output
    if out:
        write_outputs(report, final, out)
    return report


def write_outputs(report, session, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{report.scenario}-report.json").write_text(report.to_json())
    for name, artifact in sorted(session.artifacts.items()):
        if isinstance(artifact, tuple):
            res, gmap = artifact
            write_field(out / f"{report.scenario}-{name}-field.csv", res.transform,
                        solver=res.report.to_dict())
            write_map(out / f"{report.scenario}-{name}-map.csv", gmap)
        else:
            write_form(out / f"{report.scenario}-{name}.csv", artifact)


@dataclass
class RefinementTable:
    scenario: str
    resolutions: list
    steps: list
    rows: dict

    def to_dict(self):
        return {"scenario": self.scenario, "resolutions": self.resolutions, "grid_steps": self.steps,
                "checks": _clean(self.rows)}

    def series(self):
        return [(h, d, name) for name, row in sorted(self.rows.items())
                for h, d in zip(self.steps, row["defects"]) if np.isfinite(d)]


def refinement_study(config, tolerance_scale=1.0, jobs=1, out=None):
    """Defect per check at every resolution with a fitted convergence order.

    Orders are reported as "indeterminate" when defects fail to decrease
    monotonically (for example when a check already sits at solver
    tolerance); that is not a failure.
    """
    if len(config.resolutions) < 3:
        raise ConfigError("a refinement study needs at least three resolutions")
    sessions = _sessions(config, tolerance_scale, jobs)
    steps = [_grid_step(config, r) for r in config.resolutions]
    names = [c.name for c in sessions[-1].checks if c.comparison == "below"]
    rows = {}
    for name in names:
        defects = [next((c.defect for c in sess.checks if c.name == name), float("nan")) for sess in sessions]
        fitted = fit_order(steps, [abs(d) for d in defects])
        rows[name] = {"defects": defects, "order": "indeterminate" if fitted is None else fitted}
    table = RefinementTable(config.scenario, list(config.resolutions), steps, rows)
    out = out or config.output
    if out:
        out = Path(out)
        write_json(out / f"{config.scenario}-refinement.json", table.to_dict())
        write_series(out / f"{config.scenario}-refinement.csv", table.series())
    return table


def transform_only(config, out):
    """Compute L(eta) and G(eta) on the configured grid and write them."""
    pot = config.build_potential()
    domain = config.build_domain()
    eta = config.build_perturbation(pot.dimension)
    nb = estimate_neighborhood(pot, domain)
    out = Path(out)
    written = []
    for label, f, box, _ in _chart_views(domain, eta):
        res = transform_field(f, pot, nb, box)
        gmap = GradientMapField(box, res.argmax, map_jacobians(res.argmax, box), res)
        tag = f"-{label}" if label else ""
        written.append(write_field(out / f"transform{tag}.csv", res.transform, solver=res.report.to_dict()))
        written.append(write_map(out / f"gradient-map{tag}.csv", gmap))
    return written


def list_scenarios():
    return {name: sc.description for name, sc in SCENARIOS.items()}

