"""
Experiment kinds: one function per kind, each turning a config item into a
table of rows and a list of assertions.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from rigidlab.catalog import FAMILY, GFQI_KIND, HAMILTONIAN, MAP, TWO_PI, catalog_entry
from rigidlab.errors import ConfigError
from rigidlab.fields import BracketField, LinearCombinationField, scaled
from rigidlab.flow import (
    IntegratorConfig,
    commutation_defect,
    commutator_isotopy,
    flow_isotopy,
    integrate_points,
    reconstruct_hamiltonian,
)
from rigidlab.gfqi import (
    GFQI,
    AddConstant,
    FiberDiffeoMove,
    FiberShift,
    QuadraticForm,
    equivalence_move,
    from_base_function,
    load_grid_gfqi,
    make_gfqi,
    ominus,
    stabilize,
)
from rigidlab.hamlang import ExpressionField
from rigidlab.minmax import (
    c_convergence_profile,
    critical_value_check,
    hatgamma_hamiltonian_lower_bound,
    hatgamma_lower_bound,
    minmax_values,
    property_checks,
)
from rigidlab.phase import (
    Box,
    Regularity,
    ScalarField,
    bracket_of_gradients,
    c0_norm,
    fd_gradient_many,
    jacobi_residual,
    random_points,
)
from rigidlab.rigidity import (
    RigidityMap,
    constancy_system,
    coupling_matrix,
    coupling_matrix_kernel,
    diagonal_brackets,
    flow_family_c0_bound,
    jacobi_elimination_check,
    limit_rigidity_experiment,
    oscillating_c0_bound,
    symmetric_from_seed,
    tilde_transform,
)
from rigidlab.weakbracket import (
    ConvexSetCloud,
    SamplingSchedule,
    VectorField,
    c0_commute_defect,
    hausdorff_distance,
    rs_lie_bracket,
    weak_hamiltonian_field,
    weak_lie_bracket,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assertion:
    """One pass/fail check of a run."""

    item: str
    name: str
    value: Optional[float]
    relation: str
    reference: Optional[float]
    tolerance: Optional[float] = None

    @property
    def passed(self) -> bool:
        if self.value is None or not np.isfinite(self.value):
            return False
        slack = self.tolerance or 0.0
        if self.relation == "<=":
            return self.value <= self.reference + slack
        if self.relation == ">=":
            return self.value >= self.reference - slack
        if self.relation == "~=":
            return abs(self.value - self.reference) <= slack
        return self.value == self.reference

    def as_dict(self) -> Dict[str, Any]:
        return {
            "item": self.item,
            "name": self.name,
            "value": _json_number(self.value),
            "relation": self.relation,
            "reference": _json_number(self.reference),
            "tolerance": _json_number(self.tolerance),
            "passed": self.passed,
        }


def _json_number(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


@dataclass
class ItemContext:
    """What an experiment item sees of the run."""

    name: str
    index: int
    label: str
    seed: int
    integrator: IntegratorConfig
    schedule: Dict[str, Any]
    base_dir: str
    output_dir: str

    def rng(self) -> np.random.Generator:
        """Stream of this item: independent of the worker that runs it."""
        return np.random.default_rng([self.seed, self.index])

    def artifact_path(self, suffix: str) -> str:
        return os.path.join(self.output_dir, f"{self.name}.{self.label}.{suffix}")


@dataclass
class ItemOutcome:
    frame: pd.DataFrame
    assertions: List[Assertion] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)


# references


def _box(
    interval: Optional[Sequence[float]], dim: int, cylinder: bool = False
) -> Optional[Box]:
    if interval is None:
        return None
    lo, hi = float(interval[0]), float(interval[1])
    if cylinder:
        return Box(
            (0.0,) * (dim // 2) + (lo,) * (dim // 2),
            (1.0,) * (dim // 2) + (hi,) * (dim // 2),
            (True,) * (dim // 2) + (False,) * (dim // 2),
        )
    return Box.cube(dim, lo, hi)


def resolve_field(ref) -> ScalarField:
    """A catalog Hamiltonian by name, or an inline expression."""
    if isinstance(ref, str):
        entry = catalog_entry(ref)
        if entry.kind != HAMILTONIAN:
            raise ConfigError(f"{ref!r} is a {entry.kind}, not a hamiltonian")
        return entry.build()
    d = ref.get("d", 1)
    return ExpressionField.from_source(
        ref["expression"],
        d,
        support=_box(ref.get("support"), 2 * d, ref.get("cylinder", False)),
        declared=Regularity.C11 if ref.get("regularity") == "c11" else None,
        name=ref.get("name", ""),
    )


def resolve_gfqi(ref, base_dir: str = ".") -> GFQI:
    """A catalog generating function, an inline core expression or a grid file."""
    if isinstance(ref, str):
        entry = catalog_entry(ref)
        if entry.kind != GFQI_KIND:
            raise ConfigError(f"{ref!r} is a {entry.kind}, not a gfqi")
        return entry.build()
    if "grid_file" in ref:
        S = load_grid_gfqi(os.path.join(base_dir, ref["grid_file"]))
    elif ref.get("k", 0) == 0:
        S = from_base_function(ref["expression"], ref.get("n", 1), name=ref.get("name", ""))
    else:
        S = make_gfqi(
            ref["expression"],
            ref.get("n", 1),
            ref["k"],
            QuadraticForm(ref["Q"]),
            ref["cutoff"],
            name=ref.get("name", ""),
        )
    if "stabilize" in ref:
        S = stabilize(S, QuadraticForm(ref["stabilize"]))
    return S


def resolve_map(ref) -> RigidityMap:
    if isinstance(ref, str):
        entry = catalog_entry(ref)
        if entry.kind != MAP:
            raise ConfigError(f"{ref!r} is a {entry.kind}, not a map")
        return entry.build()
    return RigidityMap.from_expressions(ref["sources"], ref.get("name", ""))


def _coordinate_frame(points: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(points, columns=[f"x{i + 1}" for i in range(points.shape[1])])


# bracket


def run_bracket(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Exact against finite-difference Poisson brackets at random points."""
    f, g = resolve_field(item["f"]), resolve_field(item["g"])
    lo, hi = item.get("box", [-1.0, 1.0])
    pts = random_points(Box.cube(f.dim, lo, hi), item.get("points", 100), ctx.rng())
    tol = item.get("tolerance", 1e-6)

    exact = bracket_of_gradients(f.gradient_many(pts), g.gradient_many(pts))
    fd = bracket_of_gradients(
        fd_gradient_many(f.evaluate_many, pts), fd_gradient_many(g.evaluate_many, pts)
    )
    rel = np.abs(exact - fd) / np.maximum(1.0, np.abs(exact))
    frame = _coordinate_frame(pts)
    frame["bracket"] = exact
    frame["bracket_fd"] = fd
    frame["relative_error"] = rel
    assertions = [
        Assertion(ctx.label, "fd bracket relative error", float(rel.max()), "<=", tol)
    ]

    if "expected" in item:
        oracle = ExpressionField.from_source(item["expected"], f.d)
        err = float(np.max(np.abs(exact - oracle.evaluate_many(pts))))
        frame["expected"] = oracle.evaluate_many(pts)
        assertions.append(Assertion(ctx.label, "bracket against oracle", err, "<=", tol))
    if "h" in item:
        h = resolve_field(item["h"])
        residuals = np.array([jacobi_residual(f, g, h, x) for x in pts])
        frame["jacobi_residual"] = residuals
        assertions.append(
            Assertion(ctx.label, "jacobi residual", float(residuals.max()), "<=", tol)
        )
    return ItemOutcome(frame, assertions)


# flow


def _flow_row(check, H, K, s, t, value, tolerance, **extra) -> Dict[str, Any]:
    row = {
        "check": check,
        "H": H.name,
        "K": "" if K is None else K.name,
        "s": s,
        "t": t,
        "epsilon": np.nan,
        "bracket_norm": np.nan,
        "value": value,
        "tolerance": tolerance,
    }
    row.update(extra)
    return row


def run_flow(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Flow commutation, energy drift, Hamiltonian reconstruction and commutator sweeps."""
    check = item["check"]
    H = resolve_field(item["H"])
    K = resolve_field(item["K"]) if "K" in item else None
    s, t = float(item.get("s", 1.0)), float(item.get("t", 1.0))
    cfg = ctx.integrator
    lo, hi = item.get("box", [-1.0, 1.0])
    grid = Box.cube(H.dim, lo, hi).grid(item.get("resolution", 5))
    pts = grid.points()
    rows, assertions = [], []

    if check == "commutation":
        tol = item.get("tolerance", 5 * cfg.tolerance)
        defect = commutation_defect(H, K, s, t, grid, cfg)
        rows.append(_flow_row(check, H, K, s, t, defect, tol))
        assertions.append(Assertion(ctx.label, "commutation defect", defect, "<=", tol))
    elif check == "energy":
        tol = item.get("tolerance", 1e-8)
        moved = integrate_points(H, pts, t, cfg)
        drift = float(np.max(np.abs(H.evaluate_many(moved) - H.evaluate_many(pts))))
        rows.append(_flow_row(check, H, K, s, t, drift, tol))
        assertions.append(Assertion(ctx.label, "energy drift", drift, "<=", tol))
    elif check == "reconstruction":
        tol = item.get("tolerance", 1e-3)
        rec = reconstruct_hamiltonian(flow_isotopy(H, cfg), grid, t)
        got = rec.values.reshape(-1)
        truth = H.evaluate_many(pts)
        err = float(np.max(np.abs((got - got.mean()) - (truth - truth.mean()))))
        rows.append(_flow_row(check, H, K, s, t, err, tol))
        assertions.append(Assertion(ctx.label, "reconstruction error", err, "<=", tol))
    else:
        norms = []
        for eps in sorted(item["epsilons"], reverse=True):
            K_eps = scaled(K, eps)
            bracket = BracketField(H, K_eps).evaluate_many(pts)
            rec = reconstruct_hamiltonian(commutator_isotopy(H, K_eps, s, cfg), grid, t)
            norms.append(rec.oscillation())
            rows.append(
                _flow_row(
                    check,
                    H,
                    K,
                    s,
                    t,
                    norms[-1],
                    np.nan,
                    epsilon=eps,
                    bracket_norm=float(np.max(bracket) - np.min(bracket)),
                )
            )
        steps = np.diff(norms)
        assertions.append(
            Assertion(ctx.label, "reconstruction norm decrease", float(steps.max()), "<=", 0.0)
        )
    return ItemOutcome(pd.DataFrame(rows), assertions)


# minmax


def _apply_moves(S: GFQI, moves: Sequence[Dict[str, Any]], rng) -> GFQI:
    for move in moves:
        if "add_constant" in move:
            S = equivalence_move(S, AddConstant(float(move["add_constant"])))
        elif "stabilize" in move:
            S = stabilize(S, QuadraticForm(move["stabilize"]))
        else:
            shift = move["fiber_shift"]
            S = equivalence_move(
                S, FiberDiffeoMove(FiberShift(shift["vector"], shift["radius"])), rng=rng
            )
    return S


def _move_label(moves: Sequence[Dict[str, Any]]) -> str:
    parts = []
    for move in moves:
        key = next(iter(move))
        value = move[key]
        if key == "stabilize":
            parts.append(f"stabilize{np.diag(np.asarray(value, dtype=float)).tolist()}")
        elif key == "add_constant":
            parts.append(f"add_constant({float(value)!r})")
        else:
            parts.append(f"fiber_shift({value['vector']}, {value['radius']})")
    return "+".join(parts)


def _minmax_row(variant: str, v) -> Dict[str, Any]:
    return {
        "variant": variant,
        "unit": v.unit,
        "fundamental": v.fundamental,
        "spread": v.fundamental - v.unit,
        "gamma": v.gamma,
        "cell_step": v.cell_step,
        "index": v.index,
        "c_box": v.box.c_box,
        "radius": v.box.radius,
    }


def run_minmax(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """c(1, S) and c(mu, S), their critical-value checks and invariance under moves."""
    S = resolve_gfqi(item["S"], ctx.base_dir)
    res = item.get("resolution")
    cells = item.get("cells", 2.0)
    v = minmax_values(S, res, item.get("c_box"))
    tol = cells * v.cell_step
    rows = [_minmax_row("base", v)]
    assertions = []
    artifacts = []

    for key, which in (("expected_unit", "unit"), ("expected_fundamental", "fundamental")):
        if key in item:
            assertions.append(
                Assertion(ctx.label, f"c({which})", v.value(which), "~=", item[key], tol)
            )
    if item.get("critical", True):
        check_tol = max(tol, 1e-8)
        for which in ("unit", "fundamental"):
            hit = critical_value_check(S, v.value(which), check_tol, res)
            assertions.append(
                Assertion(ctx.label, f"c({which}) is critical", float(hit), "==", 1.0)
            )
    for moves in item.get("invariance", []):
        label = _move_label(moves)
        moved = minmax_values(_apply_moves(S, moves, ctx.rng()), res)
        rows.append(_minmax_row(label, moved))
        assertions.append(
            Assertion(
                ctx.label,
                f"spread invariant under {label}",
                moved.fundamental - moved.unit,
                "~=",
                v.fundamental - v.unit,
                cells * max(v.cell_step, moved.cell_step),
            )
        )
    if item.get("export_diagram"):
        path = ctx.artifact_path("diagram.csv")
        v.diagram.to_csv(path)
        artifacts.append(os.path.basename(path))
    return ItemOutcome(pd.DataFrame(rows), assertions, artifacts)


# gamma


def _gamma_row(mode, subject, value, reference, tolerance) -> Dict[str, Any]:
    return {
        "mode": mode,
        "subject": subject,
        "value": value,
        "reference": reference,
        "tolerance": tolerance,
    }


def run_gamma(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """gamma invariants and distances of generating functions, and lower bounds for flows."""
    mode = item["mode"]
    res = item.get("resolution")
    cells = item.get("cells", 2.0)
    expected = item.get("expected")
    rows, assertions = [], []

    def expect(name, value, tol):
        if expected is not None:
            assertions.append(Assertion(ctx.label, name, value, "~=", expected, tol))

    if mode in ("invariant", "distance", "symmetry"):
        S1 = resolve_gfqi(item["S1"], ctx.base_dir)
        S = S1 if mode == "invariant" else ominus(S1, resolve_gfqi(item["S2"], ctx.base_dir))
        v = minmax_values(S, res)
        tol = cells * v.cell_step
        rows.append(_gamma_row(mode, S.name, v.gamma, expected, tol))
        expect(f"gamma ({mode})", v.gamma, tol)
        if mode == "symmetry":
            S2 = resolve_gfqi(item["S2"], ctx.base_dir)
            w = minmax_values(ominus(S2, S1), res)
            tol = cells * max(v.cell_step, w.cell_step)
            rows.append(_gamma_row(mode, f"({S2.name}) (-) ({S1.name})", w.gamma, v.gamma, tol))
            assertions.append(
                Assertion(ctx.label, "gamma symmetry", w.gamma, "~=", v.gamma, tol)
            )
        return ItemOutcome(pd.DataFrame(rows), assertions)

    H = resolve_field(item["H"])
    family = [resolve_gfqi(ref, ctx.base_dir) for ref in item["family"]]
    grid_resolution = item.get("grid_resolution", 64)
    if mode == "hatgamma":
        if "t" in item:
            bound = hatgamma_lower_bound(H, family, item["t"], res, item.get("reach"))
        else:
            bound = hatgamma_hamiltonian_lower_bound(H, family, res, item.get("times"))
        norm = c0_norm(H, grid_resolution)
        rows.append(
            _gamma_row(
                "hatgamma", H.name, bound.lower_bound, expected, bound.tolerance
            )
        )
        rows.append(_gamma_row("c0_norm", H.name, norm, np.nan, np.nan))
        for name, g in bound.members:
            rows.append(_gamma_row("member", name, g, np.nan, np.nan))
        expect("hatgamma lower bound", bound.lower_bound, bound.tolerance)
        assertions.append(
            Assertion(
                ctx.label,
                "lower bound below C0 norm",
                bound.lower_bound,
                "<=",
                norm,
                bound.tolerance,
            )
        )
        return ItemOutcome(pd.DataFrame(rows), assertions)

    g = resolve_field(item["perturbation"])
    H_seq = [
        LinearCombinationField([(1.0, H), (1.0 / n, g)], name=f"{H.name} + g/{n}")
        for n in range(1, item.get("n_max", 4) + 1)
    ]
    frame = c_convergence_profile(H_seq, H, family, res, grid_resolution)
    violations = int((~frame["inequality_holds"].astype(bool)).sum())
    assertions.append(Assertion(ctx.label, "inequality violations", violations, "==", 0))
    return ItemOutcome(frame, assertions)


# weak fields


def _classical(H: ScalarField, x: np.ndarray, provenance: Dict[str, Any]) -> ConvexSetCloud:
    return ConvexSetCloud.singleton(H.vector_field_many(x[None, :])[0], provenance)


def run_weakfield(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Sampled weak fields and brackets against a reference set."""
    mode = item["mode"]
    H = resolve_field(item["H"])
    K = resolve_field(item["K"]) if "K" in item else None
    x = np.asarray(item["point"], dtype=float)
    sched = SamplingSchedule.from_dict(
        dict(ctx.schedule, **item.get("schedule", {}), seed=ctx.seed)
    )

    if mode == "field":
        cloud = weak_hamiltonian_field(H, x, sched)
        reference_field = H
    elif mode == "lie_bracket":
        cloud = weak_lie_bracket(H, K, x, sched)
        reference_field = BracketField(H, K)
    else:
        cloud = rs_lie_bracket(VectorField.hamiltonian(H), VectorField.hamiltonian(K), x, sched)
        # with X_H = E DH, Df g - Dg f for f = X_H, g = X_K is X_{H,K}
        reference_field = BracketField(H, K)

    if "expected" in item:
        reference = ConvexSetCloud(
            np.asarray(item["expected"], dtype=float), {"kind": "expected"}
        )
        default_tol = 1e-3
    else:
        reference = _classical(reference_field, x, {"kind": "classical"})
        default_tol = 1e-4 if mode == "rs_bracket" else 1e-6
    tol = item.get("tolerance", default_tol)
    distance = hausdorff_distance(cloud, reference, item.get("direction_count"))

    frame = _coordinate_frame(x[None, :])
    frame.insert(0, "mode", mode)
    frame["generators"] = cloud.size
    frame["diameter"] = cloud.diameter
    frame["hausdorff"] = distance
    frame["tolerance"] = tol
    artifacts = []
    if item.get("export"):
        path = ctx.artifact_path("cloud.csv")
        cloud.export(path)
        artifacts = [os.path.basename(path), os.path.basename(path)[: -len(".csv")] + ".json"]
    return ItemOutcome(
        frame,
        [Assertion(ctx.label, "hausdorff distance", distance, "<=", tol)],
        artifacts,
    )


# C0 commutation


def _perturbed(base: ScalarField, g: Optional[ScalarField]) -> Callable[[int], ScalarField]:
    if g is None:
        return lambda n: base
    return lambda n: LinearCombinationField(
        [(1.0, base), (1.0 / n, g)], name=f"{base.name} + g/{n}"
    )


def run_c0commute(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Bracket norms along H + g/n, K + k/n and their log-log decay rate."""
    H, K = resolve_field(item["H"]), resolve_field(item["K"])
    g = resolve_field(item["g"])
    k = resolve_field(item["k"]) if "k" in item else None
    report = c0_commute_defect(
        _perturbed(H, g),
        _perturbed(K, k),
        H,
        K,
        item.get("grid_resolution", 32),
        item.get("n_max", 64),
        item.get("tolerance", 1e-6),
    )
    frame = report.frame
    norms = frame["bracket_norm"].to_numpy(dtype=float)
    ns = frame["n"].to_numpy(dtype=float)
    keep = norms > 0
    slope = np.nan
    if keep.sum() > 1:
        slope = float(np.polyfit(np.log(ns[keep]), np.log(norms[keep]), 1)[0])
    assertions = [
        Assertion(
            ctx.label,
            "bracket norm log-log slope",
            slope,
            "~=",
            item.get("slope", -1.0),
            item.get("slope_tolerance", 0.1),
        )
    ]
    if "expect_evidence" in item:
        assertions.append(
            Assertion(
                ctx.label,
                "C0-commutation evidence",
                float(report.evidence),
                "==",
                float(item["expect_evidence"]),
            )
        )
    return ItemOutcome(frame, assertions)


# rigidity


def _coupling(item, ctx) -> ItemOutcome:
    rows = []
    for d in range(item.get("d_min", 2), item.get("d_max", 50) + 1):
        rank, kernel = coupling_matrix_kernel(d)
        ones = len(kernel) == 1 and len(set(kernel[0])) == 1 and kernel[0][0] != 0
        rows.append(
            {
                "d": d,
                "rank": rank,
                "determinant": int(coupling_matrix(d).determinant),
                "kernel_dimension": len(kernel),
                "kernel_is_ones": ones,
            }
        )
    frame = pd.DataFrame(rows)
    rank_gap = int(np.max(np.abs(frame["rank"] - (frame["d"] - 1))))
    assertions = [
        Assertion(ctx.label, "rank d-1", rank_gap, "==", 0),
        Assertion(ctx.label, "determinant", int(np.max(np.abs(frame["determinant"]))), "==", 0),
        Assertion(
            ctx.label, "kernel spanned by ones", float(frame["kernel_is_ones"].all()), "==", 1.0
        ),
    ]
    return ItemOutcome(frame, assertions)


def _tilde(item, ctx) -> ItemOutcome:
    rng = ctx.rng()
    tol = item.get("tolerance", 1e-8)
    rows = []
    for d in item.get("dims", [1, 2, 3]):
        maps = [RigidityMap.identity(d)] + [
            RigidityMap.linear_symplectic(symmetric_from_seed(d, rng), name=f"exp(E S_{j})")
            for j in range(item.get("maps", 10))
        ]
        pts = random_points(Box.cube(2 * d, -1.0, 1.0), item.get("points", 100), rng)
        for phi in maps:
            diag = diagonal_brackets(tilde_transform(phi), pts)
            rows.append(
                {
                    "d": d,
                    "map": phi.name,
                    "max_abs_diagonal": float(np.max(np.abs(diag))),
                }
            )
    frame = pd.DataFrame(rows)
    worst = float(frame["max_abs_diagonal"].max())
    return ItemOutcome(
        frame, [Assertion(ctx.label, "tilde diagonal brackets", worst, "<=", tol)]
    )


def _jacobi(item, ctx) -> ItemOutcome:
    phi = resolve_map(item["map"])
    tol = item.get("tolerance", 1e-6)
    report = jacobi_elimination_check(phi, item["point"], tol)
    _, det = constancy_system(phi, item["point"])
    frame = report.entries.copy()
    frame["constancy_det"] = det
    assertions = [
        Assertion(ctx.label, "jacobi elimination", report.max_abs, "<=", tol),
        # det(DPhi E) = det E = 1 for symplectic Phi
        Assertion(ctx.label, "constancy determinant", det, "~=", 1.0, tol),
    ]
    return ItemOutcome(frame, assertions)


def _limit(item, ctx) -> ItemOutcome:
    entry = catalog_entry(item["family"])
    if entry.kind != FAMILY:
        raise ConfigError(f"{entry.name!r} is a {entry.kind}, not a family")
    lo, hi = item.get("box", [-3.0, 3.0])
    box = Box.cube(2 * entry.d, lo, hi)
    n_max = item.get("n_max", 4)
    tol = item.get("tolerance", 1e-6)
    report = limit_rigidity_experiment(
        entry.build(cfg=ctx.integrator),
        RigidityMap.identity(entry.d),
        n_max,
        box,
        item.get("resolution", 9),
        entry.support,
        tol,
    )
    if entry.options.get("family") == "oscillating":
        bounds = [oscillating_c0_bound(n, max(abs(lo), abs(hi))) for n in range(1, n_max + 1)]
    else:
        H = entry.as_field()
        bounds = [flow_family_c0_bound(H, n, box) for n in range(1, n_max + 1)]
    frame = report.frame.copy()
    frame["c0_bound"] = bounds + [np.nan]
    members = frame.iloc[:-1]
    excess = float(np.max(members["sup_distance"].to_numpy() - np.asarray(bounds)))
    limit = frame.iloc[-1]
    assertions = [
        Assertion(ctx.label, "sup distance within bound", excess, "<=", 0.0, 1e-12),
        Assertion(
            ctx.label,
            "limit table deviation",
            float(limit["max_table_deviation"]),
            "<=",
            tol,
        ),
        Assertion(ctx.label, "C estimate", float(limit["C_estimate"]), "~=", 1.0, tol),
    ]
    if not np.isnan(limit["at_infinity_deviation"]):
        assertions.append(
            Assertion(
                ctx.label,
                "at-infinity table deviation",
                float(limit["at_infinity_deviation"]),
                "<=",
                tol,
            )
        )
    return ItemOutcome(frame, assertions)


_RIGIDITY_CHECKS = {"coupling": _coupling, "tilde": _tilde, "jacobi": _jacobi, "limit": _limit}


def run_rigidity(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Coupling matrix, tilde step, Jacobi elimination and the limit experiment."""
    return _RIGIDITY_CHECKS[item["check"]](item, ctx)


# property suite


def generated_pairs(
    count: int,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    max_frequency: int = 2,
):
    """Random trigonometric pairs a cos(2 pi m q) + b sin(2 pi m q) on T^1."""
    pairs = []
    for i in range(count):
        pair = []
        for j in (1, 2):
            a, b = (float(v) for v in rng.uniform(-amplitude, amplitude, 2))
            m = int(rng.integers(1, max_frequency + 1))
            source = f"{a!r}*cos({TWO_PI}*{m}*q1) + ({b!r})*sin({TWO_PI}*{m}*q1)"
            pair.append(from_base_function(source, 1, name=f"pair{i + 1}.S{j}"))
        pairs.append(tuple(pair))
    return pairs


def run_property_suite(item: Dict[str, Any], ctx: ItemContext) -> ItemOutcome:
    """Duality and subadditivity of c on given or generated pairs."""
    if "generated" in item:
        gen = item["generated"]
        pairs = generated_pairs(
            gen["count"],
            ctx.rng(),
            gen.get("amplitude", 1.0),
            gen.get("max_frequency", 2),
        )
    else:
        S1 = resolve_gfqi(item["S1"], ctx.base_dir)
        S2 = resolve_gfqi(item["S2"], ctx.base_dir) if "S2" in item else None
        pairs = [(S1, S2)]
    frames = []
    failed = 0
    for i, (S1, S2) in enumerate(pairs, start=1):
        report = property_checks(S1, S2, item.get("resolution"), item.get("cells", 2.0))
        frame = report.to_frame()
        frame.insert(0, "pair", i)
        frames.append(frame)
        failed += int(not report.passed)
    return ItemOutcome(
        pd.concat(frames, ignore_index=True),
        [Assertion(ctx.label, "failing pairs", failed, "==", 0)],
    )


EXPERIMENTS: Dict[str, Callable[[Dict[str, Any], ItemContext], ItemOutcome]] = {
    "bracket": run_bracket,
    "flow": run_flow,
    "minmax": run_minmax,
    "gamma": run_gamma,
    "weakfield": run_weakfield,
    "c0commute": run_c0commute,
    "rigidity": run_rigidity,
    "property-suite": run_property_suite,
}
