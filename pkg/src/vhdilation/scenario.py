"""Scenario files and the batch task runner behind the ``run`` command."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .algebra import AlgebraElement, AlgebraShape, Seminorm, as_shape
from .errors import DilationError, DimensionError, ParseError, TaskDependencyError
from .generators import (circulant_fixture, family_semigroup, invariant_fixture,
                         kms_fixture, random_psd_kernel)
from .kernel import (OperatorKernel, b2_constant, b2_ratio_sweep, gram_block,
                     hermitian_residual, invariance_scan, is_hermitian, is_invariant,
                     is_positive_semidefinite, kernel_schwarz_terms, krld_check,
                     min_relative_eigenvalue, mtop_witness,
                     pos_schwarz_check, propagation_check, two_positive_structure)
from .linearisation import (b1_constant_exact, b1_ratio_sweep, gram_norm, induce_representation,
                            intertwining_residual, kolmogorov, reconstruction_residual,
                            reproducing_space, shifted_b1_constant, unitary_equivalence,
                            verify_star_rep)
from .module import gramian, op_seminorm, random_vector
from .semigroup import (Action, StarSemigroup, group_with_inverse_star, integer_window,
                        left_regular_action, naturals_window, validate, validate_action)
from .serialization import (SCHEMA_VERSION, check_version, cp_map_from_dict,
                            decode_kernel_values)
from .stinespring import (CPMap, amplification_oracle, choi_is_psd, continuity_constants,
                          depolarizing_map, dilation_residual_on, dilation_residuals,
                          expected_dilation_dims, identity_map, is_completely_positive,
                          kernel_of_map, random_cp_map, scalar_net, stinespring_dilate, strictness_check,
                          transpose_map)

log = logging.getLogger(__name__)

TASKS = ("validate", "hermitian", "psd", "two_positive", "invariance", "dilate", "representation",
         "b1", "b2", "schwarz4", "pos_schwarz", "krld", "mtop", "propagation", "rk_check",
         "cp_check", "stinespring", "strictness", "constants", "equivalence")

DEPENDS = {
    "invariance": ("validate",),
    "dilate": ("psd",),
    "representation": ("validate", "dilate"),
    "b1": ("validate", "psd"),
    "b2": ("psd",),
    "pos_schwarz": ("psd",),
    "krld": ("psd",),
    "propagation": ("two_positive",),
    "rk_check": ("dilate",),
    "equivalence": ("dilate",),
    "stinespring": ("cp_check",),
    "strictness": ("cp_check",),
}

INEQ_ATOL = 1e-10
RATIO_ATOL = 1e-8
DEFAULT_TOLERANCES = {"psd_tol": 1e-10, "rank_tol": 1e-10, "rep_tol": 1e-8}


@dataclass
class Scenario:
    shape: AlgebraShape
    m: int
    kernel: Optional[OperatorKernel]
    sg: Optional[StarSemigroup]
    act: Optional[Action]
    cp_map: Optional[CPMap]
    tasks: list[str]
    tolerances: dict
    seed: int
    samples: int = 200
    draws: int = 2000
    seminorms: list[Seminorm] = field(default_factory=list)
    net: Optional[list[float]] = None
    raw: dict = field(default_factory=dict)


# --- parsing --------------------------------------------------------------------

def _parse_semigroup(obj, path) -> StarSemigroup:
    if "family" in obj:
        return family_semigroup(obj["family"], int(obj.get("order", 4)))
    try:
        return StarSemigroup(np.array(obj["mult"]), np.array(obj["star"]), obj.get("unit"),
                             tuple(obj.get("names", ())))
    except KeyError as exc:
        raise ParseError(f"missing field {exc}", path) from None


def _parse_action(obj, sg: StarSemigroup, path) -> Action:
    if obj == "left_regular":
        return left_regular_action(sg)
    if isinstance(obj, dict):
        return Action(np.array(obj.get("table")), bool(obj.get("unital", False)))
    raise ParseError("action must be 'left_regular' or an object with a table", path)


def _parse_cp_map(obj, rng) -> CPMap:
    kind = obj.get("kind")
    if kind is None:
        return cp_map_from_dict(obj)
    n = int(obj.get("n", 2))
    if kind == "identity":
        return identity_map(n, int(obj.get("m", 1)))
    if kind == "transpose":
        return transpose_map(n)
    if kind == "depolarizing":
        return depolarizing_map(n)
    if kind == "random":
        return random_cp_map(obj.get("domain_shape", [n]), obj.get("codomain_shape", [n]),
                             int(obj.get("m", 1)), rng, int(obj.get("n_kraus", 3)))
    raise ParseError(f"unknown cp_map kind {kind!r}", "cp_map.kind")


def _generate(gen: dict, shape: AlgebraShape, m: int, rng) -> tuple:
    kind = gen.get("kind")
    if kind == "random_psd":
        k, _ = random_psd_kernel(shape, m, int(gen.get("points", 4)), rng, gen.get("rank"))
        return k, None, None
    if kind == "circulant":
        fx = circulant_fixture(int(gen.get("order", 5)), shape, m, rng)
        return fx.kernel, fx.sg, fx.act
    if kind == "kms":
        if shape.component_dims != (1,) or m != 1:
            raise DimensionError("the kms generator produces scalar kernels (algebra [1], m = 1)")
        fx = kms_fixture(int(gen.get("points", 6)), float(gen.get("a", 0.5)))
        return fx.kernel, fx.sg, fx.act
    if kind == "invariant_from_rep":
        fx = invariant_fixture(gen.get("family", "cyclic"), shape, m, rng,
                               int(gen.get("order", 4)), int(gen.get("rep_dim", 3)))
        return fx.kernel, fx.sg, fx.act
    raise ParseError(f"unknown generator kind {kind!r}", "generator.kind")


def parse_scenario(data: dict, seed: Optional[int] = None, tasks: Optional[list[str]] = None,
                   tol: Optional[float] = None) -> Scenario:
    check_version(data, "scenario")
    shape = as_shape(data.get("algebra", [1]))
    m = int(data.get("module_rank", 1))
    seed = int(data.get("seed", 0)) if seed is None else seed
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(data.get("tolerances", {}))
    if tol is not None:
        tolerances["psd_tol"] = tolerances["rank_tol"] = tol
    task_list = list(tasks if tasks is not None else data.get("tasks", []))
    unknown = [t for t in task_list if t not in TASKS]
    if unknown:
        raise ParseError(f"unknown tasks {unknown}", "tasks")
    rng = np.random.default_rng([seed, 0])

    sources = [key for key in ("kernel", "generator", "cp_map") if key in data]
    if len(sources) > 1:
        raise ParseError(f"give only one of kernel, generator, cp_map (found {sources})", sources[1])
    sg = act = kernel = cp = None
    if "semigroup" in data:
        sg = _parse_semigroup(data["semigroup"], "semigroup")
    if "window" in data:
        win = data["window"]
        maker = integer_window if win.get("kind", "integer") == "integer" else naturals_window
        sg, act = maker(int(win["points"]))
    if "action" in data:
        if sg is None:
            raise ParseError("an action needs a semigroup", "action")
        act = _parse_action(data["action"], sg, "action")
    if "kernel" in data:
        kernel = decode_kernel_values(data["kernel"], shape, m)
    elif "generator" in data:
        kernel, gsg, gact = _generate(data["generator"], shape, m, rng)
        if gsg is not None and sg is None:
            sg, act = gsg, gact
    if "cp_map" in data:
        cp = _parse_cp_map(data["cp_map"], rng)
        if "algebra" in data and (as_shape(data["algebra"]) != cp.codomain or m != cp.m):
            raise DimensionError(f"cp_map acts on {cp.codomain.component_dims}, m={cp.m}; "
                                 f"scenario declares {shape.component_dims}, m={m}")
        kernel = kernel_of_map(cp)
        shape, m = cp.codomain, cp.m
    if kernel is not None:
        if kernel.shape != shape or kernel.m != m:
            raise DimensionError(f"kernel lives on {kernel.shape.component_dims}, m={kernel.m}; "
                                 f"scenario declares {shape.component_dims}, m={m}")
        if act is not None and act.n_points != kernel.n_points:
            raise DimensionError(f"action moves {act.n_points} points, kernel has {kernel.n_points}")
    if act is not None and act.table.shape[0] != sg.order:
        raise DimensionError("action table rows do not match the semigroup order")
    seminorms = [Seminorm(tuple(s)) for s in data.get("seminorms", [])]
    if not seminorms:
        seminorms = shape.singletons() + ([shape.full_support()] if shape.s > 1 else [])
    for p in seminorms:
        p.check(shape)
    return Scenario(shape, m, kernel, sg, act, cp, task_list, tolerances, seed,
                    int(data.get("samples", 200)), int(data.get("draws", 2000)),
                    seminorms, data.get("net"), data)


# --- running --------------------------------------------------------------------

class _Fail(Exception):
    """A task finished with a failing verdict; carries its payload."""

    def __init__(self, payload):
        super().__init__("failed")
        self.payload = payload


class Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.results: dict[str, dict] = {}
        self.cache: dict[str, Any] = {}

    def rng(self, task: str) -> np.random.Generator:
        return np.random.default_rng([self.sc.seed, zlib.crc32(task.encode())])

    # plumbing

    def need_kernel(self) -> OperatorKernel:
        if self.sc.kernel is None:
            raise DimensionError("task needs a kernel (kernel, generator or cp_map)")
        return self.sc.kernel

    def need_action(self) -> tuple[StarSemigroup, Action]:
        if self.sc.sg is None or self.sc.act is None:
            raise DimensionError("task needs a semigroup and an action")
        return self.sc.sg, self.sc.act

    def need_map(self) -> CPMap:
        if self.sc.cp_map is None:
            raise DimensionError("task needs a cp_map")
        return self.sc.cp_map

    def run_task(self, name: str) -> dict:
        if name in self.results:
            return self.results[name]
        for dep in DEPENDS.get(name, ()):
            if self.run_task(dep)["verdict"] != "pass":
                res = {"verdict": "error", "error": TaskDependencyError.__name__,
                       "message": f"prerequisite {dep!r} did not pass"}
                self.results[name] = res
                return res
        try:
            payload = getattr(self, f"task_{name}")()
            res = {"verdict": "pass", "payload": payload}
        except _Fail as f:
            res = {"verdict": "fail", "payload": f.payload}
        except DilationError as exc:
            res = {"verdict": "error", "error": type(exc).__name__, "message": str(exc)}
            triple = getattr(exc, "triple", None)
            if triple is not None:
                res["triple"] = list(triple)
        log.info("task %s: %s", name, res["verdict"])
        self.results[name] = res
        return res

    @staticmethod
    def _verdict(ok: bool, payload: dict) -> dict:
        if not ok:
            raise _Fail(payload)
        return payload

    # tasks

    def task_validate(self):
        sg, act = self.need_action()
        v1 = validate(sg)
        v2 = validate_action(sg, act)
        payload = {"semigroup": v1.ok, "action": v2.ok, "order": sg.order, "points": act.n_points,
                   "partial": sg.is_partial or act.is_partial,
                   "group_with_inverse_star": group_with_inverse_star(sg),
                   "violation": v1.violation or v2.violation,
                   "witness": list(v1.witness or v2.witness or [])}
        return self._verdict(v1.ok and v2.ok, payload)

    def task_hermitian(self):
        k = self.need_kernel()
        return self._verdict(is_hermitian(k, self.sc.tolerances["psd_tol"]),
                             {"residual": hermitian_residual(k)})

    def task_psd(self):
        k = self.need_kernel()
        ok = is_positive_semidefinite(k, self.sc.tolerances["psd_tol"])
        return self._verdict(ok, {"min_relative_eigenvalue": min_relative_eigenvalue(k),
                                  "gram_dims": [g.shape[0] for g in gram_block(k)],
                                  "hermitian_residual": hermitian_residual(k)})

    def task_two_positive(self):
        k = self.need_kernel()
        rep = two_positive_structure(k, self.sc.tolerances["psd_tol"])
        return {"hermitian_residual": rep.hermitian_residual, "zero_points": rep.zero_points,
                "support_points": rep.support_points, "max_zero_row": rep.max_zero_row}

    def task_invariance(self):
        k = self.need_kernel()
        sg, act = self.need_action()
        v = is_invariant(k, sg, act, self.sc.tolerances["psd_tol"])
        worst, where = invariance_scan(k, sg, act)
        return self._verdict(v.ok, {"residual": worst, "triple": list(where) if where else None})

    def linearisation(self, route="eig"):
        key = f"lin:{route}"
        if key not in self.cache:
            self.cache[key] = kolmogorov(self.need_kernel(), self.sc.tolerances["rank_tol"], route,
                                         psd_tol=self.sc.tolerances["psd_tol"])
        return self.cache[key]

    def task_dilate(self):
        k = self.need_kernel()
        lin = self.linearisation()
        res = reconstruction_residual(lin, k)
        bound = 10 * lin.tol * gram_norm(k)
        return self._verdict(res <= bound, {"dims": lin.dims, "residual": res, "bound": bound,
                                            "route": lin.route, "kernel_hash": lin.kernel_digest})

    def representation(self):
        if "rep" not in self.cache:
            sg, act = self.need_action()
            self.cache["rep"] = induce_representation(self.linearisation(), sg, act,
                                                      self.sc.tolerances["rep_tol"])
        return self.cache["rep"]

    def task_representation(self):
        _, act = self.need_action()
        lin = self.linearisation()
        rep = self.representation()
        tol = self.sc.tolerances["rep_tol"]
        chk = verify_star_rep(rep, tol)
        inter = intertwining_residual(lin, rep, act)
        payload = {"multiplicative": chk.multiplicative, "adjoint": chk.adjoint, "intertwining": inter,
                   "consistency": max(rep.consistency, default=0.0),
                   "worst_product": list(chk.worst_product) if chk.worst_product else None}
        return self._verdict(chk.ok(tol) and inter <= tol, payload)

    def task_b1(self):
        k = self.need_kernel()
        sg, act = self.need_action()
        rng = self.rng("b1")
        rep = None
        if not act.is_partial:
            try:
                rep = self.representation()
            except DilationError:
                rep = None
        group = group_with_inverse_star(sg)
        out, ok = {}, True
        for xi in range(sg.order):
            for p in self.sc.seminorms:
                c_gram = shifted_b1_constant(k, act, xi, p, self.sc.tolerances["rank_tol"])
                ratio = b1_ratio_sweep(k, act, xi, p, rng, self.sc.draws)
                entry = {"constant": c_gram, "mc_ratio": ratio}
                c = c_gram
                if rep is not None:
                    c = b1_constant_exact(self.linearisation(), rep, xi, p)
                    entry["constant_rep"] = c
                ok &= ratio <= c + RATIO_ATOL
                if group and rep is not None:
                    ok &= abs(c - 1.0) <= 1e-10 or c == 0.0
                out[f"{sg.names[xi]}|{p.label()}"] = entry
        return self._verdict(ok, {"group_with_inverse_star": group, "constants": out})

    def task_b2(self):
        k = self.need_kernel()
        rng = self.rng("b2")
        out, ok = {}, True
        for x in range(k.n_points):
            for p in self.sc.seminorms:
                c = b2_constant(k, x, p)
                ratio = b2_ratio_sweep(k, x, p, rng, self.sc.draws)
                ok &= ratio <= c + RATIO_ATOL
                out[f"{x}|{p.label()}"] = {"constant": c, "mc_ratio": ratio}
        return self._verdict(ok, {"constants": out})

    def task_schwarz4(self):
        rng = self.rng("schwarz4")
        shape, m = self.sc.shape, self.sc.m
        worst4 = worst1 = -np.inf
        for _ in range(self.sc.samples):
            e, f = random_vector(shape, m, rng), random_vector(shape, m, rng)
            for p in self.sc.seminorms:
                lhs = p(gramian(e, f))
                rhs = np.sqrt(p(gramian(e, e)) * p(gramian(f, f)))
                worst4 = max(worst4, lhs - 4 * rhs)
                worst1 = max(worst1, lhs - rhs)
        return self._verdict(max(worst4, worst1) <= INEQ_ATOL,
                             {"max_violation_const4": worst4, "max_violation_const1": worst1,
                              "samples": self.sc.samples})

    def _diag_suite(self, name, fn):
        k = self.need_kernel()
        rng = self.rng(name)
        per = max(self.sc.samples // max(k.n_points, 1), 1)
        worst, out = -np.inf, {}
        for x in range(k.n_points):
            for p in self.sc.seminorms:
                val = fn(k, x, p, rng, per)
                out[f"{x}|{p.label()}"] = val
                worst = max(worst, val[-1] if isinstance(val, tuple) else val)
        return worst, out

    def task_pos_schwarz(self):
        worst, out = self._diag_suite("pos_schwarz", lambda k, x, p, rng, n: pos_schwarz_check(k(x, x), p, n, rng))
        k = self.need_kernel()
        rng = self.rng("pos_schwarz:kernel")
        worst_k = -np.inf
        for _ in range(self.sc.samples):
            n = int(rng.integers(1, k.n_points + 1))
            ys = list(rng.integers(0, k.n_points, size=n))
            hs = [random_vector(k.shape, k.m, rng) for _ in ys]
            x = int(rng.integers(0, k.n_points))
            for p in self.sc.seminorms:
                lhs, mid, right = kernel_schwarz_terms(k, x, ys, hs, p)
                worst_k = max(worst_k, lhs - np.sqrt(mid * right))
        return self._verdict(max(worst, worst_k) <= INEQ_ATOL,
                             {"operator_max_violation": worst, "kernel_max_violation": worst_k})

    def task_krld(self):
        worst, out = self._diag_suite("krld", lambda k, x, p, rng, n: krld_check(k(x, x), p, n, rng))
        return self._verdict(worst <= INEQ_ATOL, {"max_violation": worst,
                                                  "constants": {key: v[0] for key, v in out.items()}})

    def task_mtop(self):
        k = self.need_kernel()
        rng = self.rng("mtop")
        worst, out = 0.0, {}
        for x in range(k.n_points):
            for y in range(k.n_points):
                for p in self.sc.seminorms:
                    D, r = mtop_witness(k(x, y), p, 6, 4, rng)
                    out[f"{x},{y}|{p.label()}"] = D
                    worst = max(worst, r)
        return self._verdict(worst <= RATIO_ATOL, {"max_relative_residual": worst, "constants": out})

    def task_propagation(self):
        k = self.need_kernel()
        rng = self.rng("propagation")
        per = max(self.sc.samples // max(k.n_points ** 2, 1), 1)
        worst, out = -np.inf, {}
        for x in range(k.n_points):
            for y in range(k.n_points):
                for p in self.sc.seminorms:
                    C, v = propagation_check(k, x, y, p, per, rng)
                    out[f"{x},{y}|{p.label()}"] = C
                    worst = max(worst, v)
        return self._verdict(worst <= INEQ_ATOL, {"max_violation": worst, "constants": out})

    def task_rk_check(self):
        lin = self.linearisation()
        k = self.need_kernel()
        R = reproducing_space(lin)
        rng = self.rng("rk_check")
        rk3 = adj = 0.0
        n_draw = min(self.sc.samples, 100)
        for _ in range(n_draw):
            u = [rng.standard_normal((d, n)) + 1j * rng.standard_normal((d, n))
                 for d, n in zip(lin.dims, k.shape.component_dims)]
            f = R.from_k(u)
            x = int(rng.integers(0, k.n_points))
            h = random_vector(k.shape, k.m, rng).blocks
            rk3 = max(rk3, R.reproducing_residual(f, x, h))
            adj = max(adj, R.evaluation_adjoint_residual(x, h))
        payload = {"reproducing": rk3, "evaluation_adjoint": adj, "draws": n_draw}
        ok = rk3 <= INEQ_ATOL and adj <= INEQ_ATOL
        if self.sc.sg is not None and self.sc.act is not None and not self.sc.act.is_partial:
            sg, act = self.sc.sg, self.sc.act
            if is_invariant(k, sg, act, self.sc.tolerances["psd_tol"]):
                rho = 0.0
                for xi in range(sg.order):
                    for x in range(k.n_points):
                        h = random_vector(k.shape, k.m, rng).blocks
                        rho = max(rho, R.rho_intertwining_residual(sg, act, xi, x, h))
                payload["rho_intertwining"] = rho
                ok &= rho <= self.sc.tolerances["rep_tol"]
        return self._verdict(ok, payload)

    def task_equivalence(self):
        lin = self.linearisation("eig")
        lin2 = self.linearisation("cholesky")
        tol = self.sc.tolerances["rep_tol"]
        U = unitary_equivalence(lin, lin2, tol)
        return {"isometry": U.isometry, "coisometry": U.coisometry, "intertwining": U.intertwining,
                "dims": lin.dims, "dims_cholesky": lin2.dims}

    def task_cp_check(self):
        phi = self.need_map()
        tol = self.sc.tolerances["psd_tol"]
        kern = is_completely_positive(phi, tol)
        choi = choi_is_psd(phi, tol)
        amp = amplification_oracle(phi, self.rng("cp_check"))
        payload = {"kernel_psd": kern, "choi_psd": choi, "amplification": amp, "oracles_agree": kern == choi}
        return self._verdict(kern and choi, payload)

    def dilation(self):
        if "dil" not in self.cache:
            self.cache["dil"] = stinespring_dilate(self.need_map(), self.sc.tolerances["rank_tol"],
                                                   rep_tol=self.sc.tolerances["rep_tol"])
        return self.cache["dil"]

    def task_stinespring(self):
        phi = self.need_map()
        dil = self.dilation()
        rep = dilation_residuals(dil)
        rng = self.rng("stinespring")
        rand = 0.0
        for _ in range(min(self.sc.samples, 100)):
            b = AlgebraElement(phi.domain, tuple(
                rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for n in phi.domain.component_dims))
            rand = max(rand, dilation_residual_on(dil, b))
        expected = expected_dilation_dims(phi, self.sc.tolerances["rank_tol"])
        payload = {"dims": dil.dims, "choi_dims": expected, "spanning_residual": rep.spanning_residual,
                   "random_residual": rand, "isometry_residual": rep.isometry_residual,
                   "unital_residual": rep.unital_residual, "star_residual": rep.star_residual}
        tol = self.sc.tolerances["rep_tol"]
        ok = (max(rep.spanning_residual, rand, rep.unital_residual, rep.star_residual) <= tol
              and rep.isometry_residual <= INEQ_ATOL and dil.dims == expected)
        return self._verdict(ok, payload)

    def task_strictness(self):
        phi = self.need_map()
        net = scalar_net(phi.domain, self.sc.net or [0.5, 0.75, 1.0, 1.0])
        rng = self.rng("strictness")
        vecs = [random_vector(phi.codomain, phi.m, rng) for _ in range(8)]
        out = {}
        for p in self.sc.seminorms:
            rep = strictness_check(phi, net, p, vecs)
            out[p.label()] = {"gaps": rep.gaps, "adjoint_gaps": rep.adjoint_gaps, "tail_index": rep.tail_index}
        return {"seminorms": out, "note": "strictness: trivially satisfied"}

    def task_constants(self):
        phi = self.need_map()
        rng = self.rng("constants")
        out, ok = {}, True
        for p in self.sc.seminorms:
            r, d, tight = continuity_constants(phi, p)
            worst = -np.inf
            for _ in range(min(self.sc.samples, 100)):
                b = AlgebraElement(phi.domain, tuple(
                    rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for n in phi.domain.component_dims))
                worst = max(worst, op_seminorm(phi(b), p) - d * r(b))
            ok &= worst <= INEQ_ATOL
            out[p.label()] = {"d_p": d, "tight": tight, "domain_seminorm": r.label(), "max_violation": worst}
        return self._verdict(ok, {"constants": out})


def run(sc: Scenario) -> dict:
    runner = Runner(sc)
    for name in TASKS:
        if name in sc.tasks:
            runner.run_task(name)
    tasks = {name: runner.results[name] for name in sc.tasks}
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "provenance": {"seed": sc.seed, "tolerances": sc.tolerances, "version": __version__,
                       "samples": sc.samples, "draws": sc.draws},
        "tasks": tasks,
    }


def exit_code(report: dict) -> int:
    verdicts = [t["verdict"] for t in report["tasks"].values()]
    if "error" in verdicts:
        return 2
    if "fail" in verdicts:
        return 1
    return 0
