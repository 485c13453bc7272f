"""Registry of named numerical invariants, grouped into suites.

Each check returns :class:`CheckResult` rows holding the two sides of an
inequality or identity, so reports show the numbers and not just a verdict.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import analysis, twirl
from .graphs import (
    NonCommutingGenerators,
    ProtocolGraph,
    StabilizerGeneratorSet,
    attach_density,
    coupled_stabilizer_generators,
)
from .protocol import AliceSecret, InputBlock, alice_prepare, exact_input_pass_probability, pad_average
from .qsim import (
    ATOL,
    DensityOperator,
    PauliString,
    StateVector,
    random_density,
    random_kraus,
    random_povm_element,
    trace_distance,
)
from .stabtest import (
    closeness_envelope,
    exact_pass_probability,
    gentle_measurement_check,
    lambda_projector,
    pass_probability_enumerated,
    pass_probability_projector,
    stabilized_state,
)


@dataclass
class CheckResult:
    suite: str
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.suite}.{self.name}: {self.lhs:.6g} {self.relation} {self.rhs:.6g}"
        return f"{text} ({self.detail})" if self.detail else text


@dataclass
class CheckContext:
    seed: int = 0
    graph: ProtocolGraph = field(default_factory=lambda: ProtocolGraph.chain(3, 1))
    input_block: InputBlock = field(default_factory=lambda: InputBlock(StateVector.from_label("1")))
    generators: StabilizerGeneratorSet | None = None
    r: int = 10
    n_random: int = 20

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed, salt]))


CheckFn = Callable[[CheckContext], list[CheckResult]]
REGISTRY: dict[str, list[tuple[str, CheckFn]]] = {}


def register(suite: str, name: str):
    def deco(fn: CheckFn) -> CheckFn:
        REGISTRY.setdefault(suite, []).append((name, fn))
        return fn
    return deco


def _le(suite, name, lhs, rhs, atol=ATOL, detail=""):
    return CheckResult(suite, name, float(lhs), float(rhs), "<=", bool(lhs <= rhs + atol), detail)


def _ge(suite, name, lhs, rhs, atol=ATOL, detail=""):
    return CheckResult(suite, name, float(lhs), float(rhs), ">=", bool(lhs >= rhs - atol), detail)


def _eq(suite, name, lhs, rhs, atol=ATOL, detail=""):
    return CheckResult(suite, name, float(lhs), float(rhs), "==", bool(abs(lhs - rhs) <= atol), detail)


def run_suite(suite: str, ctx: CheckContext | None = None) -> list[CheckResult]:
    if suite not in REGISTRY:
        raise KeyError(f"unknown suite {suite!r}; known: {sorted(REGISTRY)}")
    ctx = ctx or CheckContext()
    out: list[CheckResult] = []
    for _, fn in REGISTRY[suite]:
        out.extend(fn(ctx))
    return out


def run_all(ctx: CheckContext | None = None, suites=None) -> list[CheckResult]:
    ctx = ctx or CheckContext()
    out: list[CheckResult] = []
    for suite in suites or REGISTRY:
        out.extend(run_suite(suite, ctx))
    return out


# ---------------------------------------------------------------------------
# stabilizer


def _context_generators(ctx: CheckContext) -> StabilizerGeneratorSet:
    return ctx.generators or coupled_stabilizer_generators(ctx.graph)


@register("stabilizer", "generators_commute")
def _generators_commute(ctx):
    gens = _context_generators(ctx)
    pairs = gens.non_commuting_pairs()
    detail = f"non-commuting pairs {pairs}" if pairs else f"{gens.n} generators"
    return [_eq("stabilizer", "generators_commute", len(pairs), 0, atol=0, detail=detail)]


@register("stabilizer", "honest_pass_probability")
def _honest_pass(ctx):
    gens = _context_generators(ctx)
    if gens.non_commuting_pairs():
        return [CheckResult("stabilizer", "honest_pass_probability", math.nan, 1.0, "==", False,
                            "skipped: generator set rejected")]
    rng = ctx.rng(1)
    worst = 1.0
    for _ in range(5):
        secret = AliceSecret.random(ctx.graph.v2_count, rng)
        padded, _ = alice_prepare(ctx.input_block, None, secret)
        worst = min(worst, exact_pass_probability(attach_density(padded, ctx.graph), gens))
    return [_eq("stabilizer", "honest_pass_probability", worst, 1.0)]


@register("stabilizer", "pass_identity")
def _pass_identity(ctx):
    rng = ctx.rng(2)
    worst = 0.0
    for _ in range(ctx.n_random):
        gens = random_generator_set(int(rng.integers(1, 5)), rng)
        rho = random_density(gens.n_qubits, rng)
        worst = max(worst, abs(pass_probability_enumerated(rho, gens)
                               - pass_probability_projector(rho, gens)))
    return [_le("stabilizer", "pass_identity", worst, 0.0, detail="max |enumerated - projector|")]


@register("stabilizer", "closeness_envelope")
def _envelope(ctx):
    rng = ctx.rng(3)
    gens = coupled_stabilizer_generators(ProtocolGraph.chain(3, 1))
    rows = []
    for eps in (0.01, 0.05, 0.1):
        worst_lo = worst_hi = -math.inf
        worst_gentle = -math.inf
        for rho in states_near_stabilized(gens, eps, ctx.n_random, rng):
            sigma = stabilized_state(rho, gens)
            m_el = random_povm_element(gens.n_qubits, rng)
            env = closeness_envelope(m_el, sigma, eps)
            value = m_el.probability(rho)
            worst_lo = max(worst_lo, env.lower - value)
            worst_hi = max(worst_hi, value - env.upper)
            lhs, rhs = gentle_measurement_check(rho, gens)
            worst_gentle = max(worst_gentle, lhs - rhs)
        rows.append(_le("stabilizer", f"envelope_lower[eps={eps}]", worst_lo, 0.0))
        rows.append(_le("stabilizer", f"envelope_upper[eps={eps}]", worst_hi, 0.0))
        rows.append(_le("stabilizer", f"gentle_measurement[eps={eps}]", worst_gentle, 0.0))
    return rows


def random_generator_set(n_qubits: int, rng: np.random.Generator) -> StabilizerGeneratorSet:
    """Random commuting independent set: a random graph's generators on ``n_qubits`` qubits,
    conjugated by random single-qubit Clifford relabelings and with random signs."""
    n_gens = int(rng.integers(1, n_qubits + 1))
    edges = [(a, b) for a, b in itertools.combinations(range(n_qubits), 2) if rng.random() < 0.5]
    gens = []
    relabel = [rng.permutation(["X", "Y", "Z"]) for _ in range(n_qubits)]
    for v in range(n_gens):
        letters = ["I"] * n_qubits
        letters[v] = "X"
        for a, b in edges:
            if v in (a, b):
                letters[b if a == v else a] = "Z"
        mapped = "".join("I" if ch == "I" else relabel[i]["XYZ".index(ch)]
                         for i, ch in enumerate(letters))
        gens.append(PauliString(mapped, int(rng.choice([1, -1]))))
    return StabilizerGeneratorSet(gens)


def states_near_stabilized(gens: StabilizerGeneratorSet, eps: float, count: int,
                           rng: np.random.Generator) -> list[DensityOperator]:
    """Random states with ``p_pass >= 1 - eps``, drawn by mixing a stabilized
    state with noise and keeping those that meet the threshold."""
    lam = lambda_projector(gens).data
    w, v = np.linalg.eigh(lam)
    code = v[:, w > 0.5]
    out = []
    while len(out) < count:
        c = code @ (rng.normal(size=(code.shape[1], 1)) + 1j * rng.normal(size=(code.shape[1], 1)))
        good = c @ c.conj().T
        good /= np.trace(good)
        noise = random_density(gens.n_qubits, rng).data
        t = rng.uniform(0, 4 * eps)
        rho = DensityOperator((1 - t) * good + t * noise, validate=False)
        if exact_pass_probability(rho, gens) >= 1 - eps:
            out.append(rho)
    return out


# ---------------------------------------------------------------------------
# analysis


@register("analysis", "delta_at_zero")
def _delta_zero(ctx):
    return [_eq("analysis", "delta_at_zero", analysis.delta_of(0.0), math.sqrt(2 / 3))]


@register("analysis", "difference_identities")
def _identities(ctx):
    worst = 0.0
    for eps in (1e-3, 1e-2, 0.1):
        for q in analysis.q_grid(100):
            bs = analysis.bound_set(analysis.RateParams.amplified(eps, float(q), ctx.r))
            worst = max(worst, abs(bs.delta1 - (bs.alpha - bs.beta1)),
                        abs(bs.delta2 - (bs.alpha - bs.beta2)),
                        abs(bs.delta3 - (bs.alpha - bs.beta3)))
    return [_le("analysis", "difference_identities", worst, 1e-12, atol=0)]


@register("analysis", "qstar_balance")
def _qstar(ctx):
    rows = []
    for eps in (1e-4, 1e-3, 1e-2 / 3):
        p = analysis.RateParams.amplified(eps, 0.5, ctx.r)
        bs = analysis.bound_set(p.with_q(analysis.q_star(p)))
        rows.append(_eq("analysis", f"delta1_eq_delta3[eps={eps:g}]", bs.delta1, bs.delta3, atol=1e-12))
        try:
            closed = analysis.gap_at_qstar(p)
            rows.append(_eq("analysis", f"gap_closed_form[eps={eps:g}]", closed, bs.delta3, atol=1e-12))
        except analysis.NoVerifiableGap as exc:
            rows.append(CheckResult("analysis", f"gap_closed_form[eps={eps:g}]", math.nan, 0.0,
                                    ">", False, str(exc)))
    return rows


@register("analysis", "gap_lower_bound_chain")
def _chain(ctx):
    grid = analysis.lower_bound_chain(np.geomspace(1e-4, 1e-2, 41), range(4, 13))
    applicable = [row for row in grid if row["applicable"]]
    worst = min((row["gap"] - row["lower_bound"] for row in applicable), default=0.0)
    bad = sum(not row["holds"] for row in grid)
    return [_ge("analysis", "gap_lower_bound_chain", worst, 0.0, atol=1e-15,
                detail=f"{len(applicable)} applicable grid points, {bad} violations")]


@register("analysis", "delta2_dominates_delta1")
def _dominance(ctx):
    worst = math.inf
    for eps in (1e-3, 1e-2, 0.1):
        for q in analysis.q_grid(100):
            p = analysis.RateParams.amplified(eps, float(q), ctx.r)
            bs = analysis.bound_set(p)
            worst = min(worst, bs.delta2 - bs.delta1)
    return [_ge("analysis", "delta2_dominates_delta1", worst, 0.0)]


# ---------------------------------------------------------------------------
# twirl


def _random_channels(ctx: CheckContext, salt: int):
    rng = ctx.rng(salt)
    size = 3 * ctx.input_block.m
    return [random_kraus(size, int(rng.integers(1, 5)), rng) for _ in range(ctx.n_random)]


@register("twirl", "weights_sum_to_one")
def _weights(ctx):
    worst = max(abs(sum(twirl.d_weights(k).values()) - 1) for k in _random_channels(ctx, 10))
    return [_le("twirl", "weights_sum_to_one", worst, 0.0, detail="max |sum D - 1|")]


@register("twirl", "cross_term_cancellation")
def _cross(ctx):
    rng = ctx.rng(11)
    worst = 0.0
    for _ in range(2):
        rho = random_density(2, rng)
        for b, g in itertools.permutations(range(16), 2):
            worst = max(worst, twirl.verify_cross_term_cancellation(b, g, rho))
    return [_le("twirl", "cross_term_cancellation", worst, 0.0, detail="max residual norm")]


@register("twirl", "decomposition_matches_enumeration")
def _decomp(ctx):
    worst = 0.0
    rho1_worst = 0.0
    for k in _random_channels(ctx, 12)[:5]:
        dec = twirl.twirl_decomposition(k, ctx.input_block)
        exact = twirl.rho_before_exact(k, ctx.input_block).data
        worst = max(worst, float(np.abs(dec.total - exact).max()))
        wrong = ctx.input_block.wrong_input_projector().data
        rho1_worst = max(rho1_worst, abs(float(np.real(np.trace(wrong @ dec.rho1)))))
    return [_le("twirl", "decomposition_matches_enumeration", worst, 0.0),
            _le("twirl", "rho1_wrong_input_weight", rho1_worst, 0.0)]


@register("twirl", "rho2_bound")
def _rho2(ctx):
    rand = max(twirl.verify_rho2_bound(k, ctx.input_block)[0] for k in _random_channels(ctx, 10))
    labels, values = zip(*[(lab, twirl.verify_rho2_bound(k, ctx.input_block)[0])
                           for lab, k in twirl.single_pauli_channels(3 * ctx.input_block.m)])
    i = int(np.argmax(values))
    bound = 2 / 3
    return [_le("twirl", "rho2_bound[random]", rand, bound),
            _le("twirl", "rho2_bound[single_pauli]", values[i], bound,
                detail=f"max over {len(values)} Paulis at {labels[i]}")]


@register("twirl", "final_chain")
def _final_chain(ctx):
    worst_overlap = math.inf
    worst_dist = -math.inf
    channels = _random_channels(ctx, 13) + [k for _, k in twirl.single_pauli_channels(3 * ctx.input_block.m)]
    for k in channels:
        res = twirl.verify_psipass_bound(k, ctx.input_block)
        worst_overlap = min(worst_overlap, res.overlap - res.overlap_bound)
        worst_dist = max(worst_dist, res.distance - res.distance_bound)
    return [_ge("twirl", "overlap_at_least_third_minus_eps", worst_overlap, 0.0),
            _le("twirl", "psipass_distance", worst_dist, 0.0)]


@register("twirl", "oracle_equivalence")
def _oracle(ctx):
    worst = 0.0
    for k in _random_channels(ctx, 14)[:3]:
        a = twirl.rho_before_exact(k, ctx.input_block)
        b = twirl.protocol_path_average(k, ctx.input_block, ctx.graph)
        worst = max(worst, trace_distance(a, b))
    return [_le("twirl", "oracle_equivalence", worst, 0.0, detail="trace distance")]


@register("twirl", "combined_soundness")
def _combined(ctx):
    rng = ctx.rng(15)
    worst = -math.inf
    for _ in range(4):
        rho, secret = near_honest_state(ctx, rng)
        lhs, rhs, _ = combined_soundness(rho, secret, ctx.graph, ctx.input_block)
        worst = max(worst, lhs - rhs)
    return [_le("twirl", "combined_soundness", worst, 0.0,
                detail="max of trace distance minus delta(measured eps)")]


def near_honest_state(ctx: CheckContext, rng: np.random.Generator):
    secret = AliceSecret.random(ctx.graph.v2_count, rng)
    padded, _ = alice_prepare(ctx.input_block, None, secret)
    honest = attach_density(padded, ctx.graph).data
    noise = random_density(ctx.graph.n_total, rng).data
    t = rng.uniform(0.0, 0.2)
    return DensityOperator((1 - t) * honest + t * noise, validate=False), secret


def combined_soundness(rho: DensityOperator, secret: AliceSecret, graph: ProtocolGraph,
                       input_block: InputBlock) -> tuple[float, float, float]:
    """``(||rho - G_Psi'||_1 / 2, delta(eps), eps)`` with ``eps = 1 - min(p_G, p_psi)``."""
    gens = coupled_stabilizer_generators(graph)
    p_g = exact_pass_probability(rho, gens, method="projector")
    p_psi = exact_input_pass_probability(rho, secret, graph, input_block)
    eps = max(0.0, 1 - min(p_g, p_psi))
    padded, _ = alice_prepare(input_block, None, secret)
    target = attach_density(padded, graph)
    return trace_distance(rho, target), analysis.delta_of(eps), eps


# ---------------------------------------------------------------------------
# blindness


@register("blindness", "pad_average_maximally_mixed")
def _blind(ctx):
    size = 3 * ctx.input_block.m
    mixed = DensityOperator.maximally_mixed(size)
    worst = 0.0
    for perm in itertools.permutations(range(size)):
        worst = max(worst, trace_distance(pad_average(ctx.input_block, perm), mixed))
    return [_le("blindness", "pad_average_maximally_mixed", worst, 0.0,
                detail=f"max trace distance to I/{1 << size} over permutations")]


def first_failure(results: list[CheckResult]) -> CheckResult | None:
    return next((r for r in results if not r.passed), None)


__all__ = [
    "CheckContext", "CheckResult", "NonCommutingGenerators", "REGISTRY", "combined_soundness",
    "first_failure", "random_generator_set", "register", "run_all", "run_suite",
    "states_near_stabilized",
]
