"""
嵌入性质检验模块
把空间之间的包含关系写成在随机系数场系综上的可执行检验:
精确不等式(相对容差 1e-12), 常数夹逼(拟合常数在截断加细下稳定), 平凡空间(发散标记)
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from loguru import logger

from .coeff_field import CoeffField, chain_norm, random_field, space_norm
from .config import HarnessConfig, TruncationConfig
from .dyadic import Region
from .engine import NormResult
from .params import SpaceParams
from .rng import derive_rng

Expectation = Literal["exact_leq", "bracket", "trivial_space"]
NormKind = Literal["space", "chain"]

EXACT_TOLERANCE = 1e-12

# (outer_levels, quadrature_refine) 逐步加细
DEFAULT_REFINEMENTS: Tuple[Tuple[int, int], ...] = ((4, 1), (6, 2), (8, 3))

BASE_PARAMS = SpaceParams(family="B", s=0.1, s_prime=0.2, sigma=0.1, p=2, q=2, x0=(0.3,))
EPSILON = 0.25


@dataclass(frozen=True)
class NormSpec:
    """space: a^s(e)^σ 型范数; chain: 点型 sup_{Q∋x0} l(Q)^{-(σ+s)} c(e)(Q)"""
    kind: NormKind
    params: SpaceParams

    def evaluate(self, c: CoeffField, truncation: TruncationConfig) -> NormResult:
        if self.kind == "chain":
            return chain_norm(c, self.params, truncation)
        return space_norm(c, self.params, truncation)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": self.params.describe()}


@dataclass(frozen=True)
class Relation:
    """‖c‖_left ≤ C ‖c‖_right; exact=True 时 C = 1"""
    name: str
    left: NormSpec
    right: NormSpec
    exact: bool = False


@dataclass(frozen=True)
class EmbeddingCase:
    case_id: str
    expected: Expectation
    relations: Tuple[Relation, ...] = ()
    trivial: Tuple[SpaceParams, ...] = ()
    level_window: Tuple[int, int] = (0, 6)

    @property
    def params_left(self) -> SpaceParams:
        return self.relations[0].left.params if self.relations else self.trivial[0]

    @property
    def params_right(self) -> SpaceParams:
        return self.relations[0].right.params if self.relations else self.trivial[0]


def _space(params: SpaceParams) -> NormSpec:
    return NormSpec("space", params)


def _chain(params: SpaceParams) -> NormSpec:
    return NormSpec("chain", params)


def _both_ways(name: str, a: NormSpec, b: NormSpec) -> Tuple[Relation, Relation]:
    return Relation(f"{name}:left<=C*right", a, b), Relation(f"{name}:right<=C*left", b, a)


def build_case(case_id: str, base: SpaceParams = BASE_PARAMS) -> EmbeddingCase:
    """
    按编号构造检验用例

    Raises:
        ValueError: 未知编号
    """
    b = base.with_(family="B", tilde=False)
    f = b.with_(family="F")
    e = EPSILON

    if case_id == "P1_trivial_sigma":
        p = b.with_(sigma=-0.25)
        return EmbeddingCase(case_id, "trivial_space", trivial=(p, p.with_(family="F")))

    if case_id == "P1_trivial_sigma_plus_s":
        p = b.with_(s=-0.35, sigma=0.1)
        return EmbeddingCase(
            case_id, "trivial_space", trivial=(p, p.with_(family="F"), b.with_(tilde=True, s=-0.25))
        )

    if case_id == "P2_i_outer_vs_point":
        relations = [Relation("B", _chain(b), _space(b), exact=True), Relation("F", _chain(f), _space(f), exact=True)]
        if b.s >= 0:
            finf = f.with_(p="inf")
            relations.append(Relation("F_inf_q", _chain(finf), _space(finf), exact=True))
        return EmbeddingCase(case_id, "exact_leq", tuple(relations))

    if case_id == "P2_ii_equality_s_nonpos":
        p = b.with_(s=-0.2, sigma=0.3)
        return EmbeddingCase(
            case_id,
            "exact_leq",
            (Relation("point<=outer", _chain(p), _space(p), exact=True), Relation("outer<=C*point", _space(p), _chain(p))),
        )

    if case_id == "P3_q_monotone":
        relations = []
        for label, p in (("B", b), ("B~", b.with_(tilde=True)), ("F", f)):
            relations.append(Relation(label, _space(p.with_(q=2)), _space(p.with_(q=1)), exact=True))
        return EmbeddingCase(case_id, "exact_leq", tuple(relations))

    if case_id == "P4_i_p_embedding":
        relations = []
        for label, p in (("B", b), ("B~", b.with_(tilde=True))):
            small = p.with_(p=2, s=b.s + 0.5)
            large = p.with_(p=4, s=b.s + 0.25)
            relations.append(Relation(label, _space(small), _space(large)))
        return EmbeddingCase(case_id, "bracket", tuple(relations))

    if case_id == "P4_ii_sup_embedding":
        sup = b.with_(p="inf", q="inf")
        point = sup.with_(s=0.0, s_prime=b.s + b.s_prime)
        return EmbeddingCase(
            case_id,
            "bracket",
            (
                Relation("E_inf<=C*E_pq", _space(sup), _space(b.with_(s_prime=b.s_prime + 0.5))),
                Relation("point<=C*E_inf", _chain(point), _space(sup)),
            ),
        )

    if case_id == "P4_iii_holder_identity":
        s = 0.3
        left = b.with_(s=s + 0.5)
        right = b.with_(s=0.0, s_prime=s + b.s_prime, p="inf", q="inf")
        return EmbeddingCase(case_id, "bracket", _both_ways("holder", _space(left), _chain(right)))

    if case_id == "P4_iv_F_p_independence":
        return EmbeddingCase(
            case_id, "bracket", _both_ways("F_p", _space(f.with_(p=1, s=1.0)), _space(f.with_(p=2, s=0.5)))
        )

    if case_id == "P5_i_tilde_sandwich":
        p = b.with_(sigma=0.5)
        tilde = p.with_(tilde=True)
        unweighted = p.with_(tilde=True, sigma=0.0, s_prime=p.s_prime + p.sigma)
        return EmbeddingCase(
            case_id,
            "bracket",
            (
                Relation("tilde<=C*shifted", _space(tilde), _space(unweighted)),
                Relation("outer<=C*tilde", _space(p), _space(tilde)),
            ),
        )

    if case_id == "P5_ii_BF_sandwich":
        return EmbeddingCase(
            case_id,
            "exact_leq",
            (
                Relation("F<=B", _space(f), _space(b), exact=True),
                Relation("B<=F", _space(b), _space(f), exact=True),
                Relation("F<=C*B~", _space(f), _space(b.with_(tilde=True))),
            ),
        )

    if case_id == "P5_iii_infty_equality":
        p = b.with_(s=0.0, sigma=0.3, p="inf", q="inf")
        return EmbeddingCase(case_id, "bracket", _both_ways("inf", _chain(p), _space(p.with_(tilde=True))))

    if case_id == "P6_i_shift":
        return EmbeddingCase(
            case_id,
            "bracket",
            (Relation("B", _space(b.with_(q=2)), _space(b.with_(s_prime=b.s_prime + e, sigma=b.sigma - e, q=1))),),
        )

    if case_id == "P6_ii_shift":
        relations = []
        for label, p in (("B", b), ("F", f)):
            relations.append(Relation(label, _space(p), _space(p.with_(s=p.s + e, sigma=p.sigma - e))))
        return EmbeddingCase(case_id, "bracket", tuple(relations))

    if case_id == "P6_iii_shift":
        relations = []
        for label, p in (("B", b), ("B~", b.with_(tilde=True))):
            relations.append(
                Relation(label, _space(p.with_(q=2)), _space(p.with_(s=p.s - e, s_prime=p.s_prime + e, q=1)))
            )
        return EmbeddingCase(case_id, "bracket", tuple(relations))

    raise ValueError(f"未知的用例编号: {case_id}")


CASE_IDS: Tuple[str, ...] = (
    "P1_trivial_sigma",
    "P1_trivial_sigma_plus_s",
    "P2_i_outer_vs_point",
    "P2_ii_equality_s_nonpos",
    "P3_q_monotone",
    "P4_i_p_embedding",
    "P4_ii_sup_embedding",
    "P4_iii_holder_identity",
    "P4_iv_F_p_independence",
    "P5_i_tilde_sandwich",
    "P5_ii_BF_sandwich",
    "P5_iii_infty_equality",
    "P6_i_shift",
    "P6_ii_shift",
    "P6_iii_shift",
)


def ensemble(case: EmbeddingCase, size: int, seed: int, density: float) -> List[CoeffField]:
    """由 (case_id, seed) 唯一决定的非零随机场系综"""
    rng = derive_rng(seed, f"embeddings.{case.case_id}")
    window = Region.unit(case.params_left.n)
    return [random_field(rng, case.level_window, window, density, n=case.params_left.n) for _ in range(size)]


def _truncations(base: TruncationConfig, refinements: Sequence[Tuple[int, int]]) -> List[TruncationConfig]:
    return [base.model_copy(update={"outer_levels": o, "quadrature_refine": r}) for o, r in refinements]


def _run_trivial(case: EmbeddingCase, fields: Sequence[CoeffField], truncation: TruncationConfig) -> Dict[str, Any]:
    flagged = {}
    for params in case.trivial:
        hits = sum(space_norm(c, params, truncation).diverging for c in fields)
        flagged[f"{params.family}{'~' if params.tilde else ''} s={params.s} σ={params.sigma}"] = hits
    return {
        "flagged": flagged,
        "pass": all(hits == len(fields) for hits in flagged.values()),
        "worst_ratio": None,
    }


def _relation_ratios(
    relation: Relation, fields: Sequence[CoeffField], truncation: TruncationConfig
) -> Tuple[float, Optional[int]]:
    worst, witness = 0.0, None
    for index, c in enumerate(fields):
        right = relation.right.evaluate(c, truncation).value
        left = relation.left.evaluate(c, truncation).value
        if right <= 0.0:
            if left > 0.0:
                return float("inf"), index
            continue
        if left / right > worst:
            worst, witness = left / right, index
    return worst, witness


def run_case(
    case: EmbeddingCase,
    ensemble_size: int = 50,
    seed: int = 0,
    harness: Optional[HarnessConfig] = None,
    truncation: Optional[TruncationConfig] = None,
    refinements: Sequence[Tuple[int, int]] = DEFAULT_REFINEMENTS,
) -> Dict[str, Any]:
    """
    在系综上执行一个用例

    精确关系要求每个加细级别都有 ratio ≤ 1 + 1e-12; 夹逼关系要求最后一步加细的
    最坏比值增长不超过 plateau_tolerance; 平凡空间要求每个场都被标记为发散。
    """
    harness = harness or HarnessConfig()
    truncation = truncation or TruncationConfig()
    fields = ensemble(case, ensemble_size, seed, harness.density)
    report: Dict[str, Any] = {
        "case_id": case.case_id,
        "expected": case.expected,
        "seed": seed,
        "ensemble_size": ensemble_size,
        "level_window": list(case.level_window),
    }

    if case.expected == "trivial_space":
        report.update(_run_trivial(case, fields, truncation))
        report["truncation"] = {"outer_levels": truncation.outer_levels, "divergence_span": truncation.divergence_span}
        return report

    levels = _truncations(truncation, refinements)
    fitted: Dict[str, Any] = {}
    passed = True
    worst_overall, witness_overall = 0.0, None
    for relation in case.relations:
        ratios, witnesses = [], []
        for trunc in levels:
            ratio, witness = _relation_ratios(relation, fields, trunc)
            ratios.append(ratio)
            witnesses.append(witness)
        if relation.exact:
            ok = all(r <= 1.0 + EXACT_TOLERANCE for r in ratios)
            growth = None
        else:
            growth = ratios[-1] / ratios[-2] - 1.0 if ratios[-2] > 0 else 0.0
            ok = growth <= harness.plateau_tolerance and ratios[-1] < float("inf")
        fitted[relation.name] = {
            "exact": relation.exact,
            "ratios": ratios,
            "growth": growth,
            "pass": ok,
            "left": relation.left.describe(),
            "right": relation.right.describe(),
        }
        if not ok:
            logger.warning(f"{case.case_id} / {relation.name} 未通过: ratios={ratios}")
        passed &= ok
        if ratios[-1] > worst_overall:
            worst_overall, witness_overall = ratios[-1], witnesses[-1]

    report.update(
        {
            "worst_ratio": worst_overall,
            "witness": witness_overall,
            "fitted_constants": fitted,
            "refinements": [list(r) for r in refinements],
            "pass": passed,
        }
    )
    return report


def run_suite(
    case_ids: Optional[Sequence[str]] = None,
    ensemble_size: int = 50,
    seed: int = 0,
    harness: Optional[HarnessConfig] = None,
    truncation: Optional[TruncationConfig] = None,
) -> List[Dict[str, Any]]:
    reports = []
    for case_id in case_ids or CASE_IDS:
        report = run_case(build_case(case_id), ensemble_size, seed, harness, truncation)
        logger.info(f"{case_id}: {'通过' if report['pass'] else '未通过'}")
        reports.append(report)
    return reports
