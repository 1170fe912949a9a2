"""Seeded experiment scenarios: axiom suites, recovery pipelines, reports.

A single 64-bit experiment seed determines everything a scenario touches:
the structure maps, the perturbation defects, every probe set, and every
unimodular sample.  Reports therefore serialize to identical bytes on
every run with the same config, independent of the thread count used.

The runner builds an exact pair (D, theta) from a unitary conjugation and
a skew-adjoint commutator, perturbs both maps, recovers them back through
the configured iteration scheme, and certifies stability bounds,
homogeneity, and the derivation identity on the recovered pair.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, fields as dataclass_fields

import numpy as np

from .linalg import max_entry_diff, spectral_norm
from .sampling import (
    ROLE_AXIOMS,
    ROLE_CERT_TRIPLES,
    ROLE_MAP_F,
    ROLE_MAP_H,
    ROLE_MU,
    ROLE_PROBES,
    ROLE_RATE_PROBES,
    ROLE_SEQUENCE_TRIPLES,
    ROLE_SKEW,
    ROLE_UNITARY,
    check_seed,
    child_seed,
    haar_unitary,
    make_mu_samples,
    make_probes,
    random_matrix,
    rng_for,
    skew_matrix,
)
from .stability import (
    ConvergenceError,
    LinearityCertificationError,
    PowerType,
    Scheme,
    certify_theta_derivation,
    complex_homogeneity_via_decomposition,
    derivation_limit_sequence,
    estimate_convergence_rate,
    make_perturbation,
    perturbation_decay_rate,
    recover_linear_map,
    verify_hypotheses,
    verify_s1_homogeneity,
    verify_stability_bound,
)
from .triple import (
    check_commutativity,
    check_jordan_identity,
    check_L_positive,
    check_norm_identity,
    make_theta_derivation,
    make_triple_derivation,
    make_triple_homomorphism,
    triple_product_cstar,
    triple_product_jbstar,
)

THREADS_ENV = "TRIPLE_STAB_THREADS"

DIM_MAX = 16

AXIOM_COMMUTATIVITY_TOL = 1e-13
AXIOM_JORDAN_TOL = 1e-10
AXIOM_L_POSITIVITY_TOL = 1e-10
AXIOM_NORM_TOL = 1e-8
PRODUCT_AGREEMENT_TOL = 1e-12
RECOVERY_ERROR_TOL = 1e-6
HOMOGENEITY_TOL = 1e-6
DERIVATION_TOL = 1e-6
BOUND_SLACK = 1e-9
RATE_WINDOW = 0.05

MU_SAMPLE_COUNT = 16
S1_PROBE_COUNT = 8
RATE_PROBE_COUNT = 30
CERT_TRIPLE_COUNT = 100
SEQUENCE_TRIPLE_COUNT = 40
SEQUENCE_STRICT_AFTER = 5
# values this small sit on the floating-point floor of the residual
# computation; decrease and ratio checks skip them
SEQUENCE_FLOOR = 1e-13
SEQUENCE_LEVELS = {
    Scheme.CAUCHY2: 25,
    Scheme.JENSEN3: 19,
    Scheme.JENSEN3_CONTRACTIVE: 7,
}

COMPLEX_LAMBDAS = (
    (complex(2.0, 0.0), "2"),
    (complex(0.0, 1.0), "i"),
    (complex(0.9, 2.3), "0.9+2.3i"),
)

_UNITARY_KINDS = ("haar", "identity")
_SKEW_KINDS = ("random", "zero")
_GENERATOR_KEYS = {"unitary", "skew", "skew_scale"}


class ConfigError(ValueError):
    """An experiment config violates its schema or a summability gate."""


class ReportFormatError(ValueError):
    """A report cannot be rendered in the requested format."""


def _require_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


def _require_float(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return out


@dataclass
class ExperimentConfig:
    """Everything one scenario needs, reproducible from the seed alone."""

    dim: int = 2
    scheme: str = "cauchy2"
    eps: float = 0.1
    p: float = 0.5
    seed: int = 42
    probe_count: int = 100
    tol: float = 1e-9
    l_max: int = 200
    generator: object = "identity"

    def scheme_enum(self) -> Scheme:
        return Scheme.parse(self.scheme)

    def generator_dict(self) -> dict:
        """Expanded and validated generator spec."""
        g = self.generator
        if g == "identity":
            g = {"unitary": "identity", "skew": "random", "skew_scale": 1.0}
        if not isinstance(g, dict):
            raise ConfigError(
                f'generator must be "identity" or an object, got {g!r}'
            )
        unknown = set(g) - _GENERATOR_KEYS
        if unknown:
            raise ConfigError(
                f"unknown generator fields: {', '.join(sorted(unknown))}"
            )
        out = {
            "unitary": g.get("unitary", "haar"),
            "skew": g.get("skew", "random"),
            "skew_scale": _require_float("skew_scale", g.get("skew_scale", 1.0)),
        }
        if out["unitary"] not in _UNITARY_KINDS:
            raise ConfigError(
                f"generator unitary must be one of {_UNITARY_KINDS}, "
                f"got {out['unitary']!r}"
            )
        if out["skew"] not in _SKEW_KINDS:
            raise ConfigError(
                f"generator skew must be one of {_SKEW_KINDS}, got {out['skew']!r}"
            )
        if out["skew_scale"] <= 0.0:
            raise ConfigError(
                f"skew_scale must be positive, got {out['skew_scale']!r}"
            )
        return out

    def validate(self) -> None:
        _require_int("dim", self.dim)
        if not 1 <= self.dim <= DIM_MAX:
            raise ConfigError(f"dim must be in [1, {DIM_MAX}], got {self.dim}")
        try:
            scheme = Scheme.parse(self.scheme)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        eps = _require_float("eps", self.eps)
        if eps < 0.0:
            raise ConfigError(f"eps must be nonnegative, got {eps}")
        p = _require_float("p", self.p)
        if p < 0.0:
            raise ConfigError(f"p must be nonnegative, got {p}")
        try:
            check_seed(_require_int("seed", self.seed))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if _require_int("probe_count", self.probe_count) < 1:
            raise ConfigError(f"probe_count must be >= 1, got {self.probe_count}")
        if _require_float("tol", self.tol) <= 0.0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if _require_int("l_max", self.l_max) < 1:
            raise ConfigError(f"l_max must be >= 1, got {self.l_max}")
        if not scheme.power_gate_ok(p):
            raise ConfigError(scheme.gate_message(p))
        self.generator_dict()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config must be an object, got {type(data).__name__}")
        known = {f.name for f in dataclass_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(
                f"unknown config fields: {', '.join(sorted(unknown))}"
            )
        cfg = cls(**data)
        cfg.eps = _require_float("eps", cfg.eps)
        cfg.p = _require_float("p", cfg.p)
        cfg.tol = _require_float("tol", cfg.tol)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        """Canonical echo: normalized scheme tag, expanded generator."""
        return {
            "dim": self.dim,
            "scheme": self.scheme_enum().value,
            "eps": float(self.eps),
            "p": float(self.p),
            "seed": self.seed,
            "probe_count": self.probe_count,
            "tol": float(self.tol),
            "l_max": self.l_max,
            "generator": self.generator_dict(),
        }


def resolve_threads(threads: int | None = None) -> int:
    """Requested worker count, falling back to the environment variable."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(
                f"{THREADS_ENV} must be a positive integer, got {raw!r}"
            ) from None
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"thread count must be a positive integer, got {threads!r}")
    return threads


@contextmanager
def experiment_mapper(threads: int | None = None):
    """An ordered map callable; parallel when more than one thread is allowed.

    Results always come back in input order, so reductions over them are
    identical no matter how many workers ran.
    """
    n = resolve_threads(threads)
    if n == 1:
        yield map
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            yield pool.map


# ---------------------------------------------------------------------------
# scenario construction
# ---------------------------------------------------------------------------

def build_generators(config: ExperimentConfig):
    """Exact (theta, d, D) for the config: conjugation, commutator, composite."""
    g = config.generator_dict()
    n = config.dim
    if g["unitary"] == "haar":
        u = haar_unitary(rng_for(config.seed, ROLE_UNITARY), n)
    else:
        u = np.eye(n, dtype=np.complex128)
    theta = make_triple_homomorphism(u)
    if g["skew"] == "random":
        a = skew_matrix(rng_for(config.seed, ROLE_SKEW), n, g["skew_scale"])
    else:
        a = np.zeros((n, n), dtype=np.complex128)
    d = make_triple_derivation(a)
    return theta, d, make_theta_derivation(theta, d)


# ---------------------------------------------------------------------------
# axiom suite
# ---------------------------------------------------------------------------

def run_axiom_suite(config: ExperimentConfig, samples: int | None = None, mapper=map) -> dict:
    """All four triple axioms plus product-form agreement on seeded data.

    Returns a report fragment with the worst residual of each check over
    ``samples`` draws (default: the config probe count).
    """
    config.validate()
    n = config.dim
    count = config.probe_count if samples is None else samples
    if count < 1:
        raise ConfigError(f"sample count must be >= 1, got {count}")
    rng = rng_for(config.seed, ROLE_AXIOMS)
    draws = []
    for _ in range(count):
        mats = [random_matrix(rng, n) for _ in range(5)]
        a_pos = random_matrix(rng, n)
        pos_probes = [random_matrix(rng, n) for _ in range(4)]
        draws.append((mats, a_pos, pos_probes))

    def one(draw):
        (a, b, x, y, z), a_pos, pos_probes = draw
        comm = check_commutativity(x, y, z, tol=AXIOM_COMMUTATIVITY_TOL)
        jordan = check_jordan_identity(a, b, x, y, z, tol=AXIOM_JORDAN_TOL)
        # thresholds scale with the input norms; renormalize for aggregation
        jordan_rel = jordan.residual * (AXIOM_JORDAN_TOL / jordan.threshold)
        norm_id = check_norm_identity(x, tol=AXIOM_NORM_TOL)
        lpos = check_L_positive(a_pos, pos_probes, tol=AXIOM_L_POSITIVITY_TOL)
        p_cstar = triple_product_cstar(x, y, z)
        p_jordan = triple_product_jbstar(x, y, z)
        scale = max(
            1.0, spectral_norm(x) * spectral_norm(y) * spectral_norm(z)
        )
        agreement = spectral_norm(p_cstar - p_jordan) / scale
        return (
            comm.residual,
            jordan_rel,
            norm_id.residual,
            lpos.max_selfadjoint_violation,
            lpos.max_negativity,
            agreement,
        )

    rows = list(mapper(one, draws))
    max_comm = max(r[0] for r in rows)
    max_jordan = max(r[1] for r in rows)
    max_norm = max(r[2] for r in rows)
    max_asym = max(r[3] for r in rows)
    max_neg = max(r[4] for r in rows)
    max_agree = max(r[5] for r in rows)
    fragment = {
        "samples": count,
        "commutativity": {
            "max_residual": max_comm,
            "threshold": AXIOM_COMMUTATIVITY_TOL,
            "passed": max_comm <= AXIOM_COMMUTATIVITY_TOL,
        },
        "jordan_identity": {
            "max_relative_residual": max_jordan,
            "threshold": AXIOM_JORDAN_TOL,
            "passed": max_jordan <= AXIOM_JORDAN_TOL,
        },
        "l_positivity": {
            "max_selfadjoint_violation": max_asym,
            "max_negativity": max_neg,
            "threshold": AXIOM_L_POSITIVITY_TOL,
            "passed": max(max_asym, max_neg) <= AXIOM_L_POSITIVITY_TOL,
        },
        "norm_identity": {
            "max_relative_error": max_norm,
            "threshold": AXIOM_NORM_TOL,
            "passed": max_norm <= AXIOM_NORM_TOL,
        },
        "product_agreement": {
            "max_relative_residual": max_agree,
            "threshold": PRODUCT_AGREEMENT_TOL,
            "passed": max_agree <= PRODUCT_AGREEMENT_TOL,
        },
    }
    fragment["passed"] = all(
        fragment[k]["passed"]
        for k in (
            "commutativity",
            "jordan_identity",
            "l_positivity",
            "norm_identity",
            "product_agreement",
        )
    )
    return fragment


def _axiom_checks(fragment: dict) -> list[dict]:
    return [
        {
            "name": "axiom_commutativity",
            "passed": fragment["commutativity"]["passed"],
            "value": fragment["commutativity"]["max_residual"],
            "tolerance": fragment["commutativity"]["threshold"],
        },
        {
            "name": "axiom_jordan_identity",
            "passed": fragment["jordan_identity"]["passed"],
            "value": fragment["jordan_identity"]["max_relative_residual"],
            "tolerance": fragment["jordan_identity"]["threshold"],
        },
        {
            "name": "axiom_l_positivity",
            "passed": fragment["l_positivity"]["passed"],
            "value": max(
                fragment["l_positivity"]["max_selfadjoint_violation"],
                fragment["l_positivity"]["max_negativity"],
            ),
            "tolerance": fragment["l_positivity"]["threshold"],
        },
        {
            "name": "axiom_norm_identity",
            "passed": fragment["norm_identity"]["passed"],
            "value": fragment["norm_identity"]["max_relative_error"],
            "tolerance": fragment["norm_identity"]["threshold"],
        },
        {
            "name": "product_agreement",
            "passed": fragment["product_agreement"]["passed"],
            "value": fragment["product_agreement"]["max_relative_residual"],
            "tolerance": fragment["product_agreement"]["threshold"],
        },
    ]


def axioms_report(
    config: ExperimentConfig, samples: int | None = None, threads: int | None = None
) -> tuple[dict, dict]:
    """Standalone axiom-suite report for the CLI, with wall-clock timings."""
    started = time.perf_counter()
    with experiment_mapper(threads) as mapper:
        fragment = run_axiom_suite(config, samples=samples, mapper=mapper)
    checks = _axiom_checks(fragment)
    report = {
        "config": config.to_dict(),
        "axioms": fragment,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    return report, {"total_s": time.perf_counter() - started}


# ---------------------------------------------------------------------------
# recovery pipeline
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    """Full outcome of one recovery scenario, ready for serialization.

    Wall-clock timings are kept on the object for console display but are
    never serialized: reports must be byte-identical across runs.
    """

    config: dict
    axioms: dict
    hypotheses: dict
    bound: dict
    bound_theta: dict
    recovery: dict
    rate: dict
    derivation_certificate: dict
    derivation_sequence: dict
    homogeneity: dict
    checks: list
    passed: bool
    timings: dict = field(default_factory=dict, compare=False)

    _SERIALIZED = (
        "config",
        "axioms",
        "hypotheses",
        "bound",
        "bound_theta",
        "recovery",
        "rate",
        "derivation_certificate",
        "derivation_sequence",
        "homogeneity",
        "checks",
        "passed",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self._SERIALIZED}

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityReport":
        missing = [name for name in cls._SERIALIZED if name not in data]
        if missing:
            raise ValueError(f"report is missing fields: {', '.join(missing)}")
        return cls(**{name: data[name] for name in cls._SERIALIZED})


def _sequence_triples(config: ExperimentConfig) -> list:
    """Probe triples with norms in [1, 2] for the residual trajectory."""
    rng = rng_for(config.seed, ROLE_SEQUENCE_TRIPLES)
    triples = []
    for _ in range(SEQUENCE_TRIPLE_COUNT):
        mats = []
        for _ in range(3):
            m = random_matrix(rng, config.dim)
            target = 1.0 + rng.uniform()
            mats.append(m * (target / spectral_norm(m)))
        triples.append(tuple(mats))
    return triples


def _sequence_section(values: list[float], levels: list[int], expected_rate: float) -> dict:
    """Strict-decrease and tail-rate analysis of a residual trajectory."""
    usable_pairs = [
        (values[i], values[i + 1])
        for i in range(len(values) - 1)
        if levels[i] >= SEQUENCE_STRICT_AFTER and values[i] > SEQUENCE_FLOOR
    ]
    decreasing = all(b < a for a, b in usable_pairs)
    max_tail_ratio = max((b / a for a, b in usable_pairs), default=None)

    first = None
    last = None
    for i, (lvl, v) in enumerate(zip(levels, values)):
        if lvl >= SEQUENCE_STRICT_AFTER and v > SEQUENCE_FLOOR:
            if first is None:
                first = i
            last = i
    tail_rate = None
    if first is not None and last is not None and last > first:
        tail_rate = (values[last] / values[first]) ** (1.0 / (last - first))
    rate_ok = tail_rate is None or abs(tail_rate - expected_rate) <= RATE_WINDOW
    return {
        "levels": levels,
        "values": values,
        "floor": SEQUENCE_FLOOR,
        "strict_after": SEQUENCE_STRICT_AFTER,
        "max_tail_ratio": max_tail_ratio,
        "tail_rate": tail_rate,
        "expected_rate": expected_rate,
        "rate_window": RATE_WINDOW,
        "decreasing_passed": decreasing,
        "rate_passed": rate_ok,
        "passed": decreasing and rate_ok,
    }


def run_recovery(config: ExperimentConfig, threads: int | None = None) -> StabilityReport:
    """End-to-end scenario: build, perturb, recover, certify, report."""
    config.validate()
    scheme = config.scheme_enum()
    phi = PowerType(config.eps, config.p)
    form = scheme.hypothesis_form
    timings: dict[str, float] = {}
    started = time.perf_counter()

    theta, _d, big_d = build_generators(config)
    f = make_perturbation(big_d, config.eps, config.p, form, child_seed(config.seed, ROLE_MAP_F))
    h = make_perturbation(theta, config.eps, config.p, form, child_seed(config.seed, ROLE_MAP_H))

    probes = make_probes(config.dim, config.probe_count, rng_for(config.seed, ROLE_PROBES))
    mu_samples = make_mu_samples(MU_SAMPLE_COUNT, rng_for(config.seed, ROLE_MU))
    rate_probes = make_probes(
        config.dim, RATE_PROBE_COUNT, rng_for(config.seed, ROLE_RATE_PROBES), 0.5, 2.0
    )
    cert_rng = rng_for(config.seed, ROLE_CERT_TRIPLES)
    cert_triples = [
        tuple(random_matrix(cert_rng, config.dim) for _ in range(3))
        for _ in range(CERT_TRIPLE_COUNT)
    ]

    checks: list[dict] = []
    with experiment_mapper(threads) as mapper:
        t0 = time.perf_counter()
        axioms = run_axiom_suite(config, samples=min(config.probe_count, 50), mapper=mapper)
        checks.extend(_axiom_checks(axioms))
        timings["axioms_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        recovery_error: str | None = None
        d_hat = theta_hat = None
        try:
            d_hat = recover_linear_map(
                f, scheme, tol=config.tol, l_max=config.l_max, mapper=mapper
            )
            theta_hat = recover_linear_map(
                h, scheme, tol=config.tol, l_max=config.l_max, mapper=mapper
            )
        except (ConvergenceError, LinearityCertificationError) as exc:
            recovery_error = str(exc)
        timings["recover_s"] = time.perf_counter() - t0

        converged = recovery_error is None
        checks.append(
            {
                "name": "recovery_converged",
                "passed": converged,
                "value": None,
                "tolerance": None,
            }
        )
        if not converged:
            recovery = {
                "converged": False,
                "error": recovery_error,
                "d_entrywise_error": None,
                "theta_entrywise_error": None,
                "tolerance": RECOVERY_ERROR_TOL,
                "passed": False,
            }
            timings["total_s"] = time.perf_counter() - started
            return StabilityReport(
                config=config.to_dict(),
                axioms=axioms,
                hypotheses={},
                bound={"rows": [], "max_ratio": 0.0, "slack": BOUND_SLACK, "passed": False},
                bound_theta={},
                recovery=recovery,
                rate={},
                derivation_certificate={},
                derivation_sequence={},
                homogeneity={},
                checks=checks,
                passed=False,
                timings=timings,
            )

        t0 = time.perf_counter()
        err_d = max_entry_diff(d_hat.coeffs, big_d.to_tabulated().coeffs)
        err_theta = max_entry_diff(theta_hat.coeffs, theta.to_tabulated().coeffs)
        recovery = {
            "converged": True,
            "error": None,
            "d_entrywise_error": err_d,
            "theta_entrywise_error": err_theta,
            "tolerance": RECOVERY_ERROR_TOL,
            "passed": max(err_d, err_theta) <= RECOVERY_ERROR_TOL,
        }
        checks.append(
            {
                "name": "recovery_error_d",
                "passed": err_d <= RECOVERY_ERROR_TOL,
                "value": err_d,
                "tolerance": RECOVERY_ERROR_TOL,
            }
        )
        checks.append(
            {
                "name": "recovery_error_theta",
                "passed": err_theta <= RECOVERY_ERROR_TOL,
                "value": err_theta,
                "tolerance": RECOVERY_ERROR_TOL,
            }
        )

        hyp = verify_hypotheses(f, h, phi, form, probes, mu_samples, mapper=mapper)
        hypotheses = {
            "form": hyp.form,
            "samples": hyp.samples,
            "max_ratio_f": hyp.max_ratio_f,
            "max_ratio_h": hyp.max_ratio_h,
            "max_triple_ratio": hyp.max_triple_ratio,
            "zero_control_samples": hyp.zero_control_samples,
            "max_zero_control_residual": hyp.max_zero_control_residual,
            "passed": hyp.passed,
        }
        checks.append(
            {
                "name": "hypothesis_ratio_f",
                "passed": hyp.max_ratio_f <= 1.0,
                "value": hyp.max_ratio_f,
                "tolerance": 1.0,
            }
        )
        checks.append(
            {
                "name": "hypothesis_ratio_h",
                "passed": hyp.max_ratio_h <= 1.0,
                "value": hyp.max_ratio_h,
                "tolerance": 1.0,
            }
        )
        timings["hypotheses_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        bound_f = verify_stability_bound(
            f, d_hat, phi, scheme, probes, slack=BOUND_SLACK, mapper=mapper
        )
        bound_h = verify_stability_bound(
            h, theta_hat, phi, scheme, probes, slack=BOUND_SLACK, mapper=mapper
        )
        bound = {
            "rows": [list(r) for r in bound_f.rows],
            "max_ratio": bound_f.max_ratio,
            "slack": bound_f.slack,
            "passed": bound_f.passed,
        }
        bound_theta = {
            "max_ratio": bound_h.max_ratio,
            "slack": bound_h.slack,
            "passed": bound_h.passed,
        }
        checks.append(
            {
                "name": "bound_ratio",
                "passed": bound_f.passed,
                "value": bound_f.max_ratio,
                "tolerance": 1.0 + BOUND_SLACK,
            }
        )
        checks.append(
            {
                "name": "bound_ratio_theta",
                "passed": bound_h.passed,
                "value": bound_h.max_ratio,
                "tolerance": 1.0 + BOUND_SLACK,
            }
        )
        timings["bound_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        s1 = verify_s1_homogeneity(
            d_hat, probes[:S1_PROBE_COUNT], mu_samples, tol=HOMOGENEITY_TOL
        )
        s1_value = max(s1.max_residual, s1.zero_residual)
        checks.append(
            {
                "name": "s1_homogeneity",
                "passed": s1.passed,
                "value": s1_value,
                "tolerance": HOMOGENEITY_TOL,
            }
        )
        complex_entries = []
        mid_probes = [probes[0], probes[len(probes) // 2], probes[-1]]
        for lam, label in COMPLEX_LAMBDAS:
            worst = None
            for x in mid_probes:
                res = complex_homogeneity_via_decomposition(
                    d_hat, lam, x, tol=HOMOGENEITY_TOL
                )
                if worst is None or res.residual / res.threshold > worst.residual / worst.threshold:
                    worst = res
            complex_entries.append(
                {
                    "label": label,
                    "lambda": [lam.real, lam.imag],
                    "residual": worst.residual,
                    "threshold": worst.threshold,
                    "passed": worst.passed,
                }
            )
            checks.append(
                {
                    "name": f"complex_homogeneity_{label}",
                    "passed": worst.passed,
                    "value": worst.residual,
                    "tolerance": worst.threshold,
                }
            )
        homogeneity = {
            "s1": {
                "max_residual": s1.max_residual,
                "zero_residual": s1.zero_residual,
                "threshold": s1.threshold,
                "passed": s1.passed,
            },
            "complex": complex_entries,
            "passed": s1.passed and all(e["passed"] for e in complex_entries),
        }
        timings["homogeneity_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        cert = certify_theta_derivation(
            d_hat, theta_hat, cert_triples, tol=DERIVATION_TOL, mapper=mapper
        )
        derivation_certificate = {
            "max_relative_residual": cert.max_relative_residual,
            "worst_index": cert.worst_index,
            "threshold": cert.threshold,
            "passed": cert.passed,
        }
        checks.append(
            {
                "name": "derivation_certificate",
                "passed": cert.passed,
                "value": cert.max_relative_residual,
                "tolerance": cert.threshold,
            }
        )
        timings["certificate_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        expected_rate = perturbation_decay_rate(scheme, config.p)
        if scheme in SEQUENCE_LEVELS:
            levels = list(range(SEQUENCE_LEVELS[scheme]))
            values = derivation_limit_sequence(
                f, h, scheme, _sequence_triples(config), levels, mapper=mapper
            )
            derivation_sequence = _sequence_section(values, levels, expected_rate)
            checks.append(
                {
                    "name": "derivation_sequence_decreasing",
                    "passed": derivation_sequence["decreasing_passed"],
                    "value": derivation_sequence["max_tail_ratio"],
                    "tolerance": 1.0,
                }
            )
            checks.append(
                {
                    "name": "derivation_sequence_rate",
                    "passed": derivation_sequence["rate_passed"],
                    "value": derivation_sequence["tail_rate"],
                    "tolerance": RATE_WINDOW,
                }
            )
        else:
            derivation_sequence = {
                "skipped": (
                    "the derivation-limit residual is not defined for scheme "
                    f"{scheme.value}"
                )
            }
        timings["sequence_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        rate_est = estimate_convergence_rate(
            f,
            scheme,
            rate_probes,
            tol=config.tol,
            l_max=config.l_max,
            mapper=mapper,
        )
        rate_ok = rate_est.rate is None or abs(rate_est.rate - expected_rate) <= RATE_WINDOW
        rate = {
            "estimate": rate_est.rate,
            "expected": expected_rate,
            "window": RATE_WINDOW,
            "first_level": rate_est.first_level,
            "last_level": rate_est.last_level,
            "probes": rate_est.probes_used,
            "passed": rate_ok,
        }
        checks.append(
            {
                "name": "approximant_rate",
                "passed": rate_ok,
                "value": rate_est.rate,
                "tolerance": RATE_WINDOW,
            }
        )
        timings["rate_s"] = time.perf_counter() - t0

    timings["total_s"] = time.perf_counter() - started
    return StabilityReport(
        config=config.to_dict(),
        axioms=axioms,
        hypotheses=hypotheses,
        bound=bound,
        bound_theta=bound_theta,
        recovery=recovery,
        rate=rate,
        derivation_certificate=derivation_certificate,
        derivation_sequence=derivation_sequence,
        homogeneity=homogeneity,
        checks=checks,
        passed=all(c["passed"] for c in checks),
        timings=timings,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _render_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"reports must contain finite numbers, got {value!r}")
    text = format(value, ".17g")
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def render_json(value) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits for floats."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _render_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise ValueError(f"report keys must be strings, got {key!r}")
            items.append(f"{json.dumps(key)}: {render_json(value[key])}")
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(render_json(v) for v in value) + "]"
    raise ValueError(f"cannot serialize {type(value).__name__} into a report")


def render_csv(report_data: dict) -> str:
    """Per-probe bound table as CSV with a fixed header."""
    bound = report_data.get("bound")
    if not isinstance(bound, dict) or "rows" not in bound:
        raise ReportFormatError("report has no per-probe bound table for CSV output")
    lines = ["norm_x,bound,error,ratio"]
    for row in bound["rows"]:
        lines.append(",".join(_render_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str, path: str) -> None:
    """Persist a report as deterministic JSON or CSV."""
    data = report.to_dict() if hasattr(report, "to_dict") else report
    if fmt == "json":
        text = render_json(data) + "\n"
    elif fmt == "csv":
        text = render_csv(data)
    else:
        raise ReportFormatError(f"unknown report format {fmt!r}; expected json or csv")
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc}") from exc


def load_report(path: str) -> StabilityReport:
    """Read back a JSON report written by emit_report."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise OSError(f"could not read report from {path}: {exc}") from exc
    return StabilityReport.from_dict(data)
