"""Three-way agreement of derivatives: closed form, jets and finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .funcs import eval_jet
from .jets import jet_eval
from .quasigroup import RationalQuasigroup, evaluate, first_partial, mixed_second_partial, to_generic_map
from .reducibility import DEFAULT_TOL, GeneratorConfig, SamplerConfig, random_instance, sample_regular, substream

JET_RTOL = 1e-10
FD_RTOL = 1e-5

def fd_step(x: float) -> float:
    return 1e-4 * max(1.0, abs(x))

def central_first(f, point, i: int) -> float:
    x = [float(v) for v in point]
    h = fd_step(x[i - 1])
    xp, xm = list(x), list(x)
    xp[i - 1] += h
    xm[i - 1] -= h
    return (f(xp) - f(xm)) / (2 * h)

def central_second(f, point, i: int, j: int) -> float:
    x = [float(v) for v in point]
    if i == j:
        h = fd_step(x[i - 1])
        xp, xm = list(x), list(x)
        xp[i - 1] += h
        xm[i - 1] -= h
        return (f(xp) - 2 * f(x) + f(xm)) / (h * h)
    hi, hj = fd_step(x[i - 1]), fd_step(x[j - 1])

    def at(si, sj):
        y = list(x)
        y[i - 1] += si * hi
        y[j - 1] += sj * hj
        return f(y)

    return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hi * hj)

def partial_scales(q: RationalQuasigroup, point, i: int, j: int) -> tuple[float, float, float]:
    """Magnitudes of the terms summed in F_i, F_j and F_ij.

    Errors are measured relative to these rather than to the (possibly
    cancelling) results themselves.
    """
    x = [float(v) for v in point]
    s = abs(sum(x) + float(q.a))
    jets = [eval_jet(f, v) for f, v in zip(q.funcs, x)]
    g = sum(abs(jt[0]) for jt in jets) + abs(float(q.A))
    di, dj = abs(jets[i - 1][1]), abs(jets[j - 1][1])
    sc_i = (di * s + g) / s**2
    sc_j = (dj * s + g) / s**2
    if i == j:
        sc_ij = abs(jets[i - 1][2]) / s + 2 * (di * s + g) / s**3
    else:
        sc_ij = ((di + dj) * s + 2 * g) / s**3
    return sc_i, sc_j, sc_ij

@dataclass
class DerivativeReport:
    cases: int = 0
    jet_failures: int = 0
    fd_failures: int = 0
    worst_jet: float = 0.0
    worst_fd: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.jet_failures == 0 and self.fd_failures == 0

    def to_json(self) -> dict:
        return {
            "cases": self.cases,
            "jet_failures": self.jet_failures,
            "fd_failures": self.fd_failures,
            "worst_jet_rel": self.worst_jet,
            "worst_fd_rel": self.worst_fd,
            "failures": self.failures[:10],
        }

def compare_derivatives(q: RationalQuasigroup, point, i: int, j: int):
    """Relative discrepancies: exact vs jet, and the worse of either vs finite differences."""
    exact_pt = [Fraction(float(v)) for v in point]
    closed = (
        first_partial(q, i, exact_pt),
        first_partial(q, j, exact_pt),
        mixed_second_partial(q, i, j, exact_pt),
    )
    jet = jet_eval(to_generic_map(q), [float(v) for v in point], (i, j))
    f = lambda y: float(evaluate(q, y))  # noqa: E731
    fd = (central_first(f, point, i), central_first(f, point, j), central_second(f, point, i, j))
    scales = partial_scales(q, point, i, j)
    jet_vals = (jet.d_i, jet.d_j, jet.d_ij)
    rel_jet = max(abs(float(c) - float(v)) / sc for c, v, sc in zip(closed, jet_vals, scales))
    rel_fd = max(abs(float(c) - v) / sc for c, v, sc in zip(closed, fd, scales))
    rel_jet_fd = max(abs(float(v) - w) / sc for v, w, sc in zip(jet_vals, fd, scales))
    return rel_jet, max(rel_fd, rel_jet_fd)

def derivative_suite(cases: int = 1000, seed: int = 0, jet_rtol: float = JET_RTOL,
                     fd_rtol: float = FD_RTOL, gen: GeneratorConfig = GeneratorConfig()) -> DerivativeReport:
    """Random (instance, regular point, direction pair) triples, all three routes."""
    rep = DerivativeReport()
    for k in range(cases):
        rng = substream(seed, 17, k)
        q = random_instance(rng, gen).q
        x = sample_regular(q, SamplerConfig(count=1, seed=seed), rng)[0]
        i, j = (int(v) + 1 for v in rng.integers(0, q.n, size=2))
        rel_jet, rel_fd = compare_derivatives(q, list(x), i, j)
        rep.cases += 1
        rep.worst_jet = max(rep.worst_jet, rel_jet)
        rep.worst_fd = max(rep.worst_fd, rel_fd)
        bad_jet, bad_fd = rel_jet > jet_rtol, rel_fd > fd_rtol
        rep.jet_failures += bad_jet
        rep.fd_failures += bad_fd
        if bad_jet or bad_fd:
            rep.failures.append({"case": k, "spec": q.to_json(), "point": [float(v) for v in x],
                                 "dirs": [i, j], "rel_jet": rel_jet, "rel_fd": rel_fd})
    return rep

def tolerances_for(tol: float) -> tuple[float, float]:
    """Derivative tolerances scaled with the residual tolerance (1e-8 -> defaults)."""
    factor = tol / DEFAULT_TOL
    return JET_RTOL * factor, FD_RTOL * factor

__all__ = ["derivative_suite", "compare_derivatives", "central_first", "central_second", "tolerances_for"]
