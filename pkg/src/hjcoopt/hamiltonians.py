"""Analytic per-node optimization of the Hamiltonian over the control set.

For costate p the control-affine Hamiltonian splits as
p.f1(x) + (f2(x)^T p).u, so its extrema over a ball or box have closed
forms: the ball extremum scales f2^T p to the boundary, the box extremum is
per-axis bang-bang. The constrained variant minimizes over a safe-control
set instead of the full control set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import min_linear_over_safe_set
from .errors import ContractViolation
from .safe_controls import SafeControlSet
from .systems import SystemModel

__all__ = ["HamiltonianResult", "hamiltonian_max", "hamiltonian_min_constrained"]


@dataclass(frozen=True)
class HamiltonianResult:
    value: float
    argopt: np.ndarray
    flagged: bool = False  # set when the safe set was infeasible (fallback)


def hamiltonian_max(system: SystemModel, x, p) -> HamiltonianResult:
    """max over admissible u of p . f(x, u), with its maximizer.

    Degenerate costates (f2^T p = 0) take the zero control: a deterministic
    minimum-norm tie-break that does not perturb the safe set.
    """
    p = np.asarray(p, dtype=float)
    if not np.isfinite(p).all():
        raise ContractViolation("non-finite costate")
    x = np.asarray(x, dtype=float)
    f1 = system.drift(x)
    f2 = system.control_jacobian(x)
    lin, u = system.control_set.support(f2.T @ p)
    return HamiltonianResult(value=float(p @ f1 + lin), argopt=u)


def hamiltonian_min_constrained(
    system: SystemModel, x, p, r_val: float, constraint: SafeControlSet
) -> HamiltonianResult:
    """min over u in the safe set of p . f(x, u) + r_val, with its minimizer.

    The running-cost rate enters as a precomputed scalar, so the
    minimization itself is linear in u: analytic over the full set, an exact
    ball-with-hyperplane solve on the safety band, and a fixed evaluation at
    the fallback control when the band is infeasible (flagged, not fatal).
    """
    p = np.asarray(p, dtype=float)
    if not np.isfinite(p).all():
        raise ContractViolation("non-finite costate")
    x = np.asarray(x, dtype=float)
    f1 = system.drift(x)
    f2 = system.control_jacobian(x)
    c = f2.T @ p
    u, active = min_linear_over_safe_set(c, constraint)
    value = float(p @ f1 + c @ u + r_val)
    return HamiltonianResult(value=value, argopt=u, flagged=(active == "fallback"))
