"""State-space models: numeric Jacobians, closed forms, ZOH discretization.

The numeric Jacobian built from the nonlinear dynamics is the authoritative
model for controller synthesis; the closed-form builders reproduce each
platform's published linearization and exist as an independent cross-check
(the two agree entry-wise to within the differencing error at the upright
origin).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .plants import NxtwayParams, PlantParams, RotPenParams, forward_dynamics

__all__ = [
    "StateSpace",
    "numeric_jacobian",
    "jacobian_linearize",
    "rotpen_statespace_closed_form",
    "nxtway_statespace_closed_form",
    "discretize_zoh",
    "save_statespace",
    "load_statespace",
]

_LABELS = ("q1", "q2", "q1dot", "q2dot")


@dataclass(frozen=True)
class StateSpace:
    """A continuous or discrete linear model (A, B, C, D).

    C defaults to the identity and D to zeros. Ts must be given (positive)
    for kind "discrete" and omitted for kind "continuous".
    """

    A: np.ndarray
    B: np.ndarray
    C: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    kind: str = "continuous"
    Ts: Optional[float] = None
    state_labels: tuple = field(default=_LABELS)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        C = np.eye(n) if self.C is None else np.atleast_2d(np.asarray(self.C, dtype=float))
        D = (np.zeros((C.shape[0], B.shape[1])) if self.D is None
             else np.atleast_2d(np.asarray(self.D, dtype=float)))
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        if self.kind not in ("continuous", "discrete"):
            raise ValueError(f"kind must be continuous or discrete, got {self.kind!r}")
        if self.kind == "discrete":
            if self.Ts is None or not self.Ts > 0:
                raise ValueError("discrete systems need Ts > 0")
        elif self.Ts is not None:
            raise ValueError("continuous systems take no Ts")
        labels = tuple(self.state_labels)
        if len(labels) != n:
            labels = tuple(f"x{i+1}" for i in range(n))
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "state_labels", labels)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


def numeric_jacobian(f: Callable, x0, u0, eps: float = 1e-6):
    """Central-difference Jacobians of xdot = f(x, u) at (x0, u0).

    Parameters
    ----------
    f : callable
        Maps (x, u) arrays to the state derivative array.
    x0, u0 : array_like
        Expansion point.
    eps : float
        Absolute differencing step, applied per coordinate.

    Returns
    -------
    (A, B) : ndarray pair
        A = df/dx, B = df/du.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    n = x0.size
    m = u0.size
    fx = np.asarray(f(x0, u0), dtype=float)
    A = np.zeros((fx.size, n))
    B = np.zeros((fx.size, m))
    for i in range(n):
        step = np.zeros(n)
        step[i] = eps
        A[:, i] = (np.asarray(f(x0 + step, u0)) - np.asarray(f(x0 - step, u0))) / (2 * eps)
    for j in range(m):
        step = np.zeros(m)
        step[j] = eps
        B[:, j] = (np.asarray(f(x0, u0 + step)) - np.asarray(f(x0, u0 - step))) / (2 * eps)
    return A, B


def jacobian_linearize(params: PlantParams, x0=None, u0=None, eps: float = 1e-6) -> StateSpace:
    """Linearize a plant about (x0, u0), default the upright origin.

    For the two-wheeled robot the input is the pair of motor voltages, so B
    has two (equal) columns; the rotary pendulum has a single voltage input.
    """
    x0 = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float)
    m = 2 if isinstance(params, NxtwayParams) else 1
    u0 = np.zeros(m) if u0 is None else np.atleast_1d(np.asarray(u0, dtype=float))
    if u0.size != m:
        raise ValueError(f"u0 must have {m} entries for {params.platform}")

    def f(x, u):
        qdd = forward_dynamics(params, x, u if m == 2 else u[0])
        return np.concatenate([x[2:], qdd])

    A, B = numeric_jacobian(f, x0, u0, eps)
    return StateSpace(A=A, B=B, kind="continuous")


def rotpen_statespace_closed_form(params: RotPenParams) -> StateSpace:
    """Closed-form continuous model of the rotary pendulum at the origin.

    The kinematic entries A[0, 2] and A[1, 3] are exactly 1; the published
    table prints 1/Delta there, which would break the identity between the
    position states and the velocity states, so the corrected value is
    emitted.
    """
    p = params
    a = p.m_r * (p.L_r / 2) ** 2 + p.m_p * p.L_r ** 2 + p.J_r
    b = 0.5 * p.m_p * p.L_p * p.L_r
    c = p.m_p * (p.L_p / 2) ** 2 + p.J_p
    gam = p.gamma
    delta = gam * (a * c - b * b)
    if delta == 0.0:
        raise ValueError("degenerate parameters: zero mass-matrix determinant")
    drag = p.f_r * gam + p.K_m * p.K_g

    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    A[2, 1] = 0.25 * p.m_p ** 2 * p.L_p ** 2 * p.L_r * p.g * gam / delta
    A[2, 2] = -drag * c / delta
    A[2, 3] = -0.5 * p.m_p * p.L_p * p.L_r * p.f_p * gam / delta
    A[3, 1] = 0.5 * p.L_p * p.m_p * p.g * gam * a / delta
    A[3, 2] = -0.5 * p.m_p * p.L_p * p.L_r * drag / delta
    A[3, 3] = -p.f_p * gam * a / delta

    B = np.zeros((4, 1))
    B[2, 0] = c / delta
    B[3, 0] = 0.5 * p.m_p * p.L_p * p.L_r / delta
    return StateSpace(A=A, B=B, kind="continuous")


def nxtway_statespace_closed_form(params: NxtwayParams) -> StateSpace:
    """Closed-form continuous model of the two-wheeled robot at the origin.

    The two B columns are identical: each motor contributes the same
    torque path, and the wheels are driven symmetrically.
    """
    p = params
    n2Jm = p.eta ** 2 * p.J_m
    pw = 2 * p.m * p.R ** 2 + p.M * p.R ** 2 + 2 * p.J_w + 2 * n2Jm
    q0 = p.M * p.L * p.R - 2 * n2Jm
    rb = p.M * p.L ** 2 + p.J_q2 + 2 * n2Jm
    delta = pw * rb - q0 * q0
    if delta == 0.0:
        raise ValueError("degenerate parameters: zero mass-matrix determinant")
    be, fw, al = p.beta, p.f_w, p.alpha

    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    A[2, 1] = -p.g * p.M * p.L * q0 / delta
    A[2, 2] = -(2 * (be + fw) * rb + 2 * be * q0) / delta
    A[2, 3] = 2 * be * (p.M * p.L ** 2 + p.J_q2 + p.M * p.L * p.R) / delta
    A[3, 1] = p.M * p.g * p.L * pw / delta
    A[3, 2] = (2 * (be + fw) * q0 + 2 * be * pw) / delta
    A[3, 3] = -2 * be * (p.M * p.L * p.R + 2 * p.m * p.R ** 2 + p.M * p.R ** 2 + 2 * p.J_w) / delta

    b_top = al * (p.M * p.L ** 2 + p.J_q2 + p.M * p.L * p.R) / delta
    b_bot = -al * (p.M * p.L * p.R + 2 * p.m * p.R ** 2 + p.M * p.R ** 2 + 2 * p.J_w) / delta
    B = np.array([[0.0, 0.0], [0.0, 0.0], [b_top, b_top], [b_bot, b_bot]])
    return StateSpace(A=A, B=B, kind="continuous")


def discretize_zoh(ss: StateSpace, Ts: float) -> StateSpace:
    """Discretize a continuous model under a zero-order hold.

    Ad and Bd come from one matrix exponential of the augmented
    [[A, B], [0, 0]] block scaled by Ts; C and D pass through unchanged.
    """
    if ss.kind != "continuous":
        raise ValueError("discretize_zoh expects a continuous system")
    if not Ts > 0:
        raise ValueError("Ts must be positive")
    n, m = ss.n_states, ss.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ss.A * Ts
    aug[:n, n:] = ss.B * Ts
    E = expm(aug)
    return StateSpace(A=E[:n, :n], B=E[:n, n:], C=ss.C, D=ss.D,
                      kind="discrete", Ts=Ts, state_labels=ss.state_labels)


def _format_matrix(name: str, M: np.ndarray) -> list[str]:
    lines = [f"[{name}] rows={M.shape[0]} cols={M.shape[1]}"]
    for row in M:
        lines.append(" ".join(repr(float(v)) for v in row))
    return lines


def save_statespace(ss: StateSpace, path) -> None:
    """Write a state-space model to a labeled plain-text file (row major)."""
    lines = [
        "# pendulum-ctl state-space model",
        f"kind = {ss.kind}",
        f"Ts = {repr(float(ss.Ts)) if ss.Ts is not None else 'none'}",
        "labels = " + ",".join(ss.state_labels),
    ]
    for name, M in (("A", ss.A), ("B", ss.B), ("C", ss.C), ("D", ss.D)):
        lines.extend(_format_matrix(name, M))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_statespace(path) -> StateSpace:
    """Read a model written by save_statespace."""
    with open(path, encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    meta: dict[str, str] = {}
    matrices: dict[str, np.ndarray] = {}
    i = 0
    while i < len(raw):
        line = raw[i]
        if line.startswith("["):
            head, dims = line.split("]")
            name = head[1:]
            shape = dict(part.split("=") for part in dims.split())
            rows, cols = int(shape["rows"]), int(shape["cols"])
            data = [[float(v) for v in raw[i + 1 + r].split()] for r in range(rows)]
            M = np.array(data, dtype=float).reshape(rows, cols)
            matrices[name] = M
            i += 1 + rows
        else:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
            i += 1
    Ts = None if meta.get("Ts", "none") == "none" else float(meta["Ts"])
    labels = tuple(meta.get("labels", "").split(",")) if meta.get("labels") else _LABELS
    return StateSpace(A=matrices["A"], B=matrices["B"], C=matrices.get("C"),
                      D=matrices.get("D"), kind=meta.get("kind", "continuous"),
                      Ts=Ts, state_labels=labels)
