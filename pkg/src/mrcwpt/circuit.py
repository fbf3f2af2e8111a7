"""Steady-state behaviour of one transmitter coil driving N coupled receivers.

Closed-form currents and powers at resonance, a full mesh-equation solver
that also covers off-resonance operation, the operating frequency that
maximizes delivered power, analytic sensitivities of every power quantity
with respect to a single load resistance, and the load values where
delivered power, sum power, and efficiency peak.

Conventions: phasor amplitudes (not RMS), so average power carries a 1/2
factor. Receivers are indexed 0..N-1. Sums run over connected receivers
only; an open switch removes its receiver from the circuit entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coils import CoilElectrical, tune_capacitor
from .errors import NoFiniteMaximizerError, NumericalError, ValidationError


@dataclass(frozen=True)
class SystemConfig:
    """One transmitter plus N receivers with their coupling and load limits.

    ``h[n]`` is the signed mutual inductance between the transmitter coil
    and receiver n; receiver-to-receiver coupling is neglected. ``w`` is
    the resonant angular frequency: every tuning capacitor, when present,
    must resonate its coil at ``w``.
    """

    v_tx: complex
    w: float
    transmitter: CoilElectrical
    receivers: tuple[CoilElectrical, ...]
    h: tuple[float, ...]
    x_lo: tuple[float, ...]
    x_hi: tuple[float, ...]
    p_req: tuple[float, ...]

    def __post_init__(self):
        n = len(self.receivers)
        if n < 1:
            raise ValidationError("at least one receiver is required")
        for name, field in (("h", self.h), ("x_lo", self.x_lo),
                            ("x_hi", self.x_hi), ("p_req", self.p_req)):
            if len(field) != n:
                raise ValidationError(f"{name} must have one entry per receiver")
        if not self.w > 0.0:
            raise ValidationError("w must be > 0")
        l_tx = self.transmitter.self_inductance
        for k in range(n):
            if abs(self.h[k]) > math.sqrt(self.receivers[k].self_inductance * l_tx):
                raise ValidationError(f"receiver {k + 1}: |h| exceeds sqrt(l_n*l_tx)")
            if not 0.0 < self.x_lo[k] <= self.x_hi[k]:
                raise ValidationError(f"receiver {k + 1}: bounds must satisfy 0 < x_lo <= x_hi")
            if not self.p_req[k] > 0.0:
                raise ValidationError(f"receiver {k + 1}: p_req must be > 0")
        for label, coil in (("transmitter", self.transmitter),
                            *((f"receiver {k + 1}", c) for k, c in enumerate(self.receivers))):
            c = coil.tuning_capacitance
            if c is not None:
                natural = 1.0 / math.sqrt(coil.self_inductance * c)
                if abs(natural - self.w) > 1e-12 * self.w:
                    raise ValidationError(f"{label}: capacitor not tuned to w")

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    def tuned(self) -> "SystemConfig":
        """Return a copy with every tuning capacitor sized for resonance at w."""
        return replace(
            self,
            transmitter=self.transmitter.tuned(self.w),
            receivers=tuple(c.tuned(self.w) for c in self.receivers),
        )

    def with_frequency(self, w: float) -> "SystemConfig":
        """Return a copy operating (and resonant) at a different frequency.

        Capacitors that were set are re-tuned, mirroring hardware where the
        compensators track the operating frequency.
        """
        tx = self.transmitter
        rx = self.receivers
        if tx.tuning_capacitance is not None:
            tx = tx.tuned(w)
        rx = tuple(c.tuned(w) if c.tuning_capacitance is not None else c for c in rx)
        return replace(self, w=w, transmitter=tx, receivers=rx)


@dataclass(frozen=True)
class SwitchState:
    """Connection state of every receiver's load switch (1 closed, 0 open).

    The all-open state is excluded: with no load connected there is nothing
    to analyse or optimize.
    """

    s: tuple[int, ...]

    def __post_init__(self):
        if len(self.s) < 1:
            raise ValidationError("switch state must cover at least one receiver")
        if any(v not in (0, 1) for v in self.s):
            raise ValidationError("switch entries must be 0 or 1")
        if not any(self.s):
            raise ValidationError("at least one switch must be closed")

    @classmethod
    def all_closed(cls, n: int) -> "SwitchState":
        return cls(s=(1,) * n)

    @classmethod
    def from_mask(cls, mask: str) -> "SwitchState":
        if not mask or any(ch not in "01" for ch in mask):
            raise ValidationError("switch mask must be a nonempty string of 0s and 1s")
        return cls(s=tuple(int(ch) for ch in mask))

    @property
    def connected(self) -> tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.s) if v)

    def mask(self) -> str:
        return "".join(str(v) for v in self.s)


@dataclass(frozen=True)
class SteadyState:
    """Currents and powers for one switch configuration and load vector."""

    i_tx: complex
    i: tuple[complex, ...]
    p_tx: float
    p: tuple[float, ...]
    p_sum: float
    rho: float


def _check_loads(sys: SystemConfig, sw: SwitchState, x) -> None:
    if len(sw.s) != sys.n_receivers:
        raise ValidationError("switch state length does not match receiver count")
    if len(x) != sys.n_receivers:
        raise ValidationError("load vector must have one entry per receiver")
    for k in sw.connected:
        if not x[k] > 0.0:
            raise ValidationError(f"receiver {k + 1}: load resistance must be > 0")


def solve_closed_form(sys: SystemConfig, sw: SwitchState | None, x) -> SteadyState:
    """Exact steady state at resonance.

    With every coil tuned to ``w`` the mesh equations collapse to real
    arithmetic: the transmitter current is the source voltage divided by
    the transmitter resistance plus the total reflected resistance of the
    connected receivers, and each receiver current is a purely reactive
    multiple of it.
    """
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    _check_loads(sys, sw, x)
    w = sys.w
    r_tx = sys.transmitter.resistance
    v = sys.v_tx

    denom = r_tx
    for k in sw.connected:
        hk = sys.h[k]
        denom += (w * hk) ** 2 / (sys.receivers[k].resistance + x[k])

    i_tx = v / denom
    currents = []
    powers = []
    for k in range(sys.n_receivers):
        if sw.s[k]:
            series = sys.receivers[k].resistance + x[k]
            i_k = 1j * w * sys.h[k] * i_tx / series
            currents.append(i_k)
            powers.append(0.5 * x[k] * abs(i_k) ** 2)
        else:
            currents.append(0j)
            powers.append(0.0)

    p_tx = 0.5 * (v * i_tx.conjugate()).real
    p_sum = sum(powers)
    return SteadyState(
        i_tx=i_tx,
        i=tuple(currents),
        p_tx=p_tx,
        p=tuple(powers),
        p_sum=p_sum,
        rho=p_sum / p_tx,
    )


def _capacitance(coil: CoilElectrical, w_resonant: float) -> float:
    if coil.tuning_capacitance is not None:
        return coil.tuning_capacitance
    return tune_capacitor(coil.self_inductance, w_resonant)


def _mesh_solve(sys: SystemConfig, connected, x, w_eval: float):
    """Solve the full complex mesh equations at an arbitrary frequency.

    Capacitors are fixed at their resonant values for ``sys.w``; ``w_eval``
    may differ, in which case the series reactances no longer cancel.
    Returns (i_tx, currents dict by receiver index).
    """
    if not w_eval > 0.0:
        raise ValidationError("w_eval must be > 0")
    tx = sys.transmitter
    m = len(connected)
    a = np.zeros((m + 1, m + 1), dtype=complex)
    b = np.zeros(m + 1, dtype=complex)
    c_tx = _capacitance(tx, sys.w)
    a[0, 0] = tx.resistance + 1j * (w_eval * tx.self_inductance - 1.0 / (w_eval * c_tx))
    b[0] = sys.v_tx
    for j, k in enumerate(connected, start=1):
        coil = sys.receivers[k]
        c_k = _capacitance(coil, sys.w)
        a[0, j] = -1j * w_eval * sys.h[k]
        a[j, 0] = -1j * w_eval * sys.h[k]
        a[j, j] = coil.resistance + x[k] + 1j * (
            w_eval * coil.self_inductance - 1.0 / (w_eval * c_k)
        )
    try:
        currents = np.linalg.solve(a, b)
        # one step of iterative refinement sharpens the small components
        currents = currents + np.linalg.solve(a, b - a @ currents)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"mesh system could not be solved: {exc}") from exc
    residual = np.linalg.norm(a @ currents - b)
    if residual > 1e-10 * max(np.linalg.norm(b), 1e-300):
        raise NumericalError(f"mesh solution residual too large: {residual:.3e}")
    return currents[0], {k: currents[j] for j, k in enumerate(connected, start=1)}


def solve_linear_oracle(
    sys: SystemConfig, sw: SwitchState | None, x, w_eval: float | None = None
) -> SteadyState:
    """Steady state from the full Kirchhoff mesh equations.

    Independent of :func:`solve_closed_form`: the complete complex linear
    system is assembled and solved, including the reactance terms, so this
    path also covers operation away from the resonant frequency.
    """
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    _check_loads(sys, sw, x)
    if w_eval is None:
        w_eval = sys.w
    i_tx, by_index = _mesh_solve(sys, sw.connected, x, w_eval)
    currents = []
    powers = []
    for k in range(sys.n_receivers):
        if sw.s[k]:
            i_k = by_index[k]
            currents.append(i_k)
            powers.append(0.5 * x[k] * abs(i_k) ** 2)
        else:
            currents.append(0j)
            powers.append(0.0)
    p_tx = 0.5 * (sys.v_tx * np.conj(i_tx)).real
    p_sum = float(sum(powers))
    return SteadyState(
        i_tx=complex(i_tx),
        i=tuple(complex(c) for c in currents),
        p_tx=float(p_tx),
        p=tuple(float(p) for p in powers),
        p_sum=p_sum,
        rho=p_sum / p_tx,
    )


def optimal_frequency(sys: SystemConfig, sw: SwitchState | None, x) -> float:
    """Operating frequency that maximizes every delivered power at once.

    Each receiver-current magnitude is unimodal in the (tracked-resonance)
    operating frequency, and all receivers peak at the same point: the
    frequency where the total reflected resistance equals the transmitter
    resistance.
    """
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    _check_loads(sys, sw, x)
    coupling = 0.0
    for k in sw.connected:
        coupling += sys.h[k] ** 2 / (sys.receivers[k].resistance + x[k])
    if coupling == 0.0:
        raise NoFiniteMaximizerError("all connected receivers have zero coupling")
    return math.sqrt(sys.transmitter.resistance / coupling)


@dataclass(frozen=True)
class PowerDerivatives:
    """Sensitivities of the power quantities to one load resistance.

    ``d_p[m]`` is the derivative of load m's power (including m == n);
    entries for disconnected receivers are zero.
    """

    d_ptx: float
    d_p: tuple[float, ...]
    d_rho: float


def _coupling_sums(sys: SystemConfig, sw: SwitchState, x, n: int):
    """Reflected resistance of the other receivers, total and delivered parts."""
    w2 = sys.w**2
    reflected = 0.0
    delivered = 0.0
    for k in sw.connected:
        if k == n:
            continue
        series = sys.receivers[k].resistance + x[k]
        wh2 = w2 * sys.h[k] ** 2
        reflected += wh2 / series
        delivered += wh2 * x[k] / series**2
    return reflected, delivered


def analytic_derivatives(
    sys: SystemConfig, sw: SwitchState | None, x, n: int
) -> PowerDerivatives:
    """Closed-form derivatives of p_tx, every p_m, and rho w.r.t. x[n]."""
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    _check_loads(sys, sw, x)
    if not sw.s[n]:
        raise ValidationError(f"receiver {n + 1} is not connected")

    w2 = sys.w**2
    half_v2 = 0.5 * abs(sys.v_tx) ** 2
    r_tx = sys.transmitter.resistance
    r_n = sys.receivers[n].resistance
    wh2_n = w2 * sys.h[n] ** 2
    series_n = r_n + x[n]

    denom = r_tx
    for k in sw.connected:
        denom += w2 * sys.h[k] ** 2 / (sys.receivers[k].resistance + x[k])

    d_ptx = half_v2 * wh2_n / (series_n**2 * denom**2)

    reflected, delivered = _coupling_sums(sys, sw, x, n)
    d_p = [0.0] * sys.n_receivers
    for m in sw.connected:
        if m == n:
            continue
        r_m = sys.receivers[m].resistance
        wh2_m = w2 * sys.h[m] ** 2
        series_m = r_m + x[m]
        d_p[m] = (
            half_v2 * 2.0 * wh2_m * wh2_n * x[m]
            / (series_m**2 * series_n**2 * denom**3)
        )
    d_p[n] = (
        half_v2 * wh2_n / (series_n**3 * denom**3)
        * (wh2_n + (r_tx + reflected) * (r_n - x[n]))
    )

    # The efficiency is dimensionless: its derivative carries no source
    # voltage factor, in contrast to the power derivatives above.
    bracket = (
        2.0 * r_n * delivered * x[n]
        + r_n * wh2_n
        + x[n] ** 2 * (delivered - reflected - r_tx)
        + r_n**2 * (delivered + reflected + r_tx)
    )
    d_rho = w2 * sys.h[n] ** 2 / (series_n**4 * denom**2) * bracket

    return PowerDerivatives(d_ptx=d_ptx, d_p=tuple(d_p), d_rho=d_rho)


@dataclass(frozen=True)
class Thresholds:
    """Load values of receiver n where each power quantity turns over.

    ``x_own_peak`` maximizes the power delivered to load n itself.
    ``x_sum_peak`` maximizes the sum power, unless the sum power is
    monotone increasing in x[n] (then None, ``sum_monotone`` True).
    ``x_eff_peak`` likewise for the transfer efficiency.
    ``reflected_others``/``delivered_others`` are the reflected-resistance
    sums over the other connected receivers that decide the branches.
    """

    x_own_peak: float
    x_sum_peak: float | None
    x_eff_peak: float | None
    reflected_others: float
    delivered_others: float
    sum_monotone: bool
    eff_monotone: bool


def thresholds(sys: SystemConfig, sw: SwitchState | None, x, n: int) -> Thresholds:
    """Turnover points of p_n, p_sum, and rho as x[n] sweeps upward."""
    if sw is None:
        sw = SwitchState.all_closed(sys.n_receivers)
    _check_loads(sys, sw, x)
    if not sw.s[n]:
        raise ValidationError(f"receiver {n + 1} is not connected")

    r_tx = sys.transmitter.resistance
    r_n = sys.receivers[n].resistance
    wh2_n = (sys.w * sys.h[n]) ** 2
    reflected, delivered = _coupling_sums(sys, sw, x, n)

    base = r_tx + reflected
    x_own_peak = (r_n * base + wh2_n) / base

    sum_divisor = base - 2.0 * delivered
    sum_monotone = sum_divisor <= 0.0
    if sum_monotone:
        x_sum_peak = None
    else:
        x_sum_peak = (r_n * base + wh2_n + 2.0 * r_n * delivered) / sum_divisor

    eff_leading = delivered - reflected - r_tx
    eff_monotone = eff_leading >= 0.0
    if eff_monotone:
        x_eff_peak = None
    else:
        gamma = eff_leading * (r_n**2 * (r_tx + delivered + reflected) + r_n * wh2_n)
        root = math.sqrt((r_n * delivered) ** 2 - gamma)
        x_eff_peak = (-r_n * delivered - root) / eff_leading

    return Thresholds(
        x_own_peak=x_own_peak,
        x_sum_peak=x_sum_peak,
        x_eff_peak=x_eff_peak,
        reflected_others=reflected,
        delivered_others=delivered,
        sum_monotone=sum_monotone,
        eff_monotone=eff_monotone,
    )
