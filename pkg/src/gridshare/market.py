"""Distributed market clearing: per-agent dual/energy updates, the
operator's price update, convergence testing, and scenario sampling.

Sellers follow the reference drift (psi - gamma + v_lo - v_hi)/chi; buyers
run the sign-mirror (gamma - psi + v_lo - v_hi)/chi and enter the
operator's sum negated, so the sum measures supply-demand imbalance and
the price iteration has a stable root.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import DegeneratePreferenceError, InvalidConfigError

SELLER = "seller"
BUYER = "buyer"

# Reference sampling ranges for community scenarios.
V_LO_RANGE = (0.0, 5.0)
V_HI_RANGE = (3.0, 20.0)
CHI_RANGE = (0.09, 0.1)
PSI_RANGE = (24.0, 38.0)
E_TOT_RANGE = (0.0, 20.0)


@dataclass(frozen=True)
class TAProfile:
    """One agent's market parameters: forecast, dual initializers, and
    the linear/quadratic preference coefficients."""

    index: int
    role: str
    E_n_tot: float          # signed forecast; > 0 surplus, < 0 deficit
    v_lo_init: float
    v_hi_init: float
    psi: float
    chi: float

    def __post_init__(self):
        if self.role not in (SELLER, BUYER):
            raise InvalidConfigError(f"unknown role {self.role!r}")
        if self.chi <= 0:
            raise DegeneratePreferenceError("chi must be > 0")


@dataclass(frozen=True)
class MarketConfig:
    zeta: float = 0.01
    epsilon: float = 0.001
    varsigma: int = 100
    gamma_init: float = 10.0

    def __post_init__(self):
        if self.zeta <= 0 or self.epsilon <= 0 or self.varsigma < 1:
            raise InvalidConfigError(
                "require zeta > 0, epsilon > 0, varsigma >= 1")


@dataclass
class AgentState:
    """Per-iteration negotiation state of one agent."""

    profile: TAProfile
    v_lo: float = 0.0
    v_hi: float = 0.0
    E: float = 0.0

    @classmethod
    def initial(cls, profile):
        return cls(profile=profile, v_lo=profile.v_lo_init,
                   v_hi=profile.v_hi_init, E=0.0)


def update_duals(v_lo, v_hi, E, E_n_tot, zeta):
    """Projected multiplier steps for the lower and upper trade bounds."""
    v_lo_new = max(0.0, v_lo - zeta * E)
    v_hi_new = max(0.0, v_hi + zeta * (E - E_n_tot))
    return v_lo_new, v_hi_new


def update_energy(E, gamma, zeta, psi, chi, v_lo, v_hi):
    """Projected relaxation of traded energy toward its dual-adjusted
    best response."""
    if chi == 0:
        raise DegeneratePreferenceError("chi must be nonzero")
    drift = (psi - gamma + v_lo - v_hi) / chi
    return max(0.0, E + zeta * (drift - E))


def update_price(gamma, zeta, sum_E):
    """Projected price step against the signed market imbalance."""
    return max(0.0, gamma + zeta * sum_E)


def agent_step(state, gamma, zeta):
    """One full per-agent iteration: dual updates, then the energy update.

    Buyers use the sign-mirror of the seller energy drift (price and
    preference swap roles); magnitudes stay non-negative for both roles.
    """
    p = state.profile
    state.v_lo, state.v_hi = update_duals(
        state.v_lo, state.v_hi, state.E, abs(p.E_n_tot), zeta)
    if p.role == SELLER:
        state.E = update_energy(state.E, gamma, zeta, p.psi, p.chi,
                                state.v_lo, state.v_hi)
    else:
        state.E = update_energy(state.E, p.psi, zeta, gamma, p.chi,
                                state.v_lo, state.v_hi)
    return state.E


def signed_trade(state):
    """The agent's contribution to the operator's sum: sellers positive,
    buyers negative."""
    return state.E if state.profile.role == SELLER else -state.E


CONTINUE = "continue"
CONVERGED = "converged"
ITERATION_CAP = "iteration_cap"


def check_convergence(gamma_new, gamma_old, k, config):
    """Stop on a small price move, or on exceeding the iteration cap."""
    if abs(gamma_new - gamma_old) < config.epsilon:
        return CONVERGED
    if k > config.varsigma:
        return ITERATION_CAP
    return CONTINUE


def sample_profiles(n_tas, rng):
    """Draw a balanced community (half sellers, half buyers) uniformly
    from the standard parameter ranges."""
    if n_tas < 2 or n_tas % 2 != 0:
        raise InvalidConfigError("n_tas must be even and >= 2")
    profiles = []
    for i in range(n_tas):
        role = SELLER if i < n_tas // 2 else BUYER
        magnitude = rng.uniform(*E_TOT_RANGE)
        profiles.append(TAProfile(
            index=i,
            role=role,
            E_n_tot=magnitude if role == SELLER else -magnitude,
            v_lo_init=rng.uniform(*V_LO_RANGE),
            v_hi_init=rng.uniform(*V_HI_RANGE),
            psi=rng.uniform(*PSI_RANGE),
            chi=rng.uniform(*CHI_RANGE),
        ))
    return profiles


@dataclass
class ClearingResult:
    gamma: float
    iterations: int
    status: str
    energies: list = field(default_factory=list)


def central_clearing(profiles, config, quantize=None, worst_case=False):
    """Run the clearing loop centrally (no sharing, no transport).

    `quantize` optionally maps each signed trade through the same
    fixed-point quantization the shared pipeline applies, which makes
    the two price trajectories bit-identical.
    """
    states = [AgentState.initial(p) for p in profiles]
    gamma = config.gamma_init
    k = 1
    while True:
        total = 0.0
        quantized_sum = 0
        for st in states:
            agent_step(st, gamma, config.zeta)
            if quantize is None:
                total += signed_trade(st)
            else:
                quantized_sum += quantize.encode(signed_trade(st),
                                                check_range=False)
        if quantize is not None:
            total = quantize.decode(quantized_sum)
        gamma_new = update_price(gamma, config.zeta, total)
        # k+1 is the round that would run next; the cap allows k = 1..varsigma.
        status = check_convergence(gamma_new, gamma, k + 1, config)
        if worst_case and k <= config.varsigma:
            status = CONTINUE if k < config.varsigma else ITERATION_CAP
        gamma = gamma_new
        if status != CONTINUE:
            return ClearingResult(gamma=gamma, iterations=k, status=status,
                                  energies=[signed_trade(s) for s in states])
        k += 1


def random_source(seed, label=""):
    """Deterministic child generator for a (seed, label) pair."""
    return random.Random(f"{seed}/{label}")
