"""The five-phase trading protocol as message-passing state machines.

One slot runs negotiation -> key generation (or key reuse) ->
commitment -> commitment check -> online over an in-memory bus with
bit-exact size accounting. A plain variant skips sharing and
commitments to form the no-security baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import market, numtheory, pedersen, sharing
from .errors import LifecycleError, ProtocolAbortError
from .transport import (
    ACCEPT_NOTIFY,
    AGGREGATE_SUBMIT,
    COMMITMENT_SUBMIT,
    FLAG_NOTIFY,
    KEY_BROADCAST,
    NOTIFY_BITS,
    PRICE_SIGNAL,
    REJECT_NOTIFY,
    REVEAL,
    REVEAL_REQUEST,
    SCALAR_BITS,
    SHARE_TRANSFER,
    TO_ID,
    ta_id,
)

E_FIELD = "e_n"
FORECAST_FIELD = "E_n"
RANDOMNESS_FIELD = "r_n"
ADVERSARY_FIELDS = (E_FIELD, FORECAST_FIELD, RANDOMNESS_FIELD)


@dataclass(frozen=True)
class AdversaryScenario:
    """Perturbs one field of the targeted agents by a relative factor.

    e_n is altered before the online phase shares it; E_n and r_n are
    altered at reveal time (the commitments were made on honest values).
    """

    target_indices: tuple
    target_field: str
    perturb_lo: float = 0.05
    perturb_hi: float = 0.10
    positive_only: bool = True

    def __post_init__(self):
        if self.target_field not in ADVERSARY_FIELDS:
            raise ValueError(f"unknown target field {self.target_field!r}")
        if not 0 <= self.perturb_lo <= self.perturb_hi:
            raise ValueError("need 0 <= perturb_lo <= perturb_hi")


@dataclass
class DetectionReport:
    t_m_list: set = field(default_factory=set)
    t_f_list: set = field(default_factory=set)
    e_total: float = 0.0
    triggered: bool = False


class TAgent:
    """One transactive agent's protocol-side state for a slot."""

    def __init__(self, profile, rng):
        self.profile = profile
        self.rng = rng
        self.state = market.AgentState.initial(profile)
        self.E_n = None            # encoded forecast, fixed after negotiation
        self.r_n = None            # commitment randomness, fresh per slot
        self.e_actual = None       # metered kWh, signed
        self.reveal_E = None
        self.reveal_r = None
        self.refuse_reveal = False
        self.phase = "init"

    @property
    def id(self):
        return ta_id(self.profile.index)


class Operator:
    """The semi-honest operator's protocol-side state for a slot."""

    def __init__(self, ck=None):
        self.ck = ck
        self.stored_commitments = None
        self.E_total = None        # encoded aggregate, mod group order
        self.clearing_price = None


def _share_round(tas, values, modulus, transcript, phase):
    """One full share-distribute-aggregate round.

    Every agent splits its value into N shares, sends N-1 of them to its
    peers, then submits the sum of the N shares it received (own kept
    share included) to the operator. Returns the operator-side total.
    """
    n = len(tas)
    rows = []
    for ta, value in zip(tas, values):
        rows.append(sharing.split(value, n, modulus, ta.rng))
        if transcript.record_messages:
            for other in tas:
                if other is not ta:
                    transcript.send(phase, SHARE_TRANSFER, ta.id, other.id,
                                    SCALAR_BITS)
        else:
            transcript.send(phase, SHARE_TRANSFER, ta.id, "PEERS",
                            SCALAR_BITS * (n - 1))
    aggregates = [sum(col) % modulus for col in zip(*rows)]
    for ta in tas:
        transcript.send(phase, AGGREGATE_SUBMIT, ta.id, TO_ID, SCALAR_BITS)
    return sum(aggregates) % modulus


def run_negotiation(tas, to, config, codec, transcript, secure=True,
                    worst_case=False, failure_injector=None):
    """Iterative price negotiation; stores each agent's final forecast.

    In secure mode each round's trades cross the bus as additive shares;
    in plain mode agents submit their quantized trades directly. Both
    modes apply identical fixed-point quantization, so the price
    trajectories agree bit for bit.
    """
    phase = "negotiation"
    if failure_injector is not None and failure_injector(phase):
        raise ProtocolAbortError("injected transport failure in negotiation")
    gamma = config.gamma_init
    k = 1
    while True:
        transcript.broadcast(phase, PRICE_SIGNAL, TO_ID, SCALAR_BITS)
        trades = []
        for ta in tas:
            market.agent_step(ta.state, gamma, config.zeta)
            trades.append(codec.encode(market.signed_trade(ta.state),
                                       check_range=False))
        if secure:
            total_enc = _share_round(tas, trades, codec.modulus, transcript,
                                     phase)
        else:
            for ta in tas:
                transcript.send(phase, AGGREGATE_SUBMIT, ta.id, TO_ID,
                                SCALAR_BITS)
            total_enc = sum(trades) % codec.modulus
        total = codec.decode(total_enc)
        gamma_new = market.update_price(gamma, config.zeta, total)
        status = market.check_convergence(gamma_new, gamma, k + 1, config)
        if worst_case and k <= config.varsigma:
            status = (market.CONTINUE if k < config.varsigma
                      else market.ITERATION_CAP)
        gamma = gamma_new
        if status != market.CONTINUE:
            break
        k += 1
    transcript.broadcast(phase, ACCEPT_NOTIFY, TO_ID, NOTIFY_BITS)
    to.clearing_price = gamma
    return gamma, k, status


def store_forecasts(tas, slot_codec, transcript):
    """Each agent stores its negotiated trade, re-encoded into the
    commitment field."""
    for ta in tas:
        ta.E_n = slot_codec.encode(market.signed_trade(ta.state))
        transcript.store(ta.id, "negotiation", SCALAR_BITS)
        ta.phase = "negotiated"


def run_keygen(bits_p, bits_b, rng, transcript, mode="fast",
               rounds=numtheory.DEFAULT_MR_ROUNDS):
    """Operator-side commitment key generation and broadcast."""
    ck = numtheory.generate_group_params(bits_p, bits_b, rng, mode=mode,
                                         rounds=rounds)
    log_key_broadcast(ck, transcript)
    return ck


def log_key_broadcast(ck, transcript):
    """Account for broadcasting and storing an existing key."""
    transcript.broadcast("keygen", KEY_BROADCAST, TO_ID, ck.broadcast_bits)
    transcript.store(TO_ID, "keygen", ck.broadcast_bits)


def run_commitment(tas, to, slot_codec, transcript, failure_injector=None):
    """Each agent commits to its forecast and shares (E_n, r_n); the
    aggregated openings and the commitment go to the operator."""
    phase = "commitment"
    if failure_injector is not None and failure_injector(phase):
        raise ProtocolAbortError("injected transport failure in commitment")
    ck = to.ck
    n = len(tas)
    commitments = []
    for ta in tas:
        if ta.E_n is None:
            raise LifecycleError(f"{ta.id} has no stored forecast")
        ta.r_n = ta.rng.randrange(ck.p)
        commitments.append(pedersen.commit(ck, ta.E_n, ta.r_n))
    e_total = _share_round(tas, [ta.E_n for ta in tas], ck.p, transcript,
                           phase)
    r_total = _share_round(tas, [ta.r_n for ta in tas], ck.p, transcript,
                           phase)
    for ta, c in zip(tas, commitments):
        transcript.send(phase, COMMITMENT_SUBMIT, ta.id, TO_ID, c.bits)
        transcript.store(ta.id, phase, SCALAR_BITS)   # r_n kept for reveal
        ta.phase = "committed"
    # Aggregate submissions already counted inside the share rounds; the
    # operator now holds the combined openings and every commitment.
    return commitments, e_total, r_total


def run_commitment_check(to, commitments, e_total, r_total, n_tas,
                         transcript):
    """Homomorphic consistency check; on success the operator stores the
    commitments and the aggregate forecast."""
    phase = "commitment_check"
    ck = to.ck
    combined = pedersen.product(commitments, ck)
    recomputed = pedersen.commit(ck, e_total, r_total)
    if combined.value == recomputed.value:
        to.stored_commitments = list(commitments)
        to.E_total = e_total
        transcript.store(TO_ID, phase, n_tas * ck.bits_q + SCALAR_BITS)
        transcript.broadcast(phase, ACCEPT_NOTIFY, TO_ID, NOTIFY_BITS)
        return "accept"
    transcript.broadcast(phase, REJECT_NOTIFY, TO_ID, NOTIFY_BITS)
    return "reject"


def default_sigma_policy(forecast_kwh):
    """Per-agent deviation threshold: 5% of the forecast magnitude with
    a 0.1 kWh floor."""
    return max(0.1, 0.05 * abs(forecast_kwh))


def run_online(tas, to, slot_codec, transcript, beta, sigma_policy=None,
               force_reveal=False, failure_injector=None):
    """Post-slot verification: share the metered actuals, compare the
    aggregate against the committed total, and on deviation reveal and
    classify every agent."""
    phase = "online"
    if failure_injector is not None and failure_injector(phase):
        raise ProtocolAbortError("injected transport failure in online phase")
    if to.stored_commitments is None:
        raise LifecycleError("online phase requires an accepted commitment check")
    sigma_policy = sigma_policy or default_sigma_policy
    p = slot_codec.modulus
    actuals_enc = [slot_codec.encode(ta.e_actual) for ta in tas]
    e_total = _share_round(tas, actuals_enc, p, transcript, phase)
    for ta in tas:
        transcript.store(ta.id, phase, SCALAR_BITS)   # metered actual
    report = DetectionReport(e_total=slot_codec.decode(e_total))
    deviation = abs(slot_codec.decode((to.E_total - e_total) % p))
    if deviation <= beta and not force_reveal:
        return report
    report.triggered = True
    transcript.broadcast(phase, REVEAL_REQUEST, TO_ID, NOTIFY_BITS)
    for ta, c, e_enc in zip(tas, to.stored_commitments, actuals_enc):
        reveal_E = ta.reveal_E if ta.reveal_E is not None else ta.E_n
        reveal_r = ta.reveal_r if ta.reveal_r is not None else ta.r_n
        transcript.send(phase, REVEAL, ta.id, TO_ID, 3 * SCALAR_BITS)
        if ta.refuse_reveal or not pedersen.verify_open(to.ck, c, reveal_E,
                                                        reveal_r):
            report.t_f_list.add(ta.profile.index)
            transcript.send(phase, FLAG_NOTIFY, TO_ID, ta.id, NOTIFY_BITS)
            continue
        per_ta_dev = abs(slot_codec.decode((reveal_E - e_enc) % p))
        if per_ta_dev > sigma_policy(slot_codec.decode(reveal_E)):
            report.t_m_list.add(ta.profile.index)
            transcript.send(phase, FLAG_NOTIFY, TO_ID, ta.id, NOTIFY_BITS)
    return report


def run_online_plain(tas, to, slot_codec, transcript, sigma_policy=None):
    """Baseline online phase: actuals travel in the clear; deviation is
    checked per agent with no commitment verification."""
    phase = "online"
    sigma_policy = sigma_policy or default_sigma_policy
    report = DetectionReport()
    total = 0
    for ta in tas:
        e_enc = slot_codec.encode(ta.e_actual)
        transcript.send(phase, AGGREGATE_SUBMIT, ta.id, TO_ID, SCALAR_BITS)
        transcript.store(ta.id, phase, SCALAR_BITS)
        total = (total + e_enc) % slot_codec.modulus
        dev = abs(slot_codec.decode((ta.E_n - e_enc) % slot_codec.modulus))
        if dev > sigma_policy(slot_codec.decode(ta.E_n)):
            report.t_m_list.add(ta.profile.index)
    report.e_total = slot_codec.decode(total)
    return report


def run_commitment_plain(tas, to, transcript):
    """Baseline forecast submission: each agent sends its quantized
    forecast directly and the operator stores it."""
    phase = "commitment"
    for ta in tas:
        if ta.E_n is None:
            raise LifecycleError(f"{ta.id} has no stored forecast")
        transcript.send(phase, AGGREGATE_SUBMIT, ta.id, TO_ID, SCALAR_BITS)
    transcript.store(TO_ID, phase, len(tas) * SCALAR_BITS)


def honest_actuals(tas, slot_codec):
    """Meter readings for a deviation-free slot: each actual equals the
    agent's stored forecast."""
    for ta in tas:
        ta.e_actual = slot_codec.decode(ta.E_n)


def apply_adversary(scenarios, tas, slot_codec, rng):
    """Mutate the targeted agents' inputs; returns {index: field} for
    targets whose value actually changed (a 5-10% scaling of a zero
    value is a no-op and cannot be observed by any detector)."""
    if scenarios is None:
        return {}
    if isinstance(scenarios, AdversaryScenario):
        scenarios = [scenarios]
    by_index = {ta.profile.index: ta for ta in tas}
    effective = {}
    for sc in scenarios:
        for idx in sc.target_indices:
            ta = by_index[idx]
            delta = rng.uniform(sc.perturb_lo, sc.perturb_hi)
            if not sc.positive_only and rng.random() < 0.5:
                delta = -delta
            factor = 1.0 + delta
            if sc.target_field == E_FIELD:
                honest = ta.e_actual
                ta.e_actual = honest * factor
                if slot_codec.encode(ta.e_actual) != slot_codec.encode(honest):
                    effective[idx] = E_FIELD
            elif sc.target_field == FORECAST_FIELD:
                perturbed = slot_codec.encode(
                    slot_codec.decode(ta.E_n) * factor)
                ta.reveal_E = perturbed
                if perturbed != ta.E_n:
                    effective[idx] = FORECAST_FIELD
            else:
                perturbed = int(ta.r_n * factor + 0.5) % slot_codec.modulus
                ta.reveal_r = perturbed
                if perturbed != ta.r_n:
                    effective[idx] = RANDOMNESS_FIELD
    return effective
