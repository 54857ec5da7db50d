"""Scenario configuration, orchestration, metrics, and the experiment
suite (traffic tables, baseline comparison, detection accuracy, sweeps)."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field, fields, replace

from . import market, numtheory, protocol, sharing
from .errors import InvalidConfigError, ProtocolAbortError
from .transport import PHASES, TO_ID, Transcript, ta_id

MAX_TRADE_KWH = market.E_TOT_RANGE[1]


@dataclass(frozen=True)
class ScenarioConfig:
    n_tas: int = 100
    bits_p: int = 20
    bits_b: int = 1000
    scale: int = sharing.DEFAULT_SCALE
    zeta: float = 0.01
    epsilon: float = 0.001
    varsigma: int = 100
    gamma_init: float = 10.0
    beta: float | None = None          # None -> sum(sigma)/2 after negotiation
    sigma_frac: float = 0.05
    sigma_floor: float = 0.1
    mode: str = "secure"               # secure | plain
    keygen_mode: str = "fast"          # faithful | fast
    mr_rounds: int = numtheory.DEFAULT_MR_ROUNDS
    seed_profiles: int = 1
    seed_crypto: int = 2
    seed_adversary: int = 3
    worst_case: bool = False           # run negotiation for all varsigma rounds
    force_reveal: bool = False         # exercise the online reveal branch
    balance_constrained: bool = False
    record_messages: bool = False
    adversary: object = None           # AdversaryScenario or list of them

    def market_config(self):
        return market.MarketConfig(zeta=self.zeta, epsilon=self.epsilon,
                                   varsigma=self.varsigma,
                                   gamma_init=self.gamma_init)

    def sigma_policy(self):
        frac, floor = self.sigma_frac, self.sigma_floor
        return lambda forecast: max(floor, frac * abs(forecast))


def validate_config(config):
    c = config
    if c.n_tas < 2 or c.n_tas % 2 != 0:
        raise InvalidConfigError("n_tas must be even and >= 2")
    if c.bits_p < 8 or c.bits_b < 8:
        raise InvalidConfigError("bits_p and bits_b must each be >= 8")
    if c.scale < 1:
        raise InvalidConfigError("scale must be >= 1")
    if c.mode not in ("secure", "plain"):
        raise InvalidConfigError(f"unknown mode {c.mode!r}")
    if c.keygen_mode not in ("faithful", "fast"):
        raise InvalidConfigError(f"unknown keygen mode {c.keygen_mode!r}")
    if c.beta is not None and c.beta < 0:
        raise InvalidConfigError("beta must be >= 0")
    c.market_config()   # raises on bad zeta/epsilon/varsigma
    # Worst-case group order for the requested size; individual encoded
    # trades must fit its centered range unless the scenario promises a
    # balance-constrained aggregate.
    min_half_order = 1 << (c.bits_p - 2)
    if c.scale * MAX_TRADE_KWH >= min_half_order and not c.balance_constrained:
        raise InvalidConfigError(
            f"scale {c.scale} cannot represent {MAX_TRADE_KWH} kWh in a "
            f"{c.bits_p}-bit field; set balance_constrained to override")
    return config


@dataclass
class RunReport:
    config: ScenarioConfig
    clearing_price: float = 0.0
    iterations: int = 0
    status: str = ""
    check_result: str = ""
    detection: protocol.DetectionReport | None = None
    timings: dict = field(default_factory=dict)        # phase -> seconds
    traffic_kb: dict = field(default_factory=dict)     # phase -> {TA, TO}
    storage_kb: dict = field(default_factory=dict)
    transcript: Transcript | None = None
    ck: object = None

    def total_traffic_kb(self, entity):
        return sum(self.traffic_kb[ph][entity] for ph in PHASES)

    def total_storage_kb(self, entity):
        return sum(self.storage_kb[ph][entity] for ph in PHASES)


def measure_sizes(transcript, n_tas):
    """Per-phase traffic and storage in KB, per entity class.

    The TA column is per single agent; the protocol is symmetric, so
    every agent's counters agree and TA0 is representative.
    """
    traffic = {}
    storage = {}
    ta0 = ta_id(0)
    for phase in PHASES:
        traffic[phase] = {"TA": transcript.traffic_kb(ta0, phase),
                          "TO": transcript.traffic_kb(TO_ID, phase)}
        storage[phase] = {"TA": transcript.storage_kb(ta0, phase),
                          "TO": transcript.storage_kb(TO_ID, phase)}
    return traffic, storage


def build_agents(config, profiles=None, run_label=""):
    profiles = profiles or market.sample_profiles(
        config.n_tas, market.random_source(config.seed_profiles, "profiles"))
    tas = [protocol.TAgent(p, market.random_source(
        config.seed_crypto, f"{run_label}ta{p.index}")) for p in profiles]
    return tas


def resolve_beta(config, tas, slot_codec):
    if config.beta is not None:
        return config.beta
    policy = config.sigma_policy()
    return sum(policy(slot_codec.decode(ta.E_n)) for ta in tas) / 2


def run_scenario(config, ck=None):
    """Execute one full slot under the configured mode and return a
    report whose traffic/storage numbers come solely from the transcript."""
    validate_config(config)
    transcript = Transcript(record_messages=config.record_messages)
    report = RunReport(config=config, transcript=transcript)
    tas = build_agents(config)
    to = protocol.Operator()
    negotiation_codec = sharing.FixedPointCodec(sharing.NEGOTIATION_MODULUS,
                                                config.scale)
    secure = config.mode == "secure"

    if secure:
        t0 = time.perf_counter()
        if ck is None:
            ck = protocol.run_keygen(
                config.bits_p, config.bits_b,
                market.random_source(config.seed_crypto, "keygen"),
                transcript, mode=config.keygen_mode, rounds=config.mr_rounds)
        else:
            protocol.log_key_broadcast(ck, transcript)
        report.timings["keygen"] = time.perf_counter() - t0
        to.ck = ck
        report.ck = ck
        slot_codec = sharing.FixedPointCodec(ck.p, config.scale)
    else:
        report.timings["keygen"] = 0.0
        slot_codec = negotiation_codec

    t0 = time.perf_counter()
    gamma, k, status = protocol.run_negotiation(
        tas, to, config.market_config(), negotiation_codec, transcript,
        secure=secure, worst_case=config.worst_case)
    protocol.store_forecasts(tas, slot_codec, transcript)
    report.timings["negotiation"] = time.perf_counter() - t0
    report.clearing_price, report.iterations, report.status = gamma, k, status

    protocol.honest_actuals(tas, slot_codec)
    adversary_rng = market.random_source(config.seed_adversary, "adversary")

    if secure:
        t0 = time.perf_counter()
        commitments, e_tot, r_tot = protocol.run_commitment(
            tas, to, slot_codec, transcript)
        report.timings["commitment"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        report.check_result = protocol.run_commitment_check(
            to, commitments, e_tot, r_tot, config.n_tas, transcript)
        report.timings["commitment_check"] = time.perf_counter() - t0
        if report.check_result == "reject":
            raise ProtocolAbortError("commitment check rejected; slot aborted")

        protocol.apply_adversary(config.adversary, tas, slot_codec,
                                 adversary_rng)
        beta = resolve_beta(config, tas, slot_codec)
        t0 = time.perf_counter()
        report.detection = protocol.run_online(
            tas, to, slot_codec, transcript, beta,
            sigma_policy=config.sigma_policy(),
            force_reveal=config.force_reveal)
        report.timings["online"] = time.perf_counter() - t0
    else:
        t0 = time.perf_counter()
        protocol.run_commitment_plain(tas, to, transcript)
        report.timings["commitment"] = time.perf_counter() - t0
        report.timings["commitment_check"] = 0.0
        report.check_result = "accept"
        protocol.apply_adversary(config.adversary, tas, slot_codec,
                                 adversary_rng)
        t0 = time.perf_counter()
        report.detection = protocol.run_online_plain(
            tas, to, slot_codec, transcript,
            sigma_policy=config.sigma_policy())
        report.timings["online"] = time.perf_counter() - t0

    report.traffic_kb, report.storage_kb = measure_sizes(transcript,
                                                         config.n_tas)
    return report


@dataclass
class ComparisonReport:
    secure: RunReport
    plain: RunReport
    prices_equal: bool

    def rows(self):
        out = []
        for label, rep in (("secure", self.secure), ("plain", self.plain)):
            out.append({
                "mode": label,
                "ta_traffic_kb": rep.total_traffic_kb("TA"),
                "to_traffic_kb": rep.total_traffic_kb("TO"),
                "to_storage_kb": rep.total_storage_kb("TO"),
                "clearing_price": rep.clearing_price,
            })
        return out


def compare_baseline(config):
    """Run secure and plain with identical seeds; price equality is
    asserted into the report, not silently dropped."""
    secure = run_scenario(replace(config, mode="secure"))
    plain = run_scenario(replace(config, mode="plain"))
    return ComparisonReport(
        secure=secure, plain=plain,
        prices_equal=secure.clearing_price == plain.clearing_price)


@dataclass
class DetectionSummary:
    runs: int = 0
    targets_per_run: int = 0
    true_positives: int = 0
    false_negatives: int = 0
    false_positives: int = 0
    wrong_list: int = 0
    t_m_total: int = 0
    t_f_total: int = 0
    untriggered_runs: int = 0
    list_overlaps: int = 0

    @property
    def accuracy(self):
        total = self.true_positives + self.false_negatives
        return self.true_positives / total if total else 1.0


# Detection-experiment thresholds: sigma strictly below the smallest
# injected relative deviation, beta below the smallest aggregate one.
DETECT_MIN_TRADE_KWH = 0.5
DETECT_HONEST_BETA_KWH = 0.1


def detection_experiment(base_config, n_targets=15, perturb_range=(0.05, 0.10),
                         n_runs=500):
    """Repeated adversarial slots measuring two-phase detection accuracy.

    The market is negotiated once (the key is one-off and the forecasts
    do not depend on the adversary); each run then executes commitment,
    check, and online with fresh crypto and adversary randomness.
    Targets rotate through the three fields and are drawn among agents
    with a non-negligible trade, since scaling a zero value changes
    nothing observable.
    """
    validate_config(base_config)
    if n_targets > base_config.n_tas:
        raise InvalidConfigError("more targets than agents")
    sigma_frac = perturb_range[0] / 2
    n_e_targets = (n_targets + 2) // 3
    # Half the guaranteed aggregate shift from the actual-meter targets;
    # honest aggregates deviate by exactly zero, so any positive beta
    # separates them.
    if n_e_targets:
        beta = n_e_targets * perturb_range[0] * DETECT_MIN_TRADE_KWH / 2
    else:
        beta = DETECT_HONEST_BETA_KWH
    base = replace(base_config, mode="secure", sigma_frac=sigma_frac,
                   sigma_floor=0.0, beta=beta)

    transcript = Transcript()
    tas0 = build_agents(base)
    to = protocol.Operator()
    negotiation_codec = sharing.FixedPointCodec(sharing.NEGOTIATION_MODULUS,
                                                base.scale)
    ck = protocol.run_keygen(base.bits_p, base.bits_b,
                             market.random_source(base.seed_crypto, "keygen"),
                             transcript, mode=base.keygen_mode,
                             rounds=base.mr_rounds)
    slot_codec = sharing.FixedPointCodec(ck.p, base.scale)
    protocol.run_negotiation(tas0, to, base.market_config(),
                             negotiation_codec, transcript, secure=True)
    protocol.store_forecasts(tas0, slot_codec, transcript)
    forecasts = {ta.profile.index: ta.E_n for ta in tas0}
    profiles = [ta.profile for ta in tas0]

    eligible = [i for i, e in forecasts.items()
                if abs(slot_codec.decode(e)) >= DETECT_MIN_TRADE_KWH]
    # Actual-meter perturbations must all push the aggregate the same
    # way, or opposite-signed trades cancel below the trigger threshold.
    eligible_pos = [i for i in eligible if slot_codec.decode(forecasts[i]) > 0]
    if len(eligible) < n_targets or len(eligible_pos) < n_e_targets:
        raise InvalidConfigError(
            f"only {len(eligible)} agents trade >= {DETECT_MIN_TRADE_KWH} kWh; "
            f"cannot target {n_targets}")

    summary = DetectionSummary(runs=n_runs, targets_per_run=n_targets)
    expected_list = {protocol.E_FIELD: "t_m", protocol.FORECAST_FIELD: "t_f",
                     protocol.RANDOMNESS_FIELD: "t_f"}
    for run in range(n_runs):
        run_transcript = Transcript()
        tas = build_agents(base, profiles=profiles, run_label=f"run{run}/")
        for ta in tas:
            ta.E_n = forecasts[ta.profile.index]
            ta.phase = "negotiated"
        to = protocol.Operator(ck=ck)
        commitments, e_tot, r_tot = protocol.run_commitment(
            tas, to, slot_codec, run_transcript)
        result = protocol.run_commitment_check(
            to, commitments, e_tot, r_tot, base.n_tas, run_transcript)
        if result != "accept":
            raise ProtocolAbortError(f"honest commitment check rejected "
                                     f"in run {run}")
        protocol.honest_actuals(tas, slot_codec)

        adv_rng = market.random_source(base.seed_adversary, f"run{run}")
        e_targets = adv_rng.sample(eligible_pos, n_e_targets)
        others = adv_rng.sample([i for i in eligible if i not in e_targets],
                                n_targets - n_e_targets)
        scenarios = []
        for idx in e_targets:
            scenarios.append(protocol.AdversaryScenario(
                target_indices=(idx,), target_field=protocol.E_FIELD,
                perturb_lo=perturb_range[0], perturb_hi=perturb_range[1]))
        for pos, idx in enumerate(others):
            fld = (protocol.FORECAST_FIELD if pos % 2 == 0
                   else protocol.RANDOMNESS_FIELD)
            scenarios.append(protocol.AdversaryScenario(
                target_indices=(idx,), target_field=fld,
                perturb_lo=perturb_range[0], perturb_hi=perturb_range[1]))
        effective = protocol.apply_adversary(scenarios, tas, slot_codec,
                                             adv_rng)

        # Reveal-side fields (E_n, r_n) never move the aggregate; audit
        # such runs explicitly since no beta could trigger them.
        audit = bool(effective) and protocol.E_FIELD not in effective.values()
        report = protocol.run_online(tas, to, slot_codec, run_transcript,
                                     beta=base.beta,
                                     sigma_policy=base.sigma_policy(),
                                     force_reveal=audit)
        if not report.triggered:
            summary.untriggered_runs += 1
        flagged = report.t_m_list | report.t_f_list
        summary.t_m_total += len(report.t_m_list)
        summary.t_f_total += len(report.t_f_list)
        summary.list_overlaps += len(report.t_m_list & report.t_f_list)
        for idx, fld in effective.items():
            if idx not in flagged:
                summary.false_negatives += 1
            else:
                summary.true_positives += 1
                actual = "t_m" if idx in report.t_m_list else "t_f"
                if actual != expected_list[fld]:
                    summary.wrong_list += 1
        summary.false_positives += len(flagged - set(effective))
    return summary


def sweep(config, axis, values, repeats=1):
    """One scenario per axis value with otherwise fixed seeds; yields
    rows keyed by (axis_value, phase, entity)."""
    if axis not in ("n_tas", "bits_q", "bits_p"):
        raise InvalidConfigError(f"unknown sweep axis {axis!r}")
    if not values:
        raise InvalidConfigError("sweep needs at least one value")
    rows = []
    for value in values:
        if axis == "n_tas":
            cfg = replace(config, n_tas=int(value))
        elif axis == "bits_p":
            cfg = replace(config, bits_p=int(value))
        else:   # bits_q = bits_p + bits_b
            cfg = replace(config, bits_b=int(value) - config.bits_p)
        reports = [run_scenario(cfg) for _ in range(repeats)]
        rep = reports[0]
        for phase in PHASES:
            seconds = statistics.median(r.timings.get(phase, 0.0)
                                        for r in reports)
            for entity in ("TA", "TO"):
                rows.append({
                    "axis_value": value,
                    "phase": phase,
                    "entity": entity,
                    "seconds": seconds,
                    "traffic_kb": rep.traffic_kb[phase][entity],
                    "storage_kb": rep.storage_kb[phase][entity],
                })
    return rows


SWEEP_FIELDNAMES = ["axis_value", "phase", "entity", "seconds",
                    "traffic_kb", "storage_kb"]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDNAMES)
        writer.writeheader()
        writer.writerows(rows)


_BOOL_VALUES = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


def parse_scenario_file(text):
    """Line-oriented key = value scenario description; unknown keys and
    malformed values are rejected."""
    known = {f.name: f for f in fields(ScenarioConfig)
             if f.name != "adversary"}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value'")
        if key not in known:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(known[key], value, lineno)
    return ScenarioConfig(**values)


def _coerce(fld, value, lineno):
    text = str(fld.type)
    if "bool" in text:
        try:
            return _BOOL_VALUES[value.lower()]
        except KeyError:
            raise InvalidConfigError(f"line {lineno}: bad boolean {value!r}")
    try:
        if "int" in text:
            return int(value)
        if "float" in text:
            if value.lower() == "none":
                return None
            return float(value)
    except ValueError:
        raise InvalidConfigError(f"line {lineno}: bad value {value!r}")
    return value
