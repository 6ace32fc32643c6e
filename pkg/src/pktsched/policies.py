"""Online selection policies.

Per-step selectors are plain functions of the buffer. Policy objects wrap
them for the engine and hold whatever running state a policy needs (MM's
occupancy estimate, LMG's divisor and epoch log, MG's e/h statistics).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable

from .assignment import AssignmentProblem, solve
from .model import Buffer, ConfigError, Instance, Packet

GOLDEN = (1 + math.sqrt(5)) / 2
PSI_THRESHOLD = 1.618
DIVISOR_RANGE = (1.0, 2.5)
DIVISOR_STEP = 0.05

KINDS = ("MG", "Greedy", "EDFalpha", "MLP", "MM", "LMG", "SMMG")
_ALIASES = {k.lower(): k for k in KINDS} | {"edf": "EDFalpha", "edf_alpha": "EDFalpha"}


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "MG"
    phi: float = GOLDEN
    alpha: float = GOLDEN          # EDF_alpha weight threshold factor
    threshold: float = 10.0        # MM: occupancy threshold N-bar
    smoothing: float = 0.5         # LMG: alpha in phi_new = a*phi + (1-a)*phi_better
    epoch: int | None = None       # LMG: f; derived from (T, lambda) when None
    p: float = 0.95                # SMMG
    smmg_rule: str = "strict"      # "strict": largest weight below w_h; "rank": runner-up in (-w, d, id) order
    mm_ewma: float | None = None   # MM: exponential weight for n-bar; None = cumulative mean
    name: str | None = None

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not DIVISOR_RANGE[0] <= self.phi <= DIVISOR_RANGE[1]:
            raise ConfigError(f"phi must be in [1, 2.5], got {self.phi}")
        if self.alpha < 1:
            raise ConfigError(f"EDF alpha must be >= 1, got {self.alpha}")
        if not self.threshold >= 0:
            raise ConfigError(f"MM threshold must be >= 0, got {self.threshold}")
        if not 0 <= self.smoothing <= 1:
            raise ConfigError(f"LMG smoothing must be in [0, 1], got {self.smoothing}")
        if self.epoch is not None and self.epoch < 1:
            raise ConfigError(f"LMG epoch length must be >= 1, got {self.epoch}")
        if not 0 < self.p < 1:
            raise ConfigError(f"SMMG p must be in (0, 1), got {self.p}")
        if self.smmg_rule not in ("strict", "rank"):
            raise ConfigError(f"unknown SMMG rule {self.smmg_rule!r}")
        if self.mm_ewma is not None and not 0 < self.mm_ewma <= 1:
            raise ConfigError(f"MM ewma weight must be in (0, 1], got {self.mm_ewma}")

    @property
    def label(self) -> str:
        return self.name or self.kind.lower().replace("edfalpha", "edf")

    @property
    def deterministic(self) -> bool:
        return True


# --- selectors ----------------------------------------------------------------

@dataclass
class EHChoice:
    e: Packet
    h: Packet
    chose_h: bool = False
    indicator_psi: bool = False


def select_eh(buf: Buffer) -> EHChoice:
    e, h = buf.earliest(), buf.heaviest()
    return EHChoice(e, h, indicator_psi=h.w > PSI_THRESHOLD * e.w)


def mg_decide(choice: EHChoice, divisor: float) -> Packet:
    choice.chose_h = not choice.e.w >= choice.h.w / divisor
    return choice.h if choice.chose_h else choice.e


def select_mg(buf: Buffer, divisor: float = GOLDEN) -> Packet:
    return mg_decide(select_eh(buf), divisor)


def select_greedy(buf: Buffer) -> Packet:
    return buf.heaviest()


def select_edf_alpha(buf: Buffer, alpha: float) -> Packet:
    cut = buf.heaviest().w / alpha
    return min((p for p in buf if p.w >= cut), key=lambda p: (p.d, -p.w, p.id))


def select_mlp(buf: Buffer, t: int) -> Packet:
    """Send whatever the optimal schedule of the current buffer puts first."""
    packets = buf.pending
    last = max(p.d for p in packets.values())
    items = [(p.id, p.w, 0, p.d - t) for p in packets.values()]
    sol = solve(AssignmentProblem(items, (0, last - t)))
    for pid, slot in sol.assigned.items():
        if slot == 0:
            return packets[pid]
    raise AssertionError("assignment left slot 0 empty on a nonempty buffer")


def second_max(buf: Buffer, h: Packet, rule: str = "strict") -> Packet | None:
    if rule == "rank":
        rest = [p for p in buf if p.id != h.id]
        return min(rest, key=lambda p: (-p.w, p.d, p.id)) if rest else None
    below = [p for p in buf if p.w < h.w]
    if not below:
        return None
    top = max(p.w for p in below)
    return min((p for p in below if p.w == top), key=lambda p: (p.d, p.id))


def select_smmg(buf: Buffer, p: float, divisor: float = GOLDEN, rule: str = "strict") -> Packet:
    choice = select_eh(buf)
    pick = mg_decide(choice, divisor)
    if not choice.chose_h:
        return pick
    e, h = choice.e, choice.h
    s = second_max(buf, h, rule)
    if s is not None and s.d < h.d and s.w >= max(e.w, p * h.w):
        return s
    return h


# --- LMG divisor search ----------------------------------------------------------

def choose_better_divisor(phi_star: float, throughput: Callable[[float], float],
                          step: float = DIVISOR_STEP, bounds=DIVISOR_RANGE) -> float:
    """Hill-climb left then right from ``phi_star`` while throughput strictly rises.

    Returns the endpoint with the higher throughput; a tie returns ``phi_star``.
    """
    base = throughput(phi_star)

    def climb(direction):
        best_phi, best_val = phi_star, base
        k = 1
        while True:
            cand = phi_star + direction * k * step
            if cand < bounds[0] - 1e-12 or cand > bounds[1] + 1e-12:
                return best_phi, best_val
            val = throughput(cand)
            if not val > best_val:
                return best_phi, best_val
            best_phi, best_val = cand, val
            k += 1

    left, right = climb(-1), climb(+1)
    if left[1] > right[1]:
        return left[0]
    if right[1] > left[1]:
        return right[0]
    return phi_star


def lmg_epoch_length(T: int, lam: float) -> int:
    return math.ceil(max(0.1 * T, 30 / min(1.0, lam)))


def replay_mg(snapshot: list[Packet], arrivals: dict[int, list[Packet]],
              start: int, stop: int, divisor: float) -> float:
    """Weighted throughput of MG over steps ``start..stop`` from a buffer snapshot."""
    buf = Buffer()
    for p in snapshot:
        buf.add(p)
    total = 0.0
    for t in range(start, stop + 1):
        if t > start:
            for p in arrivals.get(t, ()):
                buf.add(p)
        buf.expire(t)
        if buf.pending:
            p = select_mg(buf, divisor)
            buf.remove(p.id)
            total += p.w
    return total


# --- policy objects ----------------------------------------------------------------

class MGPolicy:
    def __init__(self, divisor: float = GOLDEN):
        self.divisor = divisor
        self.eh_log: list[tuple[int, bool, bool]] = []   # (t, w_h > 1.618 w_e, sent h != e)

    def select(self, buf, t):
        choice = select_eh(buf)
        pick = mg_decide(choice, self.divisor)
        self.eh_log.append((t, choice.indicator_psi, choice.chose_h and choice.h.id != choice.e.id))
        return pick

    def finish(self):
        return {"eh_log": self.eh_log}


class GreedyPolicy:
    def select(self, buf, t):
        return select_greedy(buf)


class EDFAlphaPolicy:
    def __init__(self, alpha):
        self.alpha = alpha

    def select(self, buf, t):
        return select_edf_alpha(buf, self.alpha)


class MLPPolicy:
    def select(self, buf, t):
        return select_mlp(buf, t)


class MMPolicy:
    def __init__(self, threshold, ewma=None):
        self.threshold = threshold
        self.ewma = ewma
        self.nbar = 0.0
        self.samples = 0
        self.mg_steps = 0

    def observe(self, buf, t):
        n = len(buf)
        self.samples += 1
        if self.ewma is None or self.samples == 1:
            self.nbar += (n - self.nbar) / self.samples
        else:
            self.nbar += self.ewma * (n - self.nbar)

    def select(self, buf, t):
        if self.nbar > self.threshold:
            self.mg_steps += 1
            return select_mg(buf, GOLDEN)
        return select_mlp(buf, t)

    def finish(self):
        return {"mm_mg_steps": self.mg_steps}


class SMMGPolicy:
    def __init__(self, p, divisor=GOLDEN, rule="strict"):
        self.p, self.divisor, self.rule = p, divisor, rule

    def select(self, buf, t):
        return select_smmg(buf, self.p, self.divisor, self.rule)


@dataclass
class LmgState:
    phi: float
    epoch_start: int = 1
    snapshot: list[Packet] = field(default_factory=list)
    epochs: int = 0
    history: list[float] = field(default_factory=list)


class LMGPolicy:
    """MG whose divisor is re-fitted on the previous epoch every ``f`` steps."""

    def __init__(self, instance: Instance, f: int, smoothing: float, phi: float = GOLDEN):
        self.arrivals = instance.arrivals()
        self.f = f
        self.smoothing = smoothing
        self.state = LmgState(phi=phi, history=[phi])

    def observe(self, buf, t):
        st = self.state
        if t == st.epoch_start + self.f:
            self._learn(t - 1)
            st.epoch_start = t
        if t == st.epoch_start:
            st.snapshot = list(buf.snapshot())

    def _learn(self, stop):
        st = self.state
        if self.smoothing == 1.0:
            st.epochs += 1
            return
        cache: dict[float, float] = {}

        def throughput(phi):
            key = round(phi, 9)
            if key not in cache:
                cache[key] = replay_mg(st.snapshot, self.arrivals, st.epoch_start, stop, phi)
            return cache[key]

        better = choose_better_divisor(st.phi, throughput)
        st.phi = self.smoothing * st.phi + (1 - self.smoothing) * better
        st.epochs += 1
        st.history.append(st.phi)

    def select(self, buf, t):
        return select_mg(buf, self.state.phi)

    def finish(self):
        return {"lmg_divisors": list(self.state.history)}


def resolve_epoch(spec: PolicySpec, instance: Instance | None) -> int:
    if spec.epoch is not None:
        return spec.epoch
    meta = getattr(instance, "meta", None)
    if meta is None or not hasattr(meta, "T") or not hasattr(meta, "lam"):
        raise ConfigError("LMG needs an explicit epoch length for instances without generator metadata")
    return lmg_epoch_length(meta.T, meta.lam)


def make_policy(spec: PolicySpec, instance: Instance | None = None):
    """Fresh policy object for one run."""
    kind = spec.kind
    if kind == "MG":
        return MGPolicy(spec.phi)
    if kind == "Greedy":
        return GreedyPolicy()
    if kind == "EDFalpha":
        return EDFAlphaPolicy(spec.alpha)
    if kind == "MLP":
        return MLPPolicy()
    if kind == "MM":
        return MMPolicy(spec.threshold, spec.mm_ewma)
    if kind == "SMMG":
        return SMMGPolicy(spec.p, spec.phi, spec.smmg_rule)
    if kind == "LMG":
        if instance is None:
            raise ConfigError("LMG needs the instance for epoch replay")
        return LMGPolicy(instance, resolve_epoch(spec, instance), spec.smoothing, spec.phi)
    raise ConfigError(f"unknown policy kind {kind!r}")


def parse_policy(text: str, **overrides) -> PolicySpec:
    """``"smmg:p=0.85"`` style parsing used by the CLI."""
    kind, _, rest = text.partition(":")
    kw: dict = {}
    for part in filter(None, rest.split(",")):
        key, _, val = part.partition("=")
        key = {"n": "threshold", "nbar": "threshold", "f": "epoch", "a": "smoothing"}.get(key, key)
        if key in ("epoch",):
            kw[key] = int(val)
        elif key in ("smmg_rule", "name"):
            kw[key] = val
        else:
            kw[key] = float(val)
    kw.update(overrides)
    if rest and "name" not in kw:
        kw["name"] = kind.lower() + "_" + re.sub(r"[^0-9a-zA-Z.]+", "", rest.replace(",", "_").replace("=", ""))
    return replace(PolicySpec(kind), **kw)
