"""Per-epoch smoothing-factor schedules.

The factor used during epoch e (0-indexed) is the schedule value at e, so
epoch 0 always trains with the initial factor. Five paradigms:

  exponential  init * rate^e, clamped below at floor        (rate < 1)
  linear       max(floor, init - rate*e)                    (rate > 0)
  anti         min(cap, init * rate^e)                      (rate > 1)
  random       uniform draw in [range_lo, range_hi), re-seeded per epoch
  constant     init at every epoch
"""

from __future__ import annotations

from dataclasses import dataclass

from .seeding import rng_for

KINDS = ("exponential", "linear", "anti", "random", "constant")


@dataclass(frozen=True)
class SmoothingSchedule:
    kind: str
    init: float = 0.0
    rate: float = 0.0
    floor: float = 0.0
    cap: float = 0.5
    range_lo: float = 0.0
    range_hi: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.init < 0:
            raise ValueError("init must be non-negative")
        if self.kind == "exponential" and not (0.0 < self.rate < 1.0):
            raise ValueError("exponential schedule needs 0 < rate < 1")
        if self.kind == "anti" and not (self.rate > 1.0):
            raise ValueError("anti schedule needs rate > 1")
        if self.kind == "linear" and not (self.rate > 0.0):
            raise ValueError("linear schedule needs rate > 0")
        if self.kind == "random" and not (self.range_lo <= self.range_hi):
            raise ValueError("random schedule needs range_lo <= range_hi")

    def value_at(self, epoch: int) -> float:
        """Smoothing factor in force during ``epoch``; deterministic, also
        for the random kind (draw keyed by (seed, epoch))."""
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        if self.kind == "exponential":
            return max(self.floor, self.init * self.rate**epoch)
        if self.kind == "linear":
            return max(self.floor, self.init - self.rate * epoch)
        if self.kind == "anti":
            return min(self.cap, self.init * self.rate**epoch)
        if self.kind == "random":
            rng = rng_for(self.seed, "random-schedule", epoch)
            return float(rng.uniform(self.range_lo, self.range_hi))
        return self.init  # constant

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "init": self.init, "rate": self.rate, "floor": self.floor}
        if self.kind == "anti":
            d["cap"] = self.cap
        if self.kind == "random":
            d.update(range=[self.range_lo, self.range_hi], seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothingSchedule":
        lo, hi = d.get("range", [0.0, 0.5])
        return cls(
            kind=d["kind"],
            init=float(d.get("init", 0.0)),
            rate=float(d.get("rate", 0.0)),
            floor=float(d.get("floor", 0.0)),
            cap=float(d.get("cap", 0.5)),
            range_lo=float(lo),
            range_hi=float(hi),
            seed=int(d.get("seed", 0)),
        )


def exponential(init: float, rate: float, floor: float = 0.0) -> SmoothingSchedule:
    return SmoothingSchedule(kind="exponential", init=init, rate=rate, floor=floor)


def linear(init: float, rate: float, floor: float = 0.0) -> SmoothingSchedule:
    return SmoothingSchedule(kind="linear", init=init, rate=rate, floor=floor)


def anti(init: float, rate: float, cap: float = 0.5) -> SmoothingSchedule:
    return SmoothingSchedule(kind="anti", init=init, rate=rate, cap=cap)


def random_schedule(lo: float, hi: float, seed: int) -> SmoothingSchedule:
    return SmoothingSchedule(kind="random", range_lo=lo, range_hi=hi, seed=seed)


def constant(value: float) -> SmoothingSchedule:
    return SmoothingSchedule(kind="constant", init=value)
