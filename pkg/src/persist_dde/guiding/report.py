from __future__ import annotations

from dataclasses import asdict, dataclass, field

HOLDS = "holds"
FAILS = "fails"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Witness:
    """A sampled point where a hypothesis is violated.

    ``kind`` names the quantity in ``value``: ``rhs`` (component ``j`` of f),
    ``rate``, ``rate_gap`` (rate(x, y) - rate(x, x)), ``growth`` (rate + k V),
    ``normalized`` (F / a - R).
    """

    hypothesis: str
    kind: str
    t: float
    x: tuple
    y: tuple
    value: float
    params: dict = field(default_factory=dict)


@dataclass
class HypothesisReport:
    verdicts: dict
    constants: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)

    def verdict(self, name=None):
        if name is None:
            if len(self.verdicts) != 1:
                raise KeyError("report covers several hypotheses; pass a name")
            return next(iter(self.verdicts.values()))
        return self.verdicts[name]

    def holds(self, name=None):
        return self.verdict(name) == HOLDS

    def to_dict(self):
        return {
            "verdicts": dict(self.verdicts),
            "constants": dict(self.constants),
            "witnesses": {k: [asdict(w) for w in ws] for k, ws in self.witnesses.items()},
            "sampling": dict(self.sampling),
        }

    @classmethod
    def merge(cls, *reports):
        out = cls({})
        for r in reports:
            out.verdicts.update(r.verdicts)
            out.constants.update(r.constants)
            out.witnesses.update(r.witnesses)
            out.sampling.update(r.sampling)
        return out
