"""Reward-based selection among explored quantized models."""
from __future__ import annotations

from dataclasses import dataclass, field

from .metrics import normalized_memory


class NoFeasibleModelError(ValueError):
    pass


def reward(acc_q, m_q, m_0, mu) -> float:
    """``acc_q - mu * M_q / M_0``; ``mu`` must be non-negative."""
    if mu < 0:
        raise ValueError(f"trade-off coefficient mu must be non-negative, got {mu}")
    return acc_q - mu * normalized_memory(m_q, m_0)


@dataclass
class CandidateReport:
    """One explored configuration and its measured/modelled costs."""

    config: object  # QuantConfig, or anything exposing tags()/scheme/rounding
    acc_q: float
    m_q: int
    m_0: int
    energy_train: float = 0.0
    energy_infer: float = 0.0
    mu: float = 0.0
    dataset: str = ""
    selected: bool = False
    reward: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.acc_q <= 1.0:
            raise ValueError(f"accuracy {self.acc_q} outside [0, 1]")
        self.reward = reward(self.acc_q, self.m_q, self.m_0, self.mu)

    @property
    def mem_norm(self) -> float:
        return normalized_memory(self.m_q, self.m_0)

    def with_mu(self, mu) -> "CandidateReport":
        return CandidateReport(self.config, self.acc_q, self.m_q, self.m_0, self.energy_train,
                               self.energy_infer, mu, self.dataset, self.selected)

    def as_row(self) -> dict:
        tags = self.config.tags()
        return {
            "dataset": self.dataset,
            "scheme": self.config.scheme.value,
            "rounding": self.config.rounding.value,
            "wfmt": tags["weights"],
            "vmemfmt": tags["v_mem"],
            "vthfmt": tags["v_thresh"],
            "acc": repr(float(self.acc_q)),
            "mem_bits": str(int(self.m_q)),
            "mem_norm": repr(float(self.mem_norm)),
            "e_train_J": repr(float(self.energy_train)),
            "e_infer_J": repr(float(self.energy_infer)),
            "mu": repr(float(self.mu)),
            "reward": repr(float(self.reward)),
            "selected": "1" if self.selected else "0",
        }


def select_model(candidates, mu, mem_budget=None, energy_budget=None) -> CandidateReport:
    """Best-reward candidate among those within the budgets.

    Budgets filter first (memory in bits, energy against inference Joules).
    Ties go to smaller memory, then smaller inference energy, then input
    order.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to select from")
    if mu < 0:
        raise ValueError(f"trade-off coefficient mu must be non-negative, got {mu}")
    feasible = [
        (i, c) for i, c in enumerate(candidates)
        if (mem_budget is None or c.m_q <= mem_budget)
        and (energy_budget is None or c.energy_infer <= energy_budget)
    ]
    if not feasible:
        violations = []
        if mem_budget is not None:
            excess = min(c.m_q for c in candidates) - mem_budget
            if excess > 0:
                violations.append((excess / mem_budget, f"memory budget {mem_budget} bits "
                                   f"(smallest candidate needs {min(c.m_q for c in candidates)})"))
        if energy_budget is not None:
            least = min(c.energy_infer for c in candidates)
            if least > energy_budget:
                violations.append(((least - energy_budget) / energy_budget if energy_budget else float("inf"),
                                   f"energy budget {energy_budget} J (smallest candidate needs {least})"))
        if not violations:
            tightest = "memory and energy budgets jointly"
        else:
            tightest = max(violations)[1]
        raise NoFeasibleModelError(f"no feasible model: tightest violated constraint is the {tightest}")
    scored = [(reward(c.acc_q, c.m_q, c.m_0, mu), i, c) for i, c in feasible]
    best = min(scored, key=lambda t: (-t[0], t[2].m_q, t[2].energy_infer, t[1]))
    return best[2].with_mu(mu)
