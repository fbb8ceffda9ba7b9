"""Run configuration: schema-validated parameters with explicit defaults.

A resolved configuration names every parameter (including defaulted ones)
so a run can be reproduced from the emitted JSON alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

__all__ = ["RunConfig"]

_UNIT_SYSTEMS = ("a", "gamma_tot")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one experiment run.

    decoder_k / decoder_l accept an int or "auto" (pick from the code).
    units names the time unit system: "a" (gate-level, hyperfine a = 1) or
    "gamma_tot" (noise benchmarks, total noise rate = 1).
    """

    experiment: str
    n_comp: int = 6
    spin_i: float = 30.0
    eta: float | None = None
    gamma_plus: float | None = None
    gamma_minus: float | None = None
    gamma_z: float | None = None
    decoder_k: int | str = "auto"
    decoder_l: int | str = "auto"
    solver: dict = field(default_factory=dict)
    outdir: str = "."
    seed: int = 7
    units: str = "a"

    def __post_init__(self):
        if not self.experiment:
            raise ValueError("experiment name must be non-empty")
        if self.n_comp < 2 or self.n_comp % 2:
            raise ValueError("n_comp must be a positive even integer")
        if self.spin_i <= 0:
            raise ValueError("spin_i must be positive")
        explicit = [self.gamma_plus, self.gamma_minus, self.gamma_z]
        if self.eta is not None and any(g is not None for g in explicit):
            raise ValueError("give either eta or explicit rates, not both")
        if any(g is not None for g in explicit) \
                and not all(g is not None for g in explicit):
            raise ValueError("explicit rates require gamma_plus, "
                             "gamma_minus and gamma_z together")
        for name in ("decoder_k", "decoder_l"):
            v = getattr(self, name)
            if not (v == "auto" or (isinstance(v, int) and v >= 0)):
                raise ValueError(f"{name} must be 'auto' or a non-negative "
                                 "integer")
        if self.units not in _UNIT_SYSTEMS:
            raise ValueError(f"units must be one of {_UNIT_SYSTEMS}")
        if not isinstance(self.solver, dict):
            raise ValueError("solver options must be a mapping")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Build from a mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def resolved(self) -> dict:
        """All parameters, defaults included, as a plain mapping."""
        return asdict(self)
