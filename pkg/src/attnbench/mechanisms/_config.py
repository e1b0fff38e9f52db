from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class MechanismConfig:
    """Hyperparameters shared by the efficient mechanisms.

    Defaults follow the efficiency-benchmark settings: window 16, 16
    landmarks/slots, 16 random features, sampling factor 5, 16 SSM states.
    ``pinv_iters=None`` lets the pseudoinverse iterate to convergence.
    ``top_u`` overrides ProbSparse's ``factor * ceil(ln n)`` query budget.
    """

    window: int = 16
    num_landmarks: int = 16
    approx_dim: int = 16
    factor: int = 5
    d_state: int = 16
    pinv_iters: int | None = None
    epsilon: float = 1e-6
    seed: int = 0
    top_u: int | None = None

    def __post_init__(self):
        for name in ("window", "approx_dim", "factor", "d_state"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        # 0 landmarks is meaningful for LongShort (long branch off); the
        # landmark-based mechanisms reject it themselves.
        if self.num_landmarks < 0:
            raise ValueError(f"num_landmarks must be >= 0, got {self.num_landmarks}")
        if self.pinv_iters is not None and self.pinv_iters < 1:
            raise ValueError(f"pinv_iters must be >= 1, got {self.pinv_iters}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.top_u is not None and self.top_u < 0:
            raise ValueError(f"top_u must be >= 0, got {self.top_u}")

    def replace(self, **changes) -> "MechanismConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)
