from dataclasses import dataclass, field


@dataclass
class CheckResult:
    """Outcome of one oracle over all of its cases."""
    name: str
    cases: int = 0
    worst: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, residual: float, tolerance: float, describe: str) -> None:
        self.cases += 1
        self.worst = max(self.worst, residual)
        if not residual <= tolerance:
            self.failures.append(f"{describe}: residual {residual:.3e} > {tolerance:.1e}")
