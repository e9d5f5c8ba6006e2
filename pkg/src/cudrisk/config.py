"""Key-value fit configuration files.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Unknown keys are rejected so typos fail loudly.
"""

import hashlib
from dataclasses import dataclass

from .errors import SchemaError
from .mcmc import McmcConfig

_INT_KEYS = {"chains", "warmup", "iterations", "seed", "interior_knots",
             "degree", "max_leapfrog", "n_jobs"}
_FLOAT_KEYS = {"target_accept", "smooth_abs_eps", "grid_step",
               "domain_low", "domain_high", "cri_level"}
_STR_KEYS = {"eval_point"}


@dataclass
class FitConfig:
    """Everything the fit command needs besides the cohort itself."""

    chains: int = 4
    warmup: int = 1000
    iterations: int = 1000
    seed: int = 0
    interior_knots: int = 5
    degree: int = 3
    max_leapfrog: int = 48
    n_jobs: int = 1
    target_accept: float = 0.8
    smooth_abs_eps: float = 0.0
    grid_step: float = 1.0
    cri_level: float = 0.95
    domain_low: float | None = None
    domain_high: float | None = None
    eval_point: str = "midpoint"
    digest: str = ""

    def mcmc(self) -> McmcConfig:
        return McmcConfig(
            chains=self.chains, warmup=self.warmup, iterations=self.iterations,
            seed=self.seed, target_accept=self.target_accept,
            max_leapfrog=self.max_leapfrog, smooth_abs_eps=self.smooth_abs_eps,
            n_jobs=self.n_jobs,
        )

    @property
    def domain(self):
        if self.domain_low is None or self.domain_high is None:
            return None
        return (self.domain_low, self.domain_high)


def parse_fit_config(text: str, source: str = "<config>") -> FitConfig:
    cfg = FitConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            elif key in _STR_KEYS:
                setattr(cfg, key, value)
            else:
                raise SchemaError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise SchemaError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    cfg.digest = hashlib.sha256(text.encode()).hexdigest()
    return cfg


def read_fit_config(path) -> FitConfig:
    with open(path) as fh:
        return parse_fit_config(fh.read(), source=str(path))
