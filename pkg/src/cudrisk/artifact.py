"""Self-describing model artifact: one file, readable header + numeric payload.

Layout::

    CUDRISK-ARTIFACT 1
    { header JSON: covariates, basis, life table, diagnostics, metadata }
    ---PAYLOAD---
    { payload JSON: posterior draw arrays }

Floats are serialized with their shortest round-trip representation, so a
write/read cycle reproduces every draw bit for bit.  The header records a
SHA-256 digest of the payload section for integrity and determinism checks.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .mcmc import PosteriorDraws
from .mortality import LifeTableHazard, load_life_table
from .splines import SplineBasis

MAGIC = "CUDRISK-ARTIFACT 1"
MARKER = "---PAYLOAD---"
FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    """Everything needed to serve predictions from a fitted model."""

    covariates: tuple
    basis: SplineBasis
    draws: PosteriorDraws
    life_table: LifeTableHazard
    diagnostics: dict = field(default_factory=dict)
    covariate_ranges: dict = field(default_factory=dict)
    covariate_kinds: dict = field(default_factory=dict)
    preprocessing: str = "covariates used as-is (no standardization)"
    seed: int | None = None
    config_digest: str = ""
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.draws) == 0:
            raise SchemaError("artifact requires at least one posterior draw")
        if len(set(self.covariates)) != len(self.covariates):
            raise SchemaError("covariate names must be unique")
        if self.version != FORMAT_VERSION:
            raise SchemaError(f"unrecognized artifact version {self.version}")


def from_model(model, seed=None, config_digest: str = "") -> ModelArtifact:
    """Package a fitted :class:`AbsoluteRiskModel` into an artifact."""
    return ModelArtifact(
        covariates=model.covariates_,
        basis=model.basis_,
        draws=model.draws_,
        life_table=model.life_table,
        diagnostics=_diagnostics_summary(model.draws_.diagnostics),
        covariate_ranges={k: list(v) for k, v in model.ranges_.items()},
        covariate_kinds=dict(getattr(model, 'kinds_', {})),
        seed=model.seed if seed is None else seed,
        config_digest=config_digest,
    )


def _diagnostics_summary(diag: dict) -> dict:
    out = dict(diag)
    rhat = diag.get("rhat", {})
    ess = diag.get("ess", {})
    if rhat:
        out["rhat_max"] = max(rhat.values())
    if ess:
        out["ess_min"] = min(ess.values())
    return out


def save_artifact(path, artifact: ModelArtifact) -> None:
    draws = artifact.draws
    payload = {
        "beta0": draws.beta0.tolist(),
        "beta": draws.beta.tolist(),
        "gamma": draws.gamma.tolist(),
        "tau": draws.tau.tolist(),
        "chain": draws.chain.tolist(),
        "iteration": draws.iteration.tolist(),
    }
    payload_text = json.dumps(payload, separators=(",", ":"))
    header = {
        "version": artifact.version,
        "covariates": list(artifact.covariates),
        "preprocessing": artifact.preprocessing,
        "basis": {"knots": artifact.basis.knots.tolist(),
                  "degree": artifact.basis.degree},
        "life_table": {"name": artifact.life_table.name,
                       "q": artifact.life_table.q.tolist()},
        "diagnostics": artifact.diagnostics,
        "covariate_ranges": artifact.covariate_ranges,
        "covariate_kinds": artifact.covariate_kinds,
        "created": {"seed": artifact.seed, "config_digest": artifact.config_digest},
        "n_draws": len(draws),
        "payload_sha256": hashlib.sha256(payload_text.encode()).hexdigest(),
    }
    with open(path, "w") as fh:
        fh.write(MAGIC + "\n")
        fh.write(json.dumps(header, indent=2, sort_keys=True) + "\n")
        fh.write(MARKER + "\n")
        fh.write(payload_text + "\n")


def payload_digest(path) -> str:
    """SHA-256 of the draw section, for determinism comparisons."""
    with open(path) as fh:
        text = fh.read()
    try:
        _, payload_text = text.split("\n" + MARKER + "\n", 1)
    except ValueError as exc:
        raise SchemaError(f"{path}: missing payload marker") from exc
    return hashlib.sha256(payload_text.strip("\n").encode()).hexdigest()


def load_artifact(path) -> ModelArtifact:
    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n", 1)
    if lines[0].strip() != MAGIC:
        raise SchemaError(f"{path}: not a cudrisk artifact (bad magic line)")
    try:
        header_text, payload_text = lines[1].split("\n" + MARKER + "\n", 1)
    except ValueError as exc:
        raise SchemaError(f"{path}: missing payload marker") from exc
    try:
        header = json.loads(header_text)
        payload = json.loads(payload_text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed artifact JSON: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise SchemaError(f"{path}: unrecognized artifact version {header.get('version')}")
    digest = hashlib.sha256(payload_text.strip("\n").encode()).hexdigest()
    if header.get("payload_sha256") not in (None, digest):
        raise SchemaError(f"{path}: payload digest mismatch (file corrupted?)")

    covariates = tuple(header["covariates"])
    draws = PosteriorDraws(
        beta0=np.asarray(payload["beta0"], dtype=float),
        beta=np.asarray(payload["beta"], dtype=float).reshape(len(payload["beta0"]), -1),
        gamma=np.asarray(payload["gamma"], dtype=float),
        tau=np.asarray(payload["tau"], dtype=float),
        chain=np.asarray(payload["chain"], dtype=int),
        iteration=np.asarray(payload["iteration"], dtype=int),
        covariates=covariates,
        diagnostics=header.get("diagnostics", {}),
    )
    basis = SplineBasis(knots=np.asarray(header["basis"]["knots"], dtype=float),
                        degree=int(header["basis"]["degree"]))
    table = load_life_table(
        list(enumerate(header["life_table"]["q"])),
        name=header["life_table"].get("name", "life-table"),
    )
    created = header.get("created", {})
    return ModelArtifact(
        covariates=covariates, basis=basis, draws=draws, life_table=table,
        diagnostics=header.get("diagnostics", {}),
        covariate_ranges=header.get("covariate_ranges", {}),
        covariate_kinds=header.get("covariate_kinds", {}),
        preprocessing=header.get("preprocessing", ""),
        seed=created.get("seed"), config_digest=created.get("config_digest", ""),
    )
