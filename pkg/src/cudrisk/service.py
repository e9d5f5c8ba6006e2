"""HTTP prediction service backing the counseling UI.

Three JSON endpoints over one immutable model artifact:

* ``GET  /v1/model/meta``  — covariate names/ranges, domain, diagnostics
* ``POST /v1/predict``     — one risk estimate for a profile and interval
* ``POST /v1/whatif``      — base profile plus deltas, estimates side by side

Schema violations return 400 with field-level messages, out-of-range ages
422, and any request before the artifact finishes loading 503.  Responses
are pure functions of the artifact, so the service is stateless.
"""

import math
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .artifact import ModelArtifact, load_artifact
from .errors import DomainError
from .risk import Anchor, RiskQuery, posterior_risk

ANCHORS = tuple(a.value for a in Anchor)


def _estimate_json(est) -> dict:
    band = {age: (lo, hi) for age, lo, hi in est.per_year_band}
    return {
        "mean_risk": est.mean_risk,
        "cri_low": est.cri_low,
        "cri_high": est.cri_high,
        "per_year_curve": [
            {"age": age, "risk": risk,
             "cri_low": band.get(age, (risk, risk))[0],
             "cri_high": band.get(age, (risk, risk))[1]}
            for age, risk in est.per_year_curve
        ],
    }


def _field_errors(body, artifact: ModelArtifact) -> tuple[dict, dict]:
    """Validate a prediction body; returns (errors, parsed)."""
    errors: dict = {}
    parsed: dict = {}
    if not isinstance(body, dict):
        return {"body": "request body must be a JSON object"}, {}
    profile = body.get("profile")
    if not isinstance(profile, dict):
        errors["profile"] = "profile must be an object of covariate values"
        profile = {}
    clean = {}
    for name in artifact.covariates:
        if name not in profile:
            errors[f"profile.{name}"] = "missing covariate"
            continue
        value = profile[name]
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(float(value)):
            errors[f"profile.{name}"] = "must be a finite number"
            continue
        clean[name] = float(value)
    for name in profile:
        if name not in artifact.covariates:
            errors[f"profile.{name}"] = "unknown covariate"
    parsed["profile"] = clean
    for key in ("a", "b"):
        value = body.get(key)
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(float(value)):
            errors[key] = "must be a finite number"
        else:
            parsed[key] = float(value)
    anchor = body.get("anchor", Anchor.AT_FIRST_USE.value)
    if anchor not in ANCHORS:
        errors["anchor"] = f"must be one of {', '.join(ANCHORS)}"
    else:
        parsed["anchor"] = Anchor(anchor)
    return errors, parsed


def _range_problem(parsed, artifact: ModelArtifact):
    a, b = parsed["a"], parsed["b"]
    if b < a:
        return f"horizon age b={b} precedes a={a}"
    lo, hi = artifact.basis.lower, artifact.basis.upper
    if a < lo or b > hi:
        return f"ages must lie within the model domain [{lo}, {hi}]"
    if b > artifact.life_table.max_age + 1:
        return f"age {b} beyond life-table coverage"
    return None


def create_app(artifact: ModelArtifact | None = None, artifact_path=None,
               grid: float = 1.0, eval_point: str = "midpoint",
               thin: int | None = None, ui_dir=None) -> FastAPI:
    """Build the service; the artifact may be preloaded or loaded on startup.

    With ``ui_dir`` set, the built counseling UI is mounted at the root so
    one process serves both the API and its front end.
    """
    state = {"artifact": None}

    def install(art: ModelArtifact):
        if thin:
            art.draws = art.draws.thin(thin)
        state["artifact"] = art

    @asynccontextmanager
    async def lifespan(_app):
        if state["artifact"] is None and artifact_path is not None:
            install(load_artifact(artifact_path))
        yield

    app = FastAPI(title="cudrisk prediction service", lifespan=lifespan)
    if artifact is not None:
        install(artifact)

    def ready():
        art = state["artifact"]
        if art is None:
            return None, JSONResponse(
                status_code=503,
                content={"error": "loading", "detail": "model artifact not loaded yet"},
            )
        return art, None

    @app.get("/v1/model/meta")
    def meta():
        art, busy = ready()
        if busy:
            return busy
        diag = art.diagnostics
        return {
            "version": art.version,
            "covariates": [
                {"name": name,
                 "min": art.covariate_ranges.get(name, [0.0, 1.0])[0],
                 "max": art.covariate_ranges.get(name, [0.0, 1.0])[1],
                 "kind": art.covariate_kinds.get(name, "scale")}
                for name in art.covariates
            ],
            "domain": {"low": art.basis.lower, "high": art.basis.upper},
            "life_table": {"name": art.life_table.name,
                           "max_age": art.life_table.max_age},
            "anchors": list(ANCHORS),
            "preprocessing": art.preprocessing,
            "diagnostics": {
                "n_draws": len(art.draws),
                "rhat_max": diag.get("rhat_max"),
                "ess_min": diag.get("ess_min"),
                "divergences": diag.get("divergences"),
            },
        }

    async def _parse_and_check(request: Request):
        art, busy = ready()
        if busy:
            return None, None, busy
        try:
            body = await request.json()
        except Exception:
            return None, None, JSONResponse(
                status_code=400,
                content={"error": "schema", "fields": {"body": "invalid JSON"}},
            )
        errors, parsed = _field_errors(body, art)
        if errors:
            return None, None, JSONResponse(
                status_code=400, content={"error": "schema", "fields": errors},
            )
        problem = _range_problem(parsed, art)
        if problem:
            return None, None, JSONResponse(
                status_code=422, content={"error": "range", "detail": problem},
            )
        return art, (body, parsed), None

    def _run_query(art, profile, parsed):
        query = RiskQuery(a=parsed["a"], b=parsed["b"], profile=profile,
                          anchor=parsed["anchor"])
        est = posterior_risk(query, art.draws, art.basis, art.life_table,
                             grid=grid, eval_point=eval_point)
        return _estimate_json(est)

    @app.post("/v1/predict")
    async def predict(request: Request):
        art, ctx, failure = await _parse_and_check(request)
        if failure:
            return failure
        _, parsed = ctx
        try:
            return _run_query(art, parsed["profile"], parsed)
        except DomainError as exc:
            return JSONResponse(status_code=422,
                                content={"error": "range", "detail": str(exc)})

    @app.post("/v1/whatif")
    async def whatif(request: Request):
        art, ctx, failure = await _parse_and_check(request)
        if failure:
            return failure
        body, parsed = ctx
        deltas = body.get("deltas", [])
        if not isinstance(deltas, list):
            return JSONResponse(status_code=400, content={
                "error": "schema", "fields": {"deltas": "must be a list of objects"}})
        errors = {}
        scenarios = [("base", dict(parsed["profile"]))]
        for i, delta in enumerate(deltas):
            if not isinstance(delta, dict):
                errors[f"deltas[{i}]"] = "must be an object of covariate overrides"
                continue
            merged = dict(parsed["profile"])
            for name, value in delta.items():
                if name not in art.covariates:
                    errors[f"deltas[{i}].{name}"] = "unknown covariate"
                elif not isinstance(value, (int, float)) or isinstance(value, bool) \
                        or not math.isfinite(float(value)):
                    errors[f"deltas[{i}].{name}"] = "must be a finite number"
                else:
                    merged[name] = float(value)
            scenarios.append((f"delta[{i}]", merged))
        if errors:
            return JSONResponse(status_code=400,
                                content={"error": "schema", "fields": errors})
        try:
            return {"estimates": [
                {"label": label, "profile": profile,
                 "estimate": _run_query(art, profile, parsed)}
                for label, profile in scenarios
            ]}
        except DomainError as exc:
            return JSONResponse(status_code=422,
                                content={"error": "range", "detail": str(exc)})

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
