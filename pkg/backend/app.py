from flask import Flask, jsonify, request
from flask_cors import CORS
import logging

# Import calculus / verification / simulation modules
from services.cluster_calculus import moments_report
from services.core_types import ExtendedPmf, ProcessSpec, WindowLaw
from services.errors import ClusterLabError, ThetaZero
from services.invariance import sweep_invariance
from services.simulators import exact_window_law, path_summary, simulate_path

app = Flask(__name__)
CORS(app)  # Enable CORS for browser clients

logger = logging.getLogger(__name__)

# Longest path the API simulates per request
MAX_SIMULATE_LENGTH = 5_000_000


def _payload():
    """JSON body of the request; an empty object when missing."""
    data = request.get_json(silent=True)
    if data is None:
        raise ClusterLabError("request body must be a JSON object")
    if not isinstance(data, dict):
        raise ClusterLabError(f"request body must be a JSON object, got {type(data).__name__}")
    return data


def _error(tag: str, exc: Exception):
    """400 for domain errors, 500 for anything else."""
    if isinstance(exc, ClusterLabError):
        logger.warning(f"[{tag}] {type(exc).__name__}: {exc}")
        return jsonify({"error": type(exc).__name__, "detail": str(exc)}), 400
    logger.exception(f"[{tag}] request failed")
    return jsonify({"error": f"{tag} failed", "detail": str(exc)}), 500


def _spec_from(data) -> ProcessSpec:
    spec = data.get("spec")
    if not isinstance(spec, dict):
        raise ClusterLabError("missing 'spec' object. expected: {model, params, seed}")
    if "model" not in spec:
        raise ClusterLabError("spec is missing 'model'")
    return ProcessSpec.from_dict(spec)


@app.route("/")
def root():
    """API overview."""
    return jsonify({
        "service": "clusterlab",
        "endpoints": {
            "GET /health": "liveness",
            "POST /api/calculus": "exact cluster report from {pmf}",
            "POST /api/verify": "invariance sweep over {law, max_set_size}",
            "POST /api/window-law": "exact window law for {spec, u, v}",
            "POST /api/simulate": "path summary for {spec, length, seed}",
        },
    })


@app.route("/health")
def health():
    """Health check endpoint."""
    return jsonify({"status": "ok"})


@app.route("/api/calculus", methods=["POST"])
def calculus():
    """
    Exact cluster report for a side-count pmf.

    Body: {"pmf": {"offset": 0, "probs": [...], "infinity_mass": 0.0}}
    A zero extremal index answers with the partial report and a warning.
    """
    try:
        data = _payload()
        if "pmf" not in data:
            raise ClusterLabError("missing 'pmf'. expected: {offset, probs, infinity_mass}")
        side = ExtendedPmf.from_dict(data["pmf"])
        try:
            report = moments_report(side)
            return jsonify({"report": report.to_dict(), "passed": report.passed})
        except ThetaZero as exc:
            return jsonify({"report": exc.report.to_dict(), "passed": exc.report.passed,
                            "warning": str(exc)})
    except Exception as e:
        return _error("Calculus", e)


@app.route("/api/verify", methods=["POST"])
def verify():
    """
    Time change and support-shift sweep over a window law.

    Body: {"law": {u, v, entries, source, sample_count}, "max_set_size": 2,
           "tolerance_sigma": 4.0}
    """
    try:
        data = _payload()
        if "law" not in data:
            raise ClusterLabError("missing 'law'. expected: {u, v, entries, source}")
        law = WindowLaw.from_dict(data["law"])
        max_set_size = int(data.get("max_set_size", 2))
        sigma = float(data.get("tolerance_sigma", 4.0))

        checks = sweep_invariance(law, max_set_size, sigma=sigma)
        failed = sum(not c.passed for c in checks)
        return jsonify({
            "checks": [c.to_dict() for c in checks],
            "total": len(checks),
            "failed": failed,
            "passed": failed == 0,
        })
    except Exception as e:
        return _error("Verify", e)


@app.route("/api/window-law", methods=["POST"])
def window_law():
    """
    Exact conditional window law of a markov_binary or urn spec.

    Body: {"spec": {...}, "u": 2, "v": 2}
    """
    try:
        data = _payload()
        spec = _spec_from(data)
        law = exact_window_law(spec, int(data.get("u", 2)), int(data.get("v", 2)))
        return jsonify({"spec": spec.to_dict(), "law": law.to_dict()})
    except Exception as e:
        return _error("WindowLaw", e)


@app.route("/api/simulate", methods=["POST"])
def simulate():
    """
    Simulate a path and return its summary (marginals, run lengths).

    Body: {"spec": {...}, "length": 100000, "seed": 0}
    """
    try:
        data = _payload()
        spec = _spec_from(data)
        length = int(data.get("length", 100_000))
        if not 1 <= length <= MAX_SIMULATE_LENGTH:
            raise ClusterLabError(f"length must lie in [1, {MAX_SIMULATE_LENGTH}], got {length}")
        seed = int(data.get("seed", 0))

        summary = path_summary(simulate_path(spec, length, seed))
        summary["seed"] = seed
        return jsonify(summary)
    except Exception as e:
        return _error("Simulate", e)


if __name__ == "__main__":
    app.run(debug=True, port=5000)
