"""
JSON encodings.

Complex matrices are nested row-major lists of ``[re, im]`` pairs. File
layouts::

    classical model    {"theta": [...], "delta_size": n, "probs": [[...], ...]}
    decision problem   {"decisions": m, "payoff": [[...], ...]}
    quantum model      {"theta": [...], "dim": d, "states": [matrix, ...]}
    Choi matrix        {"dim_in": n, "dim_out": m, "matrix": matrix}
    structure          {"dim_a": n, "dim_b": m, "state": matrix}
    payoff operators   {"decisions": k, "operators": [matrix, ...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channels import ChoiMatrix
from .classical import ClassicalModel, DecisionProblem
from .exceptions import ShapeError, ValidationError
from .quantum import QuantumModel
from .structures import InfoStructure, PayoffOperators


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix encoding: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ShapeError(f"matrix encoding must be rows x cols x [re, im], got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _require(data, *keys):
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object")
    missing = [k for k in keys if k not in data]
    if missing:
        raise ValidationError(f"missing keys: {missing}")


def classical_model_to_json(m: ClassicalModel) -> dict:
    return {"theta": list(m.theta_labels), "delta_size": m.delta_size, "probs": m.probs.tolist()}


def classical_model_from_json(data) -> ClassicalModel:
    _require(data, "theta", "delta_size", "probs")
    model = ClassicalModel(data["probs"], data["theta"])
    if model.delta_size != int(data["delta_size"]):
        raise ShapeError(f"delta_size {data['delta_size']} does not match probs")
    return model


def decision_problem_to_json(p: DecisionProblem) -> dict:
    return {"decisions": p.decision_size, "payoff": p.payoff.tolist()}


def decision_problem_from_json(data) -> DecisionProblem:
    _require(data, "decisions", "payoff")
    p = DecisionProblem(data["payoff"])
    if p.decision_size != int(data["decisions"]):
        raise ShapeError(f"decisions {data['decisions']} does not match payoff")
    return p


def quantum_model_to_json(m: QuantumModel) -> dict:
    return {"theta": list(m.theta_labels), "dim": m.dim, "states": [encode_matrix(s) for s in m.states]}


def quantum_model_from_json(data) -> QuantumModel:
    _require(data, "theta", "dim", "states")
    model = QuantumModel([decode_matrix(s) for s in data["states"]], data["theta"])
    if model.dim != int(data["dim"]):
        raise ShapeError(f"dim {data['dim']} does not match the states")
    return model


def choi_to_json(c: ChoiMatrix) -> dict:
    return {"dim_in": c.dim_in, "dim_out": c.dim_out, "matrix": encode_matrix(c.j)}


def choi_from_json(data) -> ChoiMatrix:
    _require(data, "dim_in", "dim_out", "matrix")
    return ChoiMatrix(decode_matrix(data["matrix"]), data["dim_in"], data["dim_out"])


def structure_to_json(s: InfoStructure) -> dict:
    return {"dim_a": s.dim_a, "dim_b": s.dim_b, "state": encode_matrix(s.state)}


def structure_from_json(data) -> InfoStructure:
    _require(data, "dim_a", "dim_b", "state")
    return InfoStructure(decode_matrix(data["state"]), data["dim_a"], data["dim_b"])


def payoff_operators_to_json(o: PayoffOperators) -> dict:
    return {"decisions": o.decision_size, "operators": [encode_matrix(x) for x in o.operators]}


def payoff_operators_from_json(data) -> PayoffOperators:
    _require(data, "decisions", "operators")
    o = PayoffOperators([decode_matrix(x) for x in data["operators"]])
    if o.decision_size != int(data["decisions"]):
        raise ShapeError(f"decisions {data['decisions']} does not match operators")
    return o


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
