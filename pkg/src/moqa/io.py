"""JSON readers and writers for problems, graphs and constraint sets.

Matrices are stored as their strict upper triangle in row-major order
(``(0,1), (0,2), ..., (1,2), ...``); readers rebuild the symmetric matrix
with a zero diagonal.
"""

from __future__ import annotations

import json

import numpy as np

from .exceptions import ValidationError
from .generators import LinearConstraint, PartitionGraph
from .qubo import IsingObjective, MultiObjectiveProblem


def upper_triangle(A):
    I, J = np.triu_indices(A.shape[0], k=1)
    return A[I, J].tolist()


def from_upper_triangle(n, values):
    values = np.asarray(values, dtype=np.float64)
    if values.size != n * (n - 1) // 2:
        raise ValidationError(
            f"upper triangle for n={n} needs {n * (n - 1) // 2} entries, got {values.size}"
        )
    A = np.zeros((n, n))
    I, J = np.triu_indices(n, k=1)
    A[I, J] = values
    A[J, I] = values
    return A


def _jsonable(value):
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def problem_to_dict(problem):
    return {
        "n": problem.n,
        "objectives": [
            {"A": upper_triangle(o.A), "a": o.a.tolist(), "alpha": o.alpha}
            for o in problem.objectives
        ],
        "shift_c": problem.shift_c,
        "metadata": {k: _jsonable(v) for k, v in problem.metadata.items()},
    }


def problem_from_dict(data):
    try:
        n = int(data["n"])
        objectives = tuple(
            IsingObjective(from_upper_triangle(n, o["A"]), o["a"], o.get("alpha", 0.0))
            for o in data["objectives"]
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed problem document: {exc}") from exc
    return MultiObjectiveProblem(objectives, data.get("shift_c", 0.0), data.get("metadata", {}))


def save_problem(problem, path):
    with open(path, "w") as fp:
        json.dump(problem_to_dict(problem), fp, indent=1)


def load_problem(path):
    with open(path) as fp:
        return problem_from_dict(json.load(fp))


def graph_to_dict(graph):
    return {"n": graph.n, "W_upper_triangle": upper_triangle(graph.W), "v": graph.v.tolist()}


def graph_from_dict(data):
    try:
        n = int(data["n"])
        return PartitionGraph(from_upper_triangle(n, data["W_upper_triangle"]), data["v"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed graph document: {exc}") from exc


def load_graph(path):
    with open(path) as fp:
        return graph_from_dict(json.load(fp))


def constraints_to_list(constraints):
    return [{"g": c.g.tolist(), "g0": c.g0} for c in constraints]


def constraints_from_list(data):
    if not isinstance(data, list):
        raise ValidationError("constraint file must hold a JSON list")
    try:
        return tuple(LinearConstraint(item["g"], item.get("g0", 0.0)) for item in data)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed constraint entry: {exc}") from exc


def load_constraints(path):
    with open(path) as fp:
        return constraints_from_list(json.load(fp))
