"""Linear CTR model: hypothesis, cost, batch gradient descent and the
closed-form normal equation, plus model persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .catalog import TrainingRow
from .errors import (ContractError, CtrServeError, DegenerateFeatureError,
                     DivergenceError, ModelLoadError, SingularMatrixError)
from .features import (DesignMatrix, FeatureSchema, ScalerStats,
                       build_design_matrix, fit_scaler, transform, transform_row)

GRADIENT_DESCENT = "gradient_descent"
NORMAL_EQUATION = "normal_equation"

MODEL_FORMAT_VERSION = 1

_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class TrainingConfig:
    """Defaults mirror the shipped setup: alpha 0.01, 400 iterations,
    intercept on; scaling on for gradient descent, off for normal equation
    unless overridden."""

    method: str = GRADIENT_DESCENT
    alpha: float = 0.01
    iterations: int = 400
    include_intercept: bool = True
    scale_features: Optional[bool] = None

    def __post_init__(self):
        if self.method not in (GRADIENT_DESCENT, NORMAL_EQUATION):
            raise ContractError(f"unknown training method {self.method!r}")
        if self.alpha <= 0:
            raise ContractError(f"alpha must be positive, got {self.alpha}")
        if self.iterations <= 0:
            raise ContractError(f"iterations must be positive, got {self.iterations}")
        if self.scale_features is None:
            object.__setattr__(self, "scale_features", self.method == GRADIENT_DESCENT)


@dataclass(frozen=True)
class RegressionModel:
    theta: np.ndarray
    schema: FeatureSchema
    scaler: Optional[ScalerStats]
    config: TrainingConfig
    cost_trace: tuple[float, ...] = ()
    keyword_map_ref: str = ""

    def __post_init__(self):
        if not np.isfinite(self.theta).all():
            raise ContractError("theta must be finite")
        if (self.scaler is not None) != bool(self.config.scale_features):
            raise ContractError("scaler must be present iff scale_features is set")


def hypothesis(theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ theta


def predict(model: RegressionModel, raw: Sequence[float]) -> float:
    """Predicted CTR for one raw feature vector (placement code, size code,
    bid, keyword value). Output is deliberately not clamped to [0,1]."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (len(model.schema.feature_names),):
        raise ContractError(f"expected {len(model.schema.feature_names)} features, got shape {raw.shape}")
    feats = transform_row(model.scaler, raw) if model.scaler is not None else raw
    if model.schema.include_intercept:
        feats = np.concatenate([[1.0], feats])
    if feats.shape != model.theta.shape:
        raise ContractError(f"theta length {model.theta.shape[0]} does not match feature length {feats.shape[0]}")
    return float(feats @ model.theta)


def cost(theta: np.ndarray, matrix: DesignMatrix) -> float:
    """Half mean squared residual: (1/2m) * sum((h(x) - y)^2)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (matrix.X.shape[1],):
        raise ContractError(f"theta length {theta.shape} does not match {matrix.X.shape[1]} columns")
    residual = matrix.X @ theta - matrix.y
    return float(residual @ residual / (2 * matrix.m))


def gradient(theta: np.ndarray, matrix: DesignMatrix) -> np.ndarray:
    """Batch gradient of the cost: (1/m) * X^T (X theta - y)."""
    return matrix.X.T @ (matrix.X @ theta - matrix.y) / matrix.m


def gradient_descent(matrix: DesignMatrix, config: TrainingConfig,
                     theta_init: Optional[np.ndarray] = None) -> tuple[np.ndarray, tuple[float, ...]]:
    """Exactly `config.iterations` simultaneous batch updates from
    theta_init (zeros by default); trace[t] is the cost after update t."""
    theta = (np.zeros(matrix.X.shape[1]) if theta_init is None
             else np.asarray(theta_init, dtype=float).copy())
    if theta.shape != (matrix.X.shape[1],):
        raise ContractError("theta_init length does not match the design matrix")
    trace = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(config.iterations):
            theta = theta - config.alpha * gradient(theta, matrix)
            c = cost(theta, matrix)
            if not np.isfinite(c):
                raise DivergenceError(f"cost diverged at iteration {t}", iteration=t)
            trace.append(c)
    return theta, tuple(trace)


def normal_equation(matrix: DesignMatrix) -> np.ndarray:
    """Solve (X^T X) theta = X^T y with a stable linear solve; rank
    deficiency is a hard error, never a silent pseudo-inverse."""
    XtX = matrix.X.T @ matrix.X
    Xty = matrix.X.T @ matrix.y
    condition = float(np.linalg.cond(XtX))
    if not np.isfinite(condition) or condition > _MAX_CONDITION:
        raise SingularMatrixError(
            f"X^T X is rank deficient or near-singular (condition ~ {condition:.3e})",
            condition=condition)
    return np.linalg.solve(XtX, Xty)


def train(rows: Sequence[TrainingRow], keyword_map, config: TrainingConfig,
          schema: Optional[FeatureSchema] = None) -> RegressionModel:
    """Assemble the design matrix, optionally scale, fit by the configured
    method and package the result with the frozen keyword-map reference."""
    if not rows:
        raise CtrServeError("cannot train on zero rows")
    if schema is None:
        schema = FeatureSchema(include_intercept=config.include_intercept)
    matrix = build_design_matrix(rows, schema)
    scaler = None
    if config.scale_features:
        scaler = fit_scaler(matrix)
        matrix = transform(scaler, matrix)
    if config.method == GRADIENT_DESCENT:
        theta, trace = gradient_descent(matrix, config)
    else:
        theta, trace = normal_equation(matrix), ()
    map_ref = getattr(keyword_map, "category", "") if keyword_map is not None else ""
    return RegressionModel(theta=theta, schema=schema, scaler=scaler,
                           config=config, cost_trace=trace, keyword_map_ref=map_ref)


def simple_regression(x: Sequence[float], y: Sequence[float],
                      config: Optional[TrainingConfig] = None) -> tuple[float, float]:
    """Single-feature fit with intercept via the normal equation; returns
    (intercept, slope)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise ContractError("x and y must be equal-length 1-D series of length >= 2")
    if np.all(x == x[0]):
        raise DegenerateFeatureError("x is constant; no slope is identifiable")
    X = np.column_stack([np.ones_like(x), x])
    matrix = DesignMatrix(X=X, y=y, include_intercept=True)
    theta = normal_equation(matrix)
    return float(theta[0]), float(theta[1])


def save_model(model: RegressionModel) -> str:
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "method": model.config.method,
        "theta": [float(t) for t in model.theta],
        "schema": {
            "features": list(model.schema.feature_names),
            "include_intercept": model.schema.include_intercept,
            "size_registry": list(model.schema.size_registry),
        },
        "scaler": None if model.scaler is None else {
            "means": [float(v) for v in model.scaler.means],
            "stds": [float(v) for v in model.scaler.stds],
        },
        "config": {"alpha": model.config.alpha, "iterations": model.config.iterations},
        "cost_trace": [float(c) for c in model.cost_trace],
        "keyword_map_ref": model.keyword_map_ref,
    }
    return json.dumps(payload, indent=2) + "\n"


def load_model(stream) -> RegressionModel:
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    try:
        payload = json.loads(stream)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"corrupt model stream: {exc}") from exc
    try:
        if payload["version"] != MODEL_FORMAT_VERSION:
            raise ModelLoadError(f"unsupported model version {payload['version']!r}")
        schema = FeatureSchema(
            include_intercept=bool(payload["schema"]["include_intercept"]),
            size_registry=tuple(payload["schema"]["size_registry"]),
            feature_names=tuple(payload["schema"]["features"]),
        )
        scaler_payload = payload["scaler"]
        scaler = None
        if scaler_payload is not None:
            scaler = ScalerStats(means=np.array(scaler_payload["means"], dtype=float),
                                 stds=np.array(scaler_payload["stds"], dtype=float))
        config = TrainingConfig(
            method=payload["method"],
            alpha=float(payload["config"]["alpha"]),
            iterations=int(payload["config"]["iterations"]),
            include_intercept=schema.include_intercept,
            scale_features=scaler is not None,
        )
        return RegressionModel(
            theta=np.array(payload["theta"], dtype=float),
            schema=schema,
            scaler=scaler,
            config=config,
            cost_trace=tuple(float(c) for c in payload["cost_trace"]),
            keyword_map_ref=str(payload.get("keyword_map_ref", "")),
        )
    except ModelLoadError:
        raise
    except (KeyError, TypeError, ValueError, ContractError) as exc:
        raise ModelLoadError(f"invalid model payload: {exc}") from exc
