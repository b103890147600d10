"""Experiment configuration, Monte Carlo violation studies and the full pipeline.

Outputs are deterministic functions of the configuration: random numbers come
from keyed counter streams (see :mod:`corrsets.streams`), floats are written
with 17 significant digits, and every file carries the configuration hash.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import streams
from .corrbound import CorrelationModel, compute_bound, satisfies_definition, verify_bound_empirically
from .disturbance import make_generator
from .errors import ConfigError, CorrsetsError, StageError
from .invariance import ViolationSpec, level_for_violation, synth_invariant
from .probsets import chebyshev_level, chi2_inv, reach_tube
from .symmat import as_square, is_pd, sqrt_psd

_A_EXAMPLE = [[0.25, 0.0], [0.1, 0.3]]
_LEVELS = [0.1, 0.2, 0.3, 0.4, 0.5]

PRESETS = {
    "example1": {
        "name": "example1",
        "A": _A_EXAMPLE,
        "generator": {
            "kind": "filtered",
            "H": [[0.75, -0.2], [0.0, 0.6]],
            "F": [[1.0, 2.0], [0.5, -3.0]],
            "U": [[1.5, 0.0], [0.0, 0.26]],
        },
        "p_v": _LEVELS,
        "trajectories": 1000,
        "horizon": 100,
        "seed": 0,
        "distribution": "gaussian",
        "conservative": False,
        "eta_grid_size": 60,
        "method": "shaped",
        "reference_Gw": [[19.5198, -5.9726], [-5.9726, 10.5646]],
    },
    "example2": {
        "name": "example2",
        "A": _A_EXAMPLE,
        "generator": {
            "kind": "constant",
            "Gamma_tilde": [[0.4785, -0.7254], [-0.7254, 1.5215]],
        },
        "p_v": _LEVELS,
        "trajectories": 1000,
        "horizon": 100,
        "seed": 0,
        "distribution": "gaussian",
        "conservative": False,
        "eta_grid_size": 60,
        "method": "shaped",
        "reference_Gw": [[1.1877, -1.8007], [-1.8007, 3.7767]],
    },
}

BOUND_SOURCES = ("computed", "reference")


# ----------------------------------------------------------------------------
# serialisation


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def dumps(obj, indent=1, _depth=0):
    """JSON text with 17-significant-digit floats and sorted keys."""
    obj = _plain(obj) if _depth == 0 else obj
    pad = " " * (indent * (_depth + 1))
    end = " " * (indent * _depth)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _depth + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _depth + 1) for v in obj) + "]"
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _depth + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_float(x):
    return format(float(x), ".17g")


# ----------------------------------------------------------------------------
# configuration


def _matrix(value, name, square=True):
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a numeric matrix") from exc
    if M.ndim != 2 or (square and M.shape[0] != M.shape[1]) or not np.all(np.isfinite(M)):
        raise ConfigError(f"{name} must be a finite {'square ' if square else ''}matrix")
    return M


@dataclass
class ExperimentConfig:
    """Inputs for a bound, invariant-set and violation-study run.

    Exactly one of ``generator`` (a disturbance generator spec with a
    ``kind`` tag) or ``model`` (``Gamma_tilde``, ``alpha``, ``beta``,
    ``gamma``) must be given. ``bound_source="reference"`` replaces the
    computed correlation bound with ``reference_Gw``.
    """

    A: np.ndarray
    p_v: list
    trajectories: int = 1000
    horizon: int = 100
    seed: int = 0
    distribution: str = "gaussian"
    conservative: bool = False
    eta_grid_size: int = 60
    method: str = "shaped"
    generator: dict | None = None
    model: dict | None = None
    reference_Gw: np.ndarray | None = None
    bound_source: str = "computed"
    verify_trials: int = 0
    name: str = "custom"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = copy.deepcopy(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "A" not in data or "p_v" not in data:
            raise ConfigError("config needs 'A' and 'p_v'")
        data["A"] = _matrix(data["A"], "A")
        if data.get("reference_Gw") is not None:
            data["reference_Gw"] = _matrix(data["reference_Gw"], "reference_Gw")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def preset(cls, name):
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls.from_dict(PRESETS[name])

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self):
        n = self.A.shape[0]
        if (self.generator is None) == (self.model is None):
            raise ConfigError("give exactly one of 'generator' or 'model'")
        if isinstance(self.trajectories, bool) or not isinstance(self.trajectories, int) \
                or self.trajectories < 1:
            raise ConfigError("trajectories must be an integer >= 1")
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError("horizon must be an integer >= 1")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.p_v, (list, tuple)) or not self.p_v:
            raise ConfigError("p_v must be a non-empty list")
        self.p_v = [float(p) for p in self.p_v]
        if any(not 0 < p < 1 for p in self.p_v):
            raise ConfigError("every p_v must lie in (0, 1)")
        if self.distribution not in ("gaussian", "chebyshev"):
            raise ConfigError("distribution must be 'gaussian' or 'chebyshev'")
        if self.method not in ("shaped", "scalar"):
            raise ConfigError("method must be 'shaped' or 'scalar'")
        if not isinstance(self.eta_grid_size, int) or self.eta_grid_size < 1:
            raise ConfigError("eta_grid_size must be a positive integer")
        if self.bound_source not in BOUND_SOURCES:
            raise ConfigError(f"bound_source must be one of {BOUND_SOURCES}")
        if self.bound_source == "reference" and self.reference_Gw is None:
            raise ConfigError("bound_source 'reference' needs reference_Gw")
        if self.reference_Gw is not None and self.reference_Gw.shape != (n, n):
            raise ConfigError("reference_Gw must match A")
        if self.verify_trials and self.verify_trials < 1000:
            raise ConfigError("verify_trials must be 0 or at least 1000")
        if self.generator is not None:
            self._validate_generator(n)
        else:
            self._validate_model(n)
        self.conservative = bool(self.conservative)

    def _validate_generator(self, n):
        spec = self.generator
        if not isinstance(spec, dict):
            raise ConfigError("generator must be an object")
        kind = spec.get("kind")
        if kind == "filtered":
            H = _matrix(spec.get("H"), "generator.H")
            F = _matrix(spec.get("F"), "generator.F", square=False)
            U = _matrix(spec.get("U"), "generator.U")
            if H.shape[0] != n or F.shape != (n, U.shape[0]):
                raise ConfigError("generator H, F, U sizes do not match A")
        elif kind in ("constant", "iid"):
            if _matrix(spec.get("Gamma_tilde"), "generator.Gamma_tilde").shape[0] != n:
                raise ConfigError("generator Gamma_tilde does not match A")
        else:
            raise ConfigError(f"unknown generator kind {kind!r}")
        try:
            make_generator(spec)
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"invalid generator: {exc}") from exc

    def _validate_model(self, n):
        spec = self.model
        if not isinstance(spec, dict) or not {"Gamma_tilde", "alpha", "beta", "gamma"} <= set(spec):
            raise ConfigError("model needs Gamma_tilde, alpha, beta and gamma")
        if _matrix(spec["Gamma_tilde"], "model.Gamma_tilde").shape[0] != n:
            raise ConfigError("model Gamma_tilde does not match A")

    def with_overrides(self, **changes):
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return type(self).from_dict(data)

    def to_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if value is not None:
                out[name] = _plain(value)
        return out

    def config_hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"),
                           allow_nan=False)
        return hashlib.sha256(canon.encode()).hexdigest()

    def make_generator(self, key=(streams.DISTURBANCE,)):
        if self.generator is None:
            raise ConfigError("simulation needs a 'generator' spec")
        return make_generator(self.generator, seed=self.seed, key=key)

    def correlation_model(self):
        if self.generator is not None:
            return self.make_generator().correlation_model(self.A)
        m = self.model
        return CorrelationModel(self.A, np.asarray(m["Gamma_tilde"], dtype=float),
                                m["alpha"], m["beta"], m["gamma"])

    def violation_spec(self, p_v):
        return ViolationSpec(self.A.shape[0], p_v, self.distribution, self.conservative)


# ----------------------------------------------------------------------------
# stages


def _stage(name, cfg, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (CorrsetsError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc, cfg.config_hash()) from exc


def sample_boundary(W, rho, count, seed=0, key=(streams.STATE,)):
    """Points ``x = sqrt(rho) W^{1/2} u / |u|`` on the boundary of ``B(W, rho)``.

    Point ``i`` uses the stream ``(seed, (*key, i))``.
    """
    W = np.asarray(W, dtype=float)
    if not is_pd(W):
        raise ValueError("W must be positive definite")
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = W.shape[0]
    u = streams.batch_normals(seed, key, range(count), 1, n)[:, 0]
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return math.sqrt(rho) * u @ sqrt_psd(W).T


@dataclass
class BoundStage:
    Gw: np.ndarray
    source: str
    bound: object = None
    certificate: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"source": self.source, "Gw": self.Gw, "trace": float(np.trace(self.Gw)),
               "certificate": self.certificate}
        if self.bound is not None:
            out["computed"] = self.bound.to_dict()
        return out


def run_bound(cfg, jobs=1):
    model = _stage("model", cfg, cfg.correlation_model)
    grid = model.default_eta_grid(cfg.eta_grid_size)
    bound = _stage("bound", cfg, compute_bound, model, cfg.method, grid)
    cert = {"satisfies_definition": satisfies_definition(model, bound),
            "alpha": model.alpha, "beta": model.beta, "gamma": model.gamma,
            "Gamma_tilde": model.Gamma_tilde}
    if cfg.verify_trials and cfg.generator is not None:
        check = _stage("verify", cfg, verify_bound_empirically, bound, cfg.A,
                       cfg.make_generator((streams.AUX,)), cfg.horizon, cfg.verify_trials, jobs)
        cert["empirical"] = {"passed": check.passed, "max_eig": check.max_eig,
                             "slack": check.slack}
    if cfg.bound_source == "reference":
        return BoundStage(cfg.reference_Gw, "reference", bound, cert)
    return BoundStage(bound.Gw, "computed", bound, cert)


def rho_table(cfg, lam):
    return [(p, level_for_violation(cfg.violation_spec(p), lam)) for p in cfg.p_v]


@dataclass
class ViolationReport:
    """Violation counts ``v_k`` for ``k = 1..K`` per probability level."""

    p_v: list
    rho: list
    counts: np.ndarray          # shape (levels, horizon)
    trajectories: int
    seed: int
    config_hash: str

    @property
    def frequencies(self):
        return self.counts / self.trajectories

    def max_frequency(self):
        return self.frequencies.max(axis=1)

    def steady_state(self, start=10):
        """Mean frequency over ``k >= start``."""
        return self.frequencies[:, start - 1:].mean(axis=1)

    def to_csv(self, fh):
        fh.write(f"# config_hash={self.config_hash}\n")
        fh.write("p_v,k,violations,frequency,rho,seed\n")
        for i, p in enumerate(self.p_v):
            for k, v in enumerate(self.counts[i], start=1):
                fh.write(f"{_csv_float(p)},{k},{int(v)},{_csv_float(v / self.trajectories)},"
                         f"{_csv_float(self.rho[i])},{self.seed}\n")


def run_violation_study(cfg, W=None, lam=None, generator=None, jobs=1):
    """Monte Carlo frequency of ``x_k`` leaving ``B(W, rho)`` for ``k = 1..K``.

    Initial states for level ``i`` come from streams ``(STATE, i, traj)`` and
    disturbances from ``(DISTURBANCE, i, traj)``, so levels and trajectories
    are mutually independent. ``W`` and ``lam`` default to the invariant set
    of the configured bound; ``generator`` overrides the configured one.
    """
    if W is None:
        bound = run_bound(cfg, jobs)
        inv = _stage("invariant", cfg, synth_invariant, cfg.A, bound.Gw)
        W, lam = inv.W, inv.lam
    W = np.asarray(W, dtype=float)
    A = as_square(cfg.A, "A")
    Winv = np.linalg.inv(W)
    N, K = cfg.trajectories, cfg.horizon
    table = _stage("levels", cfg, rho_table, cfg, lam)
    counts = np.zeros((len(cfg.p_v), K), dtype=np.int64)
    for i, (_, rho) in enumerate(table):
        x = _stage("simulate", cfg, sample_boundary, W, rho, N, cfg.seed, (streams.STATE, i))
        gen = generator if generator is not None else cfg.make_generator()
        gen = _clone_with_key(gen, (streams.DISTURBANCE, i))
        w = gen.sample(range(N), K, jobs=jobs)
        for k in range(K):
            x = x @ A.T + w[:, k]
            level = np.einsum("ij,jk,ik->i", x, Winv, x)
            counts[i, k] = int(np.count_nonzero(level > rho))
    return ViolationReport(list(cfg.p_v), [r for _, r in table], counts, N, cfg.seed,
                           cfg.config_hash())


def _clone_with_key(gen, key):
    clone = gen.spawn(0)
    clone.key = tuple(key)
    return clone


def tube_level(cfg, p_v):
    """Confidence level ``r`` with per-step violation ``p_v`` for the reach tube."""
    n = cfg.A.shape[0]
    if cfg.distribution == "gaussian":
        return chi2_inv(n, 1.0 - p_v)
    return chebyshev_level(n, p_v)


@dataclass
class PipelineResult:
    config: ExperimentConfig
    bound: BoundStage
    invariant: object
    rho: list
    tubes: dict
    report: ViolationReport | None = None

    def summary(self):
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "bound": self.bound.to_dict(),
            "invariant": self.invariant.to_dict(self.rho),
        }


def run_pipeline(cfg, jobs=1, simulate=True):
    """Correlation bound, invariant ellipsoid, level table, reach tubes and study."""
    bound = run_bound(cfg, jobs)
    inv = _stage("invariant", cfg, synth_invariant, cfg.A, bound.Gw)
    table = _stage("levels", cfg, rho_table, cfg, inv.lam)
    tubes = {}
    for p in cfg.p_v:
        r = tube_level(cfg, p)
        tube = _stage("reach", cfg, reach_tube, cfg.A, bound.Gw, r, cfg.horizon,
                      "gaussian" if cfg.distribution == "gaussian" else "chebyshev")
        tubes[p] = tube
    report = None
    if simulate and cfg.generator is not None:
        report = run_violation_study(cfg, inv.W, inv.lam, jobs=jobs)
    return PipelineResult(cfg, bound, inv, table, tubes, report)


# ----------------------------------------------------------------------------
# writers


def _tube_text(tube, cfg):
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.config_hash()}\n")
    tube.to_csv(buf)
    return buf.getvalue()


def _level_tag(p):
    return repr(float(p)).replace(".", "p")


def write_bound(out_dir, cfg, bound):
    path = Path(out_dir) / "bound.json"
    path.write_text(dumps({"config_hash": cfg.config_hash(), **bound.to_dict()}) + "\n")
    return [path]


def write_invariant(out_dir, cfg, inv, table):
    out = Path(out_dir)
    jpath = out / "invariant.json"
    jpath.write_text(dumps({"config_hash": cfg.config_hash(), **inv.to_dict(table)}) + "\n")
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.config_hash()}\n")
    inv.to_csv(buf, table)
    cpath = out / "invariant.csv"
    cpath.write_text(buf.getvalue())
    return [jpath, cpath]


def write_tubes(out_dir, cfg, tubes):
    paths = []
    for p, tube in tubes.items():
        path = Path(out_dir) / f"reach_pv{_level_tag(p)}.csv"
        path.write_text(_tube_text(tube, cfg))
        paths.append(path)
    return paths


def write_report(out_dir, report):
    buf = io.StringIO()
    report.to_csv(buf)
    path = Path(out_dir) / "violations.csv"
    path.write_text(buf.getvalue())
    return [path]


def write_pipeline(out_dir, result):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    paths = write_bound(out, cfg, result.bound)
    paths += write_invariant(out, cfg, result.invariant, result.rho)
    paths += write_tubes(out, cfg, result.tubes)
    if result.report is not None:
        paths += write_report(out, result.report)
    summary = out / "pipeline.json"
    summary.write_text(dumps(result.summary()) + "\n")
    paths.append(summary)
    return paths
