"""Boundary scoring: a small trainable network, an oracle, and a score-file bridge.

The built-in model flattens a downsampled signature raster, applies one tanh
hidden layer and a sigmoid output, and is trained with per-sample stochastic
gradient descent on the focal loss.  Weights are snapped to float32 after
training so that the CEBM file format round-trips scores bit-exactly.

CEBM model file: the ASCII magic line ``CEBM``, one ``key value`` line per
config field, an ``end`` line, then the weight tensors (input->hidden matrix,
hidden bias, hidden->output vector, output bias) as raw little-endian float32.

External scores: a CSV of ``signature_id,score`` rows with scores in [0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError

_CLAMP = 1e-7


@dataclass(frozen=True)
class ScorerConfig:
    hidden: int = 64
    learning_rate: float = 1e-3
    epochs: int = 60
    gamma: float = 2.0
    alpha: float = 0.25
    seed: int = 0
    input_side: int = 32

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("focal gamma must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("focal alpha must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def focal_loss(p, y, gamma: float = 2.0, alpha: float = 0.25):
    """Focal loss for a predicted probability p against a {0,1} target."""
    p = np.clip(p, _CLAMP, 1.0 - _CLAMP)
    pos = -alpha * (1.0 - p) ** gamma * np.log(p)
    neg = -(1.0 - alpha) * p ** gamma * np.log(1.0 - p)
    return np.where(np.asarray(y) == 1, pos, neg) if np.ndim(p) or np.ndim(y) \
        else (pos if y == 1 else neg)


def _downsample(bits: np.ndarray, side: int) -> np.ndarray:
    """Reduce a square raster to side x side; block mean when divisible."""
    s = bits.shape[0]
    if s == side:
        out = bits.astype(np.float64)
    elif s % side == 0:
        k = s // side
        out = bits.reshape(side, k, side, k).mean(axis=(1, 3))
    else:
        idx = (np.arange(side) * s) // side
        out = bits[np.ix_(idx, idx)].astype(np.float64)
    return out.ravel()


def _forward(params, x):
    hidden = np.tanh(x @ params["w1"] + params["b1"])
    z = float(hidden @ params["w2"] + params["b2"][0])
    prob = 1.0 / (1.0 + math.exp(-z))
    return prob, hidden


def loss_and_grads(params, x, y: int, gamma: float, alpha: float):
    """Focal loss of one sample and its analytic parameter gradients."""
    prob, hidden = _forward(params, x)
    p = min(max(prob, _CLAMP), 1.0 - _CLAMP)
    if y == 1:
        loss = -alpha * (1.0 - p) ** gamma * math.log(p)
        shape_term = 0.0 if gamma == 0 else -gamma * (1.0 - p) ** (gamma - 1.0) * math.log(p)
        dloss_dp = -alpha * (shape_term + (1.0 - p) ** gamma / p)
    else:
        loss = -(1.0 - alpha) * p ** gamma * math.log(1.0 - p)
        shape_term = 0.0 if gamma == 0 else gamma * p ** (gamma - 1.0) * math.log(1.0 - p)
        dloss_dp = -(1.0 - alpha) * (shape_term - p ** gamma / (1.0 - p))
    dz = dloss_dp * p * (1.0 - p)
    dhidden = params["w2"] * dz
    dz1 = dhidden * (1.0 - hidden ** 2)
    grads = {
        "w1": np.outer(x, dz1),
        "b1": dz1,
        "w2": hidden * dz,
        "b2": np.array([dz]),
    }
    return loss, grads


@dataclass(frozen=True)
class ScorerModel:
    """One-hidden-layer scorer; weights are float32 so files round-trip exactly."""

    config: ScorerConfig
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    loss_curve: tuple[float, ...] = ()

    def _params(self):
        return {"w1": self.w1.astype(np.float64), "b1": self.b1.astype(np.float64),
                "w2": self.w2.astype(np.float64), "b2": self.b2.astype(np.float64)}

    def score_bits(self, bits: np.ndarray) -> float:
        x = _downsample(bits, self.config.input_side)
        prob, _ = _forward(self._params(), x)
        return prob

    def score(self, record) -> float:
        return self.score_bits(record.raster.bits)

    def save(self, path) -> None:
        path = Path(path)
        cfg = self.config
        header = ("CEBM\n"
                  f"input_side {cfg.input_side}\n"
                  f"hidden {cfg.hidden}\n"
                  f"gamma {cfg.gamma!r}\n"
                  f"alpha {cfg.alpha!r}\n"
                  f"learning_rate {cfg.learning_rate!r}\n"
                  f"epochs {cfg.epochs}\n"
                  f"seed {cfg.seed}\n"
                  "end\n").encode("ascii")
        blob = b"".join(a.astype("<f4").tobytes() for a in (self.w1, self.b1, self.w2, self.b2))
        path.write_bytes(header + blob)

    @classmethod
    def load(cls, path) -> "ScorerModel":
        path = Path(path)
        data = path.read_bytes()
        if not data.startswith(b"CEBM\n"):
            raise FormatError(f"{path}: not a CEBM model file")
        pos = 5
        fields: dict[str, str] = {}
        while True:
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError(f"{path}: unterminated CEBM header")
            line = data[pos:nl].decode("ascii")
            pos = nl + 1
            if line == "end":
                break
            key, _, value = line.partition(" ")
            fields[key] = value
        try:
            cfg = ScorerConfig(hidden=int(fields["hidden"]),
                               learning_rate=float(fields["learning_rate"]),
                               epochs=int(fields["epochs"]),
                               gamma=float(fields["gamma"]),
                               alpha=float(fields["alpha"]),
                               seed=int(fields["seed"]),
                               input_side=int(fields["input_side"]))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: bad CEBM config block") from exc
        n_in = cfg.input_side * cfg.input_side
        sizes = [(n_in, cfg.hidden), (cfg.hidden,), (cfg.hidden,), (1,)]
        need = sum(int(np.prod(s)) for s in sizes) * 4
        blob = data[pos:]
        if len(blob) != need:
            raise FormatError(f"{path}: CEBM weight payload is {len(blob)} bytes, expected {need}")
        arrays = []
        offset = 0
        for shape in sizes:
            count = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            arrays.append(arr.reshape(shape).copy())
            offset += count * 4
        return cls(cfg, *arrays)


def train(records, config: ScorerConfig | None = None) -> ScorerModel:
    """Fit the built-in scorer on labeled signature records (deterministic by seed)."""
    cfg = config or ScorerConfig()
    labeled = [r for r in records if r.label is not None]
    ys = [1 if r.label else 0 for r in labeled]
    if not labeled or len(set(ys)) < 2:
        raise ValueError("degenerate training set: need at least one true and one false example")
    xs = [_downsample(r.raster.bits, cfg.input_side) for r in labeled]

    rng = np.random.default_rng(cfg.seed)
    n_in = cfg.input_side * cfg.input_side
    params = {
        "w1": rng.normal(0.0, 1.0 / math.sqrt(n_in), (n_in, cfg.hidden)),
        "b1": np.zeros(cfg.hidden),
        "w2": rng.normal(0.0, 1.0 / math.sqrt(cfg.hidden), cfg.hidden),
        "b2": np.zeros(1),
    }
    curve = []
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(xs))
        total = 0.0
        for i in order:
            loss, grads = loss_and_grads(params, xs[i], ys[i], cfg.gamma, cfg.alpha)
            total += loss
            for key in params:
                params[key] = params[key] - cfg.learning_rate * grads[key]
        curve.append(total / len(xs))

    # snap to float32 so save/load reproduces scores bit-exactly
    return ScorerModel(cfg,
                       params["w1"].astype(np.float32), params["b1"].astype(np.float32),
                       params["w2"].astype(np.float32), params["b2"].astype(np.float32),
                       tuple(curve))


class OracleScorer:
    """Ground-truth passthrough: 1.0 for true-labeled boundary keys, 0.0 for false."""

    def __init__(self, labels: Mapping):
        self._labels = dict(labels)

    @classmethod
    def for_frame(cls, labeling: Mapping, frame: int = 0) -> "OracleScorer":
        return cls({(frame, key): bool(v) for key, v in labeling.items()})

    @classmethod
    def for_frames(cls, labelings) -> "OracleScorer":
        merged = {}
        for frame, labeling in enumerate(labelings):
            for key, v in labeling.items():
                merged[(frame, key)] = bool(v)
        return cls(merged)

    def score(self, record) -> float:
        key = (record.frame, record.boundary_key)
        if key not in self._labels:
            raise ValueError(f"oracle has no label for boundary {key}")
        return 1.0 if self._labels[key] else 0.0


class ExternalScorer:
    """Scores read from a signature_id,score CSV."""

    def __init__(self, scores: Mapping[str, float]):
        for sid, s in scores.items():
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"external score for {sid} outside [0, 1]: {s}")
        self._scores = dict(scores)

    @classmethod
    def from_csv(cls, path) -> "ExternalScorer":
        path = Path(path)
        scores: dict[str, float] = {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or (row[0].strip().lower() == "signature_id"):
                    continue
                if len(row) < 2:
                    raise FormatError(f"{path}: malformed score row {row!r}")
                scores[row[0].strip()] = float(row[1])
        return cls(scores)

    def score(self, record) -> float:
        sid = record.signature_id
        if sid not in self._scores:
            raise ValueError(f"no external score for signature id {sid!r}")
        return self._scores[sid]


class ConstantScorer:
    def __init__(self, value: float = 1.0):
        if not 0.0 <= value <= 1.0:
            raise ValueError("constant score must lie in [0, 1]")
        self.value = value

    def score(self, record) -> float:
        return self.value


def binarize(scores: Mapping, threshold: float = 0.5) -> dict:
    """True iff score >= threshold (ties count as true boundaries)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return {key: s >= threshold for key, s in scores.items()}
