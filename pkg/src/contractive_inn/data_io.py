"""Model files, training configs, MNIST IDX files, synthetic data and result tables.

Model files are JSON documents::

    {"schema_version": 1,
     "dims": {"n": 3, "r": 2, "q": 2},
     "activation": {"kind": "leaky_relu", "slope": 0.01},
     "gamma": 0.0,
     "eta": [...],
     "form": "raw" | "materialized",
     "weights": {"T_raw" | "W": [[...]], "U": [[...]], "b": [...], "C": [[...]], "c": [...]}}

Floats are written with ``repr`` (shortest round-trip decimal), so every
float64 survives a save/load cycle bit for bit. Labels are 0-based.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ModelFormatError, UnsupportedVersionError
from .measures import PositiveWeights
from .model import Activation, ImplicitNetwork

__all__ = [
    "SCHEMA_VERSION", "Dataset", "save_model", "load_model", "model_to_dict", "model_from_dict",
    "load_mnist_idx", "read_idx", "write_idx", "synthetic_dataset", "load_dataset", "save_dataset",
    "write_results", "read_results", "write_certificates", "read_certificates",
    "load_training_config", "save_training_config", "CURVE_HEADER",
]

SCHEMA_VERSION = 1
CURVE_HEADER = ("eps", "fraction", "method", "model_id")
CERT_HEADER = ("eps", "sample_id", "method", "certified", "margin", "predicted_label", "true_label")
IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


# --------------------------------------------------------------------------
# model files


def _array_field(d: dict, key: str, ndim: int, where: str) -> np.ndarray:
    if key not in d:
        raise ModelFormatError(f"missing field {where}.{key}")
    try:
        arr = np.array(d[key], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"field {where}.{key} is not a numeric array: {exc}") from None
    if arr.ndim != ndim:
        raise ModelFormatError(f"field {where}.{key} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"field {where}.{key} has non-finite entries")
    return arr


def _expect_shape(arr: np.ndarray, shape: tuple, name: str):
    if arr.shape != shape:
        raise ModelFormatError(f"field weights.{name} has shape {arr.shape}, dims require {shape}")


def model_to_dict(model, eta=None, gamma: float | None = None) -> dict:
    """Serialize a :class:`TrainableModel` (raw form) or :class:`ImplicitNetwork` (materialized)."""
    from .training import TrainableModel

    if isinstance(model, TrainableModel):
        act = model.activation
        n, r = model.U.shape
        q = model.C.shape[0]
        weights = {"T_raw": model.T_raw, "U": model.U, "b": model.b, "C": model.C, "c": model.c}
        form, gamma, eta = "raw", model.gamma, np.exp(model.log_eta)
        extra = {"log_eta": model.log_eta.tolist()}
    elif isinstance(model, ImplicitNetwork):
        act = model.activation
        n, r, q = model.n, model.r, model.q
        weights = {"W": model.W, "U": model.U, "b": model.b, "C": model.C, "c": model.c}
        form = "materialized"
        eta = None if eta is None else (eta.eta if isinstance(eta, PositiveWeights) else np.asarray(eta))
        extra = {}
    else:
        raise InvalidInputError(f"cannot serialize object of type {type(model).__name__}")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dims": {"n": int(n), "r": int(r), "q": int(q)},
        "activation": {"kind": act.kind, "slope": act.slope} if act.kind == "leaky_relu" else {"kind": act.kind},
        "gamma": None if gamma is None else float(gamma),
        "eta": None if eta is None else [float(v) for v in eta],
        "form": form,
        "weights": {k: np.asarray(v).tolist() for k, v in weights.items()},
    }
    doc.update(extra)
    return doc


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`. Returns ``(model, eta)``; ``eta`` may be ``None``."""
    from .training import TrainableModel

    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")
    if "schema_version" not in doc:
        raise ModelFormatError("missing field schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"unsupported schema_version {doc['schema_version']!r} (this build reads {SCHEMA_VERSION})"
        )
    dims = doc.get("dims")
    if not isinstance(dims, dict) or any(k not in dims for k in ("n", "r", "q")):
        raise ModelFormatError("field dims must hold integers n, r, q")
    try:
        n, r, q = (int(dims[k]) for k in ("n", "r", "q"))
    except (TypeError, ValueError):
        raise ModelFormatError("field dims must hold integers n, r, q") from None
    if min(n, r, q) < 1:
        raise ModelFormatError(f"field dims must be positive, got {(n, r, q)}")
    act_doc = doc.get("activation", {"kind": "relu"})
    try:
        if isinstance(act_doc, str):
            act = Activation.parse(act_doc)
        else:
            act = Activation(act_doc["kind"], float(act_doc.get("slope", 0.01)))
    except (KeyError, TypeError, InvalidInputError) as exc:
        raise ModelFormatError(f"field activation is invalid: {exc}") from None
    weights = doc.get("weights")
    if not isinstance(weights, dict):
        raise ModelFormatError("missing field weights")
    form = doc.get("form", "raw" if "T_raw" in weights else "materialized")
    U = _array_field(weights, "U", 2, "weights")
    b = _array_field(weights, "b", 1, "weights")
    C = _array_field(weights, "C", 2, "weights")
    c = _array_field(weights, "c", 1, "weights")
    _expect_shape(U, (n, r), "U")
    _expect_shape(b, (n,), "b")
    _expect_shape(C, (q, n), "C")
    _expect_shape(c, (q,), "c")
    eta = doc.get("eta")
    if eta is not None:
        eta = _array_field(doc, "eta", 1, "model")
        if eta.shape != (n,):
            raise ModelFormatError(f"field eta has length {eta.shape[0]}, dims require {n}")
        try:
            eta = PositiveWeights(eta)
        except InvalidInputError as exc:
            raise ModelFormatError(f"field eta is invalid: {exc}") from None
    if form == "raw":
        T = _array_field(weights, "T_raw", 2, "weights")
        _expect_shape(T, (n, n), "T_raw")
        if "log_eta" in doc:
            log_eta = _array_field(doc, "log_eta", 1, "model")
        elif eta is not None:
            log_eta = np.log(eta.eta)
        else:
            log_eta = np.zeros(n)
        if log_eta.shape != (n,):
            raise ModelFormatError(f"field log_eta has length {log_eta.shape[0]}, dims require {n}")
        gamma = doc.get("gamma")
        if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
            raise ModelFormatError("field gamma must be a number for raw-form models")
        try:
            model = TrainableModel(T, log_eta, float(gamma), U, b, C, c, act)
        except InvalidInputError as exc:
            raise ModelFormatError(f"field gamma is invalid: {exc}") from None
        return model, model.eta
    if form != "materialized":
        raise ModelFormatError(f"field form must be 'raw' or 'materialized', got {form!r}")
    W = _array_field(weights, "W", 2, "weights")
    _expect_shape(W, (n, n), "W")
    return ImplicitNetwork(W, U, b, C, c, act), eta


def save_model(model, path, eta=None) -> None:
    """Write a model file (see module docstring). ``eta`` applies to materialized networks."""
    doc = model_to_dict(model, eta)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    """Read a model file. Returns ``(model, eta)``.

    ``model`` is a :class:`TrainableModel` for raw files and an
    :class:`ImplicitNetwork` for materialized ones; ``eta`` is the stored
    weight vector or ``None``.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return model_from_dict(doc)
    except ModelFormatError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def as_network(model) -> ImplicitNetwork:
    return model.materialize() if hasattr(model, "materialize") else model


# --------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise InvalidInputError(
                f"dataset has {self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels"
            )
        if np.any(self.labels < 0):
            raise InvalidInputError("labels must be non-negative")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.name)

    def check_classes(self, q: int):
        if np.any(self.labels >= q):
            raise InvalidInputError(f"labels must lie in [0, {q})")


def _open_maybe_gz(path):
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX file (optionally gzipped) into an array of its declared shape."""
    data = _open_maybe_gz(path)
    if len(data) < 4:
        raise InvalidInputError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise InvalidInputError(f"{path}: bad magic number {magic:#010x}, expected {expected_magic:#010x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise InvalidInputError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) - header < count:
        raise InvalidInputError(f"{path}: truncated payload ({len(data) - header} of {count} bytes)")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a ``uint8`` array as IDX (gzipped when the name ends in ``.gz``)."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    payload = struct.pack(">I", 0x0800 | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def load_mnist_idx(images_path, labels_path, name: str = "mnist") -> Dataset:
    """Images scaled to ``[0, 1]`` and flattened row-major; labels as 0-based ints."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise InvalidInputError("IDX images must be 3-D and labels 1-D")
    if images.shape[0] != labels.shape[0]:
        raise InvalidInputError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(X, labels.astype(np.int64), name)


def synthetic_dataset(kind: str, count: int, seed: int = 0) -> Dataset:
    """Deterministic balanced two-class data in the plane.

    ``gaussian_blobs``: isotropic Gaussians (std 0.5) centred at ``(-2, 0)`` and
    ``(2, 0)``. ``two_moons_like``: two interleaved noisy half circles.
    Class ``k`` gets ``count // 2`` samples plus one extra for class 0 when
    ``count`` is odd.
    """
    if count < 2:
        raise InvalidInputError(f"count must be >= 2, got {count}")
    rng = np.random.default_rng(seed)
    sizes = (count - count // 2, count // 2)
    labels = np.repeat([0, 1], sizes)
    if kind == "gaussian_blobs":
        centers = np.array([[-2.0, 0.0], [2.0, 0.0]])
        X = centers[labels] + 0.5 * rng.standard_normal((count, 2))
    elif kind == "two_moons_like":
        t = rng.uniform(0.0, np.pi, count)
        X = np.where(
            labels[:, None] == 0,
            np.column_stack([np.cos(t), np.sin(t)]),
            np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)]),
        )
        X = X + 0.1 * rng.standard_normal((count, 2))
    else:
        raise InvalidInputError(f"unknown synthetic kind {kind!r}; use 'two_moons_like' or 'gaussian_blobs'")
    order = rng.permutation(count)
    return Dataset(X[order], labels[order], f"{kind}:{count}:{seed}")


def save_dataset(ds: Dataset, path) -> None:
    np.savez(path, inputs=ds.inputs, labels=ds.labels)


def load_dataset(spec: str) -> Dataset:
    """Load from ``synthetic:<kind>:<count>:<seed>``, ``images.idx,labels.idx`` or an ``.npz``.

    ``.npz`` files need ``inputs`` and ``labels`` arrays.
    """
    spec = str(spec)
    if spec.startswith("synthetic:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise InvalidInputError(f"synthetic dataset spec must be synthetic:<kind>:<count>:<seed>, got {spec!r}")
        try:
            return synthetic_dataset(parts[1], int(parts[2]), int(parts[3]))
        except ValueError:
            raise InvalidInputError(f"bad count or seed in {spec!r}") from None
    if "," in spec:
        images, labels = spec.split(",", 1)
        return load_mnist_idx(images, labels, name=Path(images).name)
    path = Path(spec)
    if not path.exists():
        raise InvalidInputError(f"dataset file {spec} does not exist")
    with np.load(path) as z:
        if "inputs" not in z or "labels" not in z:
            raise InvalidInputError(f"{spec}: npz must contain 'inputs' and 'labels'")
        return Dataset(z["inputs"], z["labels"], path.stem)


# --------------------------------------------------------------------------
# results


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header, rows, metadata: str | None):
    buf = io.StringIO()
    if metadata:
        for line in metadata.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_results(curves, path, method: str | None = None, model_id: str | None = None,
                  metadata: str | None = None) -> None:
    """Write certified/empirical fraction curves as CSV ``eps,fraction,method,model_id``.

    ``curves`` is either a list of ``(eps, fraction, method, model_id)`` tuples
    or a single ``{eps: fraction}`` mapping together with ``method`` and
    ``model_id``. Rows are sorted by ``(eps, method, model_id)``. ``metadata``
    lines, if given, are emitted first with a ``#`` prefix.
    """
    if isinstance(curves, dict):
        if method is None or model_id is None:
            raise InvalidInputError("a curve mapping needs method and model_id")
        rows = [(float(e), float(f), method, model_id) for e, f in curves.items()]
    else:
        rows = [(float(e), float(f), str(m), str(i)) for e, f, m, i in curves]
    rows.sort(key=lambda t: (t[0], t[2], t[3]))
    _write_rows(path, CURVE_HEADER, [(_fmt(e), _fmt(f), m, i) for e, f, m, i in rows], metadata)


def _data_lines(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln for ln in lines if not ln.startswith("#")]


def read_results(path) -> list[tuple[float, float, str, str]]:
    lines = _data_lines(path)
    if not lines or tuple(lines[0].split(",")) != CURVE_HEADER:
        raise InvalidInputError(f"{path}: missing header {','.join(CURVE_HEADER)}")
    out = []
    for i, row in enumerate(csv.reader(lines[1:]), start=2):
        if len(row) != 4:
            raise InvalidInputError(f"{path}: line {i} has {len(row)} fields, expected 4")
        out.append((float(row[0]), float(row[1]), row[2], row[3]))
    return out


def write_certificates(certs, path, metadata: str | None = None) -> None:
    """Per-sample certificate listing sorted by ``(eps, sample_id)``."""
    rows = sorted(certs, key=lambda c: (c.eps, c.sample_id, c.method))
    _write_rows(path, CERT_HEADER, [
        (_fmt(c.eps), c.sample_id, c.method, int(c.certified), _fmt(c.margin), c.predicted_label, c.true_label)
        for c in rows
    ], metadata)


def read_certificates(path):
    from .certification import Certificate

    lines = _data_lines(path)
    if not lines or tuple(lines[0].split(",")) != CERT_HEADER:
        raise InvalidInputError(f"{path}: missing certificate header")
    return [
        Certificate(int(r[1]), r[2], float(r[0]), float(r[4]), bool(int(r[3])), int(r[5]), int(r[6]))
        for r in csv.reader(lines[1:])
    ]


# --------------------------------------------------------------------------
# training configuration files


def load_training_config(path) -> tuple:
    """Read a JSON training config.

    Top-level keys are :class:`TrainingConfig` fields plus optional
    ``model`` (``n``, ``gamma``, ``activation``, ``init_seed``) and ``data``
    (``train``, ``test`` dataset specs for :func:`load_dataset`). Returns
    ``(TrainingConfig, model_options, data_options)``.
    """
    from .training import TrainingConfig

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    model_opts = doc.pop("model", {})
    data_opts = doc.pop("data", {})
    if "lambda" in doc:
        doc["lam"] = doc.pop("lambda")
    known = set(TrainingConfig.__dataclass_fields__)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InvalidInputError(f"{path}: unknown config field(s) {', '.join(unknown)}")
    try:
        cfg = TrainingConfig(**doc)
    except TypeError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    return cfg, model_opts, data_opts


def save_training_config(cfg, path, model: dict | None = None, data: dict | None = None) -> None:
    doc = cfg.to_dict()
    if model:
        doc["model"] = model
    if data:
        doc["data"] = data
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
