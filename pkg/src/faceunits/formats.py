"""File formats for batch pipeline use.

Numbers in text formats are written with Python's shortest round-trip float
representation, so CSV payloads parse back to the identical binary values;
matrix binaries are .npy (little-endian float64 with a dimensions header),
which is the authoritative form for bit-exact round trips.  Every metadata
file embeds a format name, a format version, and the hash of the producing
configuration; loaders reject unknown versions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import ComponentWeightSummary, CvConfig, EvaluationReport, VideoPrediction
from .coding import CodingConfig
from .core import BasisDictionary, CoefficientSeries, ExpressionModel
from .errors import ConfigError, InputError
from .learning import IterationRecord, LearnConfig, TrainingLog
from .topology import LandmarkTopology
from .wcc import HEAD_CHANNEL_NAMES, FeatureVector, WccConfig

FORMAT_VERSION = "1"

_DICTIONARY_FORMAT = "faceunits-dictionary"
_TOPOLOGY_FORMAT = "faceunits-topology"
_COEFFS_FORMAT = "faceunits-coefficients"
_FEATURES_FORMAT = "faceunits-features"
_PAIRS_FORMAT = "faceunits-feature-pairs"
_LABELS_FORMAT = "faceunits-labels"
_REPORT_FORMAT = "faceunits-evaluation"
_SUMMARY_FORMAT = "faceunits-weight-summary"
_TRAINLOG_FORMAT = "faceunits-training-log"
_MANIFEST_FORMAT = "faceunits-rank-manifest"
_CONFIG_FORMAT = "faceunits-config"


def format_float(value) -> str:
    """Shortest decimal string that parses back to the identical float."""
    return repr(float(value))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _check_format(meta: dict, expected: str, path) -> None:
    found = meta.get("format")
    if found != expected:
        raise InputError(f"{path} has format {found!r}, expected {expected!r}")
    version = str(meta.get("format_version"))
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported format_version {version!r} in {path}; this build reads "
            f"version {FORMAT_VERSION!r}")


# -- topology ---------------------------------------------------------------

def topology_to_obj(topology: LandmarkTopology) -> dict:
    return {
        "landmark_count": topology.landmark_count,
        "groups": [[code, list(indices)] for code, indices in topology.groups],
    }


def topology_from_obj(obj) -> LandmarkTopology:
    try:
        return LandmarkTopology(
            landmark_count=int(obj["landmark_count"]),
            groups=tuple((str(code), tuple(int(j) for j in indices))
                         for code, indices in obj["groups"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed topology object: {exc}") from exc


def save_topology(path, topology: LandmarkTopology) -> None:
    obj = {"format": _TOPOLOGY_FORMAT, "format_version": FORMAT_VERSION}
    obj.update(topology_to_obj(topology))
    dump_json(path, obj)


def load_topology(path) -> LandmarkTopology:
    obj = load_json(path)
    _check_format(obj, _TOPOLOGY_FORMAT, path)
    return topology_from_obj(obj)


# -- dictionary -------------------------------------------------------------

def _write_matrix_csv(path, matrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(format_float(v) for v in row) + "\n")


def _read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    if not rows:
        raise InputError(f"{path}: no numeric rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.asarray(rows, dtype=float)


def save_dictionary(json_path, dictionary: BasisDictionary, *, payload="npy",
                    training: dict | None = None, config: dict | None = None,
                    invocation: list[str] | None = None) -> Path:
    """Write metadata JSON plus a sibling atoms payload; returns the JSON path."""
    if payload not in ("npy", "csv"):
        raise InputError(f"payload must be 'npy' or 'csv', got {payload!r}")
    json_path = Path(json_path)
    stem = json_path.name[:-len(".json")] if json_path.name.endswith(".json") \
        else json_path.name
    payload_name = f"{stem}.atoms.{payload}"
    payload_path = json_path.parent / payload_name
    if payload == "npy":
        with open(payload_path, "wb") as fh:
            np.save(fh, np.ascontiguousarray(dictionary.atoms))
    else:
        _write_matrix_csv(payload_path, dictionary.atoms)
    allocation: dict[str, int] = {}
    for code in dictionary.atom_groups:
        allocation[code] = allocation.get(code, 0) + 1
    meta = {
        "format": _DICTIONARY_FORMAT,
        "format_version": FORMAT_VERSION,
        "atom_count": dictionary.atom_count,
        "lambda": dictionary.lambda_used,
        "group_allocation": allocation,
        "atom_groups": list(dictionary.atom_groups),
        "atom_names": None if dictionary.atom_names is None
                      else list(dictionary.atom_names),
        "activation_rank": None if dictionary.activation_rank is None
                           else list(dictionary.activation_rank),
        "topology": topology_to_obj(dictionary.topology),
        "payload": {
            "file": payload_name,
            "encoding": f"{payload}-float64",
            "rows": dictionary.atoms.shape[0],
            "cols": dictionary.atoms.shape[1],
        },
        "training": training,
        "invocation": invocation,
    }
    meta["config_hash"] = config_hash(config if config is not None else {
        "atom_count": meta["atom_count"], "lambda": meta["lambda"],
        "group_allocation": meta["group_allocation"],
        "topology": meta["topology"]})
    if config is not None:
        meta["config"] = config
    dump_json(json_path, meta)
    return json_path


def load_dictionary(json_path) -> tuple[BasisDictionary, dict]:
    json_path = Path(json_path)
    meta = load_json(json_path)
    _check_format(meta, _DICTIONARY_FORMAT, json_path)
    payload = meta.get("payload") or {}
    payload_path = json_path.parent / str(payload.get("file"))
    if not payload_path.is_file():
        raise InputError(f"dictionary payload not found: {payload_path}")
    encoding = payload.get("encoding")
    if encoding == "npy-float64":
        atoms = np.load(payload_path)
    elif encoding == "csv-float64":
        atoms = _read_matrix_csv(payload_path)
    else:
        raise InputError(f"unknown payload encoding {encoding!r} in {json_path}")
    expected = (int(payload.get("rows", -1)), int(payload.get("cols", -1)))
    if atoms.shape != expected:
        raise InputError(
            f"payload {payload_path} has shape {atoms.shape}, metadata says {expected}")
    dictionary = BasisDictionary(
        atoms=atoms,
        atom_groups=tuple(meta["atom_groups"]),
        topology=topology_from_obj(meta["topology"]),
        atom_names=None if meta.get("atom_names") is None
                   else tuple(meta["atom_names"]),
        lambda_used=meta.get("lambda"),
        activation_rank=None if meta.get("activation_rank") is None
                        else tuple(meta["activation_rank"]))
    return dictionary, meta


# -- training log -----------------------------------------------------------

def save_training_log(path, log: TrainingLog, *, cfg_hash: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_TRAINLOG_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(f"# stop_reason={log.stop_reason}\n")
        fh.write("iteration,objective,mean_nonzero_fraction,max_atom_norm\n")
        for r in log.records:
            fh.write(f"{r.iteration},{format_float(r.objective)},"
                     f"{format_float(r.mean_nonzero_fraction)},"
                     f"{format_float(r.max_atom_norm)}\n")


def load_training_log(path) -> TrainingLog:
    comments, header, rows = _read_commented_csv(path)
    _check_format({"format": comments.get("format"),
                   "format_version": comments.get("format_version")},
                  _TRAINLOG_FORMAT, path)
    want = ["iteration", "objective", "mean_nonzero_fraction", "max_atom_norm"]
    if header != want:
        raise InputError(f"{path}: unexpected header {header}, expected {want}")
    records = tuple(
        IterationRecord(iteration=int(r[0]), objective=float(r[1]),
                        mean_nonzero_fraction=float(r[2]), max_atom_norm=float(r[3]))
        for r in rows)
    return TrainingLog(records, comments.get("stop_reason", "unknown"))


# -- commented-CSV helpers ---------------------------------------------------

def _read_commented_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    comments: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    comments[key.strip()] = value
                continue
            cells = next(csv.reader([stripped]))
            if header is None:
                header = cells
            else:
                if len(cells) != len(header):
                    raise InputError(
                        f"{path}:{lineno}: row has {len(cells)} cells, header has "
                        f"{len(header)}")
                rows.append(cells)
    if header is None:
        raise InputError(f"{path}: missing header row")
    return comments, header, rows


# -- coefficient series -----------------------------------------------------

@dataclass(frozen=True)
class CoefficientFile:
    series: CoefficientSeries
    bu_names: tuple[str, ...]
    video_id: str


def save_coefficient_series(path, series: CoefficientSeries, bu_names,
                            video_id: str, *, cfg_hash: str = "") -> None:
    """T rows of K named basis-unit columns plus pitch, yaw, roll."""
    bu_names = tuple(bu_names)
    if len(bu_names) != series.bu_coefficients.shape[1]:
        raise InputError(
            f"{len(bu_names)} column names for {series.bu_coefficients.shape[1]} "
            f"basis-unit channels")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_COEFFS_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# video_id={video_id}\n")
        fh.write(f"# frame_rate={format_float(series.frame_rate)}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(bu_names + HEAD_CHANNEL_NAMES) + "\n")
        full = np.hstack([series.bu_coefficients, series.head_rotation])
        for row in full:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def load_coefficient_series(path) -> CoefficientFile:
    comments, header, rows = _read_commented_csv(path)
    _check_format({"format": comments.get("format"),
                   "format_version": comments.get("format_version")},
                  _COEFFS_FORMAT, path)
    if len(header) < 4 or tuple(header[-3:]) != HEAD_CHANNEL_NAMES:
        raise InputError(
            f"{path}: expected basis-unit columns followed by "
            f"{','.join(HEAD_CHANNEL_NAMES)}, got header {header}")
    if "frame_rate" not in comments:
        raise InputError(f"{path}: missing '# frame_rate=' metadata")
    try:
        values = np.asarray([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric cell ({exc})") from exc
    if values.size == 0:
        raise InputError(f"{path}: no frames")
    k = len(header) - 3
    series = CoefficientSeries(
        frame_rate=float(comments["frame_rate"]),
        bu_coefficients=values[:, :k],
        head_rotation=values[:, k:])
    video_id = comments.get("video_id") or Path(path).stem
    return CoefficientFile(series=series, bu_names=tuple(header[:k]),
                           video_id=video_id)


# -- feature table ----------------------------------------------------------

def save_feature_table(path, entries: list[tuple[str, FeatureVector]],
                       *, cfg_obj: dict, pairs_path) -> None:
    """One row per video (video_id, window_count, f0..f{Q^2-1}) plus a sidecar
    mapping feature index -> (channel_i, channel_j)."""
    if not entries:
        raise InputError("no feature vectors to write")
    names = entries[0][1].channel_names
    for video_id, fv in entries:
        if fv.channel_names != names:
            raise InputError(
                f"video {video_id} has channels {fv.channel_names}, expected {names}")
    width = len(names) ** 2
    cfg_digest = config_hash(cfg_obj)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_FEATURES_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# config_hash={cfg_digest}\n")
        fh.write(f"# config={canonical_json(cfg_obj)}\n")
        fh.write("video_id,window_count,"
                 + ",".join(f"f{i}" for i in range(width)) + "\n")
        for video_id, fv in entries:
            fh.write(f"{video_id},{fv.window_count},"
                     + ",".join(format_float(v) for v in fv.values) + "\n")
    with open(pairs_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_PAIRS_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# config_hash={cfg_digest}\n")
        fh.write("feature_index,channel_i,channel_j\n")
        index = 0
        for a in names:
            for b in names:
                fh.write(f"{index},{a},{b}\n")
                index += 1


@dataclass(frozen=True)
class FeatureTable:
    video_ids: tuple[str, ...]
    window_counts: tuple[int, ...]
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))


def load_feature_table(path) -> FeatureTable:
    comments, header, rows = _read_commented_csv(path)
    _check_format({"format": comments.get("format"),
                   "format_version": comments.get("format_version")},
                  _FEATURES_FORMAT, path)
    if header[:2] != ["video_id", "window_count"]:
        raise InputError(f"{path}: header must start with video_id,window_count")
    ids = tuple(r[0] for r in rows)
    counts = tuple(int(r[1]) for r in rows)
    matrix = np.asarray([[float(v) for v in r[2:]] for r in rows], dtype=float)
    if matrix.size == 0:
        raise InputError(f"{path}: no feature rows")
    return FeatureTable(video_ids=ids, window_counts=counts, features=matrix)


def load_feature_pairs(path) -> tuple[tuple[str, str], ...]:
    comments, header, rows = _read_commented_csv(path)
    _check_format({"format": comments.get("format"),
                   "format_version": comments.get("format_version")},
                  _PAIRS_FORMAT, path)
    if header != ["feature_index", "channel_i", "channel_j"]:
        raise InputError(f"{path}: unexpected header {header}")
    return tuple((r[1], r[2]) for r in rows)


def channel_names_from_pairs(pairs) -> tuple[str, ...]:
    count = len(pairs)
    q = int(round(count ** 0.5))
    if q * q != count:
        raise InputError(f"{count} feature pairs is not a perfect square")
    names = tuple(pairs[j][1] for j in range(q))
    expected = tuple((a, b) for a in names for b in names)
    if tuple(pairs) != expected:
        raise InputError("feature pairs are not in row-major channel order")
    return names


# -- labels -----------------------------------------------------------------

def save_labels(path, pairs) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_LABELS_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write("video_id,label\n")
        for video_id, label in pairs:
            fh.write(f"{video_id},{label}\n")


def load_labels(path) -> dict[str, str]:
    comments, header, rows = _read_commented_csv(path)
    if comments.get("format") is not None:
        _check_format({"format": comments.get("format"),
                       "format_version": comments.get("format_version")},
                      _LABELS_FORMAT, path)
    if header != ["video_id", "label"]:
        raise InputError(f"{path}: header must be video_id,label")
    labels: dict[str, str] = {}
    for row in rows:
        if row[0] in labels:
            raise InputError(f"{path}: duplicate video_id {row[0]!r}")
        labels[row[0]] = row[1]
    if not labels:
        raise InputError(f"{path}: no label rows")
    return labels


# -- evaluation report & weight summary --------------------------------------

def save_evaluation_report(path, report: EvaluationReport, *, cfg_obj: dict) -> None:
    obj = {
        "format": _REPORT_FORMAT,
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash(cfg_obj),
        "config": cfg_obj,
    }
    obj.update(report.to_obj())
    dump_json(path, obj)


def load_evaluation_report(path) -> tuple[EvaluationReport, dict]:
    obj = load_json(path)
    _check_format(obj, _REPORT_FORMAT, path)
    report = EvaluationReport(
        accuracy=float(obj["accuracy"]),
        per_class_accuracy={k: float(v) for k, v in obj["per_class_accuracy"].items()},
        predictions=tuple(
            VideoPrediction(video_id=p["video_id"], label=p["label"],
                            predicted=p["predicted"], chosen_c=float(p["chosen_c"]),
                            decision_value=float(p["decision_value"]))
            for p in obj["predictions"]),
        class_labels=tuple(obj["class_labels"]),
        c_grid=tuple(float(c) for c in obj["c_grid"]),
        inner_folds=int(obj["inner_folds"]),
        seed=int(obj["seed"]),
        standardize=bool(obj["standardize"]),
        stratified_inner=bool(obj["stratified_inner"]))
    return report, obj


def save_weight_summary(path, summaries, *, cfg_hash: str = "") -> None:
    """Plot-ready per-component weight distributions, sorted by median desc."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_SUMMARY_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write("component,component_index,n_retrainings,median_abs_weight,"
                 "mean_abs_weight,q25,q75,min,max\n")
        for s in summaries:
            fh.write(
                f"{s.component},{s.component_index},{len(s.values)},"
                f"{format_float(s.median)},{format_float(s.mean)},"
                f"{format_float(s.q25)},{format_float(s.q75)},"
                f"{format_float(s.minimum)},{format_float(s.maximum)}\n")


def save_rank_manifest(path, dictionary: BasisDictionary, means, *,
                       cfg_hash: str = "") -> None:
    """rank -> basis-unit name mapping, with the pooled mean |z| per atom."""
    if dictionary.activation_rank is None:
        raise InputError("dictionary has no activation_rank set")
    names = dictionary.atom_names or tuple(
        f"atom{k}" for k in range(dictionary.atom_count))
    means = np.asarray(means, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format={_MANIFEST_FORMAT}\n")
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write("rank,atom_index,bu_name,mean_abs_activation\n")
        for rank, atom in enumerate(dictionary.activation_rank, start=1):
            fh.write(f"{rank},{atom},{names[atom]},{format_float(means[atom])}\n")


# -- expression model and plain matrices -------------------------------------

def save_expression_model(path, model: ExpressionModel) -> None:
    np.savez(path, mean_landmarks=model.mean_landmarks, basis=model.basis)


def load_expression_model(path) -> ExpressionModel:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with np.load(path) as data:
        try:
            return ExpressionModel(mean_landmarks=data["mean_landmarks"],
                                   basis=data["basis"])
        except KeyError as exc:
            raise InputError(
                f"{path}: expression model needs arrays 'mean_landmarks' and "
                f"'basis' ({exc} missing)") from exc


def load_matrix(path) -> np.ndarray:
    """Numeric matrix from .npy or .csv (optional '#' comments / header row)."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    if path.suffix == ".npy":
        matrix = np.load(path)
        if matrix.ndim != 2:
            raise InputError(f"{path}: expected a 2-D array, got shape {matrix.shape}")
        return np.asarray(matrix, dtype=float)
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    skip_header = False
    for cell in first.strip().lstrip("#").split(","):
        try:
            float(cell)
        except ValueError:
            skip_header = True
            break
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if skip_header:
                skip_header = False
                continue
            try:
                rows.append([float(v) for v in stripped.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    if not rows:
        raise InputError(f"{path}: no numeric rows")
    return np.asarray(rows, dtype=float)


def save_matrix(path, matrix) -> None:
    path = Path(path)
    if path.suffix == ".npy":
        with open(path, "wb") as fh:
            np.save(fh, np.ascontiguousarray(np.asarray(matrix, dtype=float)))
    else:
        _write_matrix_csv(path, matrix)


# -- per-video encode input ---------------------------------------------------

@dataclass(frozen=True)
class VideoInput:
    kind: str                  # "epsilon" | "deformation"
    values: np.ndarray         # T x M or T x 3L
    pose: np.ndarray | None    # T x 3 or None
    frame_rate: float | None
    video_id: str


def load_video_input(path) -> VideoInput:
    """Per-frame rows of expression coefficients (e0..e{M-1}) or deformations
    (d0..d{3L-1}), optionally followed by pitch,yaw,roll columns."""
    comments, header, rows = _read_commented_csv(path)
    has_pose = len(header) >= 3 and tuple(header[-3:]) == HEAD_CHANNEL_NAMES
    data_cols = header[:-3] if has_pose else header
    if not data_cols:
        raise InputError(f"{path}: no data columns")
    if all(c == f"e{i}" for i, c in enumerate(data_cols)):
        kind = "epsilon"
    elif all(c == f"d{i}" for i, c in enumerate(data_cols)):
        kind = "deformation"
    else:
        raise InputError(
            f"{path}: data columns must be e0..e{{M-1}} or d0..d{{3L-1}}, got "
            f"{data_cols[:4]}...")
    try:
        values = np.asarray([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric cell ({exc})") from exc
    if values.size == 0:
        raise InputError(f"{path}: no frames")
    width = len(data_cols)
    rate = comments.get("frame_rate")
    return VideoInput(
        kind=kind,
        values=values[:, :width],
        pose=values[:, width:] if has_pose else None,
        frame_rate=float(rate) if rate is not None else None,
        video_id=comments.get("video_id") or Path(path).stem)


def save_video_input(path, values, *, kind="epsilon", pose=None,
                     frame_rate=None, video_id=None) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    prefix = "e" if kind == "epsilon" else "d"
    header = [f"{prefix}{i}" for i in range(values.shape[1])]
    if pose is not None:
        pose = np.atleast_2d(np.asarray(pose, dtype=float))
        if pose.shape != (values.shape[0], 3):
            raise InputError(f"pose must be T x 3, got shape {pose.shape}")
        header += list(HEAD_CHANNEL_NAMES)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if video_id is not None:
            fh.write(f"# video_id={video_id}\n")
        if frame_rate is not None:
            fh.write(f"# frame_rate={format_float(frame_rate)}\n")
        fh.write(",".join(header) + "\n")
        for t in range(values.shape[0]):
            row = list(values[t])
            if pose is not None:
                row += list(pose[t])
            fh.write(",".join(format_float(v) for v in row) + "\n")


# -- pipeline configuration ----------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Batch configuration: per-stage blocks plus shared run settings.
    Round-trips losslessly through its JSON form."""

    topology: str | None = None      # path, or the builtin name "ibug51"
    model: str | None = None
    learn: LearnConfig = field(default_factory=LearnConfig)
    coding: CodingConfig = field(default_factory=CodingConfig)
    wcc: WccConfig = field(default_factory=WccConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    seed: int | None = None
    output: str | None = None
    threads: int = 1

    def to_obj(self) -> dict:
        return {
            "format": _CONFIG_FORMAT,
            "format_version": FORMAT_VERSION,
            "topology": self.topology,
            "model": self.model,
            "learn": {
                "atom_count": self.learn.atom_count,
                "lam": self.learn.lam,
                "group_allocation": None if self.learn.group_allocation is None
                                    else dict(self.learn.group_allocation),
                "outer_iterations": self.learn.outer_iterations,
                "seed": self.learn.seed,
                "init": self.learn.init,
                "convergence_tol": self.learn.convergence_tol,
            },
            "coding": {
                "lam": self.coding.lam,
                "max_iterations": self.coding.max_iterations,
                "tolerance": self.coding.tolerance,
            },
            "wcc": {
                "window_seconds": self.wcc.window_seconds,
                "window_stride_seconds": self.wcc.window_stride_seconds,
                "lag_range_seconds": self.wcc.lag_range_seconds,
                "lag_step_frames": self.wcc.lag_step_frames,
                "selected_channels": None if self.wcc.selected_channels is None
                                     else list(self.wcc.selected_channels),
            },
            "cv": {
                "c_grid": list(self.cv.c_grid),
                "inner_folds": self.cv.inner_folds,
                "seed": self.cv.seed,
                "standardize": self.cv.standardize,
            },
            "seed": self.seed,
            "output": self.output,
            "threads": self.threads,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PipelineConfig":
        try:
            learn_obj = dict(obj.get("learn") or {})
            if learn_obj.get("group_allocation") is not None:
                learn_obj["group_allocation"] = {
                    str(k): int(v) for k, v in learn_obj["group_allocation"].items()}
            wcc_obj = dict(obj.get("wcc") or {})
            if wcc_obj.get("selected_channels") is not None:
                wcc_obj["selected_channels"] = tuple(
                    int(c) for c in wcc_obj["selected_channels"])
            cv_obj = dict(obj.get("cv") or {})
            if cv_obj.get("c_grid") is not None:
                cv_obj["c_grid"] = tuple(float(c) for c in cv_obj["c_grid"])
            return cls(
                topology=obj.get("topology"),
                model=obj.get("model"),
                learn=LearnConfig(**learn_obj),
                coding=CodingConfig(**dict(obj.get("coding") or {})),
                wcc=WccConfig(**wcc_obj),
                cv=CvConfig(**cv_obj),
                seed=obj.get("seed"),
                output=obj.get("output"),
                threads=int(obj.get("threads", 1)))
        except TypeError as exc:
            raise ConfigError(f"malformed pipeline config: {exc}") from exc


def save_pipeline_config(path, cfg: PipelineConfig) -> None:
    dump_json(path, cfg.to_obj())


def load_pipeline_config(path) -> PipelineConfig:
    obj = load_json(path)
    _check_format(obj, _CONFIG_FORMAT, path)
    return PipelineConfig.from_obj(obj)
