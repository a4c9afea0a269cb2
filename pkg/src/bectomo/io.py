"""On-disk formats.

Delimited-text files start with ``# key=value`` header lines, the first of
which is ``# format=<tag>/<version>``.  Numbers are written with 17
significant digits so every float round-trips exactly.  Reports are JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import FormatError
from .forward import PhaseGrid, ProbabilitySurface
from .reconstruction import ReconstructionReport
from .states import PureState, TwoModeDensityMatrix
from .su2 import AngularMomentumGeometry

STATE_FORMAT = "bectomo-state/1"
SURFACE_FORMAT = "bectomo-surface/1"
REPORT_FORMAT = "bectomo-report/1"
CURVE_FORMAT = "bectomo-curve/1"
MANIFEST_FORMAT = "bectomo-manifest/1"
MIXTURE_FORMAT = "bectomo-mixture/1"

PathLike = Union[str, os.PathLike]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def digest(payload: Any) -> str:
    """sha256 of the canonical JSON encoding of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def atomic_write(path: PathLike, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header_text(fields: dict) -> str:
    lines = []
    for key, value in fields.items():
        if value is None:
            value = "none"
        elif isinstance(value, float):
            value = fmt(value)
        lines.append(f"# {key}={value}\n")
    return "".join(lines)


def read_delimited(path: PathLike, expected_format: Optional[str] = None) -> tuple[dict, np.ndarray]:
    """Return ``(header, data)`` of a delimited-text file."""
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise FormatError(f"{path}:{lineno}: header line without '='")
                header[key.strip()] = value.strip()
            else:
                try:
                    rows.append([float(tok) for tok in line.split(",")])
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from None
    tag = header.get("format")
    if tag is None:
        raise FormatError(f"{path}: missing format tag")
    if expected_format and tag != expected_format:
        raise FormatError(f"{path}: format {tag!r}, expected {expected_format!r}")
    if rows and len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: ragged rows")
    return header, np.array(rows, dtype=float)


def sniff_format(path: PathLike) -> str:
    with open(path) as fh:
        head = fh.read(4096)
    stripped = head.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(Path(path).read_text()).get("format", "")
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    for line in head.splitlines():
        line = line.strip()
        if line.startswith("#") and "=" in line:
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "format":
                return value.strip()
    raise FormatError(f"{path}: no format tag found")


def _optional_int(text: str) -> Optional[int]:
    return None if text in ("none", "") else int(text)


# ---------------------------------------------------------------- states


@dataclass
class StateFile:
    """A pure state (amplitudes) or a density matrix, with provenance."""

    geometry: AngularMomentumGeometry
    kind: str
    pure: Optional[PureState] = None
    density: Optional[TwoModeDensityMatrix] = None
    digest: str = ""
    meta: dict = field(default_factory=dict)

    def to_density(self) -> TwoModeDensityMatrix:
        return self.density if self.density is not None else self.pure.density()


def write_state(path: PathLike, state: StateFile):
    header = {"format": STATE_FORMAT, "n": state.geometry.total_number, "kind": state.kind}
    header.update(state.meta)
    header["digest"] = state.digest or "none"
    body = []
    if state.kind == "pure":
        for c in state.pure.amplitudes:
            body.append(f"{fmt(c.real)},{fmt(c.imag)}\n")
    else:
        for row in state.density.entries:
            body.append(",".join(f"{fmt(z.real)},{fmt(z.imag)}" for z in row) + "\n")
    atomic_write(path, _header_text(header) + "".join(body))


def read_state(path: PathLike, physical: Optional[bool] = None) -> StateFile:
    header, data = read_delimited(path, STATE_FORMAT)
    try:
        geometry = AngularMomentumGeometry(int(header["n"]))
        kind = header["kind"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad state header ({exc})") from None
    meta = {k: v for k, v in header.items() if k not in ("format", "n", "kind", "digest")}
    dim = geometry.dimension
    try:
        if kind == "pure":
            if data.shape != (dim, 2):
                raise FormatError(f"{path}: expected {dim} rows of re,im")
            pure = PureState(geometry, data[:, 0] + 1j * data[:, 1])
            return StateFile(geometry, kind, pure=pure, digest=header.get("digest", ""), meta=meta)
        if kind in ("mixed", "density"):
            if data.shape != (dim, 2 * dim):
                raise FormatError(f"{path}: expected {dim}x{2 * dim} re,im matrix")
            entries = data[:, 0::2] + 1j * data[:, 1::2]
            phys = (kind == "mixed") if physical is None else physical
            rho = TwoModeDensityMatrix(geometry, entries, physical=phys)
            return StateFile(geometry, kind, density=rho, digest=header.get("digest", ""), meta=meta)
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from None
    raise FormatError(f"{path}: unknown state kind {kind!r}")


# ---------------------------------------------------------------- surfaces


def write_surface(path: PathLike, surface: ProbabilitySurface, digest_: str = ""):
    header = {
        "format": SURFACE_FORMAT,
        "n": surface.geometry.total_number,
        "k": surface.grid.count,
        "theta": surface.theta,
        "transmission": math.cos(surface.theta) ** 2,
        "tau": surface.trials_per_phase,
        "seed": surface.seed,
        "noise": surface.noise_model,
        "rng": surface.rng or "none",
        "digest": digest_ or "none",
    }
    body = "".join(",".join(fmt(v) for v in row) + "\n" for row in surface.values)
    atomic_write(path, _header_text(header) + body)


def read_surface(path: PathLike) -> tuple[ProbabilitySurface, dict]:
    header, data = read_delimited(path, SURFACE_FORMAT)
    try:
        geometry = AngularMomentumGeometry(int(header["n"]))
        grid = PhaseGrid(int(header["k"]))
        surface = ProbabilitySurface(
            geometry, grid, float(header["theta"]), data,
            trials_per_phase=int(header["tau"]),
            seed=_optional_int(header.get("seed", "none")),
            noise_model=header.get("noise", "exact"),
            rng="" if header.get("rng", "none") == "none" else header["rng"],
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    return surface, header


# ---------------------------------------------------------------- reports and curves


def write_report(path: PathLike, report: ReconstructionReport, extra: Optional[dict] = None):
    doc = {"format": REPORT_FORMAT, **report.to_dict(), **(extra or {})}
    atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_report(path: PathLike) -> tuple[ReconstructionReport, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if doc.get("format") != REPORT_FORMAT:
        raise FormatError(f"{path}: not a {REPORT_FORMAT} document")
    fields = set(ReconstructionReport.__dataclass_fields__) | {"transmission"}
    extra = {k: v for k, v in doc.items() if k not in fields and k != "format"}
    try:
        report = ReconstructionReport.from_dict({k: v for k, v in doc.items() if k in fields})
    except TypeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return report, extra


def write_curve(path: PathLike, columns: dict[str, np.ndarray], meta: dict):
    names = list(columns)
    header = {"format": CURVE_FORMAT, **meta, "columns": ",".join(names)}
    rows = zip(*(columns[n] for n in names))
    body = "".join(",".join(fmt(v) for v in row) + "\n" for row in rows)
    atomic_write(path, _header_text(header) + body)


def read_curve(path: PathLike) -> tuple[dict, dict[str, np.ndarray]]:
    header, data = read_delimited(path, CURVE_FORMAT)
    names = header.get("columns", "").split(",")
    if data.size and data.shape[1] != len(names):
        raise FormatError(f"{path}: {data.shape[1]} columns but header names {len(names)}")
    return header, {n: data[:, i] for i, n in enumerate(names)}


# ---------------------------------------------------------------- manifests


@dataclass
class ExperimentManifest:
    """Everything needed to regenerate a run; ``outputs`` does not enter the digest."""

    n: int
    state: dict
    theta: float = math.pi / 8
    phases: int = 180
    noise: dict = field(default_factory=lambda: {"model": "gaussian", "tau": 2000, "seed": 0})
    reconstruction: dict = field(
        default_factory=lambda: {"lambda": 0.0, "max_diagonal": None, "guard": 1e-6, "clip_psd": False}
    )
    outputs: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "n": self.n,
            "state": self.state,
            "theta": self.theta,
            "phases": self.phases,
            "noise": self.noise,
            "reconstruction": self.reconstruction,
        }

    @property
    def digest(self) -> str:
        return digest(self.payload())

    def to_json(self) -> str:
        return json.dumps({**self.payload(), "outputs": self.outputs}, indent=1, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: PathLike) -> "ExperimentManifest":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        if doc.pop("format", MANIFEST_FORMAT) != MANIFEST_FORMAT:
            raise FormatError(f"{path}: not a {MANIFEST_FORMAT} document")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise FormatError(f"{path}: {exc}") from None
