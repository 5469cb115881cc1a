"""Scenario files: parsing, validation, execution and result manifests.

A scenario is a TOML file with a top-level ``name`` and ``protocol``
(``raw``, ``gi``, ``qiup``, ``holography`` or ``hom``), shared ``[grid]``,
``[crystal]``, ``[pump]``, ``[detection]`` and ``[output]`` tables, element
arrays ``[[arm1]]``/``[[arm2]]`` and one table named after the protocol.
Validation collects every problem before anything runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import __version__
from .crystal import CrystalSpec, PMType
from .elements import ConstantPhase, FourfSystem, FourierLens, Propagate, ThinLens, ThinMask
from .engine import (Point, PureState, UnfoldedSetup, bucket_jpd, conditional_wavefunction, ensemble_intensity,
                     partially_coherent_jpd, undetected_ensemble)
from .fieldio import read_field, write_field
from .grid import Grid2D, ScalarField
from .kernels import Ordering, beamlike_type2_kernel, position_kernel
from .special import ProfileError

__all__ = [
    "ScenarioError",
    "Scenario",
    "PROTOCOLS",
    "bundled_scenarios",
    "resolve_scenario",
    "load_scenario",
    "run_scenario",
    "oracle_compare",
    "write_json_atomic",
    "write_csv_atomic",
    "quantity",
]

PROTOCOLS = ("raw", "gi", "qiup", "holography", "hom")
_DETECTIONS = ("point", "pure_state", "bucket", "undetected")
_CRYSTAL_TYPES = ("degenerate_type1", "nondegenerate_type1", "beamlike_type2", "thin")


class ScenarioError(ValueError):
    """Invalid scenario; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n  - " + "\n  - ".join(self.violations))


# ---------------------------------------------------------------------------
# output helpers


def quantity(value, unit: str) -> dict:
    """Manifest entry: every number carries its unit."""
    if isinstance(value, (bool, np.bool_)):
        return {"value": bool(value), "unit": unit}
    if isinstance(value, (int, np.integer)):
        return {"value": int(value), "unit": unit}
    return {"value": float(value), "unit": unit}


def _atomic_write_bytes(path: Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json_atomic(path, obj) -> Path:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    return _atomic_write_bytes(Path(path), text.encode())


def write_csv_atomic(path, header: list[str], rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return _atomic_write_bytes(Path(path), buf.getvalue().encode())


# ---------------------------------------------------------------------------
# parsing


@dataclass
class Scenario:
    """Parsed and validated scenario."""

    name: str
    protocol: str
    raw: dict
    source: Optional[Path]
    grid: Optional[Grid2D] = None
    crystal: Optional[CrystalSpec] = None
    seed: int = 0
    output_dir: Optional[Path] = None
    params: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode()).hexdigest()

    def resolve_path(self, p: str) -> Path:
        q = Path(p)
        if not q.is_absolute() and self.source is not None:
            q = self.source.parent / q
        return q


def bundled_scenarios() -> dict[str, Path]:
    """Names and paths of the scenarios shipped with the package."""
    root = resources.files("awp_lab") / "scenarios"
    return {Path(str(p)).stem: Path(str(p)) for p in root.iterdir() if str(p).endswith(".toml")}


def resolve_scenario(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return bundled[name_or_path]
    raise ScenarioError([f"scenario {name_or_path!r} is neither a file nor a bundled scenario "
                         f"(bundled: {', '.join(sorted(bundled))})"])


def _num(tab: dict, key: str, where: str, errs: list, *, positive=False, nonneg=False, default=None,
         required=True, integer=False):
    if key not in tab:
        if required and default is None:
            errs.append(f"{where}.{key} is required")
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append(f"{where}.{key} must be a number (got {v!r})")
        return default
    if integer and int(v) != v:
        errs.append(f"{where}.{key} must be an integer (got {v!r})")
        return default
    if not np.isfinite(v):
        errs.append(f"{where}.{key} must be finite")
        return default
    if positive and not v > 0:
        errs.append(f"{where}.{key} must be > 0 (got {v})")
    if nonneg and v < 0:
        errs.append(f"{where}.{key} must be >= 0 (got {v})")
    return int(v) if integer else float(v)


def _parse_grid(tab: dict, errs: list) -> Optional[Grid2D]:
    n = _num(tab, "n", "grid", errs, positive=True, integer=True, required=False)
    nx = _num(tab, "nx", "grid", errs, positive=True, integer=True, default=n, required=n is None)
    ny = _num(tab, "ny", "grid", errs, positive=True, integer=True, default=n if n is not None else nx,
              required=False)
    dx = _num(tab, "dx", "grid", errs, positive=True)
    dy = _num(tab, "dy", "grid", errs, positive=True, default=dx, required=False)
    for k, v in (("nx", nx), ("ny", ny)):
        if v is not None and v < 2:
            errs.append(f"grid.{k} must be >= 2 (got {v})")
    if None in (nx, ny, dx, dy) or nx < 2 or ny < 2 or dx <= 0 or dy <= 0:
        return None
    return Grid2D(nx, ny, dx, dy)


def _parse_crystal(tab: dict, errs: list) -> Optional[CrystalSpec]:
    kind = tab.get("type")
    if kind not in _CRYSTAL_TYPES:
        errs.append(f"crystal.type must be one of {', '.join(_CRYSTAL_TYPES)} (got {kind!r})")
        return None
    n0 = len(errs)
    ubg = bool(tab.get("unit_beta_gamma", False))
    if kind == "thin":
        lp = _num(tab, "lambda_p", "crystal", errs, positive=True)
        ls = _num(tab, "lambda_s", "crystal", errs, positive=True, required=False)
        n_o = _num(tab, "n_o", "crystal", errs, positive=True, default=1.0, required=False)
        if ls is not None and lp is not None and not ls > lp:
            errs.append("crystal.lambda_s must exceed lambda_p")
        if len(errs) > n0:
            return None
        return CrystalSpec.thin(lp, ls, n_o=n_o)
    L = _num(tab, "L", "crystal", errs, positive=True)
    n_o = _num(tab, "n_o", "crystal", errs, positive=True)
    try:
        if kind == "degenerate_type1":
            lp = _num(tab, "lambda_p", "crystal", errs, positive=True)
            if len(errs) > n0:
                return None
            return CrystalSpec.degenerate_type1(L, n_o, lp, unit_beta_gamma=ubg)
        if kind == "nondegenerate_type1":
            ls = _num(tab, "lambda_s", "crystal", errs, positive=True)
            li = _num(tab, "lambda_i", "crystal", errs, positive=True)
            if len(errs) > n0:
                return None
            return CrystalSpec.nondegenerate_type1(L, n_o, ls, li, unit_beta_gamma=ubg)
        n_e = _num(tab, "n_e", "crystal", errs, positive=True)
        theta = _num(tab, "theta", "crystal", errs)
        lp = _num(tab, "lambda_p", "crystal", errs, positive=True)
        if len(errs) > n0:
            return None
        return CrystalSpec.beamlike_type2(L, n_o, n_e, theta, lp, unit_beta_gamma=ubg)
    except ValueError as exc:
        errs.append(f"crystal: {exc}")
        return None


def _parse_elements(items, where: str, grid: Optional[Grid2D], sc: Scenario, errs: list) -> list:
    out = []
    if not isinstance(items, list):
        errs.append(f"{where} must be an array of element tables")
        return out
    for i, e in enumerate(items):
        w = f"{where}[{i}]"
        t = e.get("type") if isinstance(e, dict) else None
        n0 = len(errs)
        if t == "propagate":
            z = _num(e, "z", w, errs)
            n = _num(e, "n", w, errs, positive=True, default=1.0, required=False)
            if len(errs) == n0:
                out.append(Propagate(z, n))
        elif t == "thin_lens":
            f = _num(e, "f", w, errs)
            if f == 0:
                errs.append(f"{w}.f must be nonzero")
            if len(errs) == n0:
                out.append(ThinLens(f))
        elif t == "fourier_lens":
            f = _num(e, "f", w, errs, positive=True)
            if len(errs) == n0:
                out.append(FourierLens(f))
        elif t == "fourf":
            f1 = _num(e, "f1", w, errs, positive=True)
            f2 = _num(e, "f2", w, errs, positive=True)
            if len(errs) == n0:
                out.append(FourfSystem(f1, f2))
        elif t == "phase":
            c = _num(e, "value", w, errs)
            if len(errs) == n0:
                out.append(ConstantPhase(c))
        elif t == "aperture":
            r = _num(e, "radius", w, errs, positive=True)
            if len(errs) == n0 and grid is not None:
                out.append(ThinMask((grid.r2() <= r * r).astype(complex)))
        elif t == "mask":
            p = e.get("file")
            if not isinstance(p, str) or not sc.resolve_path(p).exists():
                errs.append(f"{w}.file must name an existing AWPF file (got {p!r})")
            else:
                try:
                    out.append(ThinMask(read_field(sc.resolve_path(p)).amp))
                except ValueError as exc:
                    errs.append(f"{w}.file: {exc}")
        else:
            errs.append(f"{w}.type must be one of propagate, thin_lens, fourier_lens, fourf, phase, aperture, mask "
                        f"(got {t!r})")
    return out


def _parse_object(tab: Any, where: str, grid: Optional[Grid2D], sc: Scenario, errs: list) -> Optional[np.ndarray]:
    """Object transmittance on ``grid``: clear, uniform, pinhole, slit or file."""
    if tab is None:
        tab = {"kind": "clear"}
    kind = tab.get("kind") if isinstance(tab, dict) else None
    if grid is None:
        return None
    if kind == "clear":
        return np.ones(grid.shape, dtype=complex)
    if kind == "uniform":
        t = _num(tab, "T", where, errs, nonneg=True)
        if t is not None and t > 1:
            errs.append(f"{where}.T must satisfy |T| <= 1 (got {t})")
            return None
        return None if t is None else np.full(grid.shape, t, dtype=complex)
    if kind == "pinhole":
        T = np.zeros(grid.shape, dtype=complex)
        T[grid.ny // 2, grid.nx // 2] = 1.0
        return T
    if kind == "slit":
        w = _num(tab, "width", where, errs, positive=True)
        t = _num(tab, "T", where, errs, nonneg=True, default=0.0, required=False)
        if w is None:
            return None
        X, _ = grid.mesh()
        T = np.ones(grid.shape, dtype=complex)
        T[np.abs(X) <= w / 2] = t
        return T
    if kind == "file":
        p = tab.get("file")
        if not isinstance(p, str) or not sc.resolve_path(p).exists():
            errs.append(f"{where}.file must name an existing AWPF file (got {p!r})")
            return None
        f = read_field(sc.resolve_path(p))
        if f.amp.shape != grid.shape:
            errs.append(f"{where}.file has shape {f.amp.shape}, grid is {grid.shape}")
            return None
        if np.any(np.abs(f.amp) > 1 + 1e-12):
            errs.append(f"{where}.file violates |T| <= 1")
        return f.amp
    errs.append(f"{where}.kind must be clear, uniform, pinhole, slit or file (got {kind!r})")
    return None


def _apply_grid_override(raw: dict, override: Optional[str], errs: list) -> None:
    if not override:
        return
    if raw.get("protocol") == "hom":
        errs.append("--grid-override does not apply: the hom protocol has no transverse grid")
        return
    g = dict(raw.get("grid", {}))
    for part in override.split(","):
        if "=" not in part:
            errs.append(f"--grid-override entry {part!r} is not key=value")
            continue
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ("n", "nx", "ny", "dx", "dy"):
            errs.append(f"--grid-override key {k!r} is not one of n, nx, ny, dx, dy")
            continue
        try:
            g[k] = int(v) if k in ("n", "nx", "ny") else float(v)
        except ValueError:
            errs.append(f"--grid-override value {v!r} for {k} is not a number")
            continue
        if k == "n":
            g.pop("nx", None)
            g.pop("ny", None)
        if k == "dx":
            g.pop("dy", None)
    raw["grid"] = g


def _tomllib_load(path: Path) -> dict:
    return tomllib.loads(Path(path).read_text())


def load_scenario(name_or_path: str, grid_override: Optional[str] = None,
                  output_dir: Optional[str] = None) -> Scenario:
    """Parse and validate; raises :class:`ScenarioError` listing every violation."""
    path = resolve_scenario(name_or_path)
    try:
        raw = _tomllib_load(path)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"{path}: parse error: {exc}"]) from None
    errs: list[str] = []
    _apply_grid_override(raw, grid_override, errs)
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        errs.append("name must be a nonempty string")
        name = path.stem
    protocol = raw.get("protocol")
    if protocol not in PROTOCOLS:
        errs.append(f"protocol must be one of {', '.join(PROTOCOLS)} (got {protocol!r})")
    present = [p for p in PROTOCOLS if p != "raw" and p in raw]
    if len(present) > 1 or (present and present[0] != protocol):
        errs.append(f"exactly one protocol selector is allowed; protocol={protocol!r} but sections "
                    f"{present} are present")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errs.append(f"seed must be a nonnegative integer (got {seed!r})")
        seed = 0
    sc = Scenario(name, protocol, raw, path, seed=seed)
    out_tab = raw.get("output", {})
    if output_dir:
        sc.output_dir = Path(output_dir)
    elif isinstance(out_tab.get("dir"), str):
        sc.output_dir = sc.resolve_path(out_tab["dir"])
    else:
        sc.output_dir = Path("awp_out") / name

    if protocol != "hom":
        sc.grid = _parse_grid(raw.get("grid", {}), errs) if "grid" in raw else None
        if "grid" not in raw:
            errs.append("grid table is required")
    if protocol in ("raw", "gi", "qiup"):
        if "crystal" not in raw:
            errs.append("crystal table is required")
        else:
            sc.crystal = _parse_crystal(raw["crystal"], errs)
    parser = {"raw": _validate_raw, "gi": _validate_gi, "qiup": _validate_qiup,
              "holography": _validate_holography, "hom": _validate_hom}.get(protocol)
    if parser is not None:
        sc.params = parser(sc, raw, errs)
    if errs:
        raise ScenarioError(errs)
    return sc


def _parse_pump(raw: dict, errs: list) -> dict:
    tab = raw.get("pump", {})
    out = {"waist": None, "modes": []}
    if "waist" in tab:
        out["waist"] = _num(tab, "waist", "pump", errs, positive=True)
    modes = tab.get("modes", [])
    for i, m in enumerate(modes):
        w = _num(m, "weight", f"pump.modes[{i}]", errs, nonneg=True)
        wa = _num(m, "waist", f"pump.modes[{i}]", errs, positive=True)
        out["modes"].append((w, wa))
    if modes and out["waist"] is not None:
        errs.append("pump.waist and pump.modes are mutually exclusive")
    return out


def _validate_raw(sc: Scenario, raw: dict, errs: list) -> dict:
    p: dict = {"pump": _parse_pump(raw, errs)}
    p["arm1"] = _parse_elements(raw.get("arm1", []), "arm1", sc.grid, sc, errs)
    p["arm2"] = _parse_elements(raw.get("arm2", []), "arm2", sc.grid, sc, errs)
    det = raw.get("detection", {"kind": "point"})
    kind = det.get("kind", "point")
    if kind not in _DETECTIONS:
        errs.append(f"detection.kind must be one of {', '.join(_DETECTIONS)} (got {kind!r})")
    p["kind"] = kind
    p["ordering"] = det.get("ordering", "MaskAfterConv")
    if p["ordering"] not in [o.value for o in Ordering]:
        errs.append(f"detection.ordering must be one of {[o.value for o in Ordering]} (got {p['ordering']!r})")
    p["conv_mode"] = det.get("conv_mode", "linear")
    if p["conv_mode"] not in ("linear", "circular"):
        errs.append(f"detection.conv_mode must be linear or circular (got {p['conv_mode']!r})")
    if kind == "point":
        p["x"] = _num(det, "x", "detection", errs, default=0.0, required=False)
        p["y"] = _num(det, "y", "detection", errs, default=0.0, required=False)
    elif kind == "pure_state":
        f = det.get("file")
        if not isinstance(f, str) or not sc.resolve_path(f).exists():
            errs.append(f"detection.file must name an existing AWPF file (got {f!r})")
        else:
            p["state"] = read_field(sc.resolve_path(f))
    elif kind == "bucket":
        p["radius"] = _num(det, "radius", "detection", errs, positive=True, required=False)
    if p["pump"]["modes"] and kind != "point" and kind != "pure_state":
        errs.append("pump.modes (partially coherent pump) needs a point or pure_state detection")
    return p


def _validate_gi(sc: Scenario, raw: dict, errs: list) -> dict:
    tab = raw.get("gi", {})
    p = {
        "placement": tab.get("placement", "DetectionPath"),
        "M": _num(tab, "magnification", "gi", errs, positive=True, default=1.0, required=False),
        "focal": _num(tab, "focal", "gi", errs, positive=True, default=0.1, required=False),
    }
    if p["placement"] not in ("DetectionPath", "ObjectPath"):
        errs.append(f"gi.placement must be DetectionPath or ObjectPath (got {p['placement']!r})")
    p["T"] = _parse_object(tab.get("object"), "gi.object", sc.grid, sc, errs)
    if sc.crystal is not None and sc.crystal.pm_type not in (PMType.TYPE_I_DEGENERATE, PMType.TYPE_I_NONDEGENERATE):
        errs.append("gi needs a collinear type-I crystal")
    return p


def _validate_qiup(sc: Scenario, raw: dict, errs: list) -> dict:
    from .protocols.qiup import Momentum, Position, SingleMode

    tab = raw.get("qiup", {})
    v = tab.get("variant")
    n0 = len(errs)
    variant = None
    if v == "momentum":
        f = [_num(tab, k, "qiup", errs, positive=True) for k in ("f1", "f2", "f3")]
        if len(errs) == n0:
            variant = Momentum(*f)
    elif v == "position":
        m = [_num(tab, k, "qiup", errs, positive=True) for k in ("M2", "M4", "M6")]
        foc = _num(tab, "focal", "qiup", errs, positive=True, default=0.1, required=False)
        if len(errs) == n0:
            variant = Position(*m, focal=foc)
    elif v == "single_mode":
        variant = SingleMode()
    else:
        errs.append(f"qiup.variant must be momentum, position or single_mode (got {v!r})")
    pump = _parse_pump(raw, errs)
    if pump["modes"]:
        errs.append("qiup takes a single Gaussian or plane pump, not pump.modes")
    T = _parse_object(tab.get("object"), "qiup.object", sc.grid, sc, errs)
    return {
        "variant": variant,
        "pump_w": pump["waist"],
        "T": T,
        "object_background": bool(tab.get("object_background", True)),
        "metrics": bool(tab.get("metrics", False)),
        "conv_mode": tab.get("conv_mode", "linear"),
    }


def _validate_holography(sc: Scenario, raw: dict, errs: list) -> dict:
    tab = raw.get("holography", {})
    p = {
        "focal": _num(tab, "focal", "holography", errs, positive=True),
        "lambda_p": _num(tab, "lambda_p", "holography", errs, positive=True),
        "L": _num(tab, "L", "holography", errs, nonneg=True, default=0.0, required=False),
        "n_o": _num(tab, "n_o", "holography", errs, positive=True, default=1.0, required=False),
        "compensate": bool(tab.get("compensate", False)),
    }
    steps = tab.get("steps")
    if steps is not None:
        from .protocols.holography import HOLOGRAPHY_STEPS

        if len(steps) != 4 or not np.allclose(np.mod(np.asarray(steps, float), 2 * np.pi), HOLOGRAPHY_STEPS):
            errs.append("holography.steps must be the four phases 0, pi/2, pi, 3pi/2")
    ph = tab.get("phase", {"kind": "zero"})
    kind = ph.get("kind")
    g = sc.grid
    phi = None
    if kind == "zero":
        phi = None if g is None else np.zeros(g.shape)
    elif kind == "smooth_random":
        amp = _num(ph, "amplitude", "holography.phase", errs, positive=True, default=2.0, required=False)
        modes = _num(ph, "modes", "holography.phase", errs, positive=True, integer=True, default=3, required=False)
        if g is not None and amp is not None and modes is not None:
            phi = _smooth_random_phase(g, amp, modes, sc.seed)
    elif kind == "file":
        f = ph.get("file")
        if not isinstance(f, str) or not sc.resolve_path(f).exists():
            errs.append(f"holography.phase.file must name an existing AWPF file (got {f!r})")
        else:
            phi = np.real(read_field(sc.resolve_path(f)).amp)
    else:
        errs.append(f"holography.phase.kind must be zero, smooth_random or file (got {kind!r})")
    if phi is not None and g is not None and phi.shape != g.shape:
        errs.append(f"holography phase has shape {phi.shape}, grid is {g.shape}")
    p["phi"] = phi
    return p


def _smooth_random_phase(g: Grid2D, amplitude: float, modes: int, seed: int) -> np.ndarray:
    """Sum of a few low-order sinusoids with seeded random coefficients."""
    rng = np.random.default_rng(seed)
    X, Y = g.mesh()
    Lx, Ly = g.nx * g.dx, g.ny * g.dy
    phi = np.zeros(g.shape)
    for _ in range(modes):
        kx, ky = rng.integers(-2, 3, size=2)
        a, ph0 = rng.uniform(-1, 1), rng.uniform(0, 2 * np.pi)
        phi += a * np.cos(2 * np.pi * (kx * X / Lx + ky * Y / Ly) + ph0)
    return amplitude * phi / max(1.0, np.abs(phi).max())


def _validate_hom(sc: Scenario, raw: dict, errs: list) -> dict:
    tab = raw.get("hom", {})
    p = {
        "s": _num(tab, "s", "hom", errs, positive=True),
        "n_samples": _num(tab, "n_samples", "hom", errs, positive=True, integer=True, default=4096, required=False),
        "d_max": _num(tab, "d_max", "hom", errs, positive=True),
        "n_d": _num(tab, "n_d", "hom", errs, positive=True, integer=True, default=101, required=False),
        "k_s": _num(tab, "k_s", "hom", errs, positive=True, required=False),
        "k_i": _num(tab, "k_i", "hom", errs, positive=True, required=False),
    }
    hw = _num(tab, "half_width", "hom", errs, positive=True, required=False)
    if p["s"] is not None:
        p["half_width"] = hw if hw is not None else 40.0 * p["s"]
    if (p["k_s"] is None) != (p["k_i"] is None):
        errs.append("hom.k_s and hom.k_i must be given together")
    if p["n_samples"] is not None and p["n_samples"] % 2:
        errs.append("hom.n_samples must be even")
    return p


# ---------------------------------------------------------------------------
# execution


def _crystal_entry(c: CrystalSpec) -> dict:
    out = {
        "L": quantity(c.L, "m"),
        "n_o": quantity(c.n_o, "1"),
        "lambda_p": quantity(c.lambda_p, "m"),
        "lambda_s": quantity(c.lambda_s, "m"),
        "lambda_i": quantity(c.lambda_i, "m"),
    }
    return out


def _kernel_for(sc: Scenario, pump, ordering="MaskAfterConv", conv_mode="linear"):
    c = sc.crystal
    if c.pm_type == PMType.TYPE_II_BEAMLIKE:
        return beamlike_type2_kernel(c, sc.grid, pump, ordering, conv_mode)
    return position_kernel(c, sc.grid, pump, ordering, conv_mode)


def _fwhm_or_nan(img, grid) -> float:
    from .protocols.metrics import fwhm_through_peak

    try:
        return fwhm_through_peak(img, grid)
    except ProfileError:
        return float("nan")


def _cross_section_rows(img: np.ndarray, grid: Grid2D):
    iy, _ = np.unravel_index(int(np.argmax(img)), img.shape)
    return [(x, v) for x, v in zip(grid.x, img[iy])]


def _run_raw(sc: Scenario, out: Path, plots: bool) -> tuple[dict, list]:
    p = sc.params
    pump = p["pump"]
    files = []
    if p["pump"]["modes"]:
        modes = []
        for w, waist in pump["modes"]:
            k = _kernel_for(sc, waist, p["ordering"], p["conv_mode"])
            modes.append((w, UnfoldedSetup(p["arm1"], k, p["arm2"], sc.grid)))
        ps = Point(p["x"], p["y"]) if p["kind"] == "point" else PureState(p["state"])
        img = partially_coherent_jpd(modes, ps).amp.real
        ogrid = modes[0][1].output_grid
        lam_out = modes[0][1].kernel.lambda_2
        field = None
    else:
        k = _kernel_for(sc, pump["waist"], p["ordering"], p["conv_mode"])
        s = UnfoldedSetup(p["arm1"], k, p["arm2"], sc.grid)
        ogrid = s.output_grid
        lam_out = k.lambda_2
        field = None
        if p["kind"] == "point":
            field = conditional_wavefunction(s, Point(p["x"], p["y"]))
        elif p["kind"] == "pure_state":
            field = conditional_wavefunction(s, PureState(p["state"]))
        if field is not None:
            img = field.intensity()
        elif p["kind"] == "bucket":
            r = p.get("radius")
            region = np.ones(sc.grid.shape, bool) if r is None else sc.grid.r2() <= r * r
            img, ogrid = bucket_jpd(s, region)
        else:
            img, ogrid = ensemble_intensity(s, undetected_ensemble(sc.grid, k.lambda_1))
    if not np.all(np.isfinite(img)):
        raise FloatingPointError("conditional intensity contains non-finite values")
    dump = field if field is not None else ScalarField(ogrid, np.sqrt(np.maximum(img, 0)), lam_out)
    write_field(out / "conditional.awpf", dump)
    files.append("conditional.awpf")
    if plots:
        write_csv_atomic(out / "cross_section_x.csv", ["x_m", "intensity"], _cross_section_rows(img, ogrid))
        files.append("cross_section_x.csv")
    metrics = {
        "psf_fwhm": quantity(_fwhm_or_nan(img, ogrid), "m"),
        "peak_intensity": quantity(float(img.max()), "arb"),
        "total_intensity": quantity(float(img.sum() * ogrid.cell_area), "arb*m^2"),
        "output_dx": quantity(ogrid.dx, "m"),
    }
    c = sc.crystal
    if c.pm_type == PMType.TYPE_I_DEGENERATE:
        metrics["reference_fwhm_degenerate"] = quantity(0.770 * np.sqrt(c.L * c.lambda_s / c.index_s), "m")
    elif c.pm_type == PMType.TYPE_I_NONDEGENERATE:
        metrics["reference_fwhm_nondegenerate"] = quantity(0.544 * np.sqrt(c.L * c.lambda_plus), "m")
    return metrics, files


def _run_gi(sc: Scenario, out: Path, plots: bool) -> tuple[dict, list]:
    from .protocols.ghost import GhostImagingConfig, ghost_image

    p = sc.params
    cfg = GhostImagingConfig(p["T"], sc.grid, sc.grid, sc.crystal, p["placement"], p["M"], p["focal"])
    r = ghost_image(cfg)
    g = r["image_grid"]
    write_field(out / "image.awpf", ScalarField(g, np.sqrt(np.maximum(r["image"], 0)), sc.crystal.lambda_s))
    files = ["image.awpf"]
    if plots:
        write_csv_atomic(out / "psf_x.csv", ["x_m", "intensity"], _cross_section_rows(r["psf"], g))
        files.append("psf_x.csv")
    return {
        "psf_width": quantity(r["psf_width"], "m"),
        "magnification": quantity(r["magnification"], "1"),
    }, files


def _run_qiup(sc: Scenario, out: Path, plots: bool) -> tuple[dict, list]:
    from .protocols.qiup import QiupConfig, qiup_run

    p = sc.params
    cfg = QiupConfig(p["variant"], sc.crystal, sc.grid, p["pump_w"], p["T"],
                     object_background=p["object_background"], conv_mode=p["conv_mode"])
    r = qiup_run(cfg, metrics=p["metrics"])
    g = r["camera_grid"]
    files = []
    for i, fr in enumerate(r["frames"]):
        name = f"frame_{i}.awpf"
        write_field(out / name, ScalarField(g, np.sqrt(np.maximum(fr, 0)), sc.crystal.lambda_s))
        files.append(name)
    write_field(out / "visibility.awpf", ScalarField(g, np.nan_to_num(r["visibility_map"]), sc.crystal.lambda_s))
    files.append("visibility.awpf")
    if plots:
        mean = 0.25 * sum(r["frames"])
        write_csv_atomic(out / "mean_frame_x.csv", ["x_m", "intensity"], _cross_section_rows(mean, g))
        files.append("mean_frame_x.csv")
    m = {"visibility": quantity(r["visibility"], "1")}
    for key, unit in (("resolution", "m"), ("fov", "m"), ("magnification", "1")):
        if key in r:
            m[key] = quantity(r[key], unit)
    return m, files


def _run_holography(sc: Scenario, out: Path, plots: bool) -> tuple[dict, list]:
    from .protocols.holography import HolographyConfig, fit_equivalent_distance, holography_run

    p = sc.params
    cfg = HolographyConfig(p["phi"], sc.grid, p["focal"], p["lambda_p"], p["L"], p["n_o"], compensate=p["compensate"])
    r = holography_run(cfg)
    ph = r["retrieved_phase"]
    lam = cfg.lambda_pair
    write_field(out / "retrieved_phase.awpf", ScalarField(sc.grid, ph, lam))
    write_field(out / "compensation.awpf", ScalarField(sc.grid, r["compensation"], lam))
    files = ["retrieved_phase.awpf", "compensation.awpf"]
    if plots:
        write_csv_atomic(out / "retrieved_phase_x.csv", ["x_m", "phase_rad"],
                         list(zip(sc.grid.x, ph[sc.grid.ny // 2])))
        files.append("retrieved_phase_x.csv")
    m = {"equivalent_distance": quantity(r["equivalent_distance"], "m")}
    if p["L"] == 0 or p["compensate"]:
        err = np.angle(np.exp(1j * (ph - p["phi"])))
        if p["L"] > 0:
            err = np.angle(np.exp(1j * (err - err[sc.grid.ny // 2, sc.grid.nx // 2])))
        m["phase_error_max"] = quantity(float(np.max(np.abs(err))), "rad")
    else:
        resid = ph - p["phi"]
        m["fitted_equivalent_distance"] = quantity(
            fit_equivalent_distance(resid, sc.grid, p["focal"], lam), "m")
    return m, files


def _run_hom(sc: Scenario, out: Path, plots: bool) -> tuple[dict, list]:
    from .hom import TemporalPacket, coincidence_scan, nondegenerate_beat, write_scan_csv

    p = sc.params
    packet = TemporalPacket.gaussian(p["s"], p["half_width"], p["n_samples"])
    ds = np.linspace(-p["d_max"], p["d_max"], p["n_d"])
    P = coincidence_scan(packet, ds)
    write_scan_csv(out / "hom_scan.csv", ds, P)
    files = ["hom_scan.csv"]
    i0 = int(np.argmin(np.abs(ds)))
    m = {
        "P_at_zero": quantity(P[i0], "1"),
        "P_at_d_max": quantity(P[-1], "1"),
        "packet_energy": quantity(packet.energy, "m"),
    }
    if p["k_s"] is not None:
        B = nondegenerate_beat(packet, ds, p["k_s"], p["k_i"])
        write_scan_csv(out / "hom_beat.csv", ds, B)
        files.append("hom_beat.csv")
        m["beat_period"] = quantity(2 * np.pi / abs(p["k_s"] - p["k_i"]), "m")
    return m, files


# widths are NaN (not an error) when a profile never falls to half maximum
_MAY_BE_NAN = {"psf_fwhm"}

_RUNNERS = {"raw": _run_raw, "gi": _run_gi, "qiup": _run_qiup, "holography": _run_holography, "hom": _run_hom}


def manifest_header(sc: Scenario) -> dict:
    from ._accel import backend
    from ._fft import get_threads

    head = {
        "name": sc.name,
        "protocol": sc.protocol,
        "version": __version__,
        "config_hash": sc.config_hash,
        "seed": quantity(sc.seed, "1"),
        "backend": backend(),
        "threads": quantity(get_threads(), "1"),
    }
    if sc.grid is not None:
        g = sc.grid
        head["grid"] = {"nx": quantity(g.nx, "1"), "ny": quantity(g.ny, "1"),
                        "dx": quantity(g.dx, "m"), "dy": quantity(g.dy, "m")}
    if sc.crystal is not None:
        head["crystal"] = _crystal_entry(sc.crystal)
    return head


def run_scenario(sc: Scenario, emit_plots_data: bool = False) -> dict:
    """Execute the scenario, write its outputs and return the manifest."""
    out = Path(sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics, files = _RUNNERS[sc.protocol](sc, out, emit_plots_data)
    bad = [k for k, q in metrics.items() if isinstance(q["value"], float) and not np.isfinite(q["value"])
           and k not in _MAY_BE_NAN]
    if bad:
        raise FloatingPointError(f"non-finite metrics: {', '.join(bad)}")
    manifest = manifest_header(sc)
    manifest["metrics"] = metrics
    manifest["files"] = sorted(files)
    write_json_atomic(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# oracle comparison

L2_TOL = 0.02
TILT_TOL = 0.01


def _tilt_slope(values: np.ndarray, grid: Grid2D) -> float:
    """Odd-phase slope: ``angle(v(x) conj(v(-x))) = 2 kappa x`` along the centre row."""
    j = grid.ny // 2
    c = grid.nx // 2
    row = values[j]
    m = min(c, grid.nx - 1 - c)
    xs = grid.x[c: c + m + 1]
    pair = row[c: c + m + 1] * np.conj(row[c - np.arange(m + 1)])
    ph = np.unwrap(np.angle(pair))
    w = np.abs(pair)
    keep = w > 1e-3 * w.max()
    A = xs[keep]
    return float(np.sum(w[keep] * A * ph[keep]) / np.sum(w[keep] * A * A) / 2.0)


def oracle_compare(sc: Scenario) -> dict:
    """Kernel vs direct volume integration for a bare-crystal point-detection scenario."""
    from .oracle import MAX_TRANSVERSE, VolumeQuadrature, aligned_relative_l2, direct_integral

    errs = []
    if sc.protocol != "raw":
        errs.append(f"oracle-compare needs protocol 'raw' (got {sc.protocol!r})")
    p = sc.params
    if sc.protocol == "raw":
        if p["kind"] != "point":
            errs.append("oracle-compare needs a point detection")
        if p["arm1"] or p["arm2"]:
            errs.append("oracle-compare compares the bare crystal; arms must be empty")
        if p["pump"]["modes"]:
            errs.append("oracle-compare does not take pump.modes")
    g = sc.grid
    if g is not None and (g.nx > MAX_TRANSVERSE or g.ny > MAX_TRANSVERSE):
        errs.append(f"grid {g.nx}x{g.ny} exceeds the oracle limit of {MAX_TRANSVERSE}x{MAX_TRANSVERSE} samples")
    if errs:
        raise ScenarioError(errs)
    c = sc.crystal
    report = {"name": sc.name, "version": __version__, "config_hash": sc.config_hash, "crystal": c.pm_type.value}
    if c.pm_type == PMType.THIN:
        report.update({"passed": True, "trivial": True,
                       "note": "thin crystal: the kernel is an exact delta, nothing to integrate"})
        return report
    waist = p["pump"]["waist"]
    k = _kernel_for(sc, waist)
    cond = conditional_wavefunction(UnfoldedSetup([], k, [], g), Point(p["x"], p["y"])).amp
    X, Y = g.mesh()
    pts = np.c_[X.ravel(), Y.ravel()]
    orc = direct_integral(c, [(p["x"], p["y"])], pts, pump=waist, quad=VolumeQuadrature(c.L, 128))[0].reshape(g.shape)
    fw = 2.0 * np.sqrt(0.465648 / k.corr.coef)
    central = (X - p["x"]) ** 2 + (Y - p["y"]) ** 2 <= (3 * fw) ** 2
    l2 = aligned_relative_l2(orc[central], cond[central])
    report["relative_l2"] = quantity(l2, "1")
    report["l2_tolerance"] = quantity(L2_TOL, "1")
    passed = l2 <= L2_TOL
    if c.pm_type == PMType.TYPE_II_BEAMLIKE:
        slope_o = _tilt_slope(orc, g)
        rel = abs(slope_o / k.tilt - 1.0)
        report["tilt_slope_oracle"] = quantity(slope_o, "rad/m")
        report["tilt_slope_kernel"] = quantity(k.tilt, "rad/m")
        report["tilt_relative_error"] = quantity(rel, "1")
        report["tilt_tolerance"] = quantity(TILT_TOL, "1")
        passed = passed and rel <= TILT_TOL
    report["passed"] = bool(passed)
    report["trivial"] = False
    return report
