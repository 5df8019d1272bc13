"""
Scene, waveform and filter files.

Scenes are YAML with a versioned header::

    format: onebit-mimo-scene
    version: 1
    geometry:
      n_tx: 8
      n_rx: 5
      spacing: 0.5          # same unit as wavelength; or tx_positions / rx_positions
      wavelength: 1.0
    target:
      angle_deg: 22.0
      kind: nft             # nft | rft
      power_db: 20.0        # |alpha0|^2 for nft, sigma0^2 for rft
    interference:           # optional list
      - angle_deg: -50.0    # or normalized_angle: -0.766
        power_db: 30.0
        delta: 0.0
    noise_power: 1.0
    code_length: 16

Waveforms are stored as one 2-bit symbol per entry (``0..3``, bit 1 set for a
negative real part, bit 0 for a negative imaginary part); filters as a CSV
of real/imaginary pairs written with ``repr`` so they reload bit-exactly.
"""

from __future__ import annotations

import copy
import csv
import math
from pathlib import Path
from typing import Iterable

import numpy as np
import yaml

from .qsinr import Filter
from .radar_model import (ArrayGeometry, InterferenceSource, RadarScene, TargetModel,
                          Waveform, from_db)

SCENE_FORMAT = "onebit-mimo-scene"
WAVEFORM_FORMAT = "onebit-mimo-waveform"
FORMAT_VERSION = 1


class SceneFileError(ValueError):
    pass


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise SceneFileError(f"{where}: missing key {key!r}")
    return d[key]


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Return a copy of ``raw`` with ``dotted.key=value`` edits applied.

    List entries are addressed by index (``interference.0.delta=0.1``);
    values are parsed as YAML scalars.
    """
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise SceneFileError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node[int(p)] if isinstance(node, list) else node.setdefault(p, {})
        last = parts[-1]
        parsed = yaml.safe_load(value)
        if isinstance(node, list):
            node[int(last)] = parsed
        else:
            node[last] = parsed
    return out


def scene_from_dict(raw: dict) -> RadarScene:
    if raw.get("format") != SCENE_FORMAT:
        raise SceneFileError(f"not a scene file (format={raw.get('format')!r})")
    if raw.get("version") != FORMAT_VERSION:
        raise SceneFileError(f"unsupported scene version {raw.get('version')!r}")

    g = _require(raw, "geometry", "scene")
    wavelength = float(g.get("wavelength", 1.0))
    if "tx_positions" in g or "rx_positions" in g:
        geom = ArrayGeometry(np.array(_require(g, "tx_positions", "geometry"), float),
                             np.array(_require(g, "rx_positions", "geometry"), float),
                             wavelength)
    else:
        geom = ArrayGeometry.ula(int(_require(g, "n_tx", "geometry")),
                                 int(_require(g, "n_rx", "geometry")),
                                 wavelength, g.get("spacing"))

    t = _require(raw, "target", "scene")
    kind = t.get("kind", "nft")
    power = float(from_db(_require(t, "power_db", "target")))
    angle = math.radians(float(_require(t, "angle_deg", "target")))
    if kind == "nft":
        target = TargetModel(angle, "nft", amplitude=math.sqrt(power))
    else:
        target = TargetModel(angle, kind, variance=power)

    sources = []
    for i, item in enumerate(raw.get("interference") or []):
        where = f"interference[{i}]"
        p = float(from_db(_require(item, "power_db", where)))
        delta = float(item.get("delta", 0.0))
        if "normalized_angle" in item:
            sources.append(InterferenceSource(float(item["normalized_angle"]), p, delta))
        else:
            sources.append(InterferenceSource.from_degrees(
                float(_require(item, "angle_deg", where)), p, delta))

    return RadarScene(geom, target, tuple(sources),
                      float(raw.get("noise_power", 1.0)),
                      int(raw.get("code_length", 1)))


def load_scene_dict(path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise SceneFileError(f"{path}: top level must be a mapping")
    return raw


def load_scene(path, overrides: Iterable[str] = ()) -> RadarScene:
    return scene_from_dict(apply_overrides(load_scene_dict(path), overrides))


def scene_to_dict(scene: RadarScene) -> dict:
    g = scene.geometry
    t = scene.target
    return {
        "format": SCENE_FORMAT,
        "version": FORMAT_VERSION,
        "geometry": {"tx_positions": [float(x) for x in g.tx_positions],
                     "rx_positions": [float(x) for x in g.rx_positions],
                     "wavelength": float(g.wavelength)},
        "target": {"angle_deg": math.degrees(t.angle), "kind": t.kind,
                   "power_db": float(10 * math.log10(t.power))},
        "interference": [{"normalized_angle": float(src.mean_normalized_angle),
                          "power_db": float(10 * math.log10(src.power)),
                          "delta": float(src.uncertainty)}
                         for src in scene.interferences],
        "noise_power": float(scene.noise_power),
        "code_length": int(scene.code_length),
    }


def save_scene(scene: RadarScene, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scene_to_dict(scene), fh, sort_keys=False)


def save_waveform(waveform: Waveform, path) -> None:
    sym = waveform.symbols()
    doc = {"format": WAVEFORM_FORMAT, "version": FORMAT_VERSION,
           "n_tx": int(waveform.n_tx), "code_length": int(waveform.code_length),
           "symbols": "".join(str(int(x)) for x in sym)}
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, width=1 << 30)


def load_waveform(path) -> Waveform:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != WAVEFORM_FORMAT:
        raise SceneFileError(f"{path}: not a waveform file")
    if doc.get("version") != FORMAT_VERSION:
        raise SceneFileError(f"{path}: unsupported waveform version {doc.get('version')!r}")
    text = str(doc["symbols"])
    n_tx, L = int(doc["n_tx"]), int(doc["code_length"])
    if len(text) != n_tx * L or any(c not in "0123" for c in text):
        raise SceneFileError(f"{path}: symbol string does not match {n_tx} x {L}")
    return Waveform.from_symbols(np.frombuffer(text.encode(), np.uint8) - ord("0"), n_tx)


def save_filter(filt, path) -> None:
    w = filt.w if isinstance(filt, Filter) else np.asarray(filt, complex).reshape(-1)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "re", "im"])
        for i, x in enumerate(w):
            wr.writerow([i, repr(float(x.real)), repr(float(x.imag))])


def load_filter(path) -> Filter:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SceneFileError(f"{path}: empty filter file")
    w = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return Filter(w)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
