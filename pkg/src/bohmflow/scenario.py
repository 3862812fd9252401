"""JSON scenario files: strict parsing, validation, and canonical serialisation."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fields as F
from .dynamics import IntegratorConfig
from .errors import ConfigurationError, ScenarioError
from .nonrel import NRWaveFunction, TemporalOffsets
from .spacetime import Constants, ParticleParams
from .stats import SamplingBox, two_mode_box
from .wavefunction import from_term_specs, gaussian_packet

TOP_LEVEL = {"name", "command", "mode", "seed", "constants", "particles", "wavefunction", "field",
             "gauge", "initial", "offsets", "integrator", "sampler", "limits", "outputs", "expect",
             "description"}

BUNDLED_DIR = Path(__file__).parent / "scenarios"


def _req(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"missing required field '{key}'", field=f"{path}.{key}" if path else key)
    return d[key]


def _num(v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {v!r}", field=path)
    if positive and not v > 0:
        raise ScenarioError(f"must be > 0, got {v!r}", field=path)
    return float(v)


def parse_gauge(spec, path):
    kind = spec.get("kind", "quadratic")
    if kind == "quadratic":
        return F.QuadraticGauge(tuple(_req(spec, "linear", path)),
                                None if spec.get("hessian") is None else tuple(map(tuple, spec["hessian"])))
    if kind == "sine":
        return F.SineGauge(_num(_req(spec, "amplitude", path), path + ".amplitude"), tuple(_req(spec, "q", path)))
    raise ScenarioError(f"unknown gauge kind {kind!r}", field=path + ".kind")


def parse_field(spec, path="field"):
    if spec is None:
        return F.zero_field()
    fam = spec.get("family", "zero")
    if fam == "zero":
        return F.zero_field()
    if fam == "constant_electric":
        return F.constant_electric(_num(_req(spec, "E", path), path + ".E"), spec.get("axis", "x"))
    if fam == "constant_magnetic":
        return F.constant_magnetic(_num(_req(spec, "B", path), path + ".B"), tuple(spec.get("plane", ["x", "y"])))
    if fam == "pure_gauge":
        return F.pure_gauge(parse_gauge(_req(spec, "chi", path), path + ".chi"))
    raise ScenarioError(f"unknown field family {fam!r}", field=path + ".family")


@dataclass
class Scenario:
    raw: dict
    name: str
    constants: Constants
    particles: list
    wavefunction: object
    kind: str
    field: object
    initial: np.ndarray | None
    offsets: TemporalOffsets
    integrator: IntegratorConfig
    seed: int
    box: SamplingBox | None = None

    @property
    def sampler(self):
        return self.raw.get("sampler", {})

    @property
    def limits(self):
        return self.raw.get("limits", {})

    @property
    def outputs(self):
        return self.raw.get("outputs", {})

    @property
    def expect(self):
        return self.raw.get("expect", {})

    def to_dict(self):
        return canonical(self.raw)

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def canonical(raw):
    return json.loads(json.dumps(raw, sort_keys=True))


def parse(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = sorted(set(raw) - TOP_LEVEL)
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {unknown}", field=unknown[0])
    name = str(_req(raw, "name", ""))
    cs = _req(raw, "constants", "")
    constants = Constants(hbar=_num(_req(cs, "hbar", "constants"), "constants.hbar", True),
                          c=_num(_req(cs, "c", "constants"), "constants.c", True))
    plist = _req(raw, "particles", "")
    if not isinstance(plist, list) or not plist:
        raise ScenarioError("particles must be a non-empty list", field="particles")
    particles = []
    for i, p in enumerate(plist):
        path = f"particles[{i}]"
        particles.append(ParticleParams(_num(_req(p, "mass", path), path + ".mass", True),
                                        _num(p.get("charge", 0.0), path + ".charge")))

    wf = _req(raw, "wavefunction", "")
    kind = wf.get("kind", "relativistic")
    try:
        if kind == "relativistic":
            if "packet" in wf:
                pk = wf["packet"]
                if len(particles) != 1:
                    raise ScenarioError("packet wave functions are single-particle", field="wavefunction.packet")
                psi = gaussian_packet(pk["center_k"], _num(_req(pk, "width", "wavefunction.packet"),
                                                           "wavefunction.packet.width", True),
                                      int(_req(pk, "n_modes", "wavefunction.packet")), particles[0], constants)
            else:
                psi = from_term_specs(_req(wf, "terms", "wavefunction"), particles, constants)
            if raw.get("gauge"):
                from .wavefunction import gauge_transform
                psi = gauge_transform(psi, parse_gauge(raw["gauge"], "gauge"))
        elif kind == "nonrelativistic":
            terms = _req(wf, "terms", "wavefunction")
            coefs, ks = [], []
            for j, t in enumerate(terms):
                c = t.get("coefficient", [1.0, 0.0])
                coefs.append(complex(c[0], c[1] if len(c) > 1 else 0.0))
                row = [None] * len(particles)
                for m in t["modes"]:
                    row[int(m.get("particle", 0))] = list(np.atleast_1d(m["k"]))
                if any(r is None for r in row):
                    raise ScenarioError(f"term {j} misses a particle", field=f"wavefunction.terms[{j}]")
                ks.append(row)
            psi = NRWaveFunction(coefs, ks, particles, constants, wf.get("potentials"))
        else:
            raise ScenarioError(f"unknown wave function kind {kind!r}", field="wavefunction.kind")
    except ScenarioError:
        raise
    except (ConfigurationError, KeyError, TypeError, IndexError) as exc:
        raise ScenarioError(f"invalid wave function: {exc}", field="wavefunction") from exc

    try:
        fld = parse_field(raw.get("field"))
    except ConfigurationError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), field="field") from exc

    initial = raw.get("initial")
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        want = psi.spatial_dim + (1 if kind == "relativistic" else 0)
        if initial.shape != (len(particles), want):
            raise ScenarioError(f"initial must have shape ({len(particles)}, {want}), got {initial.shape}",
                                field="initial")

    off = raw.get("offsets", {})
    offsets = TemporalOffsets(off.get("deltas", [0.0] * len(particles)), float(off.get("epsilon_clock", 0.0)))
    if len(offsets.deltas) != len(particles):
        raise ScenarioError("need one delta per particle", field="offsets.deltas")

    ig = raw.get("integrator", {})
    try:
        d_sigma = _num(ig.get("d_sigma", 0.01), "integrator.d_sigma", True)
        if "sigma_span" in ig:
            n_steps = int(round(_num(ig["sigma_span"], "integrator.sigma_span") / d_sigma))
        else:
            n_steps = int(ig.get("n_steps", 100))
        integ = IntegratorConfig(d_sigma, n_steps, ig.get("method", "rk4"), ig.get("node_policy", "halt"))
    except ConfigurationError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), field="integrator") from exc

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("seed must be an integer", field="seed")

    box = None
    bspec = raw.get("sampler", {}).get("box")
    if bspec is not None:
        try:
            if bspec.get("kind") == "two_mode":
                box = two_mode_box(psi, bspec.get("x_periods", 1), bspec.get("ct_extent"),
                                   bspec.get("ct_lower", 0.0), bspec.get("x_lower", 0.0))
            else:
                box = SamplingBox(_req(bspec, "lower", "sampler.box"), _req(bspec, "upper", "sampler.box"),
                                  {int(k): v for k, v in bspec.get("wraps", {}).items()})
        except ConfigurationError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc), field="sampler.box") from exc

    return Scenario(copy.deepcopy(raw), name, constants, particles, psi, kind, fld, initial,
                    offsets, integ, seed, box)


def loads(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return parse(raw)


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def load_raw(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc


def _literal(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``dotted.path=value`` overrides; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for ov in overrides or ():
        if "=" not in ov:
            raise ScenarioError(f"override {ov!r} is not key=value")
        key, val = ov.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            else:
                node = node.setdefault(p, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = _literal(val)
        else:
            node[last] = _literal(val)
    return raw


def bundled(name=None):
    """Path of a bundled scenario, or all of them when name is None."""
    if name is None:
        return sorted(BUNDLED_DIR.glob("*.json"))
    p = BUNDLED_DIR / (name if name.endswith(".json") else name + ".json")
    if not p.exists():
        raise ConfigurationError(f"no bundled scenario {name!r}")
    return p
