"""Declarative experiment description and its JSON form.

Example document::

    {
      "pump": {"pulse_fwhm_s": 3e-10, "bin_separation_s": 1.25e-9,
               "repetition_rate_hz": 1.6e8, "mean_pairs_per_double_pulse": 0.05},
      "source": {"coherence_time_s": 1.52e-10},
      "state": [0.7071067811865476, 0, 0, 0, 0, 0, 0.7071067811865476, 0],
      "umzi_signal": {"delay_s": 1.25e-9, "phase_rad": 0.0},
      "umzi_idler": {"delay_s": 1.25e-9, "phase_rad": 0.0},
      "detectors": {"default": {"efficiency": 0.9, "dark_rate_hz": 30}},
      "duration_s": 10, "seed": 42, "clock": "conditional"
    }

``state`` is either eight numbers (re, im of the amplitudes of ee, el, le,
ll, interleaved) or ``{"density_re": 4x4, "density_im": 4x4}``.  Detector
entries are keyed by channel name; ``"default"`` fills unlisted channels.
Omit both UMZIs for a signal/idler correlation run (channels SIG, IDL).

Defaults that are not measured values: pulse_delay_s 1 ns, jitter 30 ps,
dead time 20 ns, path efficiency 1.
"""
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .tagstream import DEFAULT_CHANNELS


@dataclass(frozen=True)
class PumpConfig:
    pulse_fwhm: float = 300e-12
    bin_separation: float = 1.25e-9
    repetition_rate: float = 160e6
    mean_pairs: float = 0.05          # per double pulse
    pulse_smear: bool = True          # Gaussian emission-time spread, sigma = fwhm / 2.355
    pulse_delay: float = 1e-9         # clock tag -> early pulse

    @property
    def period(self):
        return 1.0 / self.repetition_rate

    @property
    def smear_sigma(self):
        return self.pulse_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0))) if self.pulse_smear else 0.0

    def validate(self, path="pump"):
        if not self.pulse_fwhm > 0:
            raise ConfigError("must be positive", f"{path}.pulse_fwhm_s")
        if not self.bin_separation > self.pulse_fwhm:
            raise ConfigError("bin separation must exceed the pulse width", f"{path}.bin_separation_s")
        if not self.repetition_rate > 0:
            raise ConfigError("must be positive", f"{path}.repetition_rate_hz")
        if not self.period > 2 * self.bin_separation:
            raise ConfigError("pump period must exceed twice the bin separation", f"{path}.repetition_rate_hz")
        if not self.mean_pairs >= 0:
            raise ConfigError("must be non-negative", f"{path}.mean_pairs_per_double_pulse")
        if self.pulse_delay < 0:
            raise ConfigError("must be non-negative", f"{path}.pulse_delay_s")


@dataclass(frozen=True)
class SourceConfig:
    coherence_time: float = 152e-12   # cavity photon lifetime per photon

    def validate(self, path="source"):
        if not self.coherence_time > 0:
            raise ConfigError("must be positive", f"{path}.coherence_time_s")


class TimeBinState:
    """Two-photon time-bin state over the basis (ee, el, le, ll)."""

    BASIS = ("ee", "el", "le", "ll")

    def __init__(self, density):
        rho = np.asarray(density, dtype=complex)
        if rho.shape != (4, 4):
            raise ConfigError("density matrix must be 4x4", "state")
        if not np.allclose(rho, rho.conj().T, atol=1e-9):
            raise ConfigError("density matrix must be Hermitian", "state")
        if abs(np.trace(rho).real - 1.0) > 1e-9:
            raise ConfigError("density matrix must have unit trace", "state")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ConfigError("density matrix must be positive semidefinite", "state")
        self.density = rho
        self.amplitudes = None

    @classmethod
    def pure(cls, amplitudes):
        psi = np.asarray(amplitudes, dtype=complex)
        if psi.shape != (4,):
            raise ConfigError("need four amplitudes", "state")
        if abs(np.vdot(psi, psi).real - 1.0) > 1e-9:
            raise ConfigError("amplitudes must be normalised", "state")
        st = cls(np.outer(psi, psi.conj()))
        st.amplitudes = psi
        return st

    @classmethod
    def phi_plus(cls, theta=0.0):
        """(|ee> + e^{i theta} |ll>) / sqrt(2)."""
        return cls.pure(np.array([1, 0, 0, np.exp(1j * theta)]) / math.sqrt(2))

    @classmethod
    def dephased_phi_plus(cls, visibility, theta=0.0):
        """Phi+ with its ee/ll coherence reduced to ``visibility``."""
        if not 0.0 <= visibility <= 1.0:
            raise ConfigError("visibility must lie in [0, 1]", "state")
        rho = np.zeros((4, 4), complex)
        rho[0, 0] = rho[3, 3] = 0.5
        rho[0, 3] = 0.5 * visibility * np.exp(-1j * theta)
        rho[3, 0] = np.conj(rho[0, 3])
        return cls(rho)

    @property
    def is_pure(self):
        return self.amplitudes is not None

    def to_json(self):
        if self.is_pure:
            return [float(v) for a in self.amplitudes for v in (a.real, a.imag)]
        return {"density_re": self.density.real.tolist(), "density_im": self.density.imag.tolist()}

    @classmethod
    def from_json(cls, obj, path="state"):
        if isinstance(obj, list):
            if len(obj) != 8 or not all(isinstance(v, (int, float)) for v in obj):
                raise ConfigError("expected 8 numbers (re, im of ee, el, le, ll)", path)
            v = np.asarray(obj, float)
            return cls.pure(v[0::2] + 1j * v[1::2])
        if isinstance(obj, dict) and set(obj) == {"density_re", "density_im"}:
            try:
                rho = np.asarray(obj["density_re"], float) + 1j * np.asarray(obj["density_im"], float)
            except (TypeError, ValueError):
                raise ConfigError("density entries must be numbers", path) from None
            return cls(rho)
        raise ConfigError("expected a list of 8 numbers or {density_re, density_im}", path)


@dataclass(frozen=True)
class UMZIConfig:
    delay: float = 1.25e-9
    phase: float = 0.0
    transmittance: float = 1.0
    splitting_ratio: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))

    def validate(self, path="umzi"):
        if not self.delay > 0:
            raise ConfigError("must be positive", f"{path}.delay_s")
        if not 0 < self.transmittance <= 1:
            raise ConfigError("must lie in (0, 1]", f"{path}.transmittance")
        if not 0 < self.splitting_ratio < 1:
            raise ConfigError("must lie in (0, 1)", f"{path}.splitting_ratio")


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.9
    dark_rate: float = 30.0
    jitter_sigma: float = 30e-12
    dead_time: float = 20e-9
    path_efficiency: float = 1.0      # collapsed coupling/filter loss before the detector
    delay: float = 0.0                # fixed cable delay

    def validate(self, path="detector"):
        if not 0 <= self.efficiency <= 1:
            raise ConfigError("must lie in [0, 1]", f"{path}.efficiency")
        if not 0 <= self.path_efficiency <= 1:
            raise ConfigError("must lie in [0, 1]", f"{path}.path_efficiency")
        for name in ("dark_rate", "jitter_sigma", "dead_time", "delay"):
            if getattr(self, name) < 0:
                raise ConfigError("must be non-negative", f"{path}.{_JSON_NAMES['detector'][name]}")


@dataclass
class ExperimentConfig:
    pump: PumpConfig = field(default_factory=PumpConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    state: TimeBinState = field(default_factory=TimeBinState.phi_plus)
    umzi_signal: UMZIConfig = None
    umzi_idler: UMZIConfig = None
    detectors: dict = field(default_factory=dict)
    duration: float = 1.0
    seed: int = 0
    clock: str = "all"                 # "all" or "conditional"
    channels: dict = field(default_factory=lambda: dict(DEFAULT_CHANNELS))
    segment_periods: int = 1 << 24

    @property
    def mode(self):
        return "correlation" if self.umzi_signal is None else "entanglement"

    @property
    def photon_channels(self):
        return ("A1", "A2", "B1", "B2") if self.mode == "entanglement" else ("SIG", "IDL")

    def detector(self, name):
        return self.detectors.get(name) or self.detectors.get("default") or DetectorConfig()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        self.pump.validate()
        self.source.validate()
        if (self.umzi_signal is None) != (self.umzi_idler is None):
            raise ConfigError("give both UMZIs or neither", "umzi_idler" if self.umzi_idler is None else "umzi_signal")
        for side, u in (("umzi_signal", self.umzi_signal), ("umzi_idler", self.umzi_idler)):
            if u is None:
                continue
            u.validate(side)
            if abs(u.delay - self.pump.bin_separation) > 0.5e-12:
                raise ConfigError(f"UMZI delay {u.delay!r} s does not match the pump bin separation "
                                  f"{self.pump.bin_separation!r} s", f"{side}.delay_s")
        for name, det in self.detectors.items():
            det.validate(f"detectors.{name}")
            if name != "default" and name not in self.channels:
                raise ConfigError("detector for an undeclared channel", f"detectors.{name}")
        for ch in ("CLOCK",) + self.photon_channels:
            if ch not in self.channels:
                raise ConfigError(f"channel map lacks {ch}", "channels")
        if len(set(self.channels.values())) != len(self.channels):
            raise ConfigError("channel ids must be unique", "channels")
        if any(not 0 <= v < 256 for v in self.channels.values()):
            raise ConfigError("channel ids must fit in a byte", "channels")
        if not self.duration >= 0:
            raise ConfigError("must be non-negative", "duration_s")
        if self.clock not in ("all", "conditional"):
            raise ConfigError("must be 'all' or 'conditional'", "clock")
        if int(self.segment_periods) < 1:
            raise ConfigError("must be positive", "segment_periods")
        return self

    # JSON ------------------------------------------------------------------

    def to_json(self):
        doc = {
            "pump": _dump(self.pump, "pump"),
            "source": _dump(self.source, "source"),
            "state": self.state.to_json(),
            "detectors": {k: _dump(v, "detector") for k, v in self.detectors.items()},
            "duration_s": self.duration,
            "seed": self.seed,
            "clock": self.clock,
            "channels": dict(self.channels),
            "segment_periods": self.segment_periods,
        }
        if self.umzi_signal is not None:
            doc["umzi_signal"] = _dump(self.umzi_signal, "umzi")
            doc["umzi_idler"] = _dump(self.umzi_idler, "umzi")
        return doc

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("top level must be an object", "$")
        allowed = {"pump", "source", "state", "umzi_signal", "umzi_idler", "detectors",
                   "duration_s", "seed", "clock", "channels", "segment_periods", "comment"}
        extra = set(doc) - allowed
        if extra:
            raise ConfigError(f"unknown field(s) {sorted(extra)}", "$")
        kw = {}
        if "pump" in doc:
            kw["pump"] = _load(PumpConfig, doc["pump"], "pump")
        if "source" in doc:
            kw["source"] = _load(SourceConfig, doc["source"], "source")
        if "state" in doc:
            kw["state"] = TimeBinState.from_json(doc["state"])
        for side in ("umzi_signal", "umzi_idler"):
            if doc.get(side) is not None:
                kw[side] = _load(UMZIConfig, doc[side], side)
        if "detectors" in doc:
            if not isinstance(doc["detectors"], dict):
                raise ConfigError("must be an object keyed by channel", "detectors")
            kw["detectors"] = {k: _load(DetectorConfig, v, f"detectors.{k}")
                               for k, v in doc["detectors"].items()}
        if "duration_s" in doc:
            kw["duration"] = _number(doc["duration_s"], "duration_s")
        if "seed" in doc:
            if not isinstance(doc["seed"], int) or doc["seed"] < 0:
                raise ConfigError("must be a non-negative integer", "seed")
            kw["seed"] = doc["seed"]
        if "clock" in doc:
            kw["clock"] = doc["clock"]
        if "channels" in doc:
            ch = doc["channels"]
            if not isinstance(ch, dict) or not all(isinstance(v, int) for v in ch.values()):
                raise ConfigError("must map channel names to integer ids", "channels")
            kw["channels"] = dict(ch)
        if "segment_periods" in doc:
            if not isinstance(doc["segment_periods"], int):
                raise ConfigError("must be an integer", "segment_periods")
            kw["segment_periods"] = doc["segment_periods"]
        return cls(**kw).validate()

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
        return cls.from_json(doc)


_JSON_NAMES = {
    "pump": {"pulse_fwhm": "pulse_fwhm_s", "bin_separation": "bin_separation_s",
             "repetition_rate": "repetition_rate_hz", "mean_pairs": "mean_pairs_per_double_pulse",
             "pulse_smear": "pulse_smear", "pulse_delay": "pulse_delay_s"},
    "source": {"coherence_time": "coherence_time_s"},
    "umzi": {"delay": "delay_s", "phase": "phase_rad", "transmittance": "transmittance",
             "splitting_ratio": "splitting_ratio"},
    "detector": {"efficiency": "efficiency", "dark_rate": "dark_rate_hz",
                 "jitter_sigma": "jitter_sigma_s", "dead_time": "dead_time_s",
                 "path_efficiency": "path_efficiency", "delay": "delay_s"},
}
_KIND = {PumpConfig: "pump", SourceConfig: "source", UMZIConfig: "umzi", DetectorConfig: "detector"}


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError("must be a finite number", path)
    return float(v)


def _dump(obj, kind):
    names = _JSON_NAMES[kind]
    return {names[f.name]: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def _load(cls, obj, path):
    if not isinstance(obj, dict):
        raise ConfigError("must be an object", path)
    names = _JSON_NAMES[_KIND[cls]]
    inverse = {v: k for k, v in names.items()}
    extra = set(obj) - set(inverse)
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)}", path)
    kw = {}
    for key, value in obj.items():
        attr = inverse[key]
        if attr == "pulse_smear":
            if not isinstance(value, bool):
                raise ConfigError("must be true or false", f"{path}.{key}")
            kw[attr] = value
        else:
            kw[attr] = _number(value, f"{path}.{key}")
    return cls(**kw)
