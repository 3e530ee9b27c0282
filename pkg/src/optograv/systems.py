"""Physical platforms: SI parameter records, coupling constants and sensitivity reports.

Presets live as versioned JSON files in ``optograv/presets``. A directory
named by ``OPTOGRAV_PRESET_DIR`` is searched first, so users can add or
shadow platforms without touching the package.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .constants import EPSILON_0, HBAR, SPEED_OF_LIGHT
from .errors import ConfigError
from .evolution import DimensionlessParams
from .metrology import FisherResult, qfi_closed_form, qfi_heisenberg

PRESET_ENV = "OPTOGRAV_PRESET_DIR"
PRESET_VERSION = 1


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(name, f"must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class FabryPerot:
    """Cavity of length ``length`` (m) with a mechanical end mirror."""

    length: float
    kind: str = field(default="fabry_perot", init=False)

    def __post_init__(self):
        _positive("platform.length", self.length)


@dataclass(frozen=True)
class Levitated:
    """Dielectric particle of volume ``volume`` in a cavity of mode volume ``cavity_mode_volume``."""

    volume: float
    cavity_mode_volume: float
    permittivity: float
    wavelength: float
    kind: str = field(default="levitated", init=False)

    def __post_init__(self):
        for name in ("volume", "cavity_mode_volume", "permittivity", "wavelength"):
            _positive(f"platform.{name}", getattr(self, name))

    @property
    def polarizability(self) -> float:
        """``3 V eps0 (eps - 1) / (eps + 2)``."""
        e = self.permittivity
        return 3.0 * self.volume * EPSILON_0 * (e - 1.0) / (e + 2.0)


@dataclass(frozen=True)
class BEC:
    """Atomic ensemble whose collective motion is the oscillator.

    ``single_atom_coupling`` and ``detuning`` are angular frequencies;
    ``laser_wavevector`` is in m^-1. The oscillator mass used in the coupling
    is the ``mass`` field of :class:`PhysicalParams` (the collective mass).
    """

    atom_count: float
    single_atom_coupling: float
    detuning: float
    laser_wavevector: float
    single_atom_mass: float
    kind: str = field(default="bec", init=False)

    def __post_init__(self):
        for name in ("atom_count", "single_atom_coupling", "detuning", "laser_wavevector", "single_atom_mass"):
            _positive(f"platform.{name}", getattr(self, name))


Platform = Union[FabryPerot, Levitated, BEC]
_PLATFORMS = {"fabry_perot": FabryPerot, "levitated": Levitated, "bec": BEC}


@dataclass(frozen=True)
class PhysicalParams:
    mass: float
    omega_m: float
    omega_c: float
    theta: float
    photon_number: float
    platform: Platform
    name: str = ""

    def __post_init__(self):
        for f in ("mass", "omega_m", "omega_c", "photon_number"):
            _positive(f, getattr(self, f))
        if not (math.isfinite(self.theta) and 0.0 <= self.theta <= math.pi / 2 + 1e-15):
            raise ConfigError("theta", f"must lie in [0, pi/2], got {self.theta}")

    def replace(self, **changes) -> "PhysicalParams":
        data = {k: getattr(self, k) for k in ("mass", "omega_m", "omega_c", "theta", "photon_number", "platform", "name")}
        data.update(changes)
        return PhysicalParams(**data)

    def to_dict(self) -> dict:
        plat = {k: v for k, v in asdict(self.platform).items()}
        return {
            "name": self.name,
            "version": PRESET_VERSION,
            "mass": self.mass,
            "omega_m": self.omega_m,
            "omega_c": self.omega_c,
            "theta": self.theta,
            "photon_number": self.photon_number,
            "platform": plat,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        version = data.get("version", PRESET_VERSION)
        if version != PRESET_VERSION:
            raise ConfigError("version", f"unsupported preset version {version!r}")
        plat = dict(data.get("platform") or {})
        kind = plat.pop("kind", None)
        if kind not in _PLATFORMS:
            raise ConfigError("platform.kind", f"must be one of {sorted(_PLATFORMS)}, got {kind!r}")
        try:
            platform = _PLATFORMS[kind](**plat)
            return cls(
                mass=float(data["mass"]),
                omega_m=float(data["omega_m"]),
                omega_c=float(data["omega_c"]),
                theta=float(data.get("theta", 0.0)),
                photon_number=float(data["photon_number"]),
                platform=platform,
                name=str(data.get("name", "")),
            )
        except KeyError as exc:
            raise ConfigError(exc.args[0], "missing from preset") from None
        except TypeError as exc:
            raise ConfigError("platform", str(exc)) from None


def preset_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(PRESET_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(Path(str(resources.files("optograv") / "presets")))
    return dirs


def available_presets() -> list[str]:
    names = set()
    for d in preset_dirs():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.json"))
    return sorted(names)


def load_preset(name: str) -> PhysicalParams:
    """Load ``<name>.json`` from the first preset directory that has it."""
    for d in preset_dirs():
        path = d / f"{name}.json"
        if path.is_file():
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError("preset", f"{path}: {exc}") from None
            data.setdefault("name", name)
            return PhysicalParams.from_dict(data)
    raise ConfigError("preset", f"no preset named {name!r}; available: {', '.join(available_presets())}")


def _zero_point(mass: float, omega_m: float) -> float:
    """Oscillator zero-point length ``sqrt(hbar / (2 m omega_m))``."""
    return math.sqrt(HBAR / (2.0 * mass * omega_m))


def coupling(params: PhysicalParams) -> tuple[float, float]:
    """Optomechanical coupling ``k`` (rad/s) and ``kbar = k / omega_m``."""
    p, x0 = params.platform, _zero_point(params.mass, params.omega_m)
    if isinstance(p, FabryPerot):
        k = params.omega_c / p.length * x0
    elif isinstance(p, Levitated):
        k_c = 2.0 * math.pi / p.wavelength
        k = p.polarizability / (4.0 * p.cavity_mode_volume * EPSILON_0) * x0 * k_c * params.omega_c
    elif isinstance(p, BEC):
        k = math.sqrt(p.atom_count) * p.single_atom_coupling**2 * p.laser_wavevector / p.detuning * x0
    else:
        raise ConfigError("platform", f"unknown platform {type(p).__name__}")
    return k, k / params.omega_m


def gbar_of(params: PhysicalParams, g: float) -> float:
    """``cos(theta) g sqrt(m / (2 hbar omega_m^3))``."""
    return math.cos(params.theta) * g * math.sqrt(params.mass / (2.0 * HBAR * params.omega_m**3))


def dimensionless(params: PhysicalParams, g: float = 9.81, beta: complex = 0.0) -> DimensionlessParams:
    """Dimensionless parameters for a platform with a real coherent cavity input."""
    _, kbar = coupling(params)
    return DimensionlessParams(kbar=kbar, gbar=gbar_of(params, g), alpha=math.sqrt(params.photon_number), beta=beta)


def cycle_time(params: PhysicalParams) -> float:
    """Seconds per measurement cycle, taken as ``1 / omega_m``."""
    return 1.0 / params.omega_m


@dataclass(frozen=True)
class SensitivityReport:
    kbar: float
    fisher: FisherResult
    delta_g: float
    delta_g_per_root_hz: float
    cycle_time: float
    label: str = ""

    def row(self) -> dict:
        return {
            "label": self.label,
            "kbar": self.kbar,
            "fisher": self.fisher.value,
            "delta_g": self.delta_g,
            "delta_g_per_root_hz": self.delta_g_per_root_hz,
            "cycle_time": self.cycle_time,
        }


def _report(kbar: float, fisher: FisherResult, cycle: float, label: str) -> SensitivityReport:
    dg = fisher.delta_g
    return SensitivityReport(kbar, fisher, dg, dg * math.sqrt(cycle), cycle, label)


def ideal_sensitivity(params: PhysicalParams) -> SensitivityReport:
    """Closed-form QFI at the decoupling time and the resulting single-shot bound on ``g``."""
    _, kbar = coupling(params)
    dims = DimensionlessParams(kbar=kbar, gbar=0.0, alpha=math.sqrt(params.photon_number), beta=0.0)
    fisher = qfi_closed_form(dims, physical=params)
    return _report(kbar, fisher, cycle_time(params), params.name or params.platform.kind)


def heisenberg_sensitivity(params: PhysicalParams, n_photons: int = 1) -> SensitivityReport:
    """Bound for the cavity input ``(|0> + |n>)/sqrt2`` instead of a coherent state."""
    _, kbar = coupling(params)
    dims = DimensionlessParams(kbar=kbar, gbar=0.0, alpha=0.0, beta=0.0)
    fisher = qfi_heisenberg(dims, n_photons, physical=params)
    return _report(kbar, fisher, cycle_time(params), f"{params.name or params.platform.kind} fock n={n_photons}")


@dataclass(frozen=True)
class RealisticReport:
    """Ideal and degraded sensitivities for a platform with cavity loss.

    ``assumed_retention`` is the fraction of the ideal Fisher information kept
    under loss. It is an input assumption, not a computed quantity.
    """

    ideal: SensitivityReport
    assumed_retention: float
    retained_delta_g: float
    retained_delta_g_per_root_hz: float
    kappa: float

    @property
    def kbar(self) -> float:
        return self.ideal.kbar


def realistic_scenario(retention: float = 0.1, preset: str = "realistic_fp") -> RealisticReport:
    """Fabry-Perot mirror with a 660 Hz cavity linewidth at ``kappa/omega_m = 0.1``.

    The retained rows scale the ideal Fisher information by ``retention``.
    """
    if not 0 < retention <= 1:
        raise ConfigError("retention", f"must lie in (0, 1], got {retention}")
    params = load_preset(preset)
    ideal = ideal_sensitivity(params)
    dg = ideal.delta_g / math.sqrt(retention)
    return RealisticReport(ideal, retention, dg, dg * math.sqrt(ideal.cycle_time), 0.1 * params.omega_m)


def atom_interferometry_qfi(n_photons: float, wavevector: float, flight_time: float) -> FisherResult:
    """``n^2 k_C^2 T^4`` for ``(|g> + e^{i n g k_C T^2}|e>)/sqrt2``, up to a geometric factor."""
    for name, v in (("n_photons", n_photons), ("wavevector", wavevector), ("flight_time", flight_time)):
        _positive(name, v)
    value = n_photons**2 * wavevector**2 * flight_time**4
    return FisherResult(value, value, 1.0, flight_time, note="order of magnitude")


@dataclass(frozen=True)
class Enhancement:
    ratio: float
    closed_form: float


def enhancement_factor(params: PhysicalParams, n_photons: float, flight_time: float | None = None) -> Enhancement:
    """Cavity QFI over atom-interferometer QFI with ``omega_m ~ 1/T`` and ``k_C = omega_C / c``.

    ``closed_form`` is ``c^2 / (n L^2 omega_m^2)``, which drops the numerical
    constants the ratio keeps.
    """
    if not isinstance(params.platform, FabryPerot):
        raise ConfigError("platform", "enhancement factor is defined for the Fabry-Perot platform")
    _positive("n_photons", n_photons)
    fp = params.replace(photon_number=n_photons, theta=0.0)
    cavity = ideal_sensitivity(fp).fisher.value
    T = flight_time if flight_time is not None else 1.0 / params.omega_m
    atom = atom_interferometry_qfi(n_photons, params.omega_c / SPEED_OF_LIGHT, T).value
    L = params.platform.length
    closed = SPEED_OF_LIGHT**2 / (n_photons * L**2 * params.omega_m**2)
    return Enhancement(cavity / atom, closed)


@dataclass(frozen=True)
class LiteratureRow:
    name: str
    delta_g: float
    delta_g_per_root_hz: float
    time: float
    time_label: str
    projected: bool = False


# Published gravimeter figures (time is the integration or cycle time in seconds)
LITERATURE = (
    LiteratureRow("LaCoste FG5-X", 1e-9, 1.5e-7, 6.25 * 3600, "6.25 h"),
    LiteratureRow("atom interferometer", 5e-9, 4.2e-8, 100.0, "100 s"),
    LiteratureRow("on-chip BEC", 7.8e-10, 5.3e-9, 100.0, "100 s"),
    LiteratureRow("optomechanical accelerometer", 3.10e-5, 9.81e-7, 1e-3, "1e-3 s"),
    LiteratureRow("magnetomechanical", 2.2e-7, 2.2e-9, 1e-4, "1e-4 s"),
    LiteratureRow("Fabry-Perot (projected)", 1e-15, 1e-16, 1e-3, "1e-3 s", True),
    LiteratureRow("levitated (projected)", 1e-15, 1e-16, 1e-2, "1e-2 s", True),
    LiteratureRow("cold atoms (projected)", 1e-10, 1e-11, 1e-2, "1e-2 s", True),
)

COMPUTED_PRESETS = ("fabry_perot", "levitated", "bec")


def comparison_table(presets=COMPUTED_PRESETS) -> list[dict]:
    """Literature rows as fixed constants followed by rows computed live from presets."""
    rows = [
        {"source": "literature", "name": r.name, "delta_g": r.delta_g,
         "delta_g_per_root_hz": r.delta_g_per_root_hz, "time": r.time, "kbar": math.nan}
        for r in LITERATURE
    ]
    for name in presets:
        rep = ideal_sensitivity(load_preset(name))
        rows.append({"source": "computed", "name": name, "delta_g": rep.delta_g,
                     "delta_g_per_root_hz": rep.delta_g_per_root_hz, "time": rep.cycle_time, "kbar": rep.kbar})
    return rows


def format_table(rows: list[dict]) -> str:
    """Aligned plain-text rendering of :func:`comparison_table`."""
    head = ("source", "name", "delta_g", "delta_g_per_root_hz", "time", "kbar")
    cells = [head] + [
        tuple(f"{r[k]:.3g}" if isinstance(r[k], float) else str(r[k]) for k in head) for r in rows
    ]
    widths = [max(len(c[i]) for c in cells) for i in range(len(head))]
    return "\n".join("  ".join(c[i].ljust(widths[i]) for i in range(len(head))).rstrip() for c in cells)


def unit_exponents() -> dict[str, np.ndarray]:
    """SI exponents ``(kg, m, s)`` of the quantities produced here, for dimensional audits."""
    return {
        "k": np.array([0, 0, -1]),
        "kbar": np.array([0, 0, 0]),
        "gbar": np.array([0, 0, 0]),
        "fisher": np.array([0, -2, 4]),
        "delta_g": np.array([0, 1, -2]),
        "delta_g_per_root_hz": np.array([0, 1, -1.5]),
        "cycle_time": np.array([0, 0, 1]),
    }
