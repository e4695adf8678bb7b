"""Run configuration: an INI file, then ``section.key=value`` overrides.

Precedence, lowest first: defaults, config file, ``CIP_OUTPUT_DIR`` (output
directory only), command-line overrides.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .model import CarlemanParams, ForwardGrid, InversionGrid, TEST_IDS
from .preprocess import CALIBRATION, TargetContext

ENV_OUTPUT_DIR = "CIP_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "none") else int(s)


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _opt_str(s: str):
    return None if s.strip().lower() in ("", "none") else s.strip()


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace("[", "").replace("]", "").split(",") if v.strip())


def _opt_floats(s: str):
    return None if s.strip().lower() in ("", "none") else _floats(s)


def _f(section, default, parse, help=""):
    return field(default=default, metadata=dict(section=section, parse=parse, help=help))


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs; attribute names match the INI keys."""

    test: int | None = _f("problem", None, _opt_int, "numerical test id 1-4")
    profile: str | None = _f("problem", None, _opt_str, "CSV with columns x,c (instead of test)")
    cmax: float = _f("problem", 16.0, float, "upper bound on c")

    a: float = _f("forward", 5.0, float)
    T: float = _f("forward", 6.0, float)
    Nx: int = _f("forward", 3001, int)
    Nt: int = _f("forward", 301, int)

    eps: float = _f("inversion", 1.0 / 150.0, float, "sampling point; snapped to a forward node")
    xmax: float = _f("inversion", 3.0, float)
    T_inv: float | None = _f("inversion", None, _opt_float, "time extent; default T - eps to the dt grid")
    Mx: int = _f("inversion", 899, int)
    Mt: int = _f("inversion", 300, int)

    lam: float = _f("carleman", 2.0, float)
    alpha: float = _f("carleman", 0.3, float)
    beta: float = _f("carleman", 1e-11, float)
    n_iters: int = _f("carleman", 10, int)
    tol: float = _f("carleman", 1e-3, float, "stop when the consecutive relative error is below")
    clamp: bool = _f("carleman", True, _bool)

    delta: float = _f("noise", 0.05, float)
    seed: int = _f("noise", 0, int)

    solver: str = _f("solver", "direct", str, "direct | gd | gp")
    eta: float = _f("solver", 0.1, float)
    k_max: int = _f("solver", 1000, int)
    R: float | None = _f("solver", None, _opt_float, "ball size for gp; default 10 |F|")

    reg: float = _f("preprocess", 1e-4, float, "Tikhonov weight for g0'")
    t_window: float = _f("preprocess", 0.26, float)

    medium: str = _f("experiment", "air", str)
    c_bckgr: tuple[float, ...] = _f("experiment", (1.0,), _floats, "number or lo,hi")
    domain: tuple[float, ...] | None = _f("experiment", None, _opt_floats, "lo,hi")
    window: float = _f("experiment", 0.5, float)
    baseline: float = _f("experiment", 0.5, float)
    envelope: bool = _f("experiment", True, _bool)

    output: str = _f("output", "out", str)

    def __post_init__(self):
        self.validate()

    # --- derived objects ---------------------------------------------------

    def forward_grid(self) -> ForwardGrid:
        return ForwardGrid(self.a, self.T, self.Nx, self.Nt)

    def inversion_T(self) -> float:
        if self.T_inv is not None:
            return self.T_inv
        dt = self.T / (self.Nt - 1)
        return (self.Nt - 1 - max(1, int(-(-self.eps // dt)))) * dt

    def inversion_grid(self, eps: float | None = None) -> InversionGrid:
        return InversionGrid(self.eps if eps is None else eps, self.xmax, self.inversion_T(), self.Mx, self.Mt)

    def params(self) -> CarlemanParams:
        return CarlemanParams(self.lam, self.alpha, self.beta, self.n_iters)

    def target_context(self) -> TargetContext:
        bg = self.c_bckgr[0] if len(self.c_bckgr) == 1 else (self.c_bckgr[0], self.c_bckgr[1])
        return TargetContext(bg, (self.domain[0], self.domain[1]), self.medium)

    def solver_options(self) -> dict:
        return dict(eta=self.eta, k_max=self.k_max, R=self.R)

    # --- validation --------------------------------------------------------

    def validate(self):
        def bad(name, msg):
            sec = next(f.metadata["section"] for f in fields(self) if f.name == name)
            raise ConfigError(f"[{sec}] {name}: {msg}")

        if self.test is not None and self.test not in TEST_IDS:
            bad("test", f"must be one of {TEST_IDS}, got {self.test}")
        if self.test is not None and self.profile is not None:
            bad("profile", "give either test or profile, not both")
        if not self.cmax > 1:
            bad("cmax", "must exceed 1")
        for name, obj in (("Nx", self.forward_grid), ("Mx", self.inversion_grid), ("lam", self.params)):
            try:
                obj()
            except ValueError as exc:
                bad(name, str(exc))
        if not self.eps < self.a:
            bad("eps", "must lie inside the forward domain")
        if self.inversion_T() + self.eps > self.T + 1e-9:
            bad("T_inv", f"T_inv + eps = {self.inversion_T() + self.eps:.6g} exceeds the data length T = {self.T}")
        if self.Mx < 4 or self.Mt < 3:
            bad("Mx", "inversion grid needs Mx >= 4 and Mt >= 3")
        if not self.tol > 0:
            bad("tol", "must be positive")
        if self.delta < 0:
            bad("delta", "must be nonnegative")
        if self.solver not in ("direct", "gd", "gp"):
            bad("solver", f"must be direct, gd or gp, got {self.solver!r}")
        if not 0 < self.eta < 1:
            bad("eta", "must lie in (0, 1)")
        if self.R is not None and not self.R > 0:
            bad("R", "must be positive")
        if not self.reg > 0:
            bad("reg", "must be positive")
        if self.medium not in CALIBRATION:
            bad("medium", f"must be one of {sorted(CALIBRATION)}")
        if len(self.c_bckgr) not in (1, 2) or min(self.c_bckgr) <= 0:
            bad("c_bckgr", "must be a positive number or a lo,hi pair")
        if self.domain is not None and (len(self.domain) != 2 or not self.domain[0] < self.domain[1]):
            bad("domain", "must be a lo,hi pair with lo < hi")
        if not self.window > 0:
            bad("window", "must be positive")


FIELDS = {f.name: f for f in fields(RunConfig)}
SECTIONS = sorted({f.metadata["section"] for f in FIELDS.values()})


def _parse_value(name: str, raw: str):
    f = FIELDS[name]
    try:
        return f.metadata["parse"](raw)
    except ValueError as exc:
        raise ConfigError(f"[{f.metadata['section']}] {name}: {exc}") from None


def _apply(values: dict, section: str, key: str, raw: str, origin: str):
    if key not in FIELDS or FIELDS[key].metadata["section"] != section:
        known = [n for n, f in FIELDS.items() if f.metadata["section"] == section]
        if not known:
            raise ConfigError(f"{origin}: unknown section [{section}]; known sections: {', '.join(SECTIONS)}")
        raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]; known keys: {', '.join(known)}")
    values[key] = _parse_value(key, raw)


def load_config(path=None, overrides: dict[str, str] | None = None, env=None) -> RunConfig:
    """Build a :class:`RunConfig`.

    ``overrides`` maps ``section.key`` (or a bare key) to a string value.
    """
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        path = Path(path)
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys such as Nx and T are case-sensitive
        try:
            with path.open() as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in cp.sections():
            for key, raw in cp.items(section):
                _apply(values, section, key, raw, str(path))
    if env.get(ENV_OUTPUT_DIR):
        values["output"] = env[ENV_OUTPUT_DIR]
    for spec, raw in (overrides or {}).items():
        if "." in spec:
            section, key = spec.split(".", 1)
        elif spec in FIELDS:
            section, key = FIELDS[spec].metadata["section"], spec
        else:
            raise ConfigError(f"override {spec!r}: unknown key")
        _apply(values, section, key, raw, "override")
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def to_ini(cfg: RunConfig) -> str:
    """Serialize a config back to INI text (round-trips through :func:`load_config`)."""
    out = []
    for section in ["problem", "forward", "inversion", "carleman", "noise", "solver", "preprocess", "experiment", "output"]:
        out.append(f"[{section}]")
        for f in fields(cfg):
            if f.metadata["section"] != section:
                continue
            v = getattr(cfg, f.name)
            if v is None:
                s = "none"
            elif isinstance(v, tuple):
                s = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v).lower() if isinstance(v, bool) else str(v)
            out.append(f"{f.name} = {s}")
        out.append("")
    return "\n".join(out)
