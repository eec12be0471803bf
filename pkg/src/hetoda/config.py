"""Sectioned run configuration (``[section]`` / ``key = value``).

Example::

    [problem]
    r = 3
    n = 64
    mode = cyclic

    [phi]
    1 = 1
    2 = 2
    3 = 1+sin(2*pi*x)^2

    [a]
    1 = cos(2*pi*x)
    2 = -cos(2*pi*x)

In ``cyclic`` mode the ``[phi]`` keys are 1..r (Phi_i sits at (i+1, i), Phi_r at
(1, r)); in ``explicit`` mode keys are ``i,j``. A ``.im`` suffix gives the
imaginary part. ``[phi0]`` holds diagonal entries. Missing ``k`` entries
default to 1 and missing ``a`` entries to 0, except that when exactly one
``a`` entry is missing it is set to minus the sum of the others.

A field source is an expression, or ``@path.hef1`` / ``@path.hef1#p`` for
plane ``p`` (0-based) of a field file; relative paths resolve against the
config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fieldexpr
from .grid import PeriodicGrid, read_hef1
from .problem import HiggsProblem, ProblemError, cyclic_pairs, from_entries
from .solver import SolveOptions


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeSpec:
    directions: tuple[str, ...] = ()
    t_start: float = 0.0
    t_stop: float = 10.0
    t_count: int = 21

    def t_list(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_stop, self.t_count)


@dataclass(frozen=True)
class RunConfig:
    r: int
    n: int
    mode: str = "cyclic"
    phi: dict[str, str] = field(default_factory=dict)
    phi0: dict[str, str] = field(default_factory=dict)
    k: dict[str, str] = field(default_factory=dict)
    a: dict[str, str] = field(default_factory=dict)
    solver: SolveOptions = SolveOptions()
    initial: str | None = None
    probe: ProbeSpec = ProbeSpec()
    output: str = "hetoda_out"
    base_dir: str = "."

    # -- text form -----------------------------------------------------------

    def to_text(self) -> str:
        out = ["[problem]", f"r = {self.r}", f"n = {self.n}", f"mode = {self.mode}", ""]
        for name in ("phi", "phi0", "k", "a"):
            entries = getattr(self, name)
            if entries:
                out.append(f"[{name}]")
                out += [f"{key} = {entries[key]}" for key in sorted(entries, key=_entry_order)]
                out.append("")
        s = self.solver
        out += ["[solver]", f"tol = {s.tol!r}", f"max_iter = {s.max_iter}",
                f"divergence_radius = {s.divergence_radius!r}"]
        if self.initial:
            out.append(f"initial = {self.initial}")
        out.append("")
        if self.probe.directions:
            out.append("[probe]")
            out += [f"direction.{i + 1} = {d}" for i, d in enumerate(self.probe.directions)]
            out += [f"t_start = {self.probe.t_start!r}", f"t_stop = {self.probe.t_stop!r}",
                    f"t_count = {self.probe.t_count}", ""]
        out += ["[output]", f"dir = {self.output}", ""]
        return "\n".join(out)

    # -- problem construction --------------------------------------------------

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.n)

    def field(self, src: str, what: str) -> np.ndarray:
        src = src.strip()
        if src.startswith("@"):
            path, _, plane = src[1:].partition("#")
            full = Path(self.base_dir) / path
            try:
                planes = read_hef1(full)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"{what}: {exc}") from exc
            idx = int(plane) if plane else 0
            if not 0 <= idx < len(planes):
                raise ConfigError(f"{what}: plane {idx} not in {full}")
            if planes[idx].shape != self.grid.shape:
                raise ConfigError(f"{what}: {full} has n={planes.shape[-1]}, config has n={self.n}")
            return planes[idx]
        try:
            return fieldexpr.evaluate(fieldexpr.parse(src), self.grid)
        except (fieldexpr.ExprSyntaxError, fieldexpr.ExprDomainError) as exc:
            raise ConfigError(f"{what} = {src!r}: {exc}") from exc

    def _complex_entries(self, entries: dict[str, str], what: str) -> dict[str, tuple]:
        out = {}
        for key in entries:
            base = key[:-3] if key.endswith(".im") else key
            if base in out:
                continue
            re = self.field(entries[base], f"{what}[{base}]") if base in entries else np.zeros(self.grid.shape)
            im_key = base + ".im"
            im = self.field(entries[im_key], f"{what}[{im_key}]") if im_key in entries else np.zeros(self.grid.shape)
            out[base] = (re, im)
        return out

    def _per_index(self, entries: dict[str, str], what: str, default: float, fill_last: bool):
        r = self.r
        for key in entries:
            if not key.isdigit() or not 1 <= int(key) <= r:
                raise ConfigError(f"[{what}] key {key!r} is not an index 1..{r}")
        fields = {int(k): self.field(v, f"{what}{k}") for k, v in entries.items()}
        missing = [j for j in range(1, r + 1) if j not in fields]
        if fill_last and len(missing) == 1 and fields:
            fields[missing[0]] = -sum(fields.values())
        return [fields.get(j, np.full(self.grid.shape, default)) for j in range(1, r + 1)]

    def build_problem(self) -> HiggsProblem:
        r = self.r
        phi = self._complex_entries(self.phi, "phi")
        pairs = {}
        if self.mode == "cyclic":
            cyc = cyclic_pairs(r)
            for key, val in phi.items():
                if not key.isdigit() or not 1 <= int(key) <= r:
                    raise ConfigError(f"[phi] key {key!r}: cyclic mode takes indices 1..{r}")
                pairs[cyc[int(key) - 1]] = val
            pairs = {p: pairs[p] for p in cyc if p in pairs}
        elif self.mode == "explicit":
            for key, val in phi.items():
                try:
                    i, j = (int(s) for s in key.split(","))
                except ValueError:
                    raise ConfigError(f"[phi] key {key!r}: explicit mode takes 'i,j'") from None
                pairs[(i, j)] = val
        else:
            raise ConfigError(f"unknown mode {self.mode!r} (cyclic or explicit)")
        phi0 = {}
        for key, val in self._complex_entries(self.phi0, "phi0").items():
            if not key.isdigit():
                raise ConfigError(f"[phi0] key {key!r} is not an index")
            phi0[int(key)] = val
        k = self._per_index(self.k, "k", 1.0, fill_last=False)
        a = self._per_index(self.a, "a", 0.0, fill_last=True)
        try:
            return from_entries(r, self.grid, pairs, k, a, phi0)
        except (ProblemError, ValueError, IndexError) as exc:
            raise ConfigError(str(exc)) from exc

    def initial_guess(self) -> np.ndarray | None:
        if not self.initial:
            return None
        planes = read_hef1(Path(self.base_dir) / self.initial)
        if planes.shape != (self.r, self.n, self.n):
            raise ConfigError(f"initial guess has shape {planes.shape}, expected {(self.r, self.n, self.n)}")
        return planes


def _entry_order(key: str):
    base, _, suffix = key.partition(".")
    return (tuple(int(s) if s.isdigit() else 0 for s in base.split(",")), suffix)


_SECTIONS = {"problem", "phi", "phi0", "k", "a", "solver", "probe", "output"}


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if "problem" not in cp:
        raise ConfigError("missing [problem] section")
    prob = cp["problem"]

    def get(section, key, conv, default):
        if section not in cp or key not in cp[section]:
            return default
        raw = cp[section][key]
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None

    if "r" not in prob or "n" not in prob:
        raise ConfigError("[problem] needs r and n")
    r = get("problem", "r", int, None)
    n = get("problem", "n", int, None)
    if r < 2:
        raise ConfigError("[problem] r must be >= 2")
    if n < 8 or n & (n - 1):
        raise ConfigError("[problem] n must be a power of two >= 8")
    sections = {name: dict(cp[name]) if name in cp else {} for name in ("phi", "phi0", "k", "a")}
    for name, entries in sections.items():
        for key, src in entries.items():
            if not src.strip().startswith("@"):
                try:
                    fieldexpr.parse(src)
                except fieldexpr.ExprSyntaxError as exc:
                    raise ConfigError(f"[{name}] {key} = {src!r}: {exc}") from exc
    defaults = SolveOptions()
    solver = SolveOptions(
        tol=get("solver", "tol", float, defaults.tol),
        max_iter=get("solver", "max_iter", int, defaults.max_iter),
        divergence_radius=get("solver", "divergence_radius", float, defaults.divergence_radius),
    )
    directions = ()
    probe = ProbeSpec()
    if "probe" in cp:
        keys = sorted((k for k in cp["probe"] if k.startswith("direction")), key=lambda k: int(k.split(".")[1]))
        directions = tuple(cp["probe"][k].strip() for k in keys)
        probe = ProbeSpec(directions, get("probe", "t_start", float, probe.t_start),
                          get("probe", "t_stop", float, probe.t_stop), get("probe", "t_count", int, probe.t_count))
    return RunConfig(
        r=r, n=n, mode=prob.get("mode", "cyclic").strip(),
        phi=sections["phi"], phi0=sections["phi0"], k=sections["k"], a=sections["a"],
        solver=solver, initial=get("solver", "initial", str, None), probe=probe,
        output=get("output", "dir", str, "hetoda_out"), base_dir=str(base_dir),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, path.parent)


def cyclic_config_text(r: int, n: int, phi: list[str] | None = None, k: list[str] | None = None,
                       a: list[str] | None = None) -> str:
    """Ready-to-run cyclic configuration."""
    phi = phi or ["1"] * r
    cfg = RunConfig(
        r=r, n=n, mode="cyclic",
        phi={str(i + 1): s for i, s in enumerate(phi)},
        k={str(i + 1): s for i, s in enumerate(k)} if k else {},
        a={str(i + 1): s for i, s in enumerate(a)} if a else {},
    )
    return cfg.to_text()
