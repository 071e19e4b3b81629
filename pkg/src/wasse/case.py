"""MATPOWER case-file subset: baseMVA, bus and branch matrices.

Only the columns the measurement model needs are kept. Generator, cost and
OPF data are skipped without being parsed. Off-nominal transformer taps and
phase shifters are rejected because the branch flow model has no tap term.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from wasse.errors import (
    DanglingBranch,
    MalformedSection,
    NonPositiveBase,
    NoSuchBranch,
    UnsupportedFeature,
)

BUNDLED_CASES = {"ieee14": "ieee14.m", "ieee39": "ieee39.m"}

# Written by dump_case so that a dump re-parses to identical floats.
_DUMP_UNITS = "pu_rad"

_BASE_RE = re.compile(r"mpc\.baseMVA\s*=\s*([^;\n]+);?")
_UNITS_RE = re.compile(r"mpc\.wasse_units\s*=\s*'([^']*)'\s*;?")
_SECTION_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;?", re.DOTALL)


@dataclass(frozen=True)
class BusRecord:
    id: int
    nominal_voltage: float  # per-unit
    nominal_angle: float  # radians
    shunt_g: float  # per-unit
    shunt_b: float  # per-unit


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    series_g: float
    series_b: float
    r: float
    x: float
    charging_b: float = 0.0  # total line charging, per-unit


@dataclass(frozen=True)
class GridCase:
    base_mva: float
    buses: tuple[BusRecord, ...]
    branches: tuple[BranchRecord, ...]

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    def bus(self, bus_id: int) -> BusRecord:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def find_branch(self, a: int, b: int) -> BranchRecord:
        for br in self.branches:
            if (br.from_bus, br.to_bus) in ((a, b), (b, a)):
                return br
        raise NoSuchBranch(f"no branch between buses {a} and {b}")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_matrix(name: str, body: str) -> list[list[float]]:
    rows = []
    for chunk in re.split(r"[;\n]", body):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            rows.append([float(tok) for tok in chunk.replace(",", " ").split()])
        except ValueError as exc:
            raise MalformedSection(f"non-numeric entry in mpc.{name}: {chunk!r}") from exc
    if not rows:
        raise MalformedSection(f"mpc.{name} is empty")
    return rows


def parse_case(text: str) -> GridCase:
    """Parse MATPOWER case text into a validated :class:`GridCase`.

    Series admittances are computed as ``g + jb = 1 / (r + jx)``. Bus and
    branch order follow the file.

    Raises:
        MalformedSection: a required section is missing or garbled.
        NonPositiveBase: ``baseMVA <= 0``.
        DanglingBranch: a branch endpoint is not in the bus table.
        UnsupportedFeature: taps, phase shifters or out-of-service branches.
    """
    clean = _strip_comments(text)

    m = _BASE_RE.search(clean)
    if m is None:
        raise MalformedSection("missing mpc.baseMVA")
    try:
        base = float(m.group(1).strip())
    except ValueError as exc:
        raise MalformedSection(f"garbled baseMVA: {m.group(1)!r}") from exc
    if not base > 0:
        raise NonPositiveBase(f"baseMVA must be positive, got {base}")

    u = _UNITS_RE.search(clean)
    native = u is not None and u.group(1) == _DUMP_UNITS

    sections = {name: body for name, body in _SECTION_RE.findall(clean)}
    for required in ("bus", "branch"):
        if required not in sections:
            raise MalformedSection(f"missing mpc.{required} section")

    buses = []
    for row in _parse_matrix("bus", sections["bus"]):
        if len(row) < 9:
            raise MalformedSection(f"bus row has {len(row)} columns, need at least 9")
        bus_id = int(row[0])
        if bus_id != row[0]:
            raise MalformedSection(f"non-integer bus id {row[0]}")
        vm, va = row[7], row[8]
        if not vm > 0:
            raise MalformedSection(f"bus {bus_id}: nominal voltage must be positive")
        if native:
            buses.append(BusRecord(bus_id, vm, va, row[4], row[5]))
        else:
            buses.append(BusRecord(bus_id, vm, math.radians(va), row[4] / base, row[5] / base))

    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        raise MalformedSection("duplicate bus ids")
    known = set(ids)

    branches = []
    for row in _parse_matrix("branch", sections["branch"]):
        if len(row) < 4:
            raise MalformedSection(f"branch row has {len(row)} columns, need at least 4")
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in known:
                raise DanglingBranch(f"branch {f}-{t} references unknown bus {end}")
        if f == t:
            raise MalformedSection(f"branch {f}-{t} is a self loop")
        r, x = row[2], row[3]
        charging = row[4] if len(row) > 4 else 0.0
        ratio = row[8] if len(row) > 8 else 0.0
        shift = row[9] if len(row) > 9 else 0.0
        status = row[10] if len(row) > 10 else 1.0
        if ratio not in (0.0, 1.0) or shift != 0.0:
            raise UnsupportedFeature(
                f"branch {f}-{t}: tap ratio {ratio} / shift {shift} not supported"
            )
        if status == 0:
            raise UnsupportedFeature(f"branch {f}-{t} is out of service")
        z = complex(r, x)
        if z == 0:
            raise MalformedSection(f"branch {f}-{t} has zero impedance")
        y = 1.0 / z
        branches.append(BranchRecord(f, t, y.real, y.imag, r, x, charging))

    return GridCase(base, tuple(buses), tuple(branches))


def dump_case(case: GridCase) -> str:
    """Debug dump in case-file syntax; ``parse_case(dump_case(c)) == c``."""
    lines = [
        "% wasse debug dump: shunts in per-unit, angles in radians",
        f"mpc.baseMVA = {case.base_mva!r};",
        f"mpc.wasse_units = '{_DUMP_UNITS}';",
        "mpc.bus = [",
    ]
    for b in case.buses:
        lines.append(
            f"\t{b.id}\t1\t0\t0\t{b.shunt_g!r}\t{b.shunt_b!r}\t1"
            f"\t{b.nominal_voltage!r}\t{b.nominal_angle!r};"
        )
    lines += ["];", "mpc.branch = ["]
    for br in case.branches:
        lines.append(
            f"\t{br.from_bus}\t{br.to_bus}\t{br.r!r}\t{br.x!r}\t{br.charging_b!r}"
            "\t0\t0\t0\t0\t0\t1;"
        )
    lines.append("];")
    return "\n".join(lines) + "\n"


def branch_admittance(case: GridCase, from_bus: int, to_bus: int) -> tuple[float, float, float, float]:
    """Return ``(g_kj, b_kj, g_sk, b_sk)`` for the flow leaving ``from_bus``.

    The shunt term at ``from_bus`` is the bus shunt plus half of this branch's
    line charging (pi model).
    """
    br = case.find_branch(from_bus, to_bus)
    bus = case.bus(from_bus)
    return br.series_g, br.series_b, bus.shunt_g, bus.shunt_b + 0.5 * br.charging_b


def bundled_case_text(name: str) -> str:
    try:
        fname = BUNDLED_CASES[name]
    except KeyError:
        raise KeyError(f"unknown bundled case {name!r}; have {sorted(BUNDLED_CASES)}") from None
    return resources.files("wasse").joinpath("data", fname).read_text(encoding="utf-8")


def load_case(name_or_path: str | Path) -> GridCase:
    """Load a bundled case by name (``ieee14``, ``ieee39``) or a file path."""
    if isinstance(name_or_path, str) and name_or_path in BUNDLED_CASES:
        return parse_case(bundled_case_text(name_or_path))
    return parse_case(Path(name_or_path).read_text(encoding="utf-8"))
