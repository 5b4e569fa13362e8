"""Report records shared by the thermal and verifier layers.

Every checked inequality is packaged as an :class:`InequalityReport` whose
pass flag is, by definition, slack >= -tolerance.  Scaling studies carry a
log-log fit and only gain a pass flag once at least three radii are
available.
"""

import math
from dataclasses import dataclass, field


def scaled_tol(rtol, *quantities):
    """Absolute slack tolerance rtol * max(1, |q_i|)."""
    scale = 1.0
    for q in quantities:
        if q is not None and math.isfinite(q):
            scale = max(scale, abs(q))
    return rtol * scale


@dataclass
class InequalityReport:
    """One checked inequality lhs <= rhs with all its measured ingredients."""

    name: str
    anchor: str
    params: dict
    lhs: float
    rhs: float
    tolerance: float
    intermediates: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    subreports: list = field(default_factory=list)

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return bool(self.slack >= -self.tolerance)

    def all_passed(self):
        return self.passed and all(r.all_passed() for r in self.subreports)

    def to_dict(self):
        return {
            "name": self.name,
            "anchor": self.anchor,
            "params": _plain(self.params),
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "slack": _num(self.slack),
            "tolerance": _num(self.tolerance),
            "pass": self.passed,
            "intermediates": _plain(self.intermediates),
            "flags": list(self.flags),
            "subreports": [r.to_dict() for r in self.subreports],
        }


@dataclass
class ScalingReport:
    """Measured values against radii with a log-log least-squares fit."""

    name: str
    anchor: str
    params: dict
    r_values: list
    measured: list
    predicted_exponent: float
    exponent_window: float
    fitted_exponent: float = None
    prefactor: float = None
    fit_residual: float = None
    flags: list = field(default_factory=list)

    def fit(self):
        pts = [(r, v) for r, v in zip(self.r_values, self.measured) if v > 0.0]
        if len(pts) < 2:
            self.flags.append("insufficient-positive-data")
            return self
        x = [math.log(r) for r, _ in pts]
        y = [math.log(v) for _, v in pts]
        n = len(pts)
        xbar = sum(x) / n
        ybar = sum(y) / n
        sxx = sum((xi - xbar) ** 2 for xi in x)
        sxy = sum((xi - xbar) * (yi - ybar) for xi, yi in zip(x, y))
        slope = sxy / sxx
        intercept = ybar - slope * xbar
        resid = sum((yi - slope * xi - intercept) ** 2
                    for xi, yi in zip(x, y))
        self.fitted_exponent = slope
        self.prefactor = math.exp(intercept)
        self.fit_residual = math.sqrt(resid / n)
        return self

    @property
    def passed(self):
        # exponent alone means nothing on fewer than three radii
        if len(self.r_values) < 3 or self.fitted_exponent is None:
            return None
        return abs(self.fitted_exponent - self.predicted_exponent) \
            <= self.exponent_window

    def to_dict(self):
        return {
            "name": self.name,
            "anchor": self.anchor,
            "params": _plain(self.params),
            "r_values": [_num(r) for r in self.r_values],
            "measured": [_num(v) for v in self.measured],
            "predicted_exponent": _num(self.predicted_exponent),
            "fitted_exponent": _num(self.fitted_exponent),
            "prefactor": _num(self.prefactor),
            "fit_residual": _num(self.fit_residual),
            "exponent_window": _num(self.exponent_window),
            "pass": self.passed,
            "flags": list(self.flags),
        }


@dataclass
class TrialStateReport:
    """Energy expectation of the filtered trial state plus its bound chain."""

    R: int
    epsilon: float
    B: float
    numerator: float
    denominator: float
    ratio: float
    m_stag: float
    chain: list = field(default_factory=list)
    intermediates: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def all_passed(self):
        return all(r.all_passed() for r in self.chain)

    def to_dict(self):
        return {
            "R": self.R,
            "epsilon": _num(self.epsilon),
            "B": _num(self.B),
            "numerator": _num(self.numerator),
            "denominator": _num(self.denominator),
            "ratio": _num(self.ratio),
            "m_stag": _num(self.m_stag),
            "chain": [r.to_dict() for r in self.chain],
            "intermediates": _plain(self.intermediates),
            "flags": list(self.flags),
        }


@dataclass
class StructureRow:
    """One momentum point of the structure-quantity sweep with its bounds."""

    d: int
    L: int
    S: float
    beta: float          # None marks the ground-sector (zero temperature) rows
    B: float
    n: tuple
    p: tuple
    eps: float
    eps_prime: float
    g: float
    b: float             # None at zero temperature
    c: float
    corr: float          # <S_p S_-p> two-point value
    bounds: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def min_slack(self):
        slacks = [v["slack"] for v in self.bounds.values()
                  if v.get("slack") is not None]
        return min(slacks) if slacks else None

    def to_dict(self):
        return {
            "d": self.d, "L": self.L, "S": _num(self.S),
            "beta": _num(self.beta), "B": _num(self.B),
            "n": list(self.n), "p": [_num(x) for x in self.p],
            "eps": _num(self.eps), "eps_prime": _num(self.eps_prime),
            "g": _num(self.g), "b": _num(self.b), "c": _num(self.c),
            "corr": _num(self.corr),
            "bounds": _plain(self.bounds),
            "flags": list(self.flags),
        }


STRUCTURE_BOUND_NAMES = (
    "duhamel_ir",        # b <= 1/(2 beta eps')
    "falk_bruch",        # b >= 4g^2 / (4g + beta c)
    "sym_from_duhamel",  # g <= (b + sqrt(b^2 + beta b c)) / 2
    "double_comm",       # c <= 4 S^2 eps  (field-free)
    "duhamel_le_sym",    # b <= g
    "adjoint_pair",      # <S_p S_-p> <= 2 g
    "corr_ir",           # <S_p S_-p> <= 1/(beta eps') + sqrt(2 S^2 eps / eps')
    "sym_zero_t",        # g <= sqrt(c / (2 eps')) / 2
    "corr_ir_zero_t",    # <S_p S_-p> <= sqrt(2 S^2 eps / eps')
)


def structure_csv_rows(rows):
    """Flatten StructureRows to CSV lines with a fixed column set."""
    header = ["d", "L", "S", "beta", "B", "n", "p", "eps", "eps_prime",
              "g", "b", "c", "corr"]
    for name in STRUCTURE_BOUND_NAMES:
        header += [f"rhs_{name}", f"slack_{name}"]
    lines = [",".join(header)]
    for row in rows:
        rec = [str(row.d), str(row.L), _csv(row.S), _csv(row.beta), _csv(row.B),
               ";".join(str(int(v)) for v in row.n),
               ";".join(_csv(v) for v in row.p),
               _csv(row.eps), _csv(row.eps_prime),
               _csv(row.g), _csv(row.b), _csv(row.c), _csv(row.corr)]
        for name in STRUCTURE_BOUND_NAMES:
            entry = row.bounds.get(name)
            rec += [_csv(entry and entry.get("rhs")),
                    _csv(entry and entry.get("slack"))]
        lines.append(",".join(rec))
    return lines


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return 1e308 if x > 0 else -1e308
    return x


def _csv(x):
    return "" if x is None else repr(float(x))


def _plain(obj):
    """Recursively coerce report payloads to JSON-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int,)):
        return obj
    if isinstance(obj, complex):
        return {"re": _num(obj.real), "im": _num(obj.imag)}
    if isinstance(obj, float):
        return _num(obj)
    if hasattr(obj, "item"):  # numpy scalars
        return _plain(obj.item())
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    return str(obj)
