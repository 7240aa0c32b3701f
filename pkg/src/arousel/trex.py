"""FDR-calibrated feature selection by dummy-augmented forward paths.

``calibrate_and_select`` runs K independent experiments; each appends a
fresh block of L standard-normal dummy columns to the design and records the
least-angle first-entry order until enough dummies have entered.  A
variable's relative occurrence Phi_T(j) is the fraction of experiments in
which it entered before the T-th dummy.  Calibration scans the voting grid
v in {0.5, 0.5 + 1/K, ..., 1 - 1/K} and the dummy budget T, keeping the
(v, T) pair with the largest selected set {Phi'_T > v} among those whose
estimated false-discovery proportion stays below the target; ties break
toward smaller estimate, then larger v, then smaller T.  The scan over T
stops once the feasible maximum has not grown for two consecutive budgets.

Two complementary estimates gate feasibility and both must sit below alpha:

* the dummy-count plug-in  V_hat = (p / L) * #{dummies with Phi_T > v},
  divided by the selected-set size (an empirical-null analogue), and
* an exchangeability bound  (p - m) / max(1, m) * T / (L - T + 1),
  the expected number of null entrants before the T-th of L dummies when
  nulls and dummies are exchangeable (m = selected-set size).

The second term is what keeps the budget T honest: a null column whose
sample correlation with the realized noise happens to be large re-enters in
every experiment, so its occurrence never resembles the flat dummy
occurrences and the plug-in alone would let T creep upward.  The bound
shrinks as L grows, so L starts at p and doubles (capped at 8p) until a
nonempty selection becomes feasible; it also doubles when paths exhaust
their candidates before the requested number of dummies.

The dependency-aware variant ("da-nn") shrinks the occurrence of a variable
by the vote similarity of its most correlated neighbour before thresholding:

    Phi'(j) = Phi(j) * (1 - max_{i in G(j)} |C_ij| * (1 - |Phi(j) - Phi(i)|))

with G(j) = {i != j : |C_ij| >= rho_thr}.  rho_thr is swept over
{0.5, 0.7, 0.9} and the most conservative feasible outcome (fewest selected)
is kept.  Experiments do not depend on alpha, so one cache of experiment
banks serves the whole alpha sweep and both variants.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DataWarning
from .lars import LarsPathRunner

V_FLOOR = 0.5
RHO_GRID = (0.5, 0.7, 0.9)
MAX_DUMMY_FACTOR = 8


def generate_dummies(n: int, n_dummies: int, seed: int, experiment_index: int) -> np.ndarray:
    """Column-standardized i.i.d. normal dummies from a counter-based
    substream keyed by (seed, experiment index)."""
    key = np.array([seed % 2**64, experiment_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    d = rng.standard_normal((n, n_dummies))
    d -= d.mean(axis=0)
    sd = d.std(axis=0, ddof=1)
    sd[sd == 0] = 1.0
    return d / sd


def standardize_columns(x: np.ndarray) -> np.ndarray:
    """Z-score columns (ddof=1); constant columns become all-zero."""
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    const = sd == 0
    if const.any():
        warnings.warn(
            f"{int(const.sum())} constant column(s) zeroed before selection",
            DataWarning,
            stacklevel=2,
        )
    sd = np.where(const, 1.0, sd)
    z = (x - mu) / sd
    z[:, const] = 0.0
    return z


class _NeedLargerDummyBlock(Exception):
    pass


class ExperimentBank:
    """K lazily extendable forward paths sharing one (X, y)."""

    def __init__(self, x: np.ndarray, y: np.ndarray, k: int, seed: int, n_dummies: int, threads: int = 1):
        self.x = x
        self.y = y
        self.k = k
        self.seed = seed
        self.n_dummies = n_dummies
        self.p = x.shape[1]
        self.threads = max(1, threads)
        self.runners = [
            LarsPathRunner(x, generate_dummies(x.shape[0], n_dummies, seed, i), y)
            for i in range(k)
        ]
        self._occ_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def extend_all(self, t: int, *, allow_exhaustion: bool = False) -> None:
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(lambda r: r.extend(t), self.runners))
        else:
            for r in self.runners:
                r.extend(t)
        if not allow_exhaustion:
            if any(r.saturated and r.dummy_count < t for r in self.runners):
                raise _NeedLargerDummyBlock

    def occurrences(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """(Phi_T over real columns, Phi_T over dummy columns).

        A variable counts in experiment k iff it entered strictly before the
        T-th dummy; on a path that saturated with fewer than T dummies every
        entered variable counts.
        """
        if t in self._occ_cache:
            return self._occ_cache[t]
        phi_r = np.zeros(self.p)
        phi_d = np.zeros(self.n_dummies)
        for r in self.runners:
            order = r.entry_order
            cut = len(order)
            if r.dummy_count >= t:
                seen = 0
                for pos, j in enumerate(order):
                    if j >= self.p:
                        seen += 1
                        if seen == t:
                            cut = pos
                            break
            for j in order[:cut]:
                if j < self.p:
                    phi_r[j] += 1.0
                else:
                    phi_d[j - self.p] += 1.0
        phi_r /= self.k
        phi_d /= self.k
        self._occ_cache[t] = (phi_r, phi_d)
        return phi_r, phi_d


class _BankLadder:
    """Cache of experiment banks keyed by dummy-block size L."""

    def __init__(self, x, y, k, seed, threads):
        self.x, self.y, self.k, self.seed, self.threads = x, y, k, seed, threads
        self.p = x.shape[1]
        self.max_l = MAX_DUMMY_FACTOR * self.p
        self._banks: dict[int, ExperimentBank] = {}

    def get(self, n_dummies: int) -> ExperimentBank:
        if n_dummies not in self._banks:
            self._banks[n_dummies] = ExperimentBank(
                self.x, self.y, self.k, self.seed, n_dummies, threads=self.threads
            )
        return self._banks[n_dummies]


def da_nn_penalize(phi: np.ndarray, corr: np.ndarray, rho_thr: float) -> np.ndarray:
    """Shrink occurrences by the strongest dependent neighbour's vote overlap."""
    phi = np.asarray(phi, dtype=float)
    corr = np.asarray(corr, dtype=float)
    p = phi.size
    if corr.shape != (p, p):
        raise ContractViolation(f"correlation matrix must be {p}x{p}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-10, equal_nan=True):
        raise ContractViolation("correlation matrix must be symmetric")
    ac = np.abs(np.nan_to_num(corr, nan=0.0))
    np.fill_diagonal(ac, 0.0)
    in_group = ac >= rho_thr
    penalty = ac * (1.0 - np.abs(phi[None, :] - phi[:, None]))  # penalty[i, j]
    penalty[~in_group] = 0.0
    max_pen = penalty.max(axis=0)
    has_group = in_group.any(axis=0)
    out = phi.copy()
    out[has_group] = phi[has_group] * (1.0 - max_pen[has_group])
    return out


def estimate_fdp(phi_real: np.ndarray, phi_dummy: np.ndarray, v: float, p: int, n_dummies: int) -> float:
    """Dummy-count plug-in FDP estimate of the candidate set {Phi > v}."""
    n_sel = int(np.sum(phi_real > v))
    v_hat = (p / n_dummies) * int(np.sum(phi_dummy > v))
    return v_hat / max(1, n_sel)


def exchangeability_bound(n_selected: int, p: int, t: int, n_dummies: int) -> float:
    """Expected null entrants before the T-th of L dummies, per selected
    variable, when nulls and dummies are exchangeable."""
    return (p - n_selected) * t / ((n_dummies - t + 1) * max(1, n_selected))


@dataclass
class SelectionResult:
    alpha: float
    variant: str
    k: int
    seed: int
    n_dummies: int
    t: int
    v: float
    rho_thr: float | None
    fdp_hat: float
    selected: list[str]
    selected_idx: list[int]
    phi: dict[str, float]
    phi_adjusted: dict[str, float]
    alpha_sweep: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "variant": self.variant,
            "k": self.k,
            "seed": self.seed,
            "n_dummies": self.n_dummies,
            "t": self.t,
            "v": self.v,
            "rho_thr": self.rho_thr,
            "fdp_hat": self.fdp_hat,
            "selected": self.selected,
            "selected_idx": self.selected_idx,
            "phi": self.phi,
            "phi_adjusted": self.phi_adjusted,
            "alpha_sweep": self.alpha_sweep,
        }

    def save(self, path, extra: dict | None = None) -> None:
        doc = self.to_json_dict()
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


@dataclass
class CalibrationOutcome:
    """Winning (v, T, L, rho_thr) of one calibration run, with occurrences."""

    n_selected: int = -1
    fdp_hat: float = np.inf
    v: float = np.nan
    t: int = 0
    n_dummies: int = 0
    mask: np.ndarray | None = None
    rho_thr: float | None = None
    phi: np.ndarray | None = None
    phi_adjusted: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.mask is not None

    def selected_indices(self) -> list[int]:
        if self.mask is None:
            return []
        return [int(j) for j in np.flatnonzero(self.mask)]

    def key(self):
        # maximize size, then minimize the estimate, then maximize v
        # (T order is fixed by first-wins during the scan)
        return (self.n_selected, -self.fdp_hat, self.v)


def _scan_budgets(
    bank: ExperimentBank,
    alpha: float,
    rho_thr: float | None,
    corr: np.ndarray | None,
    *,
    allow_exhaustion: bool = False,
) -> CalibrationOutcome:
    k = bank.k
    v_grid = V_FLOOR + np.arange(int(round((1.0 - V_FLOOR) * k))) / k
    best = CalibrationOutcome(rho_thr=rho_thr, n_dummies=bank.n_dummies)
    running_max = -1
    no_growth = 0
    t = 0
    while t < bank.n_dummies:
        t += 1
        bank.extend_all(t, allow_exhaustion=allow_exhaustion)
        phi_r, phi_d = bank.occurrences(t)
        phi_adj = phi_r if rho_thr is None else da_nn_penalize(phi_r, corr, rho_thr)
        if best.phi is None:  # keep first-budget occurrences for diagnostics
            best.phi, best.phi_adjusted = phi_r, phi_adj
        feasible_max = -1
        for v in v_grid:
            mask = phi_adj > v
            n_sel = int(mask.sum())
            fdp = max(
                estimate_fdp(phi_adj, phi_d, v, bank.p, bank.n_dummies),
                exchangeability_bound(n_sel, bank.p, t, bank.n_dummies),
            )
            if fdp <= alpha:
                feasible_max = max(feasible_max, n_sel)
                cand = CalibrationOutcome(
                    n_sel, fdp, float(v), t, bank.n_dummies, mask, rho_thr, phi_r, phi_adj
                )
                if cand.key() > best.key():
                    best = cand
        if feasible_max > running_max:
            running_max = feasible_max
            no_growth = 0
        else:
            no_growth += 1
            if no_growth >= 2:
                break
    return best


def _calibrate_at_rho(
    ladder: _BankLadder, alpha: float, rho_thr: float | None, corr: np.ndarray | None
) -> CalibrationOutcome:
    """Walk the dummy-block ladder until a nonempty feasible selection."""
    n_dummies = ladder.p
    while True:
        bank = ladder.get(n_dummies)
        try:
            best = _scan_budgets(bank, alpha, rho_thr, corr)
        except _NeedLargerDummyBlock:
            if n_dummies < ladder.max_l:
                n_dummies *= 2
                continue
            warnings.warn(
                "forward paths saturate before the requested dummy budget even "
                f"at L = {n_dummies}; counting saturated paths as-is",
                DataWarning,
                stacklevel=2,
            )
            best = _scan_budgets(bank, alpha, rho_thr, corr, allow_exhaustion=True)
        if best.n_selected > 0 or n_dummies >= ladder.max_l:
            return best
        n_dummies *= 2


def _calibrate(
    ladder: _BankLadder,
    alpha: float,
    variant: str,
    corr: np.ndarray | None,
    rho_grid=RHO_GRID,
) -> CalibrationOutcome:
    if variant == "plain":
        return _calibrate_at_rho(ladder, alpha, None, None)
    if variant != "da-nn":
        raise ContractViolation(f"unknown selector variant {variant!r}")
    results = [_calibrate_at_rho(ladder, alpha, rho, corr) for rho in sorted(rho_grid)]
    feasible = [r for r in results if r.feasible]
    if not feasible:
        return results[0]
    # most conservative feasible outcome: fewest selected, then smaller
    # estimate (the scan ascends rho and min() keeps the earliest tie)
    return min(feasible, key=lambda r: (r.n_selected, r.fdp_hat))


def calibration_grid(
    x,
    y,
    alphas,
    variants=("da-nn",),
    k: int = 100,
    seed: int = 42,
    rho_grid=RHO_GRID,
    threads: int = 1,
) -> dict[tuple[str, float], CalibrationOutcome]:
    """Calibrate every (variant, alpha) combination on one shared cache of
    experiment banks.  The experiments do not depend on alpha or on the
    penalization variant, so the expensive forward paths are computed once."""
    x = standardize_columns(x)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ContractViolation("X and y row mismatch")
    if np.ptp(y) == 0:
        raise ContractViolation("response is constant")

    corr = None
    if "da-nn" in variants:
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(x.T)
        corr = np.nan_to_num(corr, nan=0.0)
        np.fill_diagonal(corr, 1.0)

    ladder = _BankLadder(x, y, k, seed, threads)
    return {
        (variant, float(a)): _calibrate(ladder, float(a), variant, corr, rho_grid)
        for variant in variants
        for a in alphas
    }


def calibrate_and_select(
    x,
    y,
    alpha: float = 0.1,
    k: int = 100,
    seed: int = 42,
    variant: str = "da-nn",
    feature_names: list[str] | None = None,
    alpha_grid=(0.05, 0.10, 0.15, 0.20, 0.25),
    rho_grid=RHO_GRID,
    threads: int = 1,
) -> SelectionResult:
    """Run the full selector and return the result at ``alpha`` together with
    diagnostics for every alpha in ``alpha_grid``.

    An empty selected set is a valid outcome.  Identical inputs and seed give
    identical results; rescaling y by a positive constant changes nothing.
    """
    p = np.asarray(x).shape[1]
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(p)]
    if len(feature_names) != p:
        raise ContractViolation("feature_names length mismatch")

    alphas = sorted(set(float(a) for a in alpha_grid) | {float(alpha)})
    grid = calibration_grid(
        x, y, alphas, variants=(variant,), k=k, seed=seed, rho_grid=rho_grid, threads=threads
    )
    per_alpha = {a: grid[(variant, a)] for a in alphas}

    sweep = []
    for a in alphas:
        cal = per_alpha[a]
        mask = cal.mask if cal.mask is not None else np.zeros(p, dtype=bool)
        sweep.append(
            {
                "alpha": a,
                "n_selected": int(mask.sum()),
                "selected": [feature_names[j] for j in np.flatnonzero(mask)],
                "fdp_hat": cal.fdp_hat if cal.feasible else None,
                "v": cal.v if cal.feasible else None,
                "t": cal.t if cal.feasible else None,
                "n_dummies": cal.n_dummies,
                "rho_thr": cal.rho_thr,
                "percent_selected": 100.0 * float(mask.sum()) / p,
            }
        )

    cal = per_alpha[float(alpha)]
    phi_r, phi_adj = cal.phi, cal.phi_adjusted
    idx = cal.selected_indices()
    return SelectionResult(
        alpha=float(alpha),
        variant=variant,
        k=k,
        seed=seed,
        n_dummies=int(cal.n_dummies),
        t=int(cal.t),
        v=float(cal.v) if cal.feasible else float("nan"),
        rho_thr=cal.rho_thr,
        fdp_hat=float(cal.fdp_hat) if cal.feasible else float("nan"),
        selected=[feature_names[j] for j in idx],
        selected_idx=idx,
        phi={feature_names[j]: float(phi_r[j]) for j in range(p)},
        phi_adjusted={feature_names[j]: float(phi_adj[j]) for j in range(p)},
        alpha_sweep=sweep,
    )


def load_selection(path) -> dict:
    return json.loads(Path(path).read_text())
