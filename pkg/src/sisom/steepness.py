"""Exhaustive grid search for per-layer sigmoid steepness minimising r_avg."""
import csv
import itertools
from dataclasses import dataclass

from .comparison import from_features
from .errors import ConfigError
from .features import SteepnessConfig, saliency
from .scoring import separability


@dataclass(frozen=True)
class SteepnessSearchSpace:
    candidates: tuple
    monotone: bool = False

    def __post_init__(self):
        cands = tuple(tuple(float(a) for a in layer) for layer in self.candidates)
        if not cands or any(not layer for layer in cands):
            raise ConfigError("every layer needs at least one steepness candidate")
        if any(a <= 0 for layer in cands for a in layer):
            raise ConfigError("steepness candidates must be positive")
        object.__setattr__(self, "candidates", cands)

    def combinations(self):
        """Cartesian product in canonical order; monotone drops decreasing tuples."""
        combos = itertools.product(*self.candidates)
        if self.monotone:
            combos = (c for c in combos if all(b >= a for a, b in zip(c, c[1:])))
        return list(combos)


def optimize(model, x, y, space, class_source="true"):
    """Return ``(best SteepnessConfig, [(alpha tuple, r_avg), ...])``.

    Gradients do not depend on steepness, so the saliency products are
    computed once and only the sigmoid is re-applied per candidate. Ties
    go to the lexicographically smallest alpha tuple.
    """
    if len(space.candidates) != len(model.capture):
        raise ConfigError(f"search space has {len(space.candidates)} layers, model captures "
                          f"{len(model.capture)}")
    combos = space.combinations()
    if not combos:
        raise ConfigError("monotone constraint leaves no steepness combination")
    sal = saliency(model, x)
    table = []
    for alpha in combos:
        cset = from_features(sal.enhance(SteepnessConfig(alpha)), y, class_source)
        table.append((alpha, separability(cset).r_avg))
    best = min(table, key=lambda row: (row[1], row[0]))
    return SteepnessConfig(best[0]), table


def save_table(table, path):
    n = len(table[0][0]) if table else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"alpha_{i + 1}" for i in range(n)] + ["r_avg"])
        for alpha, r_avg in table:
            w.writerow([f"{a:.17g}" for a in alpha] + [f"{r_avg:.17g}"])
