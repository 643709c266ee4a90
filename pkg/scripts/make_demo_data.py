"""Regenerate the synthetic demo dataset shipped in src/submed/data/.

Two satisfaction scores on 1..5 drive a general-satisfaction mediator and a
loyalty outcome; a latent trait confounds mediator and outcome.
"""

from pathlib import Path

import numpy as np

from submed.core import ObservationTable
from submed.io import write_observations

OUT = Path(__file__).resolve().parents[1] / "src" / "submed" / "data" / "demo.csv"


def main(n: int = 1500, seed: int = 2024):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal(n)
    scores = []
    for _ in range(2):
        latent = 0.6 * shared + 0.8 * rng.standard_normal(n)
        scores.append(np.clip(np.round(3 + 1.2 * latent), 1, 5))
    network, tariff = scores
    trait = rng.standard_normal(n)
    satisfaction = (0.5 + 0.6 * network + 0.4 * tariff + 0.5 * network * tariff
                    + trait + 0.8 * rng.standard_normal(n))
    loyalty = 1.0 + 0.3 * network + 0.2 * tariff + 0.7 * satisfaction + 1.5 * trait + rng.standard_normal(n)
    data = ObservationTable(("network", "tariff"), np.column_stack(scores), satisfaction, loyalty)
    with open(OUT, "w", encoding="utf-8", newline="\n") as fh:
        write_observations(data, fh, mediator="satisfaction", outcome="loyalty")


if __name__ == "__main__":
    main()
