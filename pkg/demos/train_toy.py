"""Overfit a tiny model on six molecules with synthetic energies.

The target is a rotation-invariant function of the coordinates (sum of
pairwise Gaussians), so a frame-averaged model can drive the loss toward
zero. Training uses the stochastic mode: one random frame element per
sample per step, which is the cheap-but-unbiased option.
"""

import numpy as np

from faframe import AtomicSystem, FAENetConfig, FAENetModel
from faframe.diffmath import AdamW
from faframe.faenet import TrainSample, train_step


def synthetic_energy(system):
    deltas = system.positions[:, None, :] - system.positions[None, :, :]
    d2 = (deltas**2).sum(axis=-1)
    return float(np.exp(-d2[np.triu_indices(system.num_atoms, k=1)]).sum())


def main():
    rng = np.random.default_rng(5)
    batch = []
    for _ in range(6):
        n = int(rng.integers(4, 8))
        system = AtomicSystem(
            rng.standard_normal((n, 3)) * 1.5, rng.integers(1, 10, size=n)
        )
        batch.append(TrainSample(system, synthetic_energy(system)))

    config = FAENetConfig(
        hidden_channels=16, num_filters=16, num_gaussians=8,
        num_interactions=1, cutoff=4.0, max_neighbors=8,
        energy_head="simple",
    )
    model = FAENetModel(config, np.random.default_rng(1))
    optimizer = AdamW(model.parameters(), learning_rate=1e-2)

    train_rng = np.random.default_rng(2)
    for step in range(301):
        loss = train_step(model, batch, optimizer, fa_mode="stochastic",
                          rng=train_rng)
        if step % 50 == 0:
            print(f"step {step:4d}  loss {loss:10.6f}")


if __name__ == "__main__":
    main()
