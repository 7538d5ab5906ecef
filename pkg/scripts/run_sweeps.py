#!/usr/bin/env python3
"""Key-rate curves: per-user rate vs channel loss, and vs block size.

Writes two CSV files into ./out/.  The loss sweep uses a uniform network
(four identical users, 5 mSNU excess noise, 60 mSNU electronic noise) so
the three trust models plot as single non-crossing curves; the block-size
sweep runs on the bundled calibration and shows the finite-size rates
climbing toward their asymptotic values.
"""

import os

from cvqnet import NetworkParams, TrustModel, UserLink, default_config, key_rate
import dataclasses

OUT_DIR = "out"


def loss_sweep(path: str) -> None:
    # swept value is the channel loss; each of the four users receives a
    # uniform 1/4 share on top of it
    with open(path, "w") as fh:
        fh.write("loss_db,trust,rate\n")
        for i in range(61):
            loss_db = 0.5 * i
            eta = 10.0 ** (-loss_db / 10.0) / 4.0
            params = NetworkParams(
                modulation_variance=5.0,
                users=tuple(
                    UserLink(transmittance=eta, excess_noise=5e-3, trusted_noise=60e-3)
                    for _ in range(4)
                ),
                detector_efficiency=0.68,
                beta=0.95,
                block_size=1_250_000_000,
            )
            for trust in TrustModel:
                rate = key_rate(params, trust, 0, mode="asymptotic").rate
                fh.write(f"{loss_db:.2f},{trust.value},{rate:.8f}\n")


def block_size_sweep(path: str) -> None:
    params = default_config().params
    grid = [int(10**x) for x in range(6, 11)]
    with open(path, "w") as fh:
        fh.write("N,user,trust,rate,asymptotic\n")
        for n in grid:
            p = dataclasses.replace(params, block_size=n)
            for k in range(params.n_users):
                for trust in TrustModel:
                    fin = key_rate(p, trust, k, mode="finite").rate
                    asym = key_rate(params, trust, k, mode="asymptotic").rate
                    fh.write(f"{n},{k + 1},{trust.value},{fin:.8f},{asym:.8f}\n")


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)
    loss_path = os.path.join(OUT_DIR, "rate_vs_loss.csv")
    n_path = os.path.join(OUT_DIR, "rate_vs_block_size.csv")
    loss_sweep(loss_path)
    block_size_sweep(n_path)
    print(f"wrote {loss_path} and {n_path}")


if __name__ == "__main__":
    main()
