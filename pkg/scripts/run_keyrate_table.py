#!/usr/bin/env python3
"""Per-user finite-size key rates for the bundled four-user network.

Prints the user x trust-model table in CSV alongside the underlying
mutual-information and Holevo terms.
"""

from cvqnet import TrustModel, default_config, key_rate


def main() -> None:
    params = default_config().params
    print("user,trust,mutual_information,holevo,delta,rate")
    for k in range(params.n_users):
        for trust in TrustModel:
            r = key_rate(params, trust, k, mode="finite")
            print(
                f"{k + 1},{trust.value},{r.mutual_information:.8f},"
                f"{r.holevo:.8f},{r.delta:.8f},{r.rate:.8f}"
            )


if __name__ == "__main__":
    main()
