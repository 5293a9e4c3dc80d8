"""Airtime, energy and reach of every spreading factor under the default radio.

Prints one row per SF: time on air for a 50-byte frame, energy at 14 dBm,
and the largest distance at which the frame still clears the sensitivity
floor with the default log-distance path loss.
"""
from mixmab.phy import DEFAULT_SENSITIVITY_DBM, PathLossModel, energy_per_packet_mj, time_on_air


def max_range_m(tp_dbm: float, sensitivity_dbm: float, model: PathLossModel) -> float:
    budget = tp_dbm - sensitivity_dbm - model.loss_at_reference_db
    return model.reference_distance_m * 10 ** (budget / (10 * model.exponent))


def main() -> None:
    model = PathLossModel()
    print(f"{'SF':>3} {'airtime ms':>11} {'energy mJ':>10} {'range m':>8}")
    for sf, sens in DEFAULT_SENSITIVITY_DBM.items():
        air = time_on_air(sf, 50)
        print(f"{sf:>3} {air:>11.2f} {energy_per_packet_mj(14, air):>10.2f} {max_range_m(14, sens, model):>8.0f}")


if __name__ == "__main__":
    main()
