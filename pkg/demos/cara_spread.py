"""Bid-ask spread of an exponential-utility trader as information accumulates.

Run: python3 demos/cara_spread.py
"""

from bridgemarket.pricing import EffectiveInfo, Numeraire, cara_quotes


def main():
    num = Numeraire(0.0, 1.0)
    print(f"{'t':>5} " + " ".join(f"sigma={s:<4}" for s in (0.5, 1.0, 2.0)))
    for t in (0.0, 0.2, 0.4, 0.6, 0.8, 0.95):
        spreads = []
        for sigma in (0.5, 1.0, 2.0):
            bid, ask = cara_quotes(EffectiveInfo(t, 0.3 * t, sigma, 1.0), 1.0, num)
            spreads.append(ask - bid)
        print(f"{t:5.2f} " + " ".join(f"{s:10.4f}" for s in spreads))


if __name__ == "__main__":
    main()
