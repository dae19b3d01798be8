"""Mean total P&L when agents ignore or use the counterpart's revealed signal.

Run: python3 demos/omitter_vs_attentive.py
"""

from bridgemarket.experiments import load_config, run_experiment


def main():
    for name in ("fig2_omitter_pnl", "fig5_attentive_pnl"):
        cfg = load_config(f"configs/{name}.json").with_overrides(paths=2000)
        res = run_experiment(cfg, threads=4)
        sig = [a.sigma for a in cfg.agents]
        print(f"{cfg.scenario:>9}: sigma={sig} mean P&L={res.mean_total_pnl.round(3)} se={res.se_total_pnl.round(3)}")


if __name__ == "__main__":
    main()
