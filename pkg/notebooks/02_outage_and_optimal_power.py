# %% [markdown]
# Transmission probability, outage, and the best transmit power
# =============================================================
#
# Reference defaults: beta * Xbar = 10 uW, uplink SNR 24.6 dB, 2.1 bit/channel
# use. For each buffer size the total outage has an interior minimum in
# delta_tilde, and the optimum moves right as the buffer grows.

# %%
from ehstorage import cli
from ehstorage.config import load_config

cfg = load_config()
rows = cli.analyze(cfg)

# %%
print(f"{'delta':>6} " + " ".join(f"{'P_tr l=' + str(l):>12}" for l in cfg.buffers)
      + " " + " ".join(f"{'Pout l=' + str(l):>12}" for l in cfg.buffers) + f" {'AER':>10}")
for i in range(0, len(rows), len(cfg.buffers)):
    grp = rows[i:i + len(cfg.buffers)]
    print(f"{grp[0]['delta_tilde']:6.2f} "
          + " ".join(f"{r['p_trans']:12.6f}" for r in grp) + " "
          + " ".join(f"{r['p_out_total']:12.6f}" for r in grp) + f" {grp[0]['aer']:10.3e}")

# %%
for row in cli.optimize(cfg):
    print(f"l={row['buffer_l']:>3}  delta*={row['delta_star']:.4f}  "
          f"M*={row['target_power_uW']:.3f} uW  outage*={row['p_out_total']:.5f}  [{row['regime']}]")
