# %% [markdown]
# Simulation against the closed forms
# ===================================
#
# Run the storage chain for 10 x 1e6 slots at the reference operating point and
# compare every estimate with its analytic value.

# %%
from ehstorage import (
    BufferSpec,
    EffectiveParams,
    LinkParams,
    SimConfig,
    aer,
    channel_outage,
    distribution_distance,
    finite_approx,
    finite_exact,
    simulate,
    total_outage,
    transmission_probability,
)

eff = EffectiveParams(9.65e-6, 1e-5)
buf = BufferSpec.finite(4, eff.m_eff)
link = LinkParams.from_db(24.6)
res = simulate(eff, buf, link, SimConfig(n_slots=1_000_000, n_replications=10, seed=1))

# %%
exact = finite_exact(eff, buf)
p_tr = transmission_probability(finite_approx(eff, buf))
p_ch = channel_outage(link, eff.delta)
for name, est, ref in [
    ("P_trans", res.p_trans_hat, p_tr),
    ("atom", res.atom_freq_hat, exact.atom),
    ("AER", res.aer_hat, aer(link, eff.delta)),
    ("channel outage", res.channel_outage_hat, p_ch),
    ("total outage", res.total_outage_hat, total_outage(p_tr, p_ch)),
]:
    print(f"{name:>15}: sim {est.value:.6g} +- {est.ci:.2g}   closed form {ref:.6g}")

# %%
print(distribution_distance(res, exact))
