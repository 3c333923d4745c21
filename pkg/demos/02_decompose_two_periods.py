"""Decompose the quantile change between two simulated periods.

Period 1 differs from period 0 in three ways at once: higher returns to
college (structural), more college graduates (composition), and a stronger
wage-hours error correlation (selection-relevant). The decomposition splits
the total quantile change into the three channels; the pieces sum to the
total by construction.
"""

import seldecomp as sd

NAMES = ("age_s", "college", "hh_size", "kids")


def make_params(college_share, college_premium, rho, gamma0):
    law = sd.CovariateLaw(NAMES, (
        sd.MixtureComponent(1 - college_share,
                            {"age_s": ("normal", 0.0, 1.0),
                             "college": ("point", 0.0),
                             "hh_size": ("normal", 0.0, 1.0),
                             "kids": ("normal", 0.0, 1.0)}),
        sd.MixtureComponent(college_share,
                            {"age_s": ("normal", 0.2, 1.0),
                             "college": ("point", 1.0),
                             "hh_size": ("normal", 0.0, 1.0),
                             "kids": ("normal", 0.0, 1.0)}),
    ))
    return sd.HSMParams(alpha=[2.4, 0.12, college_premium],
                        gamma=[gamma0, 0.3, 0.4, -0.25, -0.35], rho=rho,
                        x_names=("age_s", "college"), z_names=NAMES,
                        covariate_law=law)


R_SPEC = sd.DesignSpec((sd.intercept(), sd.linear("age_s"), sd.linear("college"),
                        sd.linear("hh_size"), sd.linear("kids"),
                        sd.square("age_s"), sd.square("hh_size"),
                        sd.square("kids")))
W_SPEC = sd.DesignSpec((sd.intercept(), sd.linear("age_s"), sd.linear("college")),
                       sd.ControlSpec(linear=True, square=True, interactions=True))

# participation is lowest in the base period, so its selection rule is the
# most restrictive one, as the counterfactual construction assumes
p0 = make_params(college_share=0.25, college_premium=0.30, rho=0.20, gamma0=0.6)
p1 = make_params(college_share=0.40, college_premium=0.55, rho=0.45, gamma0=0.9)

g0 = sd.fit_group(sd.simulate_hsm(p0, 12_000, seed=7, group_id="1980"),
                  R_SPEC, W_SPEC, sd.TrimRule())
g1 = sd.fit_group(sd.simulate_hsm(p1, 12_000, seed=8, group_id="2010"),
                  R_SPEC, W_SPEC, sd.TrimRule())

taus = (0.1, 0.25, 0.5, 0.75, 0.9)
rows = sd.decompose(g1, g0, taus)

print("log-wage change 1980 -> 2010, split into the three channels\n")
print(f"{'tau':>5} {'selection':>10} {'composition':>12} {'structural':>11} "
      f"{'total':>8}")
for r in rows:
    print(f"{r.tau:>5.2f} {r.selection:>10.4f} {r.composition:>12.4f} "
          f"{r.structural:>11.4f} {r.total:>8.4f}")

check = max(abs(r.selection + r.composition + r.structural - r.total)
            for r in rows)
print(f"\ntelescoping residual (should be ~0): {check:.2e}")

ratio = sd.decompose_ratio(g1, g0)
print(f"\n90/10 log decile-gap change: {ratio.total:+.4f}")
print(f"  from selection   {ratio.selection:+.4f}")
print(f"  from composition {ratio.composition:+.4f}")
print(f"  from structure   {ratio.structural:+.4f}")
