"""Weighted-bootstrap confidence bands for the decomposition components.

Every replicate draws exponential mean-one weights per observation and per
group, multiplies them into the sampling weights, and repeats all three
estimation stages. Replicate b is a pure function of (seed, b), so runs are
reproducible and extendable without recomputing earlier replicates.
"""

import seldecomp as sd

NAMES = ("x1", "x2", "z3", "z4")
base = {"x1": ("normal", 0.0, 1.0), "z3": ("normal", 0.0, 1.0),
        "z4": ("normal", 0.0, 1.0)}
law = sd.CovariateLaw(NAMES, (
    sd.MixtureComponent(0.6, {**base, "x2": ("point", 0.0)}),
    sd.MixtureComponent(0.4, {**base, "x2": ("point", 1.0)}),
))
p0 = sd.HSMParams([1.0, 0.5, -0.5], [0.7, 0.4, -0.3, 0.5, 0.25], 0.2,
                  ("x1", "x2"), NAMES, law)
p1 = sd.HSMParams([1.15, 0.5, -0.5], [0.9, 0.4, -0.3, 0.5, 0.25], 0.45,
                  ("x1", "x2"), NAMES, law)

R_SPEC = sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x2"),
                        sd.linear("z3"), sd.linear("z4"), sd.square("x1"),
                        sd.square("z3"), sd.square("z4")))
W_SPEC = sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x2")),
                       sd.ControlSpec(False, False, False, normal_quantile=True))

s1 = sd.simulate_hsm(p1, 3000, seed=21, group_id="g1")
s0 = sd.simulate_hsm(p0, 3000, seed=22, group_id="g0")

res = sd.two_group_bootstrap(
    s1, s0, r_spec=R_SPEC, w_spec=W_SPEC, taus=(0.1, 0.5, 0.9),
    cfg=sd.BootstrapConfig(replications=80, seed=5), n_threads=4)

print("two-group decomposition with 95% bootstrap intervals "
      f"(B=80, {res.n_fail} failed)\n")
print(f"{'tau':>5} {'component':>12} {'estimate':>9} {'lo':>8} {'hi':>8}")
for i, tau in enumerate(res.row_labels):
    for j, comp in enumerate(res.components):
        print(f"{tau:>5.2f} {comp:>12} {res.point[i, j]:>9.4f} "
              f"{res.ci_lo[i, j]:>8.4f} {res.ci_hi[i, j]:>8.4f}")
