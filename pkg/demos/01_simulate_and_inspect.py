"""Simulate a censored-selection sample and estimate its control function.

The simulated group mimics a CPS-style year: hours are a censored linear
index (zero marks nonworkers; the unit-variance error fixes the scale, so
think of the values as a standardized hours index rather than raw annual
hours), log wages are observed for workers only, and two of the four
covariates are excluded from the wage equation (household-composition-style
exclusion restrictions).
"""

import numpy as np

import seldecomp as sd

NAMES = ("age_s", "college", "hh_size", "kids")

law = sd.CovariateLaw(NAMES, (
    sd.MixtureComponent(0.65, {"age_s": ("normal", 0.0, 1.0),
                               "college": ("point", 0.0),
                               "hh_size": ("normal", 0.0, 1.0),
                               "kids": ("normal", 0.0, 1.0)}),
    sd.MixtureComponent(0.35, {"age_s": ("normal", 0.2, 1.0),
                               "college": ("point", 1.0),
                               "hh_size": ("normal", 0.0, 1.0),
                               "kids": ("normal", 0.0, 1.0)}),
))

params = sd.HSMParams(
    alpha=[2.4, 0.12, 0.35],          # intercept, age_s, college
    gamma=[0.9, 0.3, 0.4, -0.25, -0.35],
    rho=0.35,
    x_names=("age_s", "college"), z_names=NAMES, covariate_law=law)

sample = sd.simulate_hsm(params, n=8000, seed=42, group_id="1990")
print(f"simulated {sample.n} people; worker share "
      f"{sample.worker_mask.mean():.3f}, mean positive hours index "
      f"{sample.hours[sample.worker_mask].mean():.2f}")

report = sd.validate_sample(sample)
print("validation:", "; ".join(report.lines()))

# hours design: everything, with curvature in the continuous covariates
r_spec = sd.DesignSpec((sd.intercept(), sd.linear("age_s"), sd.linear("college"),
                        sd.linear("hh_size"), sd.linear("kids"),
                        sd.square("age_s"), sd.square("hh_size"),
                        sd.square("kids")))
control = sd.estimate_control(sample, r_spec)

workers = sample.worker_mask
print(f"\ncontrol values: mean {np.nanmean(control.v_hat):.3f}, "
      f"range ({np.nanmin(control.v_hat):.3f}, {np.nanmax(control.v_hat):.3f})")
print(f"selection thresholds P(H=0|Z): mean {control.p0_hat.mean():.3f}")
print("every worker's control value exceeds their threshold:",
      bool(np.all(control.v_hat[workers] > control.p0_hat[workers])))

# the fitted hours distribution at a few covariate points
rows = sd.build_design(sample, r_spec)
for label, i in [("a college worker", int(np.flatnonzero(
        (sample.covariate("college") == 1) & workers)[0])),
        ("a non-college worker", int(np.flatnonzero(
            (sample.covariate("college") == 0) & workers)[0]))]:
    cdf_mid = sd.evaluate_cdf(control.hours_fit, rows[i], 1.5)
    print(f"{label}: P(H <= 1.5 | Z) = {cdf_mid:.3f}, "
          f"own hours {sample.hours[i]:.2f} -> V = {control.v_hat[i]:.3f}")
