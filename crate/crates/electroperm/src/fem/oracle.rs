//! Closed-form jump-to-flux coefficients on concentric circles.
//!
//! Geometry: conducting disk of radius `r1` (conductivity `sigma_i`) inside a
//! grounded annulus `r1 < r < r2` (conductivity `sigma_e`, potential zero at
//! `r2`). For a prescribed jump `v = cos(n theta)` across `r = r1` with flux
//! continuity, separation of variables gives the induced outward flux
//! `I_m = lambda_n cos(n theta)` with
//!
//! ```text
//! lambda_n = (n / r1) * sigma_e (1 + rho) / [ (sigma_e / sigma_i)(1 + rho) + rho - 1 ],
//! rho = (r2 / r1)^(2n),                                  for n >= 1,
//! lambda_0 = 0.
//! ```
//!
//! The n = 0 value is exact: a constant jump is carried by a constant interior
//! potential (the interior floats), the radially symmetric exterior solution
//! `B + C ln r` must have zero flux at `r1` to match it, so `C = 0` and no
//! current flows.

use super::FemError;

/// Flux coefficient `lambda_n` for the mode `cos(n theta)`.
pub fn dtn_oracle(r1: f64, r2: f64, sigma_i: f64, sigma_e: f64, n: u32) -> Result<f64, FemError> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(FemError::BadGeometry(format!(
            "radii must satisfy 0 < r1 < r2, got r1 = {r1}, r2 = {r2}"
        )));
    }
    if !(sigma_i > 0.0 && sigma_e > 0.0) {
        return Err(FemError::BadGeometry(format!(
            "conductivities must be positive, got sigma_i = {sigma_i}, sigma_e = {sigma_e}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let n_f = n as f64;
    let rho = (r2 / r1).powf(2.0 * n_f);
    let denom = (sigma_e / sigma_i) * (1.0 + rho) + rho - 1.0;
    Ok(n_f / r1 * sigma_e * (1.0 + rho) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    const R1: f64 = 0.25;
    const R2: f64 = 0.5;
    const SIG_I: f64 = 0.239;
    const SIG_E: f64 = 2.632;

    #[test]
    fn modes_are_positive_for_n_ge_one_and_zero_for_constant() {
        assert_eq!(dtn_oracle(R1, R2, SIG_I, SIG_E, 0).unwrap(), 0.0);
        for n in 1..=8 {
            assert!(dtn_oracle(R1, R2, SIG_I, SIG_E, n).unwrap() > 0.0);
        }
    }

    #[test]
    fn grounded_outer_conductor_limit() {
        // sigma_e -> infinity: lambda_n -> sigma_i * n / r1.
        for n in 1..=4u32 {
            let lambda = dtn_oracle(R1, R2, SIG_I, 1e12, n).unwrap();
            let limit = SIG_I * n as f64 / R1;
            assert!(
                (lambda - limit).abs() <= 1e-8 * limit,
                "n = {n}: {lambda} vs {limit}"
            );
        }
    }

    #[test]
    fn modes_increase_monotonically() {
        let values: Vec<f64> = (1..=8)
            .map(|n| dtn_oracle(R1, R2, SIG_I, SIG_E, n).unwrap())
            .collect();
        for pair in values.windows(2) {
            assert!(pair[1] > pair[0], "{pair:?}");
        }
    }

    #[test]
    fn reference_mode_one_value() {
        // Independent hand evaluation of the closed form for the standard
        // geometry: rho = 4, denominator = (2.632/0.239)*5 + 3,
        // lambda_1 = 4 * 2.632 * 5 / denominator.
        let denom = (SIG_E / SIG_I) * 5.0 + 3.0;
        let expected = (1.0 / R1) * SIG_E * 5.0 / denom;
        let lambda = dtn_oracle(R1, R2, SIG_I, SIG_E, 1).unwrap();
        assert!((lambda - expected).abs() <= 1e-14 * expected);
        assert!((lambda - 0.906_6).abs() < 5e-4, "lambda_1 = {lambda}");
    }

    #[test]
    fn invalid_radii_rejected() {
        assert!(dtn_oracle(0.5, 0.25, SIG_I, SIG_E, 1).is_err());
        assert!(dtn_oracle(0.0, 0.25, SIG_I, SIG_E, 1).is_err());
    }
}
