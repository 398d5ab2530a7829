//! Mean-force Gibbs states: the bare Gibbs state (ultraweak limit), the
//! RC-traced state, the effective-Hamiltonian closed form for the
//! generalized spin-boson family, and the ultrastrong limit.
//!
//! Matrix exponentials of Hermitian operators are always computed through
//! the eigendecomposition with the spectrum shifted by its minimum, so large
//! `beta * H` stays finite.

use crate::operators::{OperatorMatrix, Pauli};
use crate::transforms::TransformError;
use ndarray::Array2;
use num_complex::Complex64 as C64;

/// `e^{-beta H} / Z` via eigendecomposition; invariant under `H -> H + c I`.
pub fn gibbs(h: &OperatorMatrix, beta: f64) -> Result<OperatorMatrix, TransformError> {
    assert!(beta >= 0.0, "inverse temperature must be nonnegative");
    let es = h.eigensystem()?;
    let e_min = es.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = es.values.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = h.dim();
    let mut diag = Array2::zeros((d, d));
    for (i, &w) in weights.iter().enumerate() {
        diag[[i, i]] = C64::new(w / z, 0.0);
    }
    let rho = es.from_eigenbasis(&diag);
    OperatorMatrix::with_subsystems(rho, h.subsystem_dims().to_vec()).map_err(Into::into)
}

/// RC-traced mean-force state: thermalize the extended system
/// `H_s (x) I + Omega a^dag a + lambda S (x) (a + a^dag)` at `beta` and trace
/// out the coordinate, keeping `levels` RC states.
pub fn mfgs_rc(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
    beta: f64,
    levels: usize,
) -> Result<OperatorMatrix, TransformError> {
    if levels < 2 {
        return Err(TransformError::InvalidDimension(format!(
            "RC trace needs at least 2 levels, got {levels}"
        )));
    }
    let eye_rc = OperatorMatrix::identity(levels);
    let a = OperatorMatrix::annihilation(levels)?;
    let x_rc = &a + &a.dagger();
    let number = a.dagger().matmul(&a);
    let eye_sys = OperatorMatrix::identity(h_s.dim());
    let mut h = OperatorMatrix::kron(h_s, &eye_rc);
    h = &h + &OperatorMatrix::kron(&eye_sys, &number).scale_re(omega);
    h = &h + &OperatorMatrix::kron(s, &x_rc).scale_re(lambda);
    let rho_ext = gibbs(&h, beta)?;
    rho_ext.partial_trace(&[0]).map_err(Into::into)
}

/// Like [`mfgs_rc`] but with the truncation chosen by doubling until the
/// reduced state stops moving (max-entry change below `tol`), starting from
/// `start_levels` and capped at `max_levels`.
pub fn mfgs_rc_converged(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
    beta: f64,
    start_levels: usize,
    max_levels: usize,
    tol: f64,
) -> Result<(OperatorMatrix, usize), TransformError> {
    let mut m = start_levels.max(2);
    let mut rho = mfgs_rc(h_s, s, lambda, omega, beta, m)?;
    loop {
        let m2 = (2 * m).min(max_levels.max(2));
        if m2 == m {
            return Ok((rho, m));
        }
        let rho2 = mfgs_rc(h_s, s, lambda, omega, beta, m2)?;
        if (&rho2 - &rho).norm_max() < tol {
            return Ok((rho2, m2));
        }
        rho = rho2;
        m = m2;
    }
}

/// Bloch vector of the dressed two-level Hamiltonian behind the closed-form
/// mean-force state: `v = ((1-y) sin 2t, 0, (1+y) + (1-y) cos 2t)` with
/// `y = exp(-2 lambda^2/Omega^2)`.
fn dressed_bloch_vector(theta: f64, lambda: f64, omega: f64) -> (f64, f64) {
    let y = (-2.0 * lambda * lambda / (omega * omega)).exp();
    let vx = (1.0 - y) * (2.0 * theta).sin();
    let vz = (1.0 + y) + (1.0 - y) * (2.0 * theta).cos();
    (vx, vz)
}

/// Closed-form mean-force state of the generalized spin-boson model:
/// `rho = (1/2)[I - (v.sigma/|v|) tanh(beta Delta |v| / 2)]`.
///
/// Exact at both ends: equals `gibbs(Delta sigma_z, beta)` at `lambda = 0`
/// and the ultrastrong state [`us_mfgs`] as `lambda / Omega -> inf`.
pub fn gsb_mfgs_closed_form(
    delta: f64,
    theta: f64,
    lambda: f64,
    omega: f64,
    beta: f64,
) -> OperatorMatrix {
    let (vx, vz) = dressed_bloch_vector(theta, lambda, omega);
    let norm = (vx * vx + vz * vz).sqrt();
    // tanh(b|v|/2)/|v| stays finite as |v| -> 0 (theta = pi/2 at ultrastrong
    // coupling): expand tanh(x)/x -> 1.
    let half_beta_delta = 0.5 * beta * delta;
    let coeff = if norm * half_beta_delta.abs() < 1e-8 {
        half_beta_delta
    } else {
        (half_beta_delta * norm).tanh() / norm
    };
    let x = OperatorMatrix::pauli(Pauli::X).scale_re(-coeff * vx * 0.5);
    let z = OperatorMatrix::pauli(Pauli::Z).scale_re(-coeff * vz * 0.5);
    let half_eye = OperatorMatrix::identity(2).scale_re(0.5);
    &(&half_eye + &x) + &z
}

/// Ultrastrong-coupling mean-force state:
/// `(1/2)[I - (sigma_x sin t + sigma_z cos t) tanh(beta Delta cos t)]`.
pub fn us_mfgs(delta: f64, theta: f64, beta: f64) -> OperatorMatrix {
    let t = (beta * delta * theta.cos()).tanh();
    let x = OperatorMatrix::pauli(Pauli::X).scale_re(-0.5 * theta.sin() * t);
    let z = OperatorMatrix::pauli(Pauli::Z).scale_re(-0.5 * theta.cos() * t);
    let half_eye = OperatorMatrix::identity(2).scale_re(0.5);
    &(&half_eye + &x) + &z
}

/// Population of the upper `H_s` eigenstate and coherence magnitude between
/// the `H_s` eigenstates, the reporting basis for all spin observables.
pub fn population_coherence(
    rho: &OperatorMatrix,
    h_s: &OperatorMatrix,
) -> Result<(f64, f64), TransformError> {
    let es = h_s.eigensystem()?;
    let in_basis = es.to_eigenbasis(rho);
    let d = rho.dim();
    Ok((in_basis[[d - 1, d - 1]].re, in_basis[[0, d - 1]].norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{OperatorMatrix, Pauli};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sigma_theta(theta: f64) -> OperatorMatrix {
        let z = OperatorMatrix::pauli(Pauli::Z).scale_re(theta.cos());
        let x = OperatorMatrix::pauli(Pauli::X).scale_re(theta.sin());
        &z + &x
    }

    #[test]
    fn gibbs_infinite_temperature_is_maximally_mixed() {
        let h = OperatorMatrix::pauli(Pauli::Z).scale_re(3.0);
        let rho = gibbs(&h, 0.0).unwrap();
        assert!((&rho - &OperatorMatrix::identity(2).scale_re(0.5)).norm_max() < 1e-14);
    }

    #[test]
    fn gibbs_two_level_boltzmann_ratio() {
        // H = Delta sigma_z, beta Delta = 1: excited weight e^{-2}/(1+e^{-2}).
        let h = OperatorMatrix::pauli(Pauli::Z);
        let rho = gibbs(&h, 1.0).unwrap();
        let p_exc = (-2.0f64).exp() / (1.0 + (-2.0f64).exp());
        assert_relative_eq!(rho.array()[[0, 0]].re, p_exc, max_relative = 1e-12);
        assert_relative_eq!(rho.array()[[0, 0]].re, 0.1192, max_relative = 1e-3);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gibbs_shift_invariance_and_large_beta() {
        let h = OperatorMatrix::pauli(Pauli::Z).scale_re(2.0);
        let shifted = &h + &OperatorMatrix::identity(2).scale_re(1e6);
        let a = gibbs(&h, 50.0).unwrap();
        let b = gibbs(&shifted, 50.0).unwrap();
        assert!((&a - &b).norm_max() < 1e-12);
        assert!(a.array()[[1, 1]].re > 1.0 - 1e-12);
    }

    #[test]
    fn mfgs_rc_decoupled_reduces_to_gibbs() {
        let h = OperatorMatrix::pauli(Pauli::Z).scale_re(1.0);
        let s = sigma_theta(std::f64::consts::FRAC_PI_4);
        let rho = mfgs_rc(&h, &s, 0.0, 20.0, 2.0, 8).unwrap();
        let bare = gibbs(&h, 2.0).unwrap();
        assert!((&rho - &bare).norm_max() < 1e-12);
    }

    #[test]
    fn mfgs_rc_infinite_temperature_spin_factor() {
        let h = OperatorMatrix::pauli(Pauli::Z);
        let s = sigma_theta(std::f64::consts::FRAC_PI_4);
        let rho = mfgs_rc(&h, &s, 4.0, 20.0, 0.0, 6).unwrap();
        assert!((&rho - &OperatorMatrix::identity(2).scale_re(0.5)).norm_max() < 1e-12);
    }

    #[test]
    fn mfgs_rc_tracks_closed_form_qualitatively() {
        // The RC-traced and effective closed-form states are different
        // approximations: exact agreement only at the weak end, matching
        // monotone growth of population and coherence in between.
        let (delta, omega, beta) = (1.0, 20.0, 2.0);
        let theta = std::f64::consts::FRAC_PI_4;
        let s = sigma_theta(theta);
        let h = OperatorMatrix::pauli(Pauli::Z).scale_re(delta);
        let mut rc_curve = Vec::new();
        let mut eff_curve = Vec::new();
        for &lambda in &[0.5, 2.0, 5.0, 8.0, 12.0] {
            let (rho_rc, _) = mfgs_rc_converged(&h, &s, lambda, omega, beta, 11, 64, 1e-9).unwrap();
            let rho_eff = gsb_mfgs_closed_form(delta, theta, lambda, omega, beta);
            rc_curve.push(population_coherence(&rho_rc, &h).unwrap());
            eff_curve.push(population_coherence(&rho_eff, &h).unwrap());
        }
        // Weak end: the two coincide.
        assert!((rc_curve[0].0 - eff_curve[0].0).abs() < 5e-3);
        assert!((rc_curve[0].1 - eff_curve[0].1).abs() < 5e-3);
        // In between: same monotone trends.
        for curve in [&rc_curve, &eff_curve] {
            for w in curve.windows(2) {
                assert!(w[1].0 >= w[0].0 - 1e-9, "population not rising: {curve:?}");
                assert!(w[1].1 >= w[0].1 - 1e-9, "coherence not rising: {curve:?}");
            }
        }
    }

    #[test]
    fn closed_form_reduces_to_gibbs_at_zero_coupling() {
        for &theta in &[0.0, 0.3, std::f64::consts::FRAC_PI_2] {
            let rho = gsb_mfgs_closed_form(1.0, theta, 0.0, 20.0, 2.0);
            let bare = gibbs(&OperatorMatrix::pauli(Pauli::Z), 2.0).unwrap();
            assert!((&rho - &bare).norm_max() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_dressed_hamiltonian_gibbs() {
        use crate::transforms::effective_system_hamiltonian;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..12 {
            let theta = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
            let ratio = rng.gen_range(0.0..1.0);
            let omega = 20.0;
            let lambda = ratio * omega;
            let (delta, beta) = (1.0, 2.0);
            let h = OperatorMatrix::pauli(Pauli::Z).scale_re(delta);
            let h_eff =
                effective_system_hamiltonian(&h, &sigma_theta(theta), lambda, omega).unwrap();
            let via_gibbs = gibbs(&h_eff, beta).unwrap();
            let closed = gsb_mfgs_closed_form(delta, theta, lambda, omega, beta);
            assert!(
                (&via_gibbs - &closed).norm_max() < 1e-12,
                "theta={theta} lambda={lambda}"
            );
        }
    }

    #[test]
    fn closed_form_pi_half_is_dressed_sigma_z_thermal() {
        let (delta, omega, beta) = (1.0f64, 20.0f64, 2.0f64);
        let lambda = 8.0f64;
        let y = (-2.0 * lambda * lambda / (omega * omega)).exp();
        let rho = gsb_mfgs_closed_form(delta, std::f64::consts::FRAC_PI_2, lambda, omega, beta);
        let expect_z = -0.5 * (beta * delta * y).tanh();
        assert_relative_eq!(rho.array()[[0, 0]].re, 0.5 + expect_z, max_relative = 1e-12);
        assert_abs_diff_eq!(rho.array()[[0, 1]].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ultrastrong_reference_points() {
        // theta = pi/2: maximally mixed.
        let rho = us_mfgs(1.0, std::f64::consts::FRAC_PI_2, 2.0);
        assert!((&rho - &OperatorMatrix::identity(2).scale_re(0.5)).norm_max() < 1e-14);
        // theta = pi/4: (1/2)[I - ((sx+sz)/sqrt2) tanh(beta Delta / sqrt2)].
        let rho = us_mfgs(1.0, std::f64::consts::FRAC_PI_4, 2.0);
        let t = (2.0f64 / 2f64.sqrt()).tanh();
        let s = 0.5f64.sqrt();
        assert_relative_eq!(rho.array()[[0, 0]].re, 0.5 - 0.5 * s * t, max_relative = 1e-12);
        assert_relative_eq!(rho.array()[[0, 1]].re, -0.5 * s * t, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_limits_to_ultrastrong() {
        let (delta, beta) = (1.0, 2.0);
        let omega = 1.0;
        let lambda = 1e3;
        for k in 0..=4 {
            let theta = k as f64 * std::f64::consts::FRAC_PI_2 / 4.0;
            let a = gsb_mfgs_closed_form(delta, theta, lambda, omega, beta);
            let b = us_mfgs(delta, theta, beta);
            assert!(
                (&a - &b).norm_max() < 1e-8,
                "theta grid point {k}: diff {}",
                (&a - &b).norm_max()
            );
        }
    }

    #[test]
    fn all_states_are_valid_density_matrices() {
        for &(theta, lambda) in &[(0.0, 0.0), (0.5, 5.0), (1.2, 15.0)] {
            let rho = gsb_mfgs_closed_form(1.0, theta, lambda, 20.0, 2.0);
            rho.check_density_matrix(1e-10).unwrap();
            let eig = rho.eigensystem().unwrap();
            assert!(eig.values.iter().all(|&p| p >= -1e-12));
        }
    }

    #[test]
    fn coherence_interpolates_and_saturates() {
        // At theta = pi/4 the eigenbasis coherence starts at zero, grows with
        // coupling, and saturates at the ultrastrong value.
        let (delta, omega, beta) = (1.0, 20.0, 2.0);
        let theta = std::f64::consts::FRAC_PI_4;
        let coh =
            |lambda: f64| {
                let rho = gsb_mfgs_closed_form(delta, theta, lambda, omega, beta);
                population_coherence(&rho, &OperatorMatrix::pauli(Pauli::Z).scale_re(delta))
                    .unwrap()
                    .1
            };
        assert_abs_diff_eq!(coh(0.0), 0.0, epsilon = 1e-14);
        let values: Vec<f64> = [2.0, 5.0, 10.0, 20.0, 40.0].iter().map(|&l| coh(l)).collect();
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "coherence not monotone: {values:?}");
        }
        let us = population_coherence(
            &us_mfgs(delta, theta, beta),
            &OperatorMatrix::pauli(Pauli::Z).scale_re(delta),
        )
        .unwrap()
        .1;
        assert_relative_eq!(values.last().unwrap(), &us, max_relative = 1e-3);
    }

    #[test]
    fn ultrastrong_coherence_peaks_at_intermediate_angle() {
        // On the pi/8 angle grid the eigenbasis coherence is largest at pi/4.
        let beta_delta = 2.0;
        let h = OperatorMatrix::pauli(Pauli::Z);
        let grid: Vec<f64> = (0..=4)
            .map(|k| k as f64 * std::f64::consts::FRAC_PI_2 / 4.0)
            .collect();
        let coh: Vec<f64> = grid
            .iter()
            .map(|&theta| {
                population_coherence(&us_mfgs(1.0, theta, beta_delta), &h)
                    .unwrap()
                    .1
            })
            .collect();
        let argmax = coh
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 2, "coherences on the grid: {coh:?}");
    }
}
