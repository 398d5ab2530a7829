//! The reaction-coordinate polaron-transform pipeline.
//!
//! Three steps take a strongly coupled model to an effective weakly coupled
//! one: extract a reaction coordinate from a structured bath
//! ([`build_rc_model`]), dress the system Hamiltonian by the polaron shift
//! conditioned on the coupling operator ([`effective_system_hamiltonian`]),
//! and truncate the RC to its ground state ([`build_effective_model`]).
//! [`rc_block_matrix_element`] keeps higher RC levels for systematic
//! corrections, and [`iterate_rcpt`] repeats the whole cycle on the mapped
//! spectral density.

use crate::operators::{OperatorError, OperatorMatrix};
use crate::spectral::{
    map_spectral_density, rc_parameters, Bath, BathSpectrum, SpectralDensity, SpectralError,
};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("bath {0} is not bosonic; reaction-coordinate extraction needs a bosonic bath")]
    WrongStatistics(usize),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("bath index {0} out of range")]
    BathIndex(usize),
    #[error(
        "coupling operators of the selected baths do not commute (max norm {0:.3e}); \
         pick commuting operators or a single bath"
    )]
    UnsupportedMultibath(f64),
    #[error("series for RC block (k={k}, p={p}) did not converge at n_max={n_max}; residual {residual:.3e}")]
    SeriesTruncationFailure {
        k: usize,
        p: usize,
        n_max: usize,
        residual: f64,
    },
    #[error("quadrature failed during iteration round {round}: {source}")]
    IterationRound {
        round: usize,
        source: SpectralError,
    },
}

/// Which stage of the pipeline a model lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Original,
    RcExtended,
    Effective,
}

/// Record of one extracted reaction coordinate.
#[derive(Debug, Clone)]
pub struct RcRecord {
    pub lambda: f64,
    pub omega: f64,
    /// RC truncation levels kept (for RC-extended models).
    pub levels: Option<usize>,
    /// Index of the bath this coordinate came from, in the parent model.
    pub parent_bath: usize,
}

/// An open quantum system: system Hamiltonian plus attached baths, tagged by
/// representation.
#[derive(Debug, Clone)]
pub struct OpenSystemModel {
    pub h_s: OperatorMatrix,
    pub baths: Vec<Bath>,
    pub representation: Representation,
    pub rc_meta: Vec<RcRecord>,
}

impl OpenSystemModel {
    pub fn new(h_s: OperatorMatrix, baths: Vec<Bath>) -> Result<Self, TransformError> {
        for (i, bath) in baths.iter().enumerate() {
            if bath.coupling_operator.dim() != h_s.dim() {
                return Err(TransformError::InvalidDimension(format!(
                    "bath {i} coupling operator dimension {} != system dimension {}",
                    bath.coupling_operator.dim(),
                    h_s.dim()
                )));
            }
        }
        Ok(Self {
            h_s,
            baths,
            representation: Representation::Original,
            rc_meta: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }
}

/// Polaron dressing of an arbitrary system operator by the ground-state
/// block of the displacement conditioned on Hermitian `s`:
/// in the eigenbasis of `s` with eigenvalues `s_i`, every matrix element is
/// scaled by `exp(-lambda^2 (s_i - s_j)^2 / (2 Omega^2))`. This closed form
/// resums the full displacement series exactly.
pub fn dress_operator(
    op: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
) -> Result<OperatorMatrix, TransformError> {
    if !s.is_hermitian(1e-10) {
        return Err(TransformError::Operator(OperatorError::InvalidOperator(
            "polaron coupling operator must be Hermitian".into(),
        )));
    }
    if s.dim() != op.dim() {
        return Err(TransformError::InvalidDimension(format!(
            "operator dimension {} != coupling operator dimension {}",
            op.dim(),
            s.dim()
        )));
    }
    assert!(omega > 0.0, "RC frequency must be positive");
    let es = s.eigensystem()?;
    let mut tilde = es.to_eigenbasis(op);
    let ratio2 = lambda * lambda / (2.0 * omega * omega);
    let d = op.dim();
    for i in 0..d {
        for j in 0..d {
            let ds = es.values[i] - es.values[j];
            tilde[[i, j]] *= (-ratio2 * ds * ds).exp();
        }
    }
    let back = es.from_eigenbasis(&tilde);
    OperatorMatrix::with_subsystems(back, op.subsystem_dims().to_vec()).map_err(Into::into)
}

/// Effective system Hamiltonian after polaron dressing and RC ground-state
/// truncation. If `[h_s, s] = 0` the Hamiltonian is returned unchanged.
pub fn effective_system_hamiltonian(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
) -> Result<OperatorMatrix, TransformError> {
    dress_operator(h_s, s, lambda, omega)
}

/// The `<k| . |p>` RC block of the dressed system Hamiltonian, keeping the RC
/// excited-state structure. Evaluated from the triple series
///
/// ```text
/// (k!p!)^{-1/2} sum_{j<=p} sum_{l<=k} sum_{n>=max(0,j-l)}
///   (-1)^{l-j} (n+l)!/(n!(n+l-j)!) C(k,l) C(p,j)
///   (lambda/Omega)^{k+p-2j+2n} e^{-a S^2} S^{k-l+n} H S^{p-2j+l+n} e^{-a S^2}
/// ```
///
/// with `a = lambda^2/(2 Omega^2)`, truncated at `n_max` once the last
/// term's largest entry falls below `1e-12` of the running maximum.
/// `(k, p) = (0, 0)` reproduces [`effective_system_hamiltonian`].
pub fn rc_block_matrix_element(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
    k: usize,
    p: usize,
    n_max: usize,
) -> Result<OperatorMatrix, TransformError> {
    if !s.is_hermitian(1e-10) {
        return Err(TransformError::Operator(OperatorError::InvalidOperator(
            "polaron coupling operator must be Hermitian".into(),
        )));
    }
    let es = s.eigensystem()?;
    let h_tilde = es.to_eigenbasis(h_s);
    let d = h_s.dim();
    let x = lambda / omega;
    let a = 0.5 * x * x;

    // Ground-state Gaussian factors exp(-a s_i^2) on both sides.
    let gauss: Vec<f64> = es.values.iter().map(|&si| (-a * si * si).exp()).collect();

    let ln_fact = |m: usize| -> f64 { (1..=m).map(|q| (q as f64).ln()).sum() };
    let binom = |n: usize, r: usize| -> f64 {
        (ln_fact(n) - ln_fact(r) - ln_fact(n - r)).exp().round()
    };

    let mut total: Array2<C64> = Array2::zeros((d, d));
    let mut running_max = 0.0f64;
    let mut converged = true;
    let mut worst_residual = 0.0f64;

    for j in 0..=p {
        for l in 0..=k {
            let n0 = j.saturating_sub(l);
            // Coefficient c_n = (n+l)!/(n!(n+l-j)!) x^{2n}, advanced by a
            // ratio recurrence to avoid factorial overflow.
            let mut c_n = ((ln_fact(n0 + l) - ln_fact(n0) - ln_fact(n0 + l - j)).exp())
                * x.powi(2 * n0 as i32);
            let sign = if (l + j) % 2 == 0 { 1.0 } else { -1.0 };
            let prefactor = sign * binom(k, l) * binom(p, j)
                * x.powi((k + p) as i32 - 2 * j as i32)
                / (0.5 * (ln_fact(k) + ln_fact(p))).exp();

            let mut inner_converged = false;
            let mut n = n0;
            #[allow(unused_assignments)]
            let mut term_max = 0.0f64;
            loop {
                // S powers are diagonal in the S eigenbasis.
                let pow_left = (k + n) as i32 - l as i32;
                let pow_right = (p + l + n) as i32 - 2 * j as i32;
                term_max = 0.0;
                let coeff = prefactor * c_n;
                if coeff != 0.0 {
                    for r in 0..d {
                        for cidx in 0..d {
                            let sl = es.values[r].powi(pow_left);
                            let sr = es.values[cidx].powi(pow_right);
                            let term =
                                h_tilde[[r, cidx]] * (coeff * sl * sr * gauss[r] * gauss[cidx]);
                            total[[r, cidx]] += term;
                            term_max = term_max.max(term.norm());
                        }
                    }
                }
                running_max =
                    running_max.max(total.iter().map(|z| z.norm()).fold(0.0, f64::max));
                if term_max < 1e-12 * running_max.max(f64::MIN_POSITIVE) && n > n0 {
                    inner_converged = true;
                    break;
                }
                if n >= n_max {
                    break;
                }
                let np1 = n + 1;
                c_n *= (np1 + l) as f64 * x * x / (np1 as f64 * (np1 + l - j) as f64);
                n = np1;
            }
            if !inner_converged {
                converged = false;
                worst_residual = worst_residual.max(term_max);
            }
        }
    }
    if !converged {
        return Err(TransformError::SeriesTruncationFailure {
            k,
            p,
            n_max,
            residual: worst_residual,
        });
    }
    let back = es.from_eigenbasis(&total);
    OperatorMatrix::with_subsystems(back, h_s.subsystem_dims().to_vec()).map_err(Into::into)
}

/// Extract a reaction coordinate from one bosonic bath, producing the
/// RC-extended model on `dim(system) * levels`.
///
/// The extended Hamiltonian is
/// `H_s (x) I + Omega I (x) a^dag a + lambda S (x) (a + a^dag) + (lambda^2/Omega) S^2 (x) I`
/// (the quadratic counter-term comes from the completed square; constant
/// shifts are dropped). The selected bath is replaced by the residual bath
/// coupling through `I (x) (a + a^dag)`: Ohmic with the Brownian width for
/// the Brownian branch, or the numerically mapped density for tabulated
/// input. Other baths are lifted by `(x) I`.
///
/// `residual_cutoff` sets the exponential cutoff of the residual Ohmic
/// density in the Brownian branch (the mapping is exact as the cutoff goes
/// to infinity, so any value well above every other energy scale works).
pub fn build_rc_model(
    model: &OpenSystemModel,
    bath_index: usize,
    levels: usize,
    residual_cutoff: f64,
) -> Result<OpenSystemModel, TransformError> {
    if levels < 2 {
        return Err(TransformError::InvalidDimension(format!(
            "RC truncation needs at least 2 levels, got {levels}"
        )));
    }
    let bath = model
        .baths
        .get(bath_index)
        .ok_or(TransformError::BathIndex(bath_index))?;
    let spectral = match &bath.spectrum {
        BathSpectrum::Bosonic { spectral } => spectral.clone(),
        BathSpectrum::Fermionic { .. } => return Err(TransformError::WrongStatistics(bath_index)),
    };
    let (lambda, omega, residual) = rc_input_branch(&spectral, residual_cutoff)?;

    let d = model.dim();
    let eye_sys =
        OperatorMatrix::identity(d).reshaped_subsystems(model.h_s.subsystem_dims().to_vec())?;
    let eye_rc = OperatorMatrix::identity(levels);
    let a = OperatorMatrix::annihilation(levels)?;
    let x_rc = &a + &a.dagger();
    let number = a.dagger().matmul(&a);

    let s = &bath.coupling_operator;
    let mut h_ext = OperatorMatrix::kron(&model.h_s, &eye_rc);
    h_ext = &h_ext + &OperatorMatrix::kron(&eye_sys, &number).scale_re(omega);
    h_ext = &h_ext + &OperatorMatrix::kron(s, &x_rc).scale_re(lambda);
    h_ext = &h_ext + &OperatorMatrix::kron(&s.matmul(s), &eye_rc).scale_re(lambda * lambda / omega);

    let mut baths = Vec::with_capacity(model.baths.len());
    for (i, b) in model.baths.iter().enumerate() {
        if i == bath_index {
            baths.push(Bath::bosonic(
                format!("{}-residual", b.label),
                b.temperature,
                OperatorMatrix::kron(&eye_sys, &x_rc),
                residual.clone(),
            )?);
        } else {
            let mut lifted = b.clone();
            lifted.coupling_operator = OperatorMatrix::kron(&b.coupling_operator, &eye_rc);
            baths.push(lifted);
        }
    }

    let mut rc_meta = model.rc_meta.clone();
    rc_meta.push(RcRecord {
        lambda,
        omega,
        levels: Some(levels),
        parent_bath: bath_index,
    });
    Ok(OpenSystemModel {
        h_s: h_ext,
        baths,
        representation: Representation::RcExtended,
        rc_meta,
    })
}

/// RC parameters and residual density for one extraction. Brownian input has
/// the closed-form branch; everything else goes through quadrature.
fn rc_input_branch(
    spectral: &SpectralDensity,
    residual_cutoff: f64,
) -> Result<(f64, f64, SpectralDensity), TransformError> {
    match spectral {
        SpectralDensity::Brownian { lambda, omega0, gamma } => Ok((
            *lambda,
            *omega0,
            SpectralDensity::ohmic_exp(*gamma, residual_cutoff),
        )),
        other => {
            let (lambda, omega) = rc_parameters(other)?;
            let grid = mapping_grid(other);
            let mapped = map_spectral_density(other, lambda, &grid)?;
            Ok((lambda, omega, mapped))
        }
    }
}

fn mapping_grid(j: &SpectralDensity) -> Vec<f64> {
    match j {
        SpectralDensity::Tabulated { points } => points.iter().map(|&(w, _)| w).collect(),
        _ => {
            let wmax = match *j {
                SpectralDensity::OhmicExp { cutoff, .. }
                | SpectralDensity::ScaledOhmic { cutoff, .. } => 12.0 * cutoff,
                _ => j.integration_domain(),
            };
            let n = 400;
            (0..=n).map(|i| wmax * i as f64 / n as f64).collect()
        }
    }
}

/// Apply the full pipeline to the selected baths at once, producing the
/// effective model on the original system dimension.
///
/// Every selected bath must be bosonic; with two or more selected their
/// coupling operators must mutually commute (the polaron displacements then
/// commute and the dressing is order-independent). The system Hamiltonian
/// and the coupling operators of *unselected* baths are polaron-dressed by
/// each extraction; each selected bath is replaced by a residual bath that
/// couples through the original operator with the `(2 lambda/Omega)^2`-scaled
/// mapped density.
pub fn build_effective_model(
    model: &OpenSystemModel,
    bath_indices: &[usize],
    residual_cutoff: f64,
) -> Result<OpenSystemModel, TransformError> {
    if bath_indices.is_empty() {
        return Err(TransformError::BathIndex(usize::MAX));
    }
    let mut selected = Vec::new();
    for &i in bath_indices {
        let bath = model.baths.get(i).ok_or(TransformError::BathIndex(i))?;
        match &bath.spectrum {
            BathSpectrum::Bosonic { spectral } => selected.push((i, bath, spectral.clone())),
            BathSpectrum::Fermionic { .. } => return Err(TransformError::WrongStatistics(i)),
        }
    }
    // Commutation precondition for multi-bath dressing.
    if selected.len() >= 2 {
        let mut worst = 0.0f64;
        for a in 0..selected.len() {
            for b in a + 1..selected.len() {
                let comm = selected[a]
                    .1
                    .coupling_operator
                    .commutator(&selected[b].1.coupling_operator);
                worst = worst.max(comm.norm_max());
            }
        }
        if worst > 1e-10 {
            return Err(TransformError::UnsupportedMultibath(worst));
        }
    }

    let mut extractions = Vec::new();
    for (i, _bath, spectral) in &selected {
        let (lambda, omega, residual) = rc_input_branch(spectral, residual_cutoff)?;
        extractions.push((*i, lambda, omega, residual));
    }

    // Dress the system Hamiltonian and every unselected coupling operator by
    // each extraction in turn (order-independent under the commuting
    // precondition; exact conjugation for the rest).
    let mut h_eff = model.h_s.clone();
    for &(i, lambda, omega, _) in &extractions {
        let s = &model.baths[i].coupling_operator;
        h_eff = dress_operator(&h_eff, s, lambda, omega)?;
    }

    let mut baths = Vec::with_capacity(model.baths.len());
    for (bi, b) in model.baths.iter().enumerate() {
        if let Some(&(_, lambda, omega, ref residual)) =
            extractions.iter().find(|&&(i, ..)| i == bi)
        {
            let prefactor = 4.0 * lambda * lambda / (omega * omega);
            let effective_density = match residual {
                SpectralDensity::OhmicExp { gamma, cutoff } => {
                    SpectralDensity::scaled_ohmic(prefactor, *gamma, *cutoff)
                }
                SpectralDensity::Tabulated { points } => SpectralDensity::tabulated(
                    points.iter().map(|&(w, j)| (w, prefactor * j)).collect(),
                )?,
                other => other.clone(),
            };
            baths.push(Bath::bosonic(
                format!("{}-effective", b.label),
                b.temperature,
                b.coupling_operator.clone(),
                effective_density,
            )?);
        } else {
            let mut dressed = b.clone();
            for &(i, lambda, omega, _) in &extractions {
                let s = &model.baths[i].coupling_operator;
                dressed.coupling_operator =
                    dress_operator(&dressed.coupling_operator, s, lambda, omega)?;
            }
            baths.push(dressed);
        }
    }

    let mut rc_meta = model.rc_meta.clone();
    for &(i, lambda, omega, _) in &extractions {
        rc_meta.push(RcRecord {
            lambda,
            omega,
            levels: None,
            parent_bath: i,
        });
    }
    Ok(OpenSystemModel {
        h_s: h_eff,
        baths,
        representation: Representation::Effective,
        rc_meta,
    })
}

/// Two lowest eigenvalues of the extended model at `levels` RC levels.
fn extended_low_spectrum(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
    levels: usize,
) -> Result<(f64, f64), TransformError> {
    let eye_rc = OperatorMatrix::identity(levels);
    let a = OperatorMatrix::annihilation(levels)?;
    let x_rc = &a + &a.dagger();
    let number = a.dagger().matmul(&a);
    let eye_sys = OperatorMatrix::identity(h_s.dim());
    let mut h = OperatorMatrix::kron(h_s, &eye_rc);
    h = &h + &OperatorMatrix::kron(&eye_sys, &number).scale_re(omega);
    h = &h + &OperatorMatrix::kron(s, &x_rc).scale_re(lambda);
    h = &h + &OperatorMatrix::kron(&s.matmul(s), &eye_rc).scale_re(lambda * lambda / omega);
    let es = h.eigensystem()?;
    Ok((es.values[0], es.values[1]))
}

/// Pick an RC truncation that converges the two lowest extended-model
/// eigenvalues: start from `10 * max(1, T/Omega + lambda^2/Omega^2)` and
/// double until they move by less than `1e-8`, capped at `max_levels`.
pub fn converged_rc_levels(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    lambda: f64,
    omega: f64,
    temperature: f64,
    max_levels: usize,
) -> Result<usize, TransformError> {
    let start =
        (10.0 * (temperature / omega + lambda * lambda / (omega * omega)).max(1.0)).ceil() as usize;
    let mut m = start.max(2).min(max_levels.max(2));
    let (mut e0, mut e1) = extended_low_spectrum(h_s, s, lambda, omega, m)?;
    loop {
        let m2 = (2 * m).min(max_levels.max(2));
        if m2 == m {
            return Ok(m);
        }
        let (f0, f1) = extended_low_spectrum(h_s, s, lambda, omega, m2)?;
        if (f0 - e0).abs() < 1e-8 && (f1 - e1).abs() < 1e-8 {
            return Ok(m2);
        }
        m = m2;
        e0 = f0;
        e1 = f1;
    }
}

/// Per-round record of an iterated mapping.
#[derive(Debug, Clone)]
pub struct IterationLedger {
    /// `(lambda_i, Omega_i)` for each round, in application order.
    pub rounds: Vec<(f64, f64)>,
    /// Accumulated residual coupling prefactor `prod_i (2 lambda_i / Omega_i)`.
    pub coupling_prefactor: f64,
}

/// Repeat extract -> dress -> remap on a single bosonic bath `rounds` times.
///
/// Each round pulls the current density's RC parameters, polaron-dresses the
/// running system Hamiltonian with the same coupling operator, and maps the
/// density with the `(2 lambda/Omega)^2` prefactor. One round reproduces
/// [`build_effective_model`] on that bath.
pub fn iterate_rcpt(
    model: &OpenSystemModel,
    bath_index: usize,
    rounds: usize,
    residual_cutoff: f64,
) -> Result<(OpenSystemModel, IterationLedger), TransformError> {
    assert!(rounds >= 1, "need at least one round");
    let bath = model
        .baths
        .get(bath_index)
        .ok_or(TransformError::BathIndex(bath_index))?;
    let mut density = match &bath.spectrum {
        BathSpectrum::Bosonic { spectral } => spectral.clone(),
        BathSpectrum::Fermionic { .. } => return Err(TransformError::WrongStatistics(bath_index)),
    };
    let s = bath.coupling_operator.clone();
    let mut h = model.h_s.clone();
    let mut ledger = IterationLedger {
        rounds: Vec::with_capacity(rounds),
        coupling_prefactor: 1.0,
    };
    for round in 0..rounds {
        let wrap = |source: SpectralError| TransformError::IterationRound { round, source };
        let (lambda, omega, residual) = match &density {
            SpectralDensity::Brownian { .. } => rc_input_branch(&density, residual_cutoff)?,
            other => {
                let (lambda, omega) = rc_parameters(other).map_err(wrap)?;
                let grid = mapping_grid(other);
                let mapped = map_spectral_density(other, lambda, &grid).map_err(wrap)?;
                (lambda, omega, mapped)
            }
        };
        h = dress_operator(&h, &s, lambda, omega)?;
        let prefactor = 4.0 * lambda * lambda / (omega * omega);
        density = match residual {
            SpectralDensity::OhmicExp { gamma, cutoff } => {
                SpectralDensity::scaled_ohmic(prefactor, gamma, cutoff)
            }
            SpectralDensity::Tabulated { points } => SpectralDensity::tabulated(
                points.into_iter().map(|(w, j)| (w, prefactor * j)).collect(),
            )
            .map_err(wrap)?,
            other => other,
        };
        ledger.rounds.push((lambda, omega));
        ledger.coupling_prefactor *= 2.0 * lambda / omega;
    }

    let mut baths = model.baths.clone();
    baths[bath_index] = Bath::bosonic(
        format!("{}-iterated", bath.label),
        bath.temperature,
        s,
        density,
    )?;
    let mut rc_meta = model.rc_meta.clone();
    for &(lambda, omega) in &ledger.rounds {
        rc_meta.push(RcRecord {
            lambda,
            omega,
            levels: None,
            parent_bath: bath_index,
        });
    }
    Ok((
        OpenSystemModel {
            h_s: h,
            baths,
            representation: Representation::Effective,
            rc_meta,
        },
        ledger,
    ))
}
