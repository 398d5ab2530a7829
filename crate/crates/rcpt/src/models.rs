//! Builders for the application models in original, RC-extended, and
//! effective representations, plus their analytic performance predicates:
//! the generalized spin-boson model ([`gsb`]), nonequilibrium spin-boson
//! transport ([`nesb`]), the three-level absorption refrigerator ([`qar`])
//! with its cooling window, the phonon-assisted double quantum dot
//! ([`dqd`]) with its thermoelectric efficiency, and dissipative spin
//! chains ([`spin_chain`]).

use crate::operators::{OperatorMatrix, Pauli};
use crate::redfield::SteadyStateResult;
use crate::spectral::{Bath, SpectralDensity};
use crate::transforms::{
    build_effective_model, build_rc_model, converged_rc_levels, OpenSystemModel, Representation,
    TransformError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error("coupling angle {0} outside [0, pi/2]")]
    InvalidAngle(f64),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("not operating as a generator: {0}")]
    UndefinedEfficiency(String),
}

/// A Brownian (peaked) bosonic bath attached at strong coupling, together
/// with the exponential cutoff the residual Ohmic bath inherits after the
/// mapping.
#[derive(Debug, Clone)]
pub struct BrownianBathSpec {
    /// Coupling strength (the swept knob in every study).
    pub lambda: f64,
    /// Peak frequency; becomes the RC frequency.
    pub omega: f64,
    /// Dimensionless width; becomes the residual Ohmic coupling.
    pub gamma: f64,
    pub temperature: f64,
    /// Residual-bath exponential cutoff.
    pub cutoff: f64,
}

impl BrownianBathSpec {
    pub fn density(&self) -> SpectralDensity {
        SpectralDensity::brownian(self.lambda, self.omega, self.gamma)
    }

    fn bath(&self, label: &str, coupling: OperatorMatrix) -> Result<Bath, ModelError> {
        Ok(Bath::bosonic(label, self.temperature, coupling, self.density())?)
    }
}

/// A weakly coupled Ohmic bath (exponential cutoff), used where a reservoir
/// is treated at plain second order.
#[derive(Debug, Clone)]
pub struct WeakBathSpec {
    pub gamma: f64,
    pub temperature: f64,
    pub cutoff: f64,
}

impl WeakBathSpec {
    fn bath(&self, label: &str, coupling: OperatorMatrix) -> Result<Bath, ModelError> {
        Ok(Bath::bosonic(
            label,
            self.temperature,
            coupling,
            SpectralDensity::ohmic_exp(self.gamma, self.cutoff),
        )?)
    }
}

/// `sigma_theta = cos(theta) sigma_z + sin(theta) sigma_x`.
pub fn sigma_theta(theta: f64) -> OperatorMatrix {
    let z = OperatorMatrix::pauli(Pauli::Z).scale_re(theta.cos());
    let x = OperatorMatrix::pauli(Pauli::X).scale_re(theta.sin());
    &z + &x
}

fn check_angle(theta: f64) -> Result<(), ModelError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(ModelError::InvalidAngle(theta));
    }
    Ok(())
}

/// Default RC truncation for a single extracted coordinate, capped so the
/// dense Liouvillian stays within the solver budget.
fn auto_levels(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    bath: &BrownianBathSpec,
    cap: usize,
) -> Result<usize, ModelError> {
    Ok(converged_rc_levels(
        h_s,
        s,
        bath.lambda,
        bath.omega,
        bath.temperature,
        cap,
    )?)
}

// ---------------------------------------------------------------------------
// Generalized spin-boson
// ---------------------------------------------------------------------------

/// Spin `Delta sigma_z` coupled through `sigma_theta` to one Brownian bath.
#[derive(Debug, Clone)]
pub struct GsbSpec {
    pub delta: f64,
    /// Coupling angle in `[0, pi/2]`: `0` is pure dephasing, `pi/2` the
    /// standard spin-boson model.
    pub theta: f64,
    pub bath: BrownianBathSpec,
    /// RC truncation override for the RC-extended representation.
    pub rc_levels: Option<usize>,
}

pub fn gsb(spec: &GsbSpec, representation: Representation) -> Result<OpenSystemModel, ModelError> {
    check_angle(spec.theta)?;
    if spec.delta <= 0.0 {
        return Err(ModelError::InvalidSpec("spin splitting must be positive".into()));
    }
    let h = OperatorMatrix::pauli(Pauli::Z).scale_re(spec.delta);
    let s = sigma_theta(spec.theta);
    let original = OpenSystemModel::new(h.clone(), vec![spec.bath.bath("bath", s.clone())?])?;
    Ok(match representation {
        Representation::Original => original,
        Representation::RcExtended => {
            let m = match spec.rc_levels {
                Some(m) => m,
                None => auto_levels(&h, &s, &spec.bath, 48)?,
            };
            build_rc_model(&original, 0, m, spec.bath.cutoff)?
        }
        Representation::Effective => build_effective_model(&original, &[0], spec.bath.cutoff)?,
    })
}

/// Splitting coefficient of the dressed two-level Hamiltonian
/// `A sigma_z + B sigma_x`: `sqrt(A^2 + B^2)` with
/// `A = (Delta/2)[(1+y) + (1-y) cos 2theta]`, `B = (Delta/2)(1-y) sin 2theta`
/// and `y = exp(-2 lambda^2/Omega^2)`. Reduces to `Delta` at `theta = 0`,
/// `Delta y` at `theta = pi/2`, and
/// `(Delta/sqrt 2) sqrt(1 + y^2)` at `theta = pi/4`.
pub fn effective_splitting(delta: f64, theta: f64, lambda: f64, omega: f64) -> f64 {
    let y = (-2.0 * lambda * lambda / (omega * omega)).exp();
    let a = 0.5 * delta * ((1.0 + y) + (1.0 - y) * (2.0 * theta).cos());
    let b = 0.5 * delta * (1.0 - y) * (2.0 * theta).sin();
    (a * a + b * b).sqrt()
}

// ---------------------------------------------------------------------------
// Nonequilibrium spin-boson
// ---------------------------------------------------------------------------

/// Spin `Delta sigma_z` bridging two Brownian baths, both coupled through
/// `sigma_x` (commuting, so both coordinates can be dressed at once).
#[derive(Debug, Clone)]
pub struct NesbSpec {
    pub delta: f64,
    pub left: BrownianBathSpec,
    pub right: BrownianBathSpec,
    /// Per-coordinate RC truncation for the RC-extended representation.
    /// Both coordinates use the same count; the extended dimension is
    /// `2 * levels^2`.
    pub rc_levels: Option<usize>,
}

/// Default per-coordinate truncation for two simultaneously extracted
/// coordinates; `2 * 6^2 = 72` keeps the dense solve around half a GB.
pub const NESB_DEFAULT_RC_LEVELS: usize = 6;

pub fn nesb(spec: &NesbSpec, representation: Representation) -> Result<OpenSystemModel, ModelError> {
    if spec.delta <= 0.0 {
        return Err(ModelError::InvalidSpec("spin splitting must be positive".into()));
    }
    let h = OperatorMatrix::pauli(Pauli::Z).scale_re(spec.delta);
    let sx = OperatorMatrix::pauli(Pauli::X);
    let original = OpenSystemModel::new(
        h,
        vec![
            spec.left.bath("left", sx.clone())?,
            spec.right.bath("right", sx.clone())?,
        ],
    )?;
    Ok(match representation {
        Representation::Original => original,
        Representation::RcExtended => {
            let m = spec.rc_levels.unwrap_or(NESB_DEFAULT_RC_LEVELS);
            let ext = build_rc_model(&original, 0, m, spec.left.cutoff)?;
            build_rc_model(&ext, 1, m, spec.right.cutoff)?
        }
        Representation::Effective => build_effective_model(&original, &[0, 1], spec.left.cutoff)?,
    })
}

// ---------------------------------------------------------------------------
// Quantum absorption refrigerator
// ---------------------------------------------------------------------------

/// Three-level refrigerator: levels at `0, Delta, 1`, cold bath on the
/// `1<->2` transition (strong, Brownian, RC-treated), hot on `1<->3` and
/// work on `2<->3` (weak Ohmic). Temperatures must satisfy
/// `T_c < T_h < T_w`.
#[derive(Debug, Clone)]
pub struct QarSpec {
    pub delta: f64,
    pub cold: BrownianBathSpec,
    pub hot: WeakBathSpec,
    pub work: WeakBathSpec,
    pub rc_levels: Option<usize>,
}

/// Energy of the top refrigerator level; the other two sit at `0` and
/// `Delta`.
pub const QAR_TOP_LEVEL: f64 = 1.0;

pub fn qar(spec: &QarSpec, representation: Representation) -> Result<OpenSystemModel, ModelError> {
    if !(spec.cold.temperature < spec.hot.temperature
        && spec.hot.temperature < spec.work.temperature)
    {
        return Err(ModelError::InvalidSpec(format!(
            "need T_c < T_h < T_w, got ({}, {}, {})",
            spec.cold.temperature, spec.hot.temperature, spec.work.temperature
        )));
    }
    let h = OperatorMatrix::from_diagonal(&[0.0, spec.delta, QAR_TOP_LEVEL]);
    let s_c = &OperatorMatrix::ketbra(3, 0, 1) + &OperatorMatrix::ketbra(3, 1, 0);
    let s_w = &OperatorMatrix::ketbra(3, 1, 2) + &OperatorMatrix::ketbra(3, 2, 1);
    let s_h = &OperatorMatrix::ketbra(3, 0, 2) + &OperatorMatrix::ketbra(3, 2, 0);
    let original = OpenSystemModel::new(
        h.clone(),
        vec![
            spec.cold.bath("cold", s_c.clone())?,
            spec.hot.bath("hot", s_h)?,
            spec.work.bath("work", s_w)?,
        ],
    )?;
    Ok(match representation {
        Representation::Original => original,
        Representation::RcExtended => {
            let m = match spec.rc_levels {
                Some(m) => m,
                None => auto_levels(&h, &s_c, &spec.cold, 32)?,
            };
            build_rc_model(&original, 0, m, spec.cold.cutoff)?
        }
        Representation::Effective => build_effective_model(&original, &[0], spec.cold.cutoff)?,
    })
}

/// Renormalized refrigerator levels
/// `(Delta/2)(1 -+ y), 1` with `y = exp(-2 lambda_c^2/Omega_c^2)`.
pub fn qar_renormalized_levels(delta: f64, lambda_c: f64, omega_c: f64) -> (f64, f64, f64) {
    let y = (-2.0 * lambda_c * lambda_c / (omega_c * omega_c)).exp();
    (
        0.5 * delta * (1.0 - y),
        0.5 * delta * (1.0 + y),
        QAR_TOP_LEVEL,
    )
}

/// Cooling condition with dressed levels:
/// `Delta y / (1 - (Delta/2)(1-y)) <= (beta_h - beta_w)/(beta_c - beta_w)`.
pub fn cooling_window(
    delta: f64,
    lambda_c: f64,
    omega_c: f64,
    beta_c: f64,
    beta_h: f64,
    beta_w: f64,
) -> bool {
    assert!(
        beta_c > beta_h && beta_h > beta_w,
        "need beta_c > beta_h > beta_w"
    );
    let y = (-2.0 * lambda_c * lambda_c / (omega_c * omega_c)).exp();
    let lhs = delta * y / (1.0 - 0.5 * delta * (1.0 - y));
    let rhs = (beta_h - beta_w) / (beta_c - beta_w);
    lhs <= rhs
}

/// Largest splitting that still cools at the given coupling:
/// the cooling inequality is linear in `Delta`, with root
/// `Delta* = r / (y + r (1 - y)/2)` for `r = (beta_h-beta_w)/(beta_c-beta_w)`.
pub fn cooling_window_boundary(
    lambda_c: f64,
    omega_c: f64,
    beta_c: f64,
    beta_h: f64,
    beta_w: f64,
) -> f64 {
    let y = (-2.0 * lambda_c * lambda_c / (omega_c * omega_c)).exp();
    let r = (beta_h - beta_w) / (beta_c - beta_w);
    r / (y + 0.5 * r * (1.0 - y))
}

// ---------------------------------------------------------------------------
// Phonon-assisted double quantum dot
// ---------------------------------------------------------------------------

/// Double quantum dot in the many-body basis `(empty, left, right, double)`,
/// wideband leads on the single-occupancy transitions, and a Brownian phonon
/// bath driving the interdot hop.
#[derive(Debug, Clone)]
pub struct DqdSpec {
    pub eps_left: f64,
    pub eps_right: f64,
    /// Coulomb energy of double occupancy.
    pub coulomb: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub t_left: f64,
    pub t_right: f64,
    pub mu_left: f64,
    pub mu_right: f64,
    pub phonon: BrownianBathSpec,
    pub rc_levels: Option<usize>,
}

impl DqdSpec {
    /// The leads must stay well below their temperatures for the wideband
    /// second-order treatment to hold; surfaced as warnings, never fatal.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gamma_left > 0.5 * self.t_left {
            out.push(format!(
                "left hybridization {} is not small against T_L={}",
                self.gamma_left, self.t_left
            ));
        }
        if self.gamma_right > 0.5 * self.t_right {
            out.push(format!(
                "right hybridization {} is not small against T_R={}",
                self.gamma_right, self.t_right
            ));
        }
        out
    }
}

/// Many-body number operator: one electron on `left`/`right`, two on
/// `double`.
pub fn dqd_number_operator() -> OperatorMatrix {
    OperatorMatrix::from_diagonal(&[0.0, 1.0, 1.0, 2.0])
}

/// Phonon-dressed dot energies
/// `eps_L(l) = [eps_L cosh(x) + eps_R sinh(x)] e^{-x}` (and mirrored),
/// `x = lambda^2/Omega^2`. Their sum is `lambda`-independent and their
/// difference carries `e^{-2x}`.
pub fn dqd_renormalized_energies(
    eps_left: f64,
    eps_right: f64,
    lambda: f64,
    omega: f64,
) -> (f64, f64) {
    let x = lambda * lambda / (omega * omega);
    let damp = (-x).exp();
    (
        (eps_left * x.cosh() + eps_right * x.sinh()) * damp,
        (eps_right * x.cosh() + eps_left * x.sinh()) * damp,
    )
}

pub fn dqd(spec: &DqdSpec, representation: Representation) -> Result<OpenSystemModel, ModelError> {
    let h = OperatorMatrix::from_diagonal(&[
        0.0,
        spec.eps_left,
        spec.eps_right,
        spec.eps_left + spec.eps_right + spec.coulomb,
    ]);
    // Lowering operators paired with lead-electron creation; the fermionic
    // sign sits on the empty<->left element.
    let a_left = &OperatorMatrix::ketbra(4, 0, 1).scale_re(-1.0) + &OperatorMatrix::ketbra(4, 2, 3);
    let a_right = &OperatorMatrix::ketbra(4, 0, 2) + &OperatorMatrix::ketbra(4, 1, 3);
    let s_phonon = &OperatorMatrix::ketbra(4, 1, 2) + &OperatorMatrix::ketbra(4, 2, 1);
    let original = OpenSystemModel::new(
        h.clone(),
        vec![
            Bath::fermionic("lead-left", spec.t_left, spec.mu_left, spec.gamma_left, a_left),
            Bath::fermionic(
                "lead-right",
                spec.t_right,
                spec.mu_right,
                spec.gamma_right,
                a_right,
            ),
            spec.phonon.bath("phonon", s_phonon.clone())?,
        ],
    )?;
    Ok(match representation {
        Representation::Original => original,
        Representation::RcExtended => {
            let m = match spec.rc_levels {
                Some(m) => m,
                None => auto_levels(&h, &s_phonon, &spec.phonon, 16)?,
            };
            build_rc_model(&original, 2, m, spec.phonon.cutoff)?
        }
        Representation::Effective => build_effective_model(&original, &[2], spec.phonon.cutoff)?,
    })
}

/// Thermoelectric generator efficiency `eta = P / j_q` with
/// `P = j_e (mu_R - mu_L)` and `j_q = j_u - mu_L j_e` at the hot (left)
/// contact. `heat_current` and `charge_current` are the left lead's energy
/// and charge currents, positive into the system.
pub fn thermoelectric_efficiency(
    result: &SteadyStateResult,
    left_lead_index: usize,
    mu_left: f64,
    mu_right: f64,
) -> Result<f64, ModelError> {
    let j_u = result.heat_currents[left_lead_index];
    let j_e = result.charge_currents[left_lead_index].ok_or_else(|| {
        ModelError::UndefinedEfficiency("charge current not filled for the left lead".into())
    })?;
    let power = j_e * (mu_right - mu_left);
    let j_q = j_u - mu_left * j_e;
    if power <= 0.0 || j_q <= 0.0 {
        return Err(ModelError::UndefinedEfficiency(format!(
            "power {power:.3e}, hot-lead heat current {j_q:.3e}"
        )));
    }
    Ok(power / j_q)
}

// ---------------------------------------------------------------------------
// Dissipative spin chains
// ---------------------------------------------------------------------------

/// `N`-site chain with per-site splittings, XYZ exchange, and one local
/// Brownian bath per site coupled through that site's `sigma_x`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    /// Per-site `(splitting, bath)`; length is the chain size.
    pub sites: Vec<(f64, BrownianBathSpec)>,
    pub j_x: f64,
    pub j_y: f64,
    pub j_z: f64,
    /// Per-site RC truncation for the RC-extended representation. Dense
    /// memory grows as `(2^N * levels^N)^2`, so keep this small.
    pub rc_levels: Option<usize>,
}

/// Default per-site truncation for chain RC extraction; at `N = 2` the
/// extended dimension is `2^2 * 4^2 = 64`.
pub const CHAIN_DEFAULT_RC_LEVELS: usize = 4;

/// Single-site operator embedded in the `N`-qubit space.
pub fn site_operator(op: &OperatorMatrix, site: usize, sites: usize) -> OperatorMatrix {
    let factors: Vec<OperatorMatrix> = (0..sites)
        .map(|k| {
            if k == site {
                op.clone()
            } else {
                OperatorMatrix::identity(2)
            }
        })
        .collect();
    let refs: Vec<&OperatorMatrix> = factors.iter().collect();
    OperatorMatrix::kron_all(&refs)
}

pub fn spin_chain(
    spec: &ChainSpec,
    representation: Representation,
) -> Result<OpenSystemModel, ModelError> {
    let n = spec.sites.len();
    if n < 2 {
        return Err(ModelError::InvalidSpec(format!(
            "chain needs at least 2 sites, got {n}"
        )));
    }
    let mut h = OperatorMatrix::zeros(1 << n)
        .reshaped_subsystems(vec![2; n])
        .map_err(TransformError::from)?;
    for (alpha, (delta, _)) in spec.sites.iter().enumerate() {
        let sz = site_operator(&OperatorMatrix::pauli(Pauli::Z), alpha, n);
        h = &h + &sz.scale_re(*delta);
    }
    for alpha in 0..n - 1 {
        for (j, pauli) in [
            (spec.j_x, Pauli::X),
            (spec.j_y, Pauli::Y),
            (spec.j_z, Pauli::Z),
        ] {
            if j != 0.0 {
                let a = site_operator(&OperatorMatrix::pauli(pauli), alpha, n);
                let b = site_operator(&OperatorMatrix::pauli(pauli), alpha + 1, n);
                h = &h + &a.matmul(&b).scale_re(j);
            }
        }
    }
    let mut baths = Vec::with_capacity(n);
    for (alpha, (_, bath)) in spec.sites.iter().enumerate() {
        let sx = site_operator(&OperatorMatrix::pauli(Pauli::X), alpha, n);
        baths.push(bath.bath(&format!("site-{alpha}"), sx)?);
    }
    let original = OpenSystemModel::new(h, baths)?;
    Ok(match representation {
        Representation::Original => original,
        Representation::RcExtended => {
            let m = spec.rc_levels.unwrap_or(CHAIN_DEFAULT_RC_LEVELS);
            let mut model = original;
            for alpha in 0..n {
                let cutoff = spec.sites[alpha].1.cutoff;
                model = build_rc_model(&model, alpha, m, cutoff)?;
            }
            model
        }
        Representation::Effective => {
            let indices: Vec<usize> = (0..n).collect();
            build_effective_model(&original, &indices, spec.sites[0].1.cutoff)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::redfield::{build_liouvillian, steady_state};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn bath_spec(lambda: f64, omega: f64) -> BrownianBathSpec {
        BrownianBathSpec {
            lambda,
            omega,
            gamma: 0.0071,
            temperature: 0.5,
            cutoff: 1000.0,
        }
    }

    #[test]
    fn gsb_effective_three_angles() {
        let (lambda, omega) = (8.0f64, 20.0f64);
        let y = (-2.0 * lambda * lambda / (omega * omega)).exp();
        // theta = 0: unchanged.
        let spec = GsbSpec {
            delta: 1.0,
            theta: 0.0,
            bath: bath_spec(lambda, omega),
            rc_levels: None,
        };
        let eff = gsb(&spec, Representation::Effective).unwrap();
        assert!((&eff.h_s - &OperatorMatrix::pauli(Pauli::Z)).norm_max() < 1e-12);
        // theta = pi/2: exponential suppression.
        let spec = GsbSpec {
            theta: std::f64::consts::FRAC_PI_2,
            ..spec
        };
        let eff = gsb(&spec, Representation::Effective).unwrap();
        assert!((&eff.h_s - &OperatorMatrix::pauli(Pauli::Z).scale_re(y)).norm_max() < 1e-12);
        // theta = pi/4: renormalized sigma_z plus generated sigma_x.
        let spec = GsbSpec {
            theta: std::f64::consts::FRAC_PI_4,
            ..spec
        };
        let eff = gsb(&spec, Representation::Effective).unwrap();
        let expect = &OperatorMatrix::pauli(Pauli::Z).scale_re(0.5 * (1.0 + y))
            + &OperatorMatrix::pauli(Pauli::X).scale_re(0.5 * (1.0 - y));
        assert!((&eff.h_s - &expect).norm_max() < 1e-12);
    }

    #[test]
    fn gsb_rejects_bad_angle() {
        let spec = GsbSpec {
            delta: 1.0,
            theta: 2.0,
            bath: bath_spec(1.0, 20.0),
            rc_levels: None,
        };
        assert!(matches!(
            gsb(&spec, Representation::Original),
            Err(ModelError::InvalidAngle(_))
        ));
    }

    #[test]
    fn effective_splitting_closed_forms() {
        let delta = 1.0;
        assert_relative_eq!(effective_splitting(delta, 0.0, 7.0, 20.0), delta, max_relative = 1e-12);
        // theta = pi/2 at lambda/Omega = 1/2.
        assert_relative_eq!(
            effective_splitting(delta, std::f64::consts::FRAC_PI_2, 10.0, 20.0),
            delta * (-0.5f64).exp(),
            max_relative = 1e-12
        );
        // theta = pi/4.
        let (lambda, omega) = (9.0f64, 20.0f64);
        let y2 = (-4.0 * lambda * lambda / (omega * omega)).exp();
        assert_relative_eq!(
            effective_splitting(delta, std::f64::consts::FRAC_PI_4, lambda, omega),
            delta / 2f64.sqrt() * (1.0 + y2).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn nesb_effective_hamiltonian_sums_exponents() {
        let spec = NesbSpec {
            delta: 1.0,
            left: bath_spec(4.0, 20.0),
            right: bath_spec(4.0, 20.0),
            rc_levels: None,
        };
        let eff = nesb(&spec, Representation::Effective).unwrap();
        // Symmetric baths: exponent doubles relative to a single bath.
        let y = (-2.0 * (16.0 / 400.0) * 2.0f64).exp();
        assert!((&eff.h_s - &OperatorMatrix::pauli(Pauli::Z).scale_re(y)).norm_max() < 1e-12);

        let zero = NesbSpec {
            left: bath_spec(0.0, 20.0),
            right: bath_spec(0.0, 20.0),
            ..spec
        };
        let eff0 = nesb(&zero, Representation::Effective).unwrap();
        let orig = nesb(&zero, Representation::Original).unwrap();
        assert!((&eff0.h_s - &orig.h_s).norm_max() < 1e-14);
    }

    #[test]
    fn nesb_rc_extended_dimensions() {
        let spec = NesbSpec {
            delta: 1.0,
            left: bath_spec(3.0, 20.0),
            right: bath_spec(2.0, 10.0),
            rc_levels: Some(3),
        };
        let ext = nesb(&spec, Representation::RcExtended).unwrap();
        assert_eq!(ext.dim(), 2 * 3 * 3);
        assert_eq!(ext.h_s.subsystem_dims(), &[2, 3, 3]);
        assert_eq!(ext.rc_meta.len(), 2);
    }

    fn qar_spec(delta: f64, lambda_c: f64, omega_c: f64) -> QarSpec {
        QarSpec {
            delta,
            cold: BrownianBathSpec {
                lambda: lambda_c,
                omega: omega_c,
                gamma: 0.0071,
                temperature: 0.25,
                cutoff: 1000.0,
            },
            hot: WeakBathSpec {
                gamma: 0.0071,
                temperature: 0.5,
                cutoff: 1000.0,
            },
            work: WeakBathSpec {
                gamma: 0.0071,
                temperature: 1.5,
                cutoff: 1000.0,
            },
            rc_levels: None,
        }
    }

    #[test]
    fn qar_effective_levels_and_cross_dressing() {
        let (delta, lambda_c, omega_c) = (0.5, 8.0, 20.0);
        let spec = qar_spec(delta, lambda_c, omega_c);
        let eff = qar(&spec, Representation::Effective).unwrap();
        let (e1, e2, e3) = qar_renormalized_levels(delta, lambda_c, omega_c);
        assert_relative_eq!(eff.h_s.array()[[0, 0]].re, e1, max_relative = 1e-12);
        assert_relative_eq!(eff.h_s.array()[[1, 1]].re, e2, max_relative = 1e-12);
        assert_relative_eq!(eff.h_s.array()[[2, 2]].re, e3, max_relative = 1e-12);
        // Hot and work coupling operators pick up exp(-lambda^2/2 Omega^2),
        // so their squared amplitudes scale as exp(-lambda^2/Omega^2).
        let amp = (-lambda_c * lambda_c / (2.0 * omega_c * omega_c)).exp();
        assert_relative_eq!(
            eff.baths[1].coupling_operator.array()[[0, 2]].re,
            amp,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            eff.baths[2].coupling_operator.array()[[1, 2]].re,
            amp,
            max_relative = 1e-12
        );
    }

    #[test]
    fn qar_zero_coupling_is_identity_and_matches_original_steady_state() {
        let spec = qar_spec(0.3, 0.0, 20.0);
        let orig = qar(&spec, Representation::Original).unwrap();
        let eff = qar(&spec, Representation::Effective).unwrap();
        assert!((&orig.h_s - &eff.h_s).norm_max() < 1e-14);
        let ss_o = steady_state(&build_liouvillian(&orig).unwrap()).unwrap();
        let ss_e = steady_state(&build_liouvillian(&eff).unwrap()).unwrap();
        assert!((&ss_o.rho_ss - &ss_e.rho_ss).norm_max() < 1e-10);
    }

    #[test]
    fn qar_requires_ordered_temperatures() {
        let mut spec = qar_spec(0.3, 1.0, 20.0);
        spec.hot.temperature = 0.1;
        assert!(matches!(
            qar(&spec, Representation::Original),
            Err(ModelError::InvalidSpec(_))
        ));
    }

    #[test]
    fn cooling_window_weak_coupling_boundary() {
        let (beta_c, beta_h, beta_w) = (4.0, 2.0, 1.0 / 1.5);
        let boundary = cooling_window_boundary(0.0, 20.0, beta_c, beta_h, beta_w);
        assert_abs_diff_eq!(boundary, 0.4, epsilon = 1e-12);
        assert!(cooling_window(0.399, 0.0, 20.0, beta_c, beta_h, beta_w));
        assert!(!cooling_window(0.401, 0.0, 20.0, beta_c, beta_h, beta_w));
    }

    #[test]
    fn cooling_window_strong_coupling_boundary_moves_out() {
        let (beta_c, beta_h, beta_w) = (4.0, 2.0, 1.0 / 1.5);
        // lambda_c/Omega_c = 1/2.
        let boundary = cooling_window_boundary(10.0, 20.0, beta_c, beta_h, beta_w);
        assert_relative_eq!(boundary, 0.584, max_relative = 2e-3);
        // Very strong coupling: the dressed gap collapses and any Delta
        // below the saturation bound cools.
        assert!(cooling_window(1.2, 1e4, 20.0, beta_c, beta_h, beta_w));
    }

    #[test]
    fn dqd_renormalization_identities() {
        let (eps_l, eps_r, omega) = (0.0, 2.0, 100.0);
        // Reference point at lambda = Omega.
        let (el, er) = dqd_renormalized_energies(eps_l, eps_r, omega, omega);
        assert_abs_diff_eq!(el, 1.0 - (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(er, 1.0 + (-2.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(el, 0.8647, max_relative = 1e-4);
        assert_relative_eq!(er, 1.1353, max_relative = 1e-4);
        for k in 0..=10 {
            let lambda = k as f64 * 15.0;
            let (el, er) = dqd_renormalized_energies(eps_l, eps_r, lambda, omega);
            assert_abs_diff_eq!(el + er, eps_l + eps_r, epsilon = 1e-12);
            assert_abs_diff_eq!(
                er - el,
                (eps_r - eps_l) * (-2.0 * lambda * lambda / (omega * omega)).exp(),
                epsilon = 1e-12
            );
        }
    }

    fn dqd_spec(lambda: f64) -> DqdSpec {
        DqdSpec {
            eps_left: 0.0,
            eps_right: 2.0,
            coulomb: 500.0,
            gamma_left: 0.1,
            gamma_right: 0.1,
            t_left: 10.0,
            t_right: 1.0,
            mu_left: -0.3,
            mu_right: -0.2,
            phonon: BrownianBathSpec {
                lambda,
                omega: 100.0,
                gamma: 1.0 / (2.0 * std::f64::consts::PI),
                temperature: 1.0,
                cutoff: 1000.0,
            },
            rc_levels: None,
        }
    }

    #[test]
    fn dqd_effective_matches_renormalized_parameters() {
        let lambda = 40.0;
        let spec = dqd_spec(lambda);
        let eff = dqd(&spec, Representation::Effective).unwrap();
        let (el, er) = dqd_renormalized_energies(0.0, 2.0, lambda, 100.0);
        assert_relative_eq!(eff.h_s.array()[[1, 1]].re, el, max_relative = 1e-12);
        assert_relative_eq!(eff.h_s.array()[[2, 2]].re, er, max_relative = 1e-12);
        // Double occupancy untouched.
        assert_relative_eq!(eff.h_s.array()[[3, 3]].re, 502.0, max_relative = 1e-12);
        // Lead amplitudes dressed: |h(lambda)|^2 = |h|^2 exp(-l^2/W^2).
        let amp = (-lambda * lambda / (2.0 * 100.0 * 100.0f64)).exp();
        assert_relative_eq!(
            eff.baths[0].coupling_operator.array()[[0, 1]].re,
            -amp,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            eff.baths[0].coupling_operator.array()[[2, 3]].re,
            amp,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dqd_zero_coupling_matches_original_steady_state() {
        let spec = dqd_spec(1e-12);
        let orig = dqd(&spec, Representation::Original).unwrap();
        let eff = dqd(&spec, Representation::Effective).unwrap();
        let ss_o = steady_state(&build_liouvillian(&orig).unwrap()).unwrap();
        let ss_e = steady_state(&build_liouvillian(&eff).unwrap()).unwrap();
        assert!((&ss_o.rho_ss - &ss_e.rho_ss).norm_max() < 1e-10);
    }

    #[test]
    fn dqd_warnings_flag_large_hybridization() {
        let mut spec = dqd_spec(1.0);
        assert!(spec.warnings().is_empty());
        spec.gamma_right = 2.0;
        assert_eq!(spec.warnings().len(), 1);
    }

    #[test]
    fn efficiency_requires_generator_operation() {
        let rho = OperatorMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        let mk = |j_u: f64, j_e: Option<f64>| SteadyStateResult {
            rho_ss: rho.clone(),
            heat_currents: vec![j_u, 0.0, 0.0],
            charge_currents: vec![j_e, None, None],
            residual: 0.0,
            min_eigenvalue: 0.0,
        };
        // Generator: j_e > 0 against mu_R > mu_L, hot heat inflow positive.
        let eta = thermoelectric_efficiency(&mk(0.02, Some(0.05)), 0, -0.3, -0.2).unwrap();
        // P = 0.05 * 0.1, j_q = 0.02 + 0.3*0.05 = 0.035.
        assert_relative_eq!(eta, 0.005 / 0.035, max_relative = 1e-12);
        // Reversed current: undefined.
        assert!(thermoelectric_efficiency(&mk(0.02, Some(-0.05)), 0, -0.3, -0.2).is_err());
        // Missing charge current: undefined.
        assert!(thermoelectric_efficiency(&mk(0.02, None), 0, -0.3, -0.2).is_err());
    }

    fn chain_spec(lambda: f64, j_x: f64, j_y: f64, j_z: f64) -> ChainSpec {
        let site = |l: f64| {
            (
                1.0,
                BrownianBathSpec {
                    lambda: l,
                    omega: 10.0,
                    gamma: 0.0071,
                    temperature: 0.5,
                    cutoff: 1000.0,
                },
            )
        };
        ChainSpec {
            sites: vec![site(lambda), site(lambda)],
            j_x,
            j_y,
            j_z,
            rc_levels: None,
        }
    }

    #[test]
    fn chain_effective_dressing_pattern() {
        let (lambda, omega) = (4.0f64, 10.0f64);
        let y = (-2.0 * lambda * lambda / (omega * omega)).exp();
        let spec = chain_spec(lambda, 0.2, 0.3, 0.4);
        let eff = spin_chain(&spec, Representation::Effective).unwrap();
        let sx = |site| site_operator(&OperatorMatrix::pauli(Pauli::X), site, 2);
        let sy = |site| site_operator(&OperatorMatrix::pauli(Pauli::Y), site, 2);
        let sz = |site| site_operator(&OperatorMatrix::pauli(Pauli::Z), site, 2);
        let mut expect = &(&sz(0) + &sz(1)).scale_re(y) + &sx(0).matmul(&sx(1)).scale_re(0.2);
        expect = &expect + &sy(0).matmul(&sy(1)).scale_re(0.3 * y * y);
        expect = &expect + &sz(0).matmul(&sz(1)).scale_re(0.4 * y * y);
        assert!(
            (&eff.h_s - &expect).norm_max() < 1e-12,
            "deviation {}",
            (&eff.h_s - &expect).norm_max()
        );
    }

    #[test]
    fn chain_ising_interaction_survives_any_coupling() {
        for &lambda in &[0.0, 3.0, 9.0] {
            let spec = chain_spec(lambda, 0.2, 0.0, 0.0);
            let eff = spin_chain(&spec, Representation::Effective).unwrap();
            let sxsx = site_operator(&OperatorMatrix::pauli(Pauli::X), 0, 2)
                .matmul(&site_operator(&OperatorMatrix::pauli(Pauli::X), 1, 2));
            // Project out the sigma_x sigma_x component: it must stay 0.2.
            let overlap = eff.h_s.matmul(&sxsx).trace().re / 4.0;
            assert_relative_eq!(overlap, 0.2, max_relative = 1e-12);
        }
    }

    #[test]
    fn chain_xx_approaches_ising_entrywise() {
        let j = 0.2;
        let mut diffs = Vec::new();
        for &lambda in &[1.0, 2.0, 3.0, 4.0] {
            let xx = spin_chain(&chain_spec(lambda, j, j, 0.0), Representation::Effective).unwrap();
            let ising = spin_chain(&chain_spec(lambda, j, 0.0, 0.0), Representation::Effective).unwrap();
            diffs.push((&xx.h_s - &ising.h_s).norm_max());
        }
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "not monotone: {diffs:?}");
        }
        // The leftover is exactly the dressed J_y sigma_y sigma_y term.
        let lambda = 4.0f64;
        let y = (-2.0 * lambda * lambda / 100.0).exp();
        assert_relative_eq!(diffs[3], j * y * y, max_relative = 1e-10);
    }

    #[test]
    fn chain_zero_coupling_is_original() {
        let spec = chain_spec(0.0, 0.2, 0.2, 0.0);
        let orig = spin_chain(&spec, Representation::Original).unwrap();
        let eff = spin_chain(&spec, Representation::Effective).unwrap();
        assert!((&orig.h_s - &eff.h_s).norm_max() < 1e-14);
    }

    #[test]
    fn chain_needs_two_sites() {
        let mut spec = chain_spec(1.0, 0.1, 0.0, 0.0);
        spec.sites.truncate(1);
        assert!(matches!(
            spin_chain(&spec, Representation::Original),
            Err(ModelError::InvalidSpec(_))
        ));
    }
}
