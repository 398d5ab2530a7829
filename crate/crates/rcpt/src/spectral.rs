//! Spectral-density families, reaction-coordinate parameter extraction, the
//! principal-value spectral-density mapping, and bath occupation / rate
//! functions.
//!
//! Units: `ħ = k_B = e = 1`. Frequencies, temperatures, and chemical
//! potentials are all energies.

use crate::operators::OperatorMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("quadrature failure: {context} (residual estimate {residual:.3e})")]
    QuadratureFailure { context: String, residual: f64 },
    #[error("operation requires a {expected} bath")]
    WrongStatistics { expected: &'static str },
    #[error("invalid spectral density: {0}")]
    InvalidDensity(String),
}

/// Frequency-resolved system-bath coupling `J(omega)`.
///
/// `Brownian` is a Lorentzian peak at `omega0` of dimensionless width
/// `gamma`, with overall coupling strength `lambda`:
/// `J(w) = 4 gamma omega0^2 lambda^2 w / [(w^2-omega0^2)^2 + (2 pi gamma omega0 w)^2]`.
/// `OhmicExp` is `gamma * w * exp(-w/cutoff)`; `ScaledOhmic` carries an extra
/// dimensionless prefactor. `Tabulated` interpolates linearly on an ascending
/// grid and is zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    Brownian { lambda: f64, omega0: f64, gamma: f64 },
    OhmicExp { gamma: f64, cutoff: f64 },
    ScaledOhmic { prefactor: f64, gamma: f64, cutoff: f64 },
    Tabulated { points: Vec<(f64, f64)> },
}

impl SpectralDensity {
    pub fn brownian(lambda: f64, omega0: f64, gamma: f64) -> Self {
        assert!(omega0 > 0.0 && gamma > 0.0 && lambda >= 0.0);
        Self::Brownian { lambda, omega0, gamma }
    }

    pub fn ohmic_exp(gamma: f64, cutoff: f64) -> Self {
        assert!(gamma > 0.0 && cutoff > 0.0);
        Self::OhmicExp { gamma, cutoff }
    }

    pub fn scaled_ohmic(prefactor: f64, gamma: f64, cutoff: f64) -> Self {
        assert!(prefactor >= 0.0 && gamma > 0.0 && cutoff > 0.0);
        Self::ScaledOhmic { prefactor, gamma, cutoff }
    }

    /// Build a tabulated density from an ascending `(omega, J)` grid.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        if points.len() < 2 {
            return Err(SpectralError::InvalidDensity(
                "tabulated density needs at least two grid points".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SpectralError::InvalidDensity(format!(
                    "grid not strictly ascending at omega={}",
                    w[1].0
                )));
            }
        }
        if points.iter().any(|&(w, _)| w < 0.0) {
            return Err(SpectralError::InvalidDensity(
                "tabulated grid must be nonnegative".into(),
            ));
        }
        Ok(Self::Tabulated { points })
    }

    /// Parse a two-column whitespace-delimited `(omega, J)` text table.
    pub fn from_table_text(text: &str) -> Result<Self, SpectralError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64, SpectralError> {
                tok.ok_or_else(|| {
                    SpectralError::InvalidDensity(format!("line {}: expected two columns", lineno + 1))
                })?
                .parse::<f64>()
                .map_err(|e| SpectralError::InvalidDensity(format!("line {}: {e}", lineno + 1)))
            };
            let w = parse(cols.next())?;
            let j = parse(cols.next())?;
            points.push((w, j));
        }
        Self::tabulated(points)
    }

    /// Evaluate `J(omega)` for `omega >= 0`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        match *self {
            Self::Brownian { lambda, omega0, gamma } => {
                let num = 4.0 * gamma * omega0 * omega0 * lambda * lambda * omega;
                let a = omega * omega - omega0 * omega0;
                let b = 2.0 * std::f64::consts::PI * gamma * omega0 * omega;
                num / (a * a + b * b)
            }
            Self::OhmicExp { gamma, cutoff } => gamma * omega * (-omega.abs() / cutoff).exp(),
            Self::ScaledOhmic { prefactor, gamma, cutoff } => {
                prefactor * gamma * omega * (-omega.abs() / cutoff).exp()
            }
            Self::Tabulated { ref points } => interp_linear(points, omega),
        }
    }

    /// Upper end of the frequency range that carries essentially all weight.
    pub(crate) fn integration_domain(&self) -> f64 {
        match *self {
            Self::Brownian { omega0, .. } => 10.0 * omega0,
            Self::OhmicExp { cutoff, .. } | Self::ScaledOhmic { cutoff, .. } => 20.0 * cutoff,
            Self::Tabulated { ref points } => points.last().unwrap().0,
        }
    }

    /// Slope `J(omega)/omega` as `omega -> 0`, used for the zero-frequency
    /// rate branch.
    pub(crate) fn slope_at_zero(&self) -> f64 {
        match *self {
            Self::Brownian { lambda, omega0, gamma } => 4.0 * gamma * lambda * lambda / (omega0 * omega0),
            Self::OhmicExp { gamma, .. } => gamma,
            Self::ScaledOhmic { prefactor, gamma, .. } => prefactor * gamma,
            Self::Tabulated { ref points } => {
                match points.iter().find(|&&(w, _)| w > 0.0) {
                    Some(&(w, j)) => j / w,
                    None => 0.0,
                }
            }
        }
    }
}

fn interp_linear(points: &[(f64, f64)], x: f64) -> f64 {
    let n = points.len();
    if x < points[0].0 || x > points[n - 1].0 {
        return 0.0;
    }
    let idx = points.partition_point(|&(w, _)| w <= x);
    if idx == 0 {
        return points[0].1;
    }
    if idx >= n {
        return points[n - 1].1;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson on `[a, b]`. Returns (value, residual estimate).
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
        err_acc: &mut f64,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth >= QUAD_MAX_DEPTH || delta.abs() <= 15.0 * tol {
            *err_acc += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth + 1, err_acc)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth + 1, err_acc)
    }
    if a >= b {
        return (0.0, 0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let mut err = 0.0;
    let val = recurse(f, a, fa, b, fb, whole, m, fm, tol, 0, &mut err);
    (val, err)
}

/// Integrate over `[a, b]` split at interior breakpoints (peaks, grid nodes)
/// so the adaptive rule starts from a resolving partition.
fn integrate_with_breakpoints(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol_abs: f64,
) -> (f64, f64) {
    let mut nodes: Vec<f64> = vec![a, b];
    nodes.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in nodes.windows(2) {
        let (v, e) = adaptive_simpson(f, w[0], w[1], tol_abs.max(f64::MIN_POSITIVE));
        total += v;
        err += e;
    }
    (total, err)
}

fn natural_breakpoints(j: &SpectralDensity) -> Vec<f64> {
    match *j {
        SpectralDensity::Brownian { omega0, gamma, .. } => {
            let width = (2.0 * std::f64::consts::PI * gamma * omega0).max(1e-6 * omega0);
            vec![
                omega0 - 5.0 * width,
                omega0 - width,
                omega0,
                omega0 + width,
                omega0 + 5.0 * width,
                2.0 * omega0,
            ]
        }
        SpectralDensity::OhmicExp { cutoff, .. } | SpectralDensity::ScaledOhmic { cutoff, .. } => {
            vec![cutoff, 2.0 * cutoff, 5.0 * cutoff, 10.0 * cutoff]
        }
        SpectralDensity::Tabulated { ref points } => points.iter().map(|&(w, _)| w).collect(),
    }
}

/// Moment of a piecewise-linear table: exact per-segment integral of
/// `omega^k * J(omega)`.
fn tabulated_moment(points: &[(f64, f64)], k: u32) -> f64 {
    let mut acc = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let slope = (y1 - y0) / (x1 - x0);
        let c0 = y0 - slope * x0;
        // integral of x^k (c0 + slope x) = c0 x^{k+1}/(k+1) + slope x^{k+2}/(k+2)
        let p1 = (k + 1) as f64;
        let p2 = (k + 2) as f64;
        acc += c0 * (x1.powf(p1) - x0.powf(p1)) / p1 + slope * (x1.powf(p2) - x0.powf(p2)) / p2;
    }
    acc
}

/// Reaction-coordinate parameters `(lambda, Omega)` extracted from `J`.
///
/// `lambda^2 = (1/Omega) int_0^inf w J(w) dw` and
/// `Omega^2 = int w^3 J / int w J`, evaluated by adaptive quadrature over the
/// density's natural domain. The moment route requires the third moment to be
/// integrable; the Brownian family fails that (its tail decays as `1/w^3`),
/// and is also the one case with an exact answer, so it short-circuits to its
/// own `(lambda, omega0)` parameters.
pub fn rc_parameters(j: &SpectralDensity) -> Result<(f64, f64), SpectralError> {
    if let SpectralDensity::Brownian { lambda, omega0, .. } = *j {
        return Ok((lambda, omega0));
    }
    let (m1, m3) = match j {
        SpectralDensity::Tabulated { points } => {
            (tabulated_moment(points, 1), tabulated_moment(points, 3))
        }
        _ => {
            let wmax = j.integration_domain();
            let bp = natural_breakpoints(j);
            let f1 = |w: f64| w * j.evaluate(w);
            let f3 = |w: f64| w * w * w * j.evaluate(w);
            // Scale-aware absolute tolerance from a crude first pass.
            let rough: f64 = (0..64)
                .map(|i| f1((i as f64 + 0.5) * wmax / 64.0) * wmax / 64.0)
                .sum::<f64>()
                .abs()
                .max(f64::MIN_POSITIVE);
            let (m1, e1) = integrate_with_breakpoints(&f1, 0.0, wmax, &bp, QUAD_REL_TOL * rough);
            let (m3, e3) =
                integrate_with_breakpoints(&f3, 0.0, wmax, &bp, QUAD_REL_TOL * rough * wmax * wmax);
            if e1 > 1e-6 * m1.abs().max(f64::MIN_POSITIVE) {
                return Err(SpectralError::QuadratureFailure {
                    context: "first moment of spectral density".into(),
                    residual: e1,
                });
            }
            if e3 > 1e-6 * m3.abs().max(f64::MIN_POSITIVE) {
                return Err(SpectralError::QuadratureFailure {
                    context: "third moment of spectral density".into(),
                    residual: e3,
                });
            }
            (m1, m3)
        }
    };
    if m1 <= 0.0 || m3 <= 0.0 {
        return Err(SpectralError::QuadratureFailure {
            context: "nonpositive spectral moments".into(),
            residual: m1.min(m3),
        });
    }
    let omega = (m3 / m1).sqrt();
    let lambda = (m1 / omega).sqrt();
    Ok((lambda, omega))
}

/// Principal-value Cauchy transform `P int J(w') / (w' - w) dw'` with `J`
/// continued antisymmetrically to negative frequencies, i.e.
/// `P int_0^wmax J(w') 2w' / (w'^2 - w^2) dw'`. Computed by symmetric
/// excision of radius `eps` around the pole with Richardson extrapolation
/// over `eps, eps/2, eps/4`.
fn principal_value(j: &SpectralDensity, omega: f64, wmax: f64) -> Result<f64, SpectralError> {
    let bp = natural_breakpoints(j);
    let f = |w: f64| j.evaluate(w) * (1.0 / (w - omega) + 1.0 / (w + omega));
    let scale = j
        .evaluate(omega)
        .abs()
        .max(j.evaluate(0.5 * wmax).abs())
        .max(f64::MIN_POSITIVE);
    let tol = QUAD_REL_TOL * scale * wmax;
    let h0 = (0.02 * omega.min(wmax - omega)).max(1e-9 * wmax);
    let mut estimates = [0.0f64; 3];
    let mut err_acc = 0.0f64;
    for (k, est) in estimates.iter_mut().enumerate() {
        let eps = h0 / 2f64.powi(k as i32);
        let (left, e1) = integrate_with_breakpoints(&f, 0.0, omega - eps, &bp, tol);
        let (right, e2) = integrate_with_breakpoints(&f, omega + eps, wmax, &bp, tol);
        *est = left + right;
        err_acc = err_acc.max(e1 + e2);
    }
    // Excision error is a + b*eps + c*eps^2; two halvings cancel both terms.
    let p0 = (8.0 * estimates[2] - 6.0 * estimates[1] + estimates[0]) / 3.0;
    if !p0.is_finite() {
        return Err(SpectralError::QuadratureFailure {
            context: format!("principal value at omega={omega}"),
            residual: err_acc,
        });
    }
    Ok(p0)
}

/// Map a spectral density through one reaction-coordinate extraction:
/// `J_RC(w) = lambda^2 J(w) / (W(w)^2 + pi^2 J(w)^2)`, evaluated pointwise
/// on `grid`, where `W` is the principal-value Cauchy transform of the
/// antisymmetrically continued density. `W + i pi J` is the mode propagator
/// whose reciprocal imaginary part exposes the residual-bath density; with a
/// Lorentzian (Brownian) input this lands exactly on the Ohmic form.
pub fn map_spectral_density(
    j: &SpectralDensity,
    lambda: f64,
    grid: &[f64],
) -> Result<SpectralDensity, SpectralError> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(SpectralError::InvalidDensity(
            "mapping grid must be ascending and nonnegative".into(),
        ));
    }
    let wmax = j.integration_domain().max(2.0 * grid.last().unwrap());
    let pi = std::f64::consts::PI;
    let mut points = Vec::with_capacity(grid.len());
    for &w in grid {
        if w == 0.0 {
            points.push((0.0, 0.0));
            continue;
        }
        let jw = j.evaluate(w);
        let pv = principal_value(j, w, wmax)?;
        let denom = pv * pv + pi * pi * jw * jw;
        let val = if denom > 0.0 {
            lambda * lambda * jw / denom
        } else {
            0.0
        };
        points.push((w, val.max(0.0)));
    }
    SpectralDensity::tabulated(points)
}

// ---------------------------------------------------------------------------
// Baths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BathStatistics {
    Bosonic,
    Fermionic,
}

/// Spectral content of a bath: a full density for bosonic baths, an
/// energy-independent (wideband) hybridization plus chemical potential for
/// fermionic leads.
#[derive(Debug, Clone)]
pub enum BathSpectrum {
    Bosonic { spectral: SpectralDensity },
    Fermionic { hybridization: f64, chemical_potential: f64 },
}

/// A thermal reservoir attached to the system through `coupling_operator`.
#[derive(Debug, Clone)]
pub struct Bath {
    pub temperature: f64,
    pub coupling_operator: OperatorMatrix,
    pub spectrum: BathSpectrum,
    pub label: String,
}

impl Bath {
    /// Bosonic bath; the coupling operator must be Hermitian.
    pub fn bosonic(
        label: impl Into<String>,
        temperature: f64,
        coupling_operator: OperatorMatrix,
        spectral: SpectralDensity,
    ) -> Result<Self, SpectralError> {
        assert!(temperature > 0.0, "bath temperature must be positive");
        if !coupling_operator.is_hermitian(1e-10) {
            return Err(SpectralError::InvalidDensity(
                "bosonic coupling operator must be Hermitian".into(),
            ));
        }
        Ok(Self {
            temperature,
            coupling_operator,
            spectrum: BathSpectrum::Bosonic { spectral },
            label: label.into(),
        })
    }

    /// Wideband fermionic lead. `coupling_operator` is the system lowering
    /// operator paired with lead-electron creation.
    pub fn fermionic(
        label: impl Into<String>,
        temperature: f64,
        chemical_potential: f64,
        hybridization: f64,
        coupling_operator: OperatorMatrix,
    ) -> Self {
        assert!(temperature > 0.0, "bath temperature must be positive");
        assert!(hybridization >= 0.0);
        Self {
            temperature,
            coupling_operator,
            spectrum: BathSpectrum::Fermionic {
                hybridization,
                chemical_potential,
            },
            label: label.into(),
        }
    }

    pub fn statistics(&self) -> BathStatistics {
        match self.spectrum {
            BathSpectrum::Bosonic { .. } => BathStatistics::Bosonic,
            BathSpectrum::Fermionic { .. } => BathStatistics::Fermionic,
        }
    }

    pub fn spectral_density(&self) -> Option<&SpectralDensity> {
        match &self.spectrum {
            BathSpectrum::Bosonic { spectral } => Some(spectral),
            BathSpectrum::Fermionic { .. } => None,
        }
    }
}

/// Thermal occupation: Bose-Einstein `1/(e^{w/T}-1)` for bosonic baths,
/// Fermi-Dirac `1/(e^{(w-mu)/T}+1)` for fermionic leads.
pub fn occupation(bath: &Bath, omega: f64) -> f64 {
    match bath.spectrum {
        BathSpectrum::Bosonic { .. } => 1.0 / ((omega / bath.temperature).exp() - 1.0),
        BathSpectrum::Fermionic { chemical_potential, .. } => {
            1.0 / (((omega - chemical_potential) / bath.temperature).exp() + 1.0)
        }
    }
}

/// Half-Fourier-transform rate of a bosonic bath at Bohr frequency `omega`:
/// `pi J(w)(n(w)+1)` for `w > 0`, `pi J(|w|) n(|w|)` for `w < 0`, and the
/// analytic `pi T J'(0)` limit at `w = 0`.
pub fn bath_rate(bath: &Bath, omega: f64) -> Result<f64, SpectralError> {
    let spectral = match &bath.spectrum {
        BathSpectrum::Bosonic { spectral } => spectral,
        BathSpectrum::Fermionic { .. } => {
            return Err(SpectralError::WrongStatistics { expected: "bosonic" })
        }
    };
    let pi = std::f64::consts::PI;
    let rate = if omega == 0.0 {
        pi * spectral.slope_at_zero() * bath.temperature
    } else {
        let w = omega.abs();
        let n = 1.0 / ((w / bath.temperature).exp() - 1.0);
        if omega > 0.0 {
            pi * spectral.evaluate(w) * (n + 1.0)
        } else {
            pi * spectral.evaluate(w) * n
        }
    };
    Ok(rate.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FermiDirection {
    /// Electron transfer from the lead into the system.
    Gain,
    /// Electron transfer from the system into the lead.
    Loss,
}

/// Wideband fermionic rates: gain `(Gamma/2) f(w)`, loss `(Gamma/2)(1-f(w))`.
pub fn fermi_rates(bath: &Bath, omega: f64, direction: FermiDirection) -> Result<f64, SpectralError> {
    let (gamma, mu) = match bath.spectrum {
        BathSpectrum::Fermionic { hybridization, chemical_potential } => {
            (hybridization, chemical_potential)
        }
        BathSpectrum::Bosonic { .. } => {
            return Err(SpectralError::WrongStatistics { expected: "fermionic" })
        }
    };
    let f = 1.0 / (((omega - mu) / bath.temperature).exp() + 1.0);
    Ok(match direction {
        FermiDirection::Gain => 0.5 * gamma * f,
        FermiDirection::Loss => 0.5 * gamma * (1.0 - f),
    })
}
