//! Dense complex operator algebra.
//!
//! [`OperatorMatrix`] is a square complex matrix carrying tensor-factor
//! bookkeeping (`subsystem_dims`) so that partial traces over named factors
//! work after arbitrary Kronecker compositions. All values are immutable
//! after construction and safe to share across threads.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Default tolerance for Hermiticity checks, relative to the largest entry.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Default tolerance on `|tr(rho) - 1|` for density-matrix checks.
pub const TRACE_TOL: f64 = 1e-10;
/// Default tolerance on `max|V^dag V - I|` for unitarity checks.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystem(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
}

/// The Pauli operators plus the 2x2 identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Identity,
}

/// Dense complex square matrix with tensor-factor metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    data: Array2<C64>,
    subsystem_dims: Vec<usize>,
}

/// Result of a Hermitian eigendecomposition: ascending eigenvalues and the
/// unitary whose columns are the corresponding eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Array1<f64>,
    pub vectors: OperatorMatrix,
}

impl OperatorMatrix {
    /// Wrap a square matrix as a single-factor operator.
    pub fn from_array(data: Array2<C64>) -> Result<Self, OperatorError> {
        let d = data.nrows();
        if data.ncols() != d || d == 0 {
            return Err(OperatorError::InvalidDimension(format!(
                "expected nonempty square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            data,
            subsystem_dims: vec![d],
        })
    }

    /// Wrap a square matrix with explicit tensor-factor dimensions.
    pub fn with_subsystems(data: Array2<C64>, dims: Vec<usize>) -> Result<Self, OperatorError> {
        let d = data.nrows();
        if data.ncols() != d || d == 0 {
            return Err(OperatorError::InvalidDimension(format!(
                "expected nonempty square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let prod: usize = dims.iter().product();
        if prod != d || dims.iter().any(|&k| k == 0) {
            return Err(OperatorError::InvalidDimension(format!(
                "subsystem dims {dims:?} do not factor dimension {d}"
            )));
        }
        Ok(Self {
            data,
            subsystem_dims: dims,
        })
    }

    /// Real diagonal matrix as a single-factor operator.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Array2::zeros((d, d));
        for (i, &x) in diag.iter().enumerate() {
            m[[i, i]] = C64::new(x, 0.0);
        }
        Self {
            data: m,
            subsystem_dims: vec![d],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            data: Array2::eye(d),
            subsystem_dims: vec![d],
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            data: Array2::zeros((d, d)),
            subsystem_dims: vec![d],
        }
    }

    /// `|i><j|` on a `d`-dimensional space.
    pub fn ketbra(d: usize, i: usize, j: usize) -> Self {
        let mut m = Array2::zeros((d, d));
        m[[i, j]] = C64::new(1.0, 0.0);
        Self {
            data: m,
            subsystem_dims: vec![d],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.subsystem_dims
    }

    pub fn array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    /// Replace the tensor-factor metadata (the matrix itself is unchanged).
    pub fn reshaped_subsystems(mut self, dims: Vec<usize>) -> Result<Self, OperatorError> {
        let prod: usize = dims.iter().product();
        if prod != self.dim() || dims.iter().any(|&k| k == 0) {
            return Err(OperatorError::InvalidDimension(format!(
                "subsystem dims {dims:?} do not factor dimension {}",
                self.dim()
            )));
        }
        self.subsystem_dims = dims;
        Ok(self)
    }

    pub fn dagger(&self) -> Self {
        let mut out = Array2::zeros((self.dim(), self.dim()));
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out[[i, j]] = self.data[[j, i]].conj();
            }
        }
        Self {
            data: out,
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.data[[i, i]]).sum()
    }

    /// Largest entry magnitude.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            data: self.data.mapv(|z| z * c),
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in matmul");
        Self {
            data: self.data.dot(&rhs.data),
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        let ab = self.data.dot(&rhs.data);
        let ba = rhs.data.dot(&self.data);
        Self {
            data: ab - ba,
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }

    /// `max|A - A^dag| <= tol * max|A|`, with an absolute floor for the zero
    /// matrix.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.norm_max().max(1.0);
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let d = (self.data[[i, j]] - self.data[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst <= tol * scale
    }

    /// Check the density-matrix tags: unit trace and Hermiticity.
    pub fn check_density_matrix(&self, trace_tol: f64) -> Result<(), OperatorError> {
        if !self.is_hermitian(1e-10) {
            return Err(OperatorError::InvalidOperator(
                "density matrix is not Hermitian".into(),
            ));
        }
        let t = self.trace();
        if (t - C64::new(1.0, 0.0)).norm() > trace_tol {
            return Err(OperatorError::InvalidOperator(format!(
                "density matrix trace {t} deviates from 1"
            )));
        }
        Ok(())
    }

    /// Named Pauli matrix (2x2), Hermitian and involutory for X, Y, Z.
    pub fn pauli(which: Pauli) -> Self {
        let (a, b, c, d) = match which {
            Pauli::X => (0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()),
            Pauli::Y => (
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ),
            Pauli::Z => (1.0.into(), 0.0.into(), 0.0.into(), C64::new(-1.0, 0.0)),
            Pauli::Identity => (1.0.into(), 0.0.into(), 0.0.into(), 1.0.into()),
        };
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = a;
        m[[0, 1]] = b;
        m[[1, 0]] = c;
        m[[1, 1]] = d;
        Self {
            data: m,
            subsystem_dims: vec![2],
        }
    }

    /// Truncated bosonic annihilation operator on `m` levels:
    /// `a[n, n+1] = sqrt(n+1)`.
    pub fn annihilation(m: usize) -> Result<Self, OperatorError> {
        if m < 2 {
            return Err(OperatorError::InvalidDimension(format!(
                "annihilation operator needs at least 2 levels, got {m}"
            )));
        }
        let mut a = Array2::zeros((m, m));
        for n in 0..m - 1 {
            a[[n, n + 1]] = C64::new(((n + 1) as f64).sqrt(), 0.0);
        }
        Ok(Self {
            data: a,
            subsystem_dims: vec![m],
        })
    }

    /// Kronecker product; subsystem dims concatenate.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let (da, db) = (a.dim(), b.dim());
        let d = da * db;
        let mut out = Array2::zeros((d, d));
        for i in 0..da {
            for j in 0..da
            {
                let aij = a.data[[i, j]];
                if aij == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        out[[i * db + k, j * db + l]] = aij * b.data[[k, l]];
                    }
                }
            }
        }
        let mut dims = a.subsystem_dims.clone();
        dims.extend_from_slice(&b.subsystem_dims);
        Self {
            data: out,
            subsystem_dims: dims,
        }
    }

    /// Kronecker product of a sequence of factors.
    pub fn kron_all(factors: &[&Self]) -> Self {
        assert!(!factors.is_empty(), "kron_all needs at least one factor");
        let mut acc = factors[0].clone();
        for f in &factors[1..] {
            acc = Self::kron(&acc, f);
        }
        acc
    }

    /// Reduced operator over the kept tensor factors (trace over the rest).
    /// `keep` uses indices into `subsystem_dims`; the kept factors stay in
    /// their original order. Trace is preserved.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, OperatorError> {
        let nf = self.subsystem_dims.len();
        let mut seen = vec![false; nf];
        for &k in keep {
            if k >= nf {
                return Err(OperatorError::InvalidSubsystem(format!(
                    "factor index {k} out of range for {nf} factors"
                )));
            }
            if seen[k] {
                return Err(OperatorError::InvalidSubsystem(format!(
                    "factor index {k} repeated"
                )));
            }
            seen[k] = true;
        }
        let mut keep_sorted: Vec<usize> = keep.to_vec();
        keep_sorted.sort_unstable();

        let dims = &self.subsystem_dims;
        let dk: usize = keep_sorted.iter().map(|&k| dims[k]).product();
        let traced: Vec<usize> = (0..nf).filter(|i| !keep_sorted.contains(i)).collect();
        let dt: usize = traced.iter().map(|&k| dims[k]).product();

        // Strides of each factor in the flattened row-major index.
        let mut strides = vec![1usize; nf];
        for i in (0..nf.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }

        let flat = |multi_keep: usize, multi_traced: usize| -> usize {
            // Decompose the kept and traced linear indices back into factor
            // indices and recombine into the full flat index.
            let mut idx = 0usize;
            let mut mk = multi_keep;
            for &k in keep_sorted.iter().rev() {
                idx += (mk % dims[k]) * strides[k];
                mk /= dims[k];
            }
            let mut mt = multi_traced;
            for &t in traced.iter().rev() {
                idx += (mt % dims[t]) * strides[t];
                mt /= dims[t];
            }
            idx
        };

        let mut out = Array2::zeros((dk, dk));
        for r in 0..dk {
            for c in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += self.data[[flat(r, t), flat(c, t)]];
                }
                out[[r, c]] = acc;
            }
        }
        let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
        Self::with_subsystems(out, kept_dims)
    }

    /// Hermitian eigendecomposition with ascending eigenvalues.
    ///
    /// Each eigenvector's phase is fixed by making its largest-magnitude
    /// component real-positive, so repeated runs produce identical output.
    /// Within a degenerate block the vectors are orthonormal in index order;
    /// callers must not rely on the intra-block choice.
    pub fn eigensystem(&self) -> Result<Eigensystem, OperatorError> {
        if !self.is_hermitian(HERMITICITY_TOL.max(1e-9)) {
            return Err(OperatorError::InvalidOperator(
                "eigensystem requires a Hermitian matrix".into(),
            ));
        }
        // Symmetrize to scrub rounding noise before handing to LAPACK.
        let herm = {
            let mut h = self.data.clone();
            for i in 0..self.dim() {
                for j in 0..self.dim() {
                    h[[i, j]] = (self.data[[i, j]] + self.data[[j, i]].conj()) * 0.5;
                }
            }
            h
        };
        let (vals, mut vecs) = herm
            .eigh(UPLO::Lower)
            .map_err(|e| OperatorError::InvalidOperator(format!("eigh failed: {e}")))?;
        let d = self.dim();
        // LAPACK layout handling differs across backends for complex input;
        // the columns can come back conjugated. Pick the variant that
        // actually satisfies H V = V diag(E).
        let residual = |v: &Array2<C64>| -> f64 {
            let hv = herm.dot(v);
            let mut worst = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((hv[[i, j]] - v[[i, j]] * vals[j]).norm());
                }
            }
            worst
        };
        let scale = self.norm_max().max(1.0);
        if residual(&vecs) > 1e-9 * scale {
            let conj = vecs.mapv(|z| z.conj());
            if residual(&conj) < residual(&vecs) {
                vecs = conj;
            }
        }
        for col in 0..d {
            let mut best = 0usize;
            let mut best_mag = 0.0f64;
            for row in 0..d {
                let mag = vecs[[row, col]].norm();
                if mag > best_mag {
                    best_mag = mag;
                    best = row;
                }
            }
            if best_mag > 0.0 {
                let phase = vecs[[best, col]] / best_mag;
                let correction = phase.conj();
                for row in 0..d {
                    vecs[[row, col]] *= correction;
                }
            }
        }
        Ok(Eigensystem {
            values: vals,
            vectors: OperatorMatrix {
                data: vecs,
                subsystem_dims: self.subsystem_dims.clone(),
            },
        })
    }
}

impl Eigensystem {
    /// Rotate an operator into this eigenbasis: `V^dag A V`.
    pub fn to_eigenbasis(&self, op: &OperatorMatrix) -> Array2<C64> {
        let v = self.vectors.array();
        let vd = self.vectors.dagger();
        vd.array().dot(op.array()).dot(v)
    }

    /// Rotate a matrix expressed in the eigenbasis back: `V A V^dag`.
    pub fn from_eigenbasis(&self, a: &Array2<C64>) -> Array2<C64> {
        let v = self.vectors.array();
        let vd = self.vectors.dagger();
        v.dot(a).dot(vd.array())
    }
}

impl std::ops::Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in add");
        OperatorMatrix {
            data: &self.data + &rhs.data,
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }
}

impl std::ops::Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sub");
        OperatorMatrix {
            data: &self.data - &rhs.data,
            subsystem_dims: self.subsystem_dims.clone(),
        }
    }
}

impl std::ops::Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.matmul(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(d: usize, rng: &mut impl Rng) -> OperatorMatrix {
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            m[[i, i]] = c(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..d {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[[i, j]] = z;
                m[[j, i]] = z.conj();
            }
        }
        OperatorMatrix::from_array(m).unwrap()
    }

    fn random_matrix(d: usize, rng: &mut impl Rng) -> OperatorMatrix {
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        OperatorMatrix::from_array(m).unwrap()
    }

    #[test]
    fn pauli_z_is_diag_1_m1() {
        let z = OperatorMatrix::pauli(Pauli::Z);
        assert_eq!(z.array()[[0, 0]], c(1.0, 0.0));
        assert_eq!(z.array()[[1, 1]], c(-1.0, 0.0));
        assert_eq!(z.array()[[0, 1]], c(0.0, 0.0));
    }

    #[test]
    fn paulis_are_hermitian_and_involutory() {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let m = OperatorMatrix::pauli(p);
            assert!(m.is_hermitian(1e-15));
            let sq = m.matmul(&m);
            let eye = OperatorMatrix::identity(2);
            assert!((&sq - &eye).norm_max() < 1e-15);
        }
    }

    #[test]
    fn pauli_commutator_xy() {
        let x = OperatorMatrix::pauli(Pauli::X);
        let y = OperatorMatrix::pauli(Pauli::Y);
        let z = OperatorMatrix::pauli(Pauli::Z);
        let comm = x.commutator(&y);
        let expected = z.scale(c(0.0, 2.0));
        assert!((&comm - &expected).norm_max() < 1e-15);
    }

    #[test]
    fn annihilation_definition_and_number_operator() {
        let a = OperatorMatrix::annihilation(2).unwrap();
        assert_eq!(a.array()[[0, 1]], c(1.0, 0.0));
        assert_eq!(a.array()[[1, 0]], c(0.0, 0.0));

        let m = 7;
        let a = OperatorMatrix::annihilation(m).unwrap();
        let n = a.dagger().matmul(&a);
        for k in 0..m {
            assert_abs_diff_eq!(n.array()[[k, k]].re, k as f64, epsilon = 1e-14);
        }
        assert!(OperatorMatrix::annihilation(1).is_err());
    }

    #[test]
    fn truncated_ccr_has_corner_defect() {
        // [a, a^dag] = 1 on the first M-1 diagonal entries; the last entry is
        // 1 - M from the truncation.
        let m = 6;
        let a = OperatorMatrix::annihilation(m).unwrap();
        let comm = a.commutator(&a.dagger());
        for k in 0..m - 1 {
            assert_abs_diff_eq!(comm.array()[[k, k]].re, 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(comm.array()[[m - 1, m - 1]].re, 1.0 - m as f64, epsilon = 1e-14);
    }

    #[test]
    fn kron_block_structure_and_dims() {
        let z = OperatorMatrix::pauli(Pauli::Z);
        let eye = OperatorMatrix::identity(2);
        let zi = OperatorMatrix::kron(&z, &eye);
        let expect = [1.0, 1.0, -1.0, -1.0];
        for (k, &e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(zi.array()[[k, k]].re, e, epsilon = 1e-15);
        }
        assert_eq!(zi.subsystem_dims(), &[2, 2]);

        let ii = OperatorMatrix::kron(&eye, &eye);
        assert!((&ii - &OperatorMatrix::identity(4).reshaped_subsystems(vec![2, 2]).unwrap()).norm_max() < 1e-15);
    }

    #[test]
    fn kron_mixed_product_rule() {
        // (A kron B)(C kron D) = AC kron BD on random 2x2 inputs.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(2, &mut rng);
            let b = random_matrix(2, &mut rng);
            let cm = random_matrix(2, &mut rng);
            let d = random_matrix(2, &mut rng);
            let lhs = OperatorMatrix::kron(&a, &b).matmul(&OperatorMatrix::kron(&cm, &d));
            let rhs = OperatorMatrix::kron(&a.matmul(&cm), &b.matmul(&d));
            assert!((&lhs - &rhs).norm_max() < 1e-13);
        }
    }

    #[test]
    fn kron_is_associative_on_integer_matrices() {
        let x = OperatorMatrix::pauli(Pauli::X);
        let z = OperatorMatrix::pauli(Pauli::Z);
        let eye = OperatorMatrix::identity(2);
        let left = OperatorMatrix::kron(&OperatorMatrix::kron(&x, &z), &eye);
        let right = OperatorMatrix::kron(&x, &OperatorMatrix::kron(&z, &eye));
        assert_eq!(left.array(), right.array());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = {
            let h = random_hermitian(2, &mut rng);
            let t = h.trace();
            h.scale(c(1.0, 0.0) / t)
        };
        let b = {
            let h = random_hermitian(3, &mut rng);
            let t = h.trace();
            h.scale(c(1.0, 0.0) / t)
        };
        let ab = OperatorMatrix::kron(&a, &b);
        let reduced = ab.partial_trace(&[0]).unwrap();
        assert!((&reduced - &a).norm_max() < 1e-13);
        // Trace preserved.
        assert_abs_diff_eq!(reduced.trace().re, ab.trace().re, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_bell_state_is_maximally_mixed() {
        // |Phi+><Phi+| on two qubits, keep the first.
        let mut m = Array2::zeros((4, 4));
        for &i in &[0usize, 3] {
            for &j in &[0usize, 3] {
                m[[i, j]] = c(0.5, 0.0);
            }
        }
        let rho = OperatorMatrix::with_subsystems(m, vec![2, 2]).unwrap();
        let red = rho.partial_trace(&[0]).unwrap();
        let half_eye = OperatorMatrix::identity(2).scale_re(0.5);
        assert!((&red - &half_eye).norm_max() < 1e-14);
    }

    #[test]
    fn partial_trace_disjoint_composition_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let abc = random_hermitian(2 * 3 * 2, &mut rng)
            .reshaped_subsystems(vec![2, 3, 2])
            .unwrap();
        // Trace out factor 2 then factor 1, vs factor 1 then factor 2.
        let r1 = abc
            .partial_trace(&[0, 1])
            .unwrap()
            .partial_trace(&[0])
            .unwrap();
        let r2 = abc
            .partial_trace(&[0, 2])
            .unwrap()
            .partial_trace(&[0])
            .unwrap();
        assert!((&r1 - &r2).norm_max() <= 1e-12);
        // And both equal the direct single-shot reduction.
        let direct = abc.partial_trace(&[0]).unwrap();
        assert!((&r1 - &direct).norm_max() <= 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_indices() {
        let rho = OperatorMatrix::identity(4)
            .reshaped_subsystems(vec![2, 2])
            .unwrap();
        assert!(matches!(
            rho.partial_trace(&[2]),
            Err(OperatorError::InvalidSubsystem(_))
        ));
    }

    #[test]
    fn eigensystem_diagonal_and_sigma_x() {
        let z = OperatorMatrix::pauli(Pauli::Z);
        let es = z.eigensystem().unwrap();
        assert_abs_diff_eq!(es.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(es.values[1], 1.0, epsilon = 1e-14);

        let x = OperatorMatrix::pauli(Pauli::X);
        let es = x.eigensystem().unwrap();
        assert_abs_diff_eq!(es.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(es.values[1], 1.0, epsilon = 1e-14);
        // Eigenvectors (|0> -+ |1>)/sqrt(2) up to the fixed phase.
        let v = es.vectors.array();
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(v[[0, 0]].re.abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(v[[1, 0]].re.abs(), s, epsilon = 1e-12);
        assert!((v[[0, 0]].re * v[[1, 0]].re) < 0.0, "antisymmetric combination");
        assert!((v[[0, 1]].re * v[[1, 1]].re) > 0.0, "symmetric combination");
    }

    #[test]
    fn eigensystem_roundtrip_random_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = random_hermitian(8, &mut rng);
        let es = h.eigensystem().unwrap();
        // Unitarity.
        let v = &es.vectors;
        let vdv = v.dagger().matmul(v);
        assert!((&vdv - &OperatorMatrix::identity(8)).norm_max() < 1e-10);
        // Reconstruction.
        let recon = es.from_eigenbasis(&Array2::from_diag(
            &es.values.mapv(|e| C64::new(e, 0.0)),
        ));
        let diff = (h.array() - &recon).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "reconstruction error {diff}");
        // Ascending order.
        for w in es.values.as_slice().unwrap().windows(2) {
            assert!(w[0] <= w[1] + 1e-14);
        }
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let a = OperatorMatrix::annihilation(3).unwrap();
        assert!(matches!(
            a.eigensystem(),
            Err(OperatorError::InvalidOperator(_))
        ));
    }

    #[test]
    fn eigensystem_phase_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(6, &mut rng);
        let e1 = h.eigensystem().unwrap();
        let e2 = h.eigensystem().unwrap();
        assert_eq!(e1.vectors.array(), e2.vectors.array());
        // Largest component of each eigenvector is real-positive.
        for col in 0..6 {
            let col_view: Vec<C64> = (0..6).map(|r| e1.vectors.array()[[r, col]]).collect();
            let biggest = col_view
                .iter()
                .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
                .unwrap();
            assert!(biggest.im.abs() < 1e-12 && biggest.re > 0.0);
        }
    }
}
