//! Qubit operator algebra in the Pauli basis.
//!
//! Hermitian unit-trace states are stored as Bloch vectors, `rho = (1 + r.sigma)/2`,
//! so the trace is fixed structurally and positivity is the single check `|r| <= 1`.
//! General (possibly non-Hermitian) operators `c0 * 1 + c.sigma` carry the products of
//! measurement back-action operators.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

/// Slack allowed on `|r|` above 1 before a Bloch vector is rejected.
pub const BLOCH_NORM_SLACK: f64 = 1e-12;

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn axpy(s: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    [s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2]]
}

/// A qubit density matrix in Bloch form.
#[derive(Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    bloch: Vec3,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityMatrix({:?})", self.bloch)
    }
}

impl DensityMatrix {
    /// Builds a state from its Bloch vector.
    ///
    /// Vectors longer than `1 + BLOCH_NORM_SLACK` are rejected; vectors inside the slack
    /// but longer than 1 are scaled back onto the unit sphere.
    pub fn new(bloch: Vec3) -> Result<Self> {
        if bloch.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite Bloch vector {bloch:?}")));
        }
        let len = norm(&bloch);
        if len > 1.0 + BLOCH_NORM_SLACK {
            return Err(Error::InvalidState(format!(
                "Bloch vector length {len} exceeds 1"
            )));
        }
        Ok(Self::project_into_ball(bloch))
    }

    /// Scales `bloch` onto the unit sphere when it lies outside the Bloch ball.
    pub fn project_into_ball(bloch: Vec3) -> Self {
        debug_assert!(bloch.iter().all(|x| x.is_finite()));
        let len = norm(&bloch);
        if len > 1.0 {
            Self { bloch: scale(&bloch, 1.0 / len) }
        } else {
            Self { bloch }
        }
    }

    pub const fn maximally_mixed() -> Self {
        Self { bloch: [0.0; 3] }
    }

    /// The pure state polarized along `axis`.
    pub fn pure(axis: &MeasurementAxis) -> Self {
        Self { bloch: axis.direction }
    }

    pub fn bloch(&self) -> Vec3 {
        self.bloch
    }

    /// Expectation values of the three Pauli matrices; the same numbers as the Bloch vector.
    pub fn expectation(&self) -> Vec3 {
        self.bloch
    }

    pub fn bloch_norm(&self) -> f64 {
        norm(&self.bloch)
    }

    /// `tr[rho^2] = (1 + |r|^2) / 2`.
    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + dot(&self.bloch, &self.bloch))
    }

    /// Bilinear overlap `tr[a b] = (1 + r_a.r_b) / 2`.
    pub fn fidelity(&self, other: &DensityMatrix) -> f64 {
        0.5 * (1.0 + dot(&self.bloch, &other.bloch))
    }

    /// Eigen-decomposition. At the maximally mixed state the eigenbasis is arbitrary:
    /// the projectors are returned along +z/-z and `degenerate` is set.
    pub fn spectral_decomposition(&self) -> SpectralDecomposition {
        let len = self.bloch_norm();
        let (plus, minus, degenerate) = if len == 0.0 {
            ([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], true)
        } else {
            let u = scale(&self.bloch, 1.0 / len);
            (u, scale(&u, -1.0), false)
        };
        SpectralDecomposition {
            eigenvalue_plus: 0.5 * (1.0 + len),
            eigenvalue_minus: 0.5 * (1.0 - len),
            projector_plus: DensityMatrix { bloch: plus },
            projector_minus: DensityMatrix { bloch: minus },
            degenerate,
        }
    }

    pub fn to_operator(&self) -> GeneralOperator {
        GeneralOperator::from_real(0.5, scale(&self.bloch, 0.5))
    }
}

/// Free-function form of [`DensityMatrix::purity`].
pub fn purity(state: &DensityMatrix) -> f64 {
    state.purity()
}

/// Free-function form of [`DensityMatrix::fidelity`].
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    a.fidelity(b)
}

/// Free-function form of [`DensityMatrix::spectral_decomposition`].
pub fn spectral_decompose(state: &DensityMatrix) -> SpectralDecomposition {
    state.spectral_decomposition()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalue_plus: f64,
    pub eigenvalue_minus: f64,
    pub projector_plus: DensityMatrix,
    pub projector_minus: DensityMatrix,
    pub degenerate: bool,
}

impl SpectralDecomposition {
    /// `lambda_+ P_+ + lambda_- P_-` as a state.
    pub fn reconstruct(&self) -> DensityMatrix {
        let p = self.projector_plus.bloch;
        let m = self.projector_minus.bloch;
        DensityMatrix::project_into_ball(axpy(
            self.eigenvalue_plus,
            &p,
            &scale(&m, self.eigenvalue_minus),
        ))
    }
}

/// Unit vector `n` selecting the polarization observable `n.sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementAxis {
    direction: Vec3,
}

impl MeasurementAxis {
    /// Normalizes any finite nonzero vector.
    pub fn new(direction: Vec3) -> Result<Self> {
        let len = norm(&direction);
        if !len.is_finite() || len == 0.0 {
            return Err(Error::InvalidInput(format!(
                "axis direction {direction:?} cannot be normalized"
            )));
        }
        Ok(Self { direction: scale(&direction, 1.0 / len) })
    }

    pub const fn x() -> Self {
        Self { direction: [1.0, 0.0, 0.0] }
    }

    pub const fn y() -> Self {
        Self { direction: [0.0, 1.0, 0.0] }
    }

    pub const fn z() -> Self {
        Self { direction: [0.0, 0.0, 1.0] }
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }
}

fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let len = norm(&v);
        // zero has probability zero but would poison the direction
        if len > 0.0 {
            return scale(&v, 1.0 / len);
        }
    }
}

/// Pure state with a direction uniform on the Bloch sphere.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    DensityMatrix { bloch: random_unit_vector(rng) }
}

/// Measurement axis uniform on the unit sphere.
pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> MeasurementAxis {
    MeasurementAxis { direction: random_unit_vector(rng) }
}

/// `c0 * 1 + c.sigma` with complex coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralOperator {
    pub c0: Complex64,
    pub c: [Complex64; 3],
}

impl GeneralOperator {
    pub fn new(c0: Complex64, c: [Complex64; 3]) -> Self {
        Self { c0, c }
    }

    pub fn from_real(c0: f64, c: Vec3) -> Self {
        Self {
            c0: Complex64::new(c0, 0.0),
            c: c.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn identity() -> Self {
        Self::from_real(1.0, [0.0; 3])
    }

    /// The Pauli matrix `sigma_i`, `i` in 0..3.
    pub fn pauli(i: usize) -> Self {
        let mut c = [0.0; 3];
        c[i] = 1.0;
        Self::from_real(0.0, c)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            c0: self.c0.conj(),
            c: self.c.map(|x| x.conj()),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            c0: self.c0 * s,
            c: self.c.map(|x| x * s),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.c0 * 2.0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.c0.im.abs() <= tol && self.c.iter().all(|x| x.im.abs() <= tol)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    /// Dense form `[[c0 + c3, c1 - i c2], [c1 + i c2, c0 - c3]]`.
    pub fn to_matrix(&self) -> [[Complex64; 2]; 2] {
        let i = Complex64::i();
        let [c1, c2, c3] = self.c;
        [
            [self.c0 + c3, c1 - i * c2],
            [c1 + i * c2, self.c0 - c3],
        ]
    }

    pub fn from_matrix(m: &[[Complex64; 2]; 2]) -> Self {
        let i = Complex64::i();
        Self {
            c0: (m[0][0] + m[1][1]) * 0.5,
            c: [
                (m[0][1] + m[1][0]) * 0.5,
                i * (m[0][1] - m[1][0]) * 0.5,
                (m[0][0] - m[1][1]) * 0.5,
            ],
        }
    }

    /// `A^dagger A` as real Pauli coefficients `(h0, h)`.
    pub fn gram(&self) -> (f64, Vec3) {
        let g = self.adjoint() * *self;
        (g.c0.re, g.c.map(|x| x.re))
    }

    /// Largest singular value, `sqrt(h0 + |h|)` from the Gram operator.
    pub fn max_singular_value(&self) -> f64 {
        let (h0, h) = self.gram();
        (h0 + norm(&h)).max(0.0).sqrt()
    }

    /// Largest entry modulus of the dense matrix.
    pub fn max_abs_entry(&self) -> f64 {
        self.to_matrix()
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Normalizes the Hermitian part to unit trace and reads it as a state.
    pub fn normalized_state(&self) -> Result<DensityMatrix> {
        let h0 = self.c0.re;
        if !(h0 > 0.0) || !h0.is_finite() {
            return Err(Error::InvalidState(format!(
                "operator trace {} is not positive",
                2.0 * h0
            )));
        }
        DensityMatrix::new(self.c.map(|x| x.re / h0))
    }
}

impl Add for GeneralOperator {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            c0: self.c0 + rhs.c0,
            c: [self.c[0] + rhs.c[0], self.c[1] + rhs.c[1], self.c[2] + rhs.c[2]],
        }
    }
}

impl Sub for GeneralOperator {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self {
            c0: self.c0 - rhs.c0,
            c: [self.c[0] - rhs.c[0], self.c[1] - rhs.c[1], self.c[2] - rhs.c[2]],
        }
    }
}

impl Mul for GeneralOperator {
    type Output = Self;

    /// `(a0 + a.s)(b0 + b.s) = a0 b0 + a.b + (a0 b + b0 a + i a x b).s`
    fn mul(self, rhs: Self) -> Self {
        let (a0, a) = (self.c0, self.c);
        let (b0, b) = (rhs.c0, rhs.c);
        let i = Complex64::i();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        Self {
            c0: a0 * b0 + dot,
            c: [
                a0 * b[0] + b0 * a[0] + i * cross[0],
                a0 * b[1] + b0 * a[1] + i * cross[1],
                a0 * b[2] + b0 * a[2] + i * cross[2],
            ],
        }
    }
}
