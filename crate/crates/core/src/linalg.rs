//! Small fixed-size linear algebra: 3-vectors, 3x3 matrices, eigenvalues of a
//! real 3x3 matrix, and the matrix sign function used for spectral projections.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;

use crate::{lit, Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<T>(pub [T; 3]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Vec3<T> {
    pub fn zeros() -> Self {
        Vec3([T::zero(); 3])
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &Self) -> Self {
        let a = self.0;
        let b = other.0;
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn normalized(&self) -> Self {
        self.scale(T::one() / self.norm())
    }

    pub fn sum(&self) -> T {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Vec3<T>;
    fn add(self, rhs: Self) -> Self {
        Vec3([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Vec3<T>;
    fn sub(self, rhs: Self) -> Self {
        Vec3([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl<T: Scalar> Mat3<T> {
    pub fn identity() -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Mat3(m)
    }

    pub fn zeros() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3(self.0[i])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Sum of the principal 2x2 minors (the second invariant of the matrix).
    pub fn minor_sum(&self) -> T {
        let m = &self.0;
        (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[0][0] * m[1][1] - m[0][1] * m[1][0])
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, row| {
            m.max(row.iter().fold(T::zero(), |s, x| s + x.abs()))
        })
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().flatten().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        let scale = self.max_abs().max(T::one());
        if d.abs() <= T::epsilon() * scale * scale * scale {
            return Err(Error::invalid("matrix is numerically singular"));
        }
        let m = &self.0;
        let inv_d = T::one() / d;
        let cof = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        Ok(Mat3([
            [
                cof(1, 1, 2, 2) * inv_d,
                -cof(0, 1, 2, 2) * inv_d,
                cof(0, 1, 1, 2) * inv_d,
            ],
            [
                -cof(1, 0, 2, 2) * inv_d,
                cof(0, 0, 2, 2) * inv_d,
                -cof(0, 0, 1, 2) * inv_d,
            ],
            [
                cof(1, 0, 2, 1) * inv_d,
                -cof(0, 0, 2, 1) * inv_d,
                cof(0, 0, 1, 1) * inv_d,
            ],
        ]))
    }
}

impl<T: Scalar> Add for Mat3<T> {
    type Output = Mat3<T>;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Sub for Mat3<T> {
    type Output = Mat3<T>;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Mul for Mat3<T> {
    type Output = Mat3<T>;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for (k, rhs_row) in rhs.0.iter().enumerate() {
                    acc += self.0[i][k] * rhs_row[j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }
}

impl<T: Scalar> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        Vec3([
            self.row(0).dot(&v),
            self.row(1).dot(&v),
            self.row(2).dot(&v),
        ])
    }
}

/// Eigenvalues of a real 3x3 matrix, sorted by real part (then imaginary part).
///
/// Matrices that are triangular under a symmetric permutation of indices are
/// detected first and their diagonal is returned exactly; this keeps repeated
/// structural eigenvalues (which a cubic solve can only locate to ~sqrt(eps))
/// at full precision. Everything else goes through the characteristic cubic
/// with Newton polishing.
pub fn eigenvalues3<T: Scalar>(a: &Mat3<T>) -> [Complex<T>; 3] {
    if let Some(diag) = permuted_triangular_diagonal(a) {
        let mut eig = diag.map(|x| Complex::new(x, T::zero()));
        sort_eigenvalues(&mut eig);
        return eig;
    }

    let c2 = -a.trace();
    let c1 = a.minor_sum();
    let c0 = -a.det();
    let mut eig = solve_cubic(c2, c1, c0);
    sort_eigenvalues(&mut eig);
    eig
}

/// Looks for a permutation `p` of {0,1,2} that makes `a[p[i]][p[j]]` upper
/// triangular with exact zeros below the diagonal.
fn permuted_triangular_diagonal<T: Scalar>(a: &Mat3<T>) -> Option<[T; 3]> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for p in PERMS {
        let lower_zero = (1..3).all(|i| (0..i).all(|j| a.0[p[i]][p[j]] == T::zero()));
        if lower_zero {
            return Some([a.0[p[0]][p[0]], a.0[p[1]][p[1]], a.0[p[2]][p[2]]]);
        }
    }
    None
}

fn sort_eigenvalues<T: Scalar>(eig: &mut [Complex<T>; 3]) {
    eig.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Roots of `x^3 + c2 x^2 + c1 x + c0` with real coefficients.
fn solve_cubic<T: Scalar>(c2: T, c1: T, c0: T) -> [Complex<T>; 3] {
    let third: T = lit(1.0 / 3.0);
    let half: T = lit(0.5);
    let two: T = lit(2.0);

    // Depressed form t^3 + p t + q with x = t - c2/3.
    let shift = c2 * third;
    let p = c1 - c2 * c2 * third;
    let q = c0 - c1 * shift + two * shift * shift * shift;

    let disc = (q * half) * (q * half) + (p * third) * (p * third) * (p * third);

    if disc <= T::zero() {
        // Three real roots (possibly repeated): trigonometric form.
        let r = (-p * third).max(T::zero()).sqrt();
        if r == T::zero() {
            let x = polish_real_root(-shift, c2, c1, c0);
            return [Complex::new(x, T::zero()); 3];
        }
        let cos3t = (-q / (two * r * r * r)).max(-T::one()).min(T::one());
        let theta = cos3t.acos() * third;
        let tau: T = lit(std::f64::consts::TAU);
        let mut out = [Complex::new(T::zero(), T::zero()); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let angle = theta + tau * T::from_usize(k).unwrap() * third;
            let x = two * r * angle.cos() - shift;
            *slot = Complex::new(polish_real_root(x, c2, c1, c0), T::zero());
        }
        out
    } else {
        // One real root plus a complex-conjugate pair.
        let w = disc.sqrt();
        let s = -q * half;
        let u = if s >= T::zero() {
            (s + w).cbrt()
        } else {
            (s - w).cbrt()
        };
        let v = if u == T::zero() { T::zero() } else { -p * third / u };
        let real = polish_real_root(u + v - shift, c2, c1, c0);

        // Deflate and solve the remaining quadratic.
        let b = c2 + real;
        let c = c1 + real * b;
        let quad_disc = b * b - lit::<T>(4.0) * c;
        if quad_disc < T::zero() {
            let re = -b * half;
            let im = (-quad_disc).sqrt() * half;
            [
                Complex::new(real, T::zero()),
                Complex::new(re, im),
                Complex::new(re, -im),
            ]
        } else {
            let sq = quad_disc.sqrt();
            [
                Complex::new(real, T::zero()),
                Complex::new((-b + sq) * half, T::zero()),
                Complex::new((-b - sq) * half, T::zero()),
            ]
        }
    }
}

/// A couple of Newton steps to bring a real cubic root to full precision.
fn polish_real_root<T: Scalar>(mut x: T, c2: T, c1: T, c0: T) -> T {
    for _ in 0..3 {
        let f = ((x + c2) * x + c1) * x + c0;
        let df = (lit::<T>(3.0) * x + lit::<T>(2.0) * c2) * x + c1;
        if df == T::zero() {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Matrix sign function via scaled Newton iteration.
///
/// Requires that no eigenvalue of `a` lies on the imaginary axis; the caller
/// checks hyperbolicity beforehand.
pub fn matrix_sign<T: Scalar>(a: &Mat3<T>) -> Result<Mat3<T>> {
    let mut x = *a;
    let half: T = lit(0.5);
    let tol = T::epsilon() * lit::<T>(64.0);
    for _ in 0..80 {
        let inv = x.inverse()?;
        // Determinant scaling accelerates convergence without changing the limit.
        let mu = x.det().abs().powf(-lit::<T>(1.0 / 3.0));
        let next = (x.scale(mu) + inv.scale(T::one() / mu)).scale(half);
        let diff = (next - x).norm_inf();
        x = next;
        if diff <= tol * x.norm_inf().max(T::one()) {
            break;
        }
    }
    let residual = (x * x - Mat3::identity()).norm_inf();
    if residual > lit::<T>(1e-10) {
        return Err(Error::NonHyperbolicMatrix);
    }
    Ok(x)
}
