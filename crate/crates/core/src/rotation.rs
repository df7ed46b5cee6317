//! Validated 3×3 orthogonal matrices. Every model instance (couplings,
//! polynomials, spectrum, amplitudes) is a function of one of these.
//!
//! Entries are addressed with 1-based `(row, col)` pairs through
//! [`RotationMatrix::r`] so that coupling formulas read like `R₁₁R₁₂`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL_ORTHO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationMatrix {
    entries: [[f64; 3]; 3],
    det_sign: i8,
}

impl RotationMatrix {
    /// Validates `entries` (row-major) as an element of O(3).
    pub fn from_entries(entries: [[f64; 3]; 3], tol_ortho: f64) -> Result<Self> {
        if !tol_ortho.is_finite() || tol_ortho <= 0.0 {
            return Err(Error::BadConfig(format!(
                "orthogonality tolerance must be positive, got {tol_ortho}"
            )));
        }
        if entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation entries"));
        }
        let defect = orthogonality_defect(&entries);
        if defect > tol_ortho {
            return Err(Error::NotOrthogonal {
                defect,
                tol: tol_ortho,
            });
        }
        let det = determinant(&entries);
        if (det.abs() - 1.0).abs() > tol_ortho {
            return Err(Error::NotOrthogonal {
                defect: (det.abs() - 1.0).abs(),
                tol: tol_ortho,
            });
        }
        Ok(Self {
            entries,
            det_sign: if det < 0.0 { -1 } else { 1 },
        })
    }

    /// Row-major slice of nine numbers, as read from a config file.
    pub fn from_row_major(values: &[f64], tol_ortho: f64) -> Result<Self> {
        if values.len() != 9 {
            return Err(Error::ShapeMismatch(format!(
                "rotation needs 9 entries, got {}",
                values.len()
            )));
        }
        let mut entries = [[0.0; 3]; 3];
        for (k, v) in values.iter().enumerate() {
            entries[k / 3][k % 3] = *v;
        }
        Self::from_entries(entries, tol_ortho)
    }

    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            det_sign: 1,
        }
    }

    /// The improper rotation with `R₁₁R₁₂ = R₂₁R₂₂ = −1/8`, `R₁₃ = R₂₃ = 1/2`
    /// and `R₃₃ = √2/2`. It satisfies both hypotenuse-transfer conditions.
    pub fn reference() -> Self {
        let q = SQRT_2 / 4.0;
        Self {
            entries: [
                [0.5 - q, -0.5 - q, 0.5],
                [-0.5 - q, 0.5 - q, 0.5],
                [0.5, 0.5, SQRT_2 / 2.0],
            ],
            det_sign: -1,
        }
    }

    /// Proper rotation `Rz(alpha) · Ry(beta) · Rz(gamma)` (z-y-z Euler angles,
    /// radians). With `improper`, the result is multiplied on the right by
    /// `diag(1, 1, −1)`, which flips the sign of the third column.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64, improper: bool) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(Error::NonFinite("Euler angles"));
        }
        let rz = |a: f64| {
            let (s, c) = a.sin_cos();
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        };
        let (sb, cb) = beta.sin_cos();
        let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
        let mut m = mat_mul(&mat_mul(&rz(alpha), &ry), &rz(gamma));
        if improper {
            for row in m.iter_mut() {
                row[2] = -row[2];
            }
        }
        Self::from_entries(m, 1e-12)
    }

    /// Entry `R_{row,col}` with 1-based indices.
    #[inline]
    pub fn r(&self, row: usize, col: usize) -> f64 {
        self.entries[row - 1][col - 1]
    }

    pub fn entries(&self) -> &[[f64; 3]; 3] {
        &self.entries
    }

    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.entries)
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.entries)
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; 3]; 3];
        for (k, row) in self.entries.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                t[l][k] = *v;
            }
        }
        Self {
            entries: t,
            det_sign: self.det_sign,
        }
    }

    /// Plain matrix product `self · other`.
    pub fn product(&self, other: &Self) -> [[f64; 3]; 3] {
        mat_mul(&self.entries, &other.entries)
    }

    /// `R₂₁R₂₂`, the energy quantum along `s`.
    pub fn s_rate(&self) -> f64 {
        self.r(2, 1) * self.r(2, 2)
    }

    /// `R₁₁R₁₂`, the energy quantum along `t` (enters with a minus sign).
    pub fn t_rate(&self) -> f64 {
        self.r(1, 1) * self.r(1, 2)
    }
}

/// Accepted JSON forms: `{"rotation": [9 numbers]}` or
/// `{"euler": [a, b, c], "improper": bool}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Entries {
        rotation: Vec<f64>,
    },
    Euler {
        euler: [f64; 3],
        #[serde(default)]
        improper: bool,
    },
}

impl RotationSpec {
    pub fn build(&self, tol_ortho: f64) -> Result<RotationMatrix> {
        match self {
            RotationSpec::Entries { rotation } => RotationMatrix::from_row_major(rotation, tol_ortho),
            RotationSpec::Euler { euler, improper } => {
                RotationMatrix::from_euler(euler[0], euler[1], euler[2], *improper)
            }
        }
    }
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for r in 0..3 {
        for col in 0..3 {
            c[r][col] = (0..3).map(|k| a[r][k] * b[k][col]).sum();
        }
    }
    c
}

fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `max_{s,t} |Σ_k R_{ks} R_{kt} − δ_{st}|`
fn orthogonality_defect(m: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..3 {
        for t in 0..3 {
            let dot: f64 = (0..3).map(|k| m[k][s] * m[k][t]).sum();
            let delta = if s == t { 1.0 } else { 0.0 };
            worst = worst.max((dot - delta).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_proper() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let r = RotationMatrix::from_entries(id, DEFAULT_TOL_ORTHO).unwrap();
        assert_eq!(r.det_sign(), 1);
        assert_eq!(r, RotationMatrix::identity());
    }

    #[test]
    fn reference_matrix_values() {
        let r = RotationMatrix::reference();
        let validated = RotationMatrix::from_entries(*r.entries(), DEFAULT_TOL_ORTHO).unwrap();
        assert_eq!(validated.det_sign(), -1);
        assert!((r.determinant() + 1.0).abs() < 1e-14);
        assert!(r.orthogonality_defect() < 1e-14);
        assert_eq!(r.r(3, 3), SQRT_2 / 2.0);
        assert_eq!(r.r(1, 3), 0.5);
        assert_eq!(r.r(2, 3), 0.5);
        assert!((r.t_rate() + 0.125).abs() < 1e-15);
        assert!((r.s_rate() + 0.125).abs() < 1e-15);
    }

    #[test]
    fn scaled_row_is_rejected() {
        let mut m = *RotationMatrix::reference().entries();
        for v in m[0].iter_mut() {
            *v *= 2.0;
        }
        assert!(matches!(
            RotationMatrix::from_entries(m, DEFAULT_TOL_ORTHO),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = *RotationMatrix::identity().entries();
        m[1][2] = f64::NAN;
        assert!(matches!(
            RotationMatrix::from_entries(m, DEFAULT_TOL_ORTHO),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            RotationMatrix::from_euler(f64::INFINITY, 0.0, 0.0, false),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn euler_zero_angles() {
        let r = RotationMatrix::from_euler(0.0, 0.0, 0.0, false).unwrap();
        assert_eq!(r, RotationMatrix::identity());
        let f = RotationMatrix::from_euler(0.0, 0.0, 0.0, true).unwrap();
        assert_eq!(
            *f.entries(),
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]
        );
        assert_eq!(f.det_sign(), -1);
    }

    #[test]
    fn spec_json_forms() {
        let a: RotationSpec = serde_json::from_str(r#"{"rotation":[1,0,0,0,1,0,0,0,1]}"#).unwrap();
        assert_eq!(a.build(DEFAULT_TOL_ORTHO).unwrap(), RotationMatrix::identity());
        let b: RotationSpec = serde_json::from_str(r#"{"euler":[0,0,0],"improper":true}"#).unwrap();
        assert_eq!(b.build(DEFAULT_TOL_ORTHO).unwrap().det_sign(), -1);
        let c: RotationSpec = serde_json::from_str(r#"{"rotation":[1,0,0]}"#).unwrap();
        assert!(matches!(c.build(DEFAULT_TOL_ORTHO), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn euler_is_orthogonal(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0, improper: bool) {
            let r = RotationMatrix::from_euler(a, b, c, improper).unwrap();
            prop_assert!(r.orthogonality_defect() < 1e-12);
            prop_assert!((r.determinant().abs() - 1.0).abs() < 1e-12);
            prop_assert_eq!(r.det_sign(), if improper { -1 } else { 1 });

            let id = r.product(&r.transpose());
            for (k, row) in id.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    let delta = if k == l { 1.0 } else { 0.0 };
                    prop_assert!((v - delta).abs() < 1e-12);
                }
            }
        }
    }
}
