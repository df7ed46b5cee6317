//! Bivariate Krawtchouk polynomials `P_{i,j}(s,t;N)` on the triangular grid,
//! their weight amplitudes `W_{s,t;N}`, and the orthogonal transition matrix
//! `M_{i,j}(s,t) = W_{s,t;N} · P_{i,j}(s,t;N)`.
//!
//! Polynomials are kept as value tables on the grid. They are built from
//! `P_{0,0} = 1` by the two raising relations, which step the order from
//! `N−1` to `N`:
//!
//! ```text
//! √(N(i+1)) P_{i+1,j}(s,t;N) = (R₁₁/R₁₃) s P_{i,j}(s−1,t;N−1)
//!                            + (R₂₁/R₂₃) t P_{i,j}(s,t−1;N−1)
//!                            + (R₃₁/R₃₃) (N−s−t) P_{i,j}(s,t;N−1)
//! ```
//!
//! and the same with column 2 of `R` for `P_{i,j+1}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{Site, TriangularLattice};
use crate::rotation::RotationMatrix;

/// Entries of the third column of `R` below this magnitude make the raising
/// relations undefined.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `ln [N! / (s! t! (N−s−t)!)]`
fn ln_multinomial(ln_fact: &[f64], n: usize, s: usize, t: usize) -> f64 {
    ln_fact[n] - ln_fact[s] - ln_fact[t] - ln_fact[n - s - t]
}

/// Trinomial coefficient `N! / (s! t! (N−s−t)!)`.
pub fn multinomial(n: usize, s: usize, t: usize) -> Result<f64> {
    TriangularLattice::new(n).check(Site::new(s, t))?;
    let lf = ln_factorials(n);
    Ok(ln_multinomial(&lf, n, s, t).exp())
}

/// `sign(x)^k · |x|^k` in log form, with `0⁰ = 1`.
fn signed_log_power(x: f64, k: usize) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    if x == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let sign = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    (sign, k as f64 * x.abs().ln())
}

fn weight_with(ln_fact: &[f64], rot: &RotationMatrix, n: usize, s: usize, t: usize) -> f64 {
    let u = n - s - t;
    let (sa, la) = signed_log_power(rot.r(1, 3), s);
    let (sb, lb) = signed_log_power(rot.r(2, 3), t);
    let (sc, lc) = signed_log_power(rot.r(3, 3), u);
    let sign = sa * sb * sc;
    if sign == 0.0 {
        return 0.0;
    }
    sign * (0.5 * ln_multinomial(ln_fact, n, s, t) + la + lb + lc).exp()
}

/// `W_{s,t;N} = binom(N; s,t)^{1/2} R₁₃^s R₂₃^t R₃₃^{N−s−t}`.
pub fn weight(rot: &RotationMatrix, n: usize, s: usize, t: usize) -> Result<f64> {
    TriangularLattice::new(n).check(Site::new(s, t))?;
    Ok(weight_with(&ln_factorials(n), rot, n, s, t))
}

pub(crate) fn check_nondegenerate(rot: &RotationMatrix) -> Result<()> {
    for (name, k) in [("R13", 1), ("R23", 2), ("R33", 3)] {
        let value = rot.r(k, 3);
        if value.abs() < DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateRotation {
                entry: name,
                value: value.abs(),
                threshold: DEGENERACY_THRESHOLD,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct KrawtchoukTable {
    lattice: TriangularLattice,
    rotation: RotationMatrix,
    /// `W_{s,t;N}`, indexed by the lattice index of `(s,t)`.
    weights: Vec<f64>,
    /// `P_{i,j}(s,t;N)` at row `(s,t)`, column `(i,j)`.
    poly: DMatrix<f64>,
    /// `M = diag(W) · P`, same layout.
    transition: DMatrix<f64>,
}

impl KrawtchoukTable {
    /// Tabulates `W`, `P` and `M` at order `n` by sweeping the raising
    /// relations over orders `1..=n`. Only two consecutive orders are alive
    /// at any time.
    pub fn build(rotation: &RotationMatrix, n: usize) -> Result<Self> {
        check_nondegenerate(rotation)?;

        let col1 = [
            rotation.r(1, 1) / rotation.r(1, 3),
            rotation.r(2, 1) / rotation.r(2, 3),
            rotation.r(3, 1) / rotation.r(3, 3),
        ];
        let col2 = [
            rotation.r(1, 2) / rotation.r(1, 3),
            rotation.r(2, 2) / rotation.r(2, 3),
            rotation.r(3, 2) / rotation.r(3, 3),
        ];

        let mut prev_lat = TriangularLattice::new(0);
        let mut prev = DMatrix::from_element(1, 1, 1.0);
        for order in 1..=n {
            let lat = TriangularLattice::new(order);
            let dim = lat.dim();
            let mut next = DMatrix::zeros(dim, dim);
            let nf = order as f64;
            for (col, ij) in lat.sites().enumerate() {
                if ij == Site::ORIGIN {
                    next.column_mut(col).fill(1.0);
                    continue;
                }
                // lower (i,j) by one along i when possible, otherwise along j
                let (src, ratios, raised) = if ij.i > 0 {
                    (Site::new(ij.i - 1, ij.j), &col1, ij.i)
                } else {
                    (Site::new(0, ij.j - 1), &col2, ij.j)
                };
                let src_col = prev_lat.index_unchecked(src.i, src.j);
                let norm = (nf * raised as f64).sqrt();
                for (row, st) in lat.sites().enumerate() {
                    let (s, t) = (st.i, st.j);
                    let u = order - s - t;
                    let mut acc = 0.0;
                    if s > 0 {
                        acc += ratios[0] * s as f64 * prev[(prev_lat.index_unchecked(s - 1, t), src_col)];
                    }
                    if t > 0 {
                        acc += ratios[1] * t as f64 * prev[(prev_lat.index_unchecked(s, t - 1), src_col)];
                    }
                    if u > 0 {
                        acc += ratios[2] * u as f64 * prev[(prev_lat.index_unchecked(s, t), src_col)];
                    }
                    next[(row, col)] = acc / norm;
                }
            }
            prev = next;
            prev_lat = lat;
        }

        let lattice = TriangularLattice::new(n);
        let lf = ln_factorials(n);
        let weights: Vec<f64> = lattice
            .sites()
            .map(|st| weight_with(&lf, rotation, n, st.i, st.j))
            .collect();
        let mut transition = prev.clone();
        for (row, w) in weights.iter().enumerate() {
            transition.row_mut(row).scale_mut(*w);
        }

        Ok(Self {
            lattice,
            rotation: *rotation,
            weights,
            poly: prev,
            transition,
        })
    }

    pub fn lattice(&self) -> &TriangularLattice {
        &self.lattice
    }

    pub fn order(&self) -> usize {
        self.lattice.order()
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, grid: Site) -> Result<f64> {
        Ok(self.weights[self.lattice.site_to_index(grid)?])
    }

    /// `P_{i,j}(s,t;N)`
    pub fn poly(&self, degree: Site, grid: Site) -> Result<f64> {
        let col = self.lattice.site_to_index(degree)?;
        let row = self.lattice.site_to_index(grid)?;
        Ok(self.poly[(row, col)])
    }

    /// Rows `(s,t)`, columns `(i,j)`.
    pub fn poly_matrix(&self) -> &DMatrix<f64> {
        &self.poly
    }

    /// `M_{i,j}(s,t)`: rows `(s,t)`, columns `(i,j)`. Row `(s,t)` holds the
    /// site amplitudes of the eigenvector with energy `x_{s,t}`.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// `max |Σ_{s+t≤N} ω_{s,t;N} P_{i,j} P_{i',j'} − δ_{ii'}δ_{jj'}|` with `ω = W²`.
    pub fn orthogonality_defect(&self) -> f64 {
        let dim = self.lattice.dim();
        let mut worst = 0.0f64;
        for a in 0..dim {
            for b in a..dim {
                let sum: f64 = (0..dim)
                    .map(|r| self.weights[r] * self.weights[r] * self.poly[(r, a)] * self.poly[(r, b)])
                    .sum();
                let delta = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((sum - delta).abs());
            }
        }
        worst
    }

    /// Largest deviation of `MᵀM` or `MMᵀ` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.lattice.dim(), self.lattice.dim());
        let a = (self.transition.transpose() * &self.transition - &id).amax();
        let b = (&self.transition * self.transition.transpose() - &id).amax();
        a.max(b)
    }

    /// Largest residuals of the two three-direction recurrences (the
    /// eigen-relations of `a₁†a₁` and `a₂†a₂` in the rotated frame), over all
    /// `(i,j)` and `(s,t)`.
    ///
    /// Each relation is evaluated after multiplying through by `W_{s,t;N}`,
    /// i.e. on `M` rather than `P`; for a non-degenerate rotation this is
    /// the same identity, but its residual is not inflated where `P` is large
    /// and the weight is small. Out-of-range terms count as zero.
    pub fn recurrence_residuals(&self) -> (f64, f64) {
        let r = &self.rotation;
        let first = [
            [r.r(1, 1), r.r(1, 2), r.r(1, 3)],
            [r.r(2, 1), r.r(2, 2), r.r(2, 3)],
        ];
        let mut worst = [0.0f64; 2];
        let n = self.lattice.order();
        let nf = n as f64;
        let m = &self.transition;
        let lat = &self.lattice;
        let at = |i: isize, j: isize, row: usize| -> f64 {
            if i < 0 || j < 0 || (i + j) as usize > n {
                0.0
            } else {
                m[(row, lat.index_unchecked(i as usize, j as usize))]
            }
        };
        let alpha = |i: isize, j: isize| ((i as f64) * (nf - (i + j) as f64 + 1.0)).max(0.0).sqrt();
        let beta = |i: isize, j: isize| ((j as f64) * (nf - (i + j) as f64 + 1.0)).max(0.0).sqrt();
        let gamma = |i: isize, j: isize| ((i * j) as f64).max(0.0).sqrt();

        for (row, st) in lat.sites().enumerate() {
            let grid = [st.i as f64, st.j as f64];
            for ij in lat.sites() {
                let (i, j) = (ij.i as isize, ij.j as isize);
                let center = at(i, j, row);
                for (which, c) in first.iter().enumerate() {
                    let diag = c[0] * c[0] * i as f64
                        + c[1] * c[1] * j as f64
                        + c[2] * c[2] * (nf - (i + j) as f64);
                    let rhs = diag * center
                        + c[0] * c[2] * (alpha(i + 1, j) * at(i + 1, j, row) + alpha(i, j) * at(i - 1, j, row))
                        + c[1] * c[2] * (beta(i, j + 1) * at(i, j + 1, row) + beta(i, j) * at(i, j - 1, row))
                        + c[0] * c[1]
                            * (gamma(i, j + 1) * at(i - 1, j + 1, row)
                                + gamma(i + 1, j) * at(i + 1, j - 1, row));
                    worst[which] = worst[which].max((grid[which] * center - rhs).abs());
                }
            }
        }
        (worst[0], worst[1])
    }

    /// Max residual of the least-squares fit of `P_{i,j}` over the grid by a
    /// bivariate polynomial of total degree `degree`.
    ///
    /// The residual is the component of the value table orthogonal to the
    /// span of the monomials `u^a v^b` (`a+b ≤ degree`, `u = 2s/N − 1`,
    /// `v = 2t/N − 1`), taken from a Householder QR of the design matrix.
    /// Coefficients are never formed, so the ill-conditioning of the monomial
    /// basis does not leak into the residual.
    pub fn degree_fit_residual(&self, poly: Site, degree: usize) -> Result<f64> {
        let col = self.lattice.site_to_index(poly)?;
        let n = self.lattice.order();
        let scale = if n == 0 { 1.0 } else { 2.0 / n as f64 };
        let shift = if n == 0 { 0.0 } else { 1.0 };
        let exponents: Vec<(i32, i32)> = (0..=degree.min(n) as i32)
            .flat_map(|d| (0..=d).map(move |a| (a, d - a)))
            .collect();
        let design = DMatrix::from_fn(self.lattice.dim(), exponents.len(), |row, k| {
            let st = self.lattice.index_to_site(row).expect("row in range");
            let u = st.i as f64 * scale - shift;
            let v = st.j as f64 * scale - shift;
            u.powi(exponents[k].0) * v.powi(exponents[k].1)
        });
        let target: DVector<f64> = self.poly.column(col).into_owned();
        let q = design.qr().q();
        let projected = &q * (q.transpose() * &target);
        Ok((target - projected).amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn reference() -> RotationMatrix {
        RotationMatrix::reference()
    }

    #[test]
    fn weights_order_one() {
        let r = reference();
        let w00 = weight(&r, 1, 0, 0).unwrap();
        let w10 = weight(&r, 1, 1, 0).unwrap();
        let w01 = weight(&r, 1, 0, 1).unwrap();
        assert!((w00 - SQRT_2 / 2.0).abs() < 1e-15);
        assert!((w10 - 0.5).abs() < 1e-15);
        assert!((w01 - 0.5).abs() < 1e-15);
        assert!((w00 * w00 + w10 * w10 + w01 * w01 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_weights_are_delta() {
        let id = RotationMatrix::identity();
        for n in 0..6 {
            for st in TriangularLattice::new(n).sites() {
                let w = weight(&id, n, st.i, st.j).unwrap();
                let expected = if st == Site::ORIGIN { 1.0 } else { 0.0 };
                assert_eq!(w, expected);
            }
        }
        assert!(weight(&id, 2, 2, 1).is_err());
    }

    #[test]
    fn weights_survive_large_order() {
        let r = reference();
        let n = 80;
        let total: f64 = TriangularLattice::new(n)
            .sites()
            .map(|st| weight(&r, n, st.i, st.j).unwrap().powi(2))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_small_values() {
        assert!((multinomial(4, 1, 2).unwrap() - 12.0).abs() < 1e-12);
        assert!((multinomial(6, 2, 2).unwrap() - 90.0).abs() < 1e-11);
        assert!((multinomial(0, 0, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_zero_table() {
        let t = KrawtchoukTable::build(&reference(), 0).unwrap();
        assert_eq!(t.transition().shape(), (1, 1));
        assert_eq!(t.poly_matrix()[(0, 0)], 1.0);
        assert_eq!(t.transition()[(0, 0)], 1.0);
        assert_eq!(t.recurrence_residuals(), (0.0, 0.0));
    }

    #[test]
    fn p00_is_one_everywhere() {
        for n in 0..8 {
            let t = KrawtchoukTable::build(&reference(), n).unwrap();
            for st in t.lattice().sites() {
                assert_eq!(t.poly(Site::ORIGIN, st).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn first_degree_polynomial_closed_form() {
        // one application of the first raising relation to P_{0,0} = 1
        let h = SQRT_2 / 2.0;
        for n in 1..8 {
            let t = KrawtchoukTable::build(&reference(), n).unwrap();
            for st in t.lattice().sites() {
                let (s, tt) = (st.i as f64, st.j as f64);
                let nf = n as f64;
                let expected = ((1.0 - h) * s - (1.0 + h) * tt + h * (nf - s - tt)) / nf.sqrt();
                let got = t.poly(Site::new(1, 0), st).unwrap();
                assert!((got - expected).abs() < 1e-13, "n={n} st={st}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn identity_rotation_is_degenerate() {
        assert!(matches!(
            KrawtchoukTable::build(&RotationMatrix::identity(), 3),
            Err(Error::DegenerateRotation { .. })
        ));
    }

    #[test]
    fn reference_orthogonality_and_recurrences() {
        let t = KrawtchoukTable::build(&reference(), 6).unwrap();
        assert!(t.orthogonality_defect() < 1e-10);
        assert!(t.unitarity_defect() < 1e-10);
        let (r1, r2) = t.recurrence_residuals();
        assert!(r1 < 1e-10 && r2 < 1e-10, "{r1} {r2}");
    }

    #[test]
    fn degree_fit_is_exact_and_tight() {
        let t = KrawtchoukTable::build(&reference(), 6).unwrap();
        for deg in t.lattice().sites() {
            let d = deg.i + deg.j;
            assert!(t.degree_fit_residual(deg, d).unwrap() < 1e-9);
            if d > 0 {
                // one degree short must fail, otherwise the check is vacuous
                assert!(t.degree_fit_residual(deg, d - 1).unwrap() > 1e-3);
            }
        }
    }
}
