//! Analytic spectrum `x_{s,t} = R₂₁R₂₂·s − R₁₁R₁₂·t`, a cyclic Jacobi
//! eigensolver used as an independent oracle, and the comparison between
//! the two.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianMatrix;
use crate::krawtchouk::KrawtchoukTable;
use crate::lattice::{Site, TriangularLattice};
use crate::rotation::RotationMatrix;

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Relative width used to group analytic eigenvalues into degenerate clusters.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSpectrum {
    lattice: TriangularLattice,
    values: Vec<f64>,
}

impl AnalyticSpectrum {
    pub fn new(rot: &RotationMatrix, n: usize) -> Self {
        let lattice = TriangularLattice::new(n);
        let (a, b) = (rot.s_rate(), rot.t_rate());
        let values = lattice
            .sites()
            .map(|st| a * st.i as f64 - b * st.j as f64)
            .collect();
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &TriangularLattice {
        &self.lattice
    }

    /// `x_{s,t}` in lattice index order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, grid: Site) -> Result<f64> {
        Ok(self.values[self.lattice.site_to_index(grid)?])
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Grid labels paired with their energies, in lattice order.
    pub fn entries(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.lattice.sites().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub sweeps: usize,
}

pub fn diagonalize(h: &HamiltonianMatrix, tol_eig: f64) -> Result<SpectralDecomposition> {
    jacobi_eigen(h.entries(), tol_eig, DEFAULT_MAX_SWEEPS)
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix.
///
/// Sweeps over all pairs `p < q`, annihilating `a_pq` with a plane rotation
/// and accumulating the rotations into the eigenvector matrix. Stops once
/// every off-diagonal magnitude is `≤ tol_eig · ‖A‖_F`. Eigenpairs come back
/// sorted ascending; ties keep their diagonal order.
pub fn jacobi_eigen(a: &DMatrix<f64>, tol_eig: f64, max_sweeps: usize) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            found: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix to diagonalize"));
    }
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let threshold = tol_eig * a.norm();

    let off_max = |a: &DMatrix<f64>| {
        let mut worst = 0.0f64;
        for q in 1..n {
            for p in 0..q {
                worst = worst.max(a[(p, q)].abs());
            }
        }
        worst
    };

    let mut sweeps = 0;
    loop {
        let off = off_max(&a);
        if off <= threshold {
            break;
        }
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]).then(x.cmp(&y)));
    let eigenvalues = order.iter().map(|&k| a[(k, k)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |row, col| v[(row, order[col])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

impl SpectralDecomposition {
    /// `max_k ‖A v_k − λ_k v_k‖∞`
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        let av = a * &self.eigenvectors;
        let mut worst = 0.0f64;
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            let r = av.column(k) - self.eigenvectors.column(k) * *lambda;
            worst = worst.max(r.amax());
        }
        worst
    }

    /// `‖VᵀV − I‖max`
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::<f64>::identity(n, n)).amax()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `max |sorted numeric − sorted analytic|`
    pub eigenvalue_deviation: f64,
    /// Largest entrywise gap between numeric and analytic spectral
    /// projectors, over all degenerate clusters.
    pub projector_deviation: f64,
    /// `max min_± ‖v ∓ m_{s,t}‖∞` over non-degenerate eigenvalues.
    pub vector_deviation: f64,
    pub clusters: usize,
    pub largest_cluster: usize,
}

/// Compares the oracle decomposition with the analytic eigenpairs
/// `(x_{s,t}, m_{s,t})`.
///
/// Analytic eigenvalues are sorted and grouped into clusters whose adjacent
/// gaps are at most `CLUSTER_TOL · max|λ|`; the same index ranges of the
/// sorted numeric spectrum form the numeric clusters. Eigenvectors are
/// compared through cluster projectors, so any basis of a degenerate
/// eigenspace is accepted.
pub fn compare(
    decomp: &SpectralDecomposition,
    table: &KrawtchoukTable,
    spectrum: &AnalyticSpectrum,
) -> Result<ComparisonReport> {
    let dim = decomp.eigenvalues.len();
    for found in [table.lattice().dim(), spectrum.lattice().dim(), decomp.eigenvectors.nrows()] {
        if found != dim {
            return Err(Error::DimensionMismatch { expected: dim, found });
        }
    }

    let mut order: Vec<usize> = (0..dim).collect();
    let x = spectrum.values();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));

    let eigenvalue_deviation = order
        .iter()
        .zip(&decomp.eigenvalues)
        .map(|(&k, lambda)| (x[k] - lambda).abs())
        .fold(0.0, f64::max);

    let scale = decomp.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let gap_tol = CLUSTER_TOL * scale;
    let mut ranges = Vec::new();
    let mut start = 0;
    for k in 1..=dim {
        if k == dim || x[order[k]] - x[order[k - 1]] > gap_tol {
            ranges.push(start..k);
            start = k;
        }
    }

    let m = table.transition();
    let mut projector_deviation = 0.0f64;
    let mut vector_deviation = 0.0f64;
    for range in &ranges {
        let mut diff = DMatrix::<f64>::zeros(dim, dim);
        for k in range.clone() {
            let analytic = m.row(order[k]).transpose();
            let numeric = decomp.eigenvectors.column(k);
            diff += &analytic * analytic.transpose();
            diff -= numeric * numeric.transpose();
            if range.len() == 1 {
                let plus = (numeric - &analytic).amax();
                let minus = (numeric + &analytic).amax();
                vector_deviation = vector_deviation.max(plus.min(minus));
            }
        }
        projector_deviation = projector_deviation.max(diff.amax());
    }

    Ok(ComparisonReport {
        eigenvalue_deviation,
        projector_deviation,
        vector_deviation,
        clusters: ranges.len(),
        largest_cluster: ranges.iter().map(|r| r.len()).max().unwrap_or(0),
    })
}
