//! Couplings `(I, J, B)` and the single-excitation block of the XY lattice
//! Hamiltonian.
//!
//! `I_{i,j}` couples `(i−1,j)` to `(i,j)`, `J_{i,j}` couples `(i,j−1)` to
//! `(i,j)`, and `B_{i,j}` is the on-site field. Tables are stored
//! rectangularly as `[j][i]`, `(N+1)×(N+1)`, with the corner `i+j > N`
//! held at zero.

use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krawtchouk::KrawtchoukTable;
use crate::lattice::{Site, TriangularLattice};
use crate::rotation::RotationMatrix;
use crate::spectral::AnalyticSpectrum;

type Table = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    lattice: TriangularLattice,
    horizontal: Table,
    vertical: Table,
    field: Table,
}

/// On-disk form: `{"N": n, "I": [[..]], "J": [[..]], "B": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingFile {
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(rename = "I")]
    pub horizontal: Table,
    #[serde(rename = "J")]
    pub vertical: Table,
    #[serde(rename = "B")]
    pub field: Table,
}

/// A nonzero value found where the lattice has no bond or site.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryWarning {
    pub table: &'static str,
    pub site: Site,
    pub value: f64,
}

impl std::fmt::Display for BoundaryWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}[{}] = {} is outside the lattice and was set to 0",
            self.table, self.site, self.value
        )
    }
}

impl CouplingSet {
    /// Couplings of the solvable family attached to `rot`:
    ///
    /// ```text
    /// I_{i,j} = (R₂₁R₂₂R₁₁R₁₃ − R₁₁R₁₂R₂₁R₂₃) √(i(N−i−j+1))
    /// J_{i,j} = (R₂₁R₂₂R₁₂R₁₃ − R₁₁R₁₂R₂₂R₂₃) √(j(N−i−j+1))
    /// B_{i,j} = [R₂₁R₂₂(R₁₁²−R₁₃²) − R₁₁R₁₂(R₂₁²−R₂₃²)] i
    ///         + [R₂₁R₂₂(R₁₂²−R₁₃²) − R₁₁R₁₂(R₂₂²−R₂₃²)] j
    ///         + [R₂₁R₂₂R₁₃² − R₁₁R₁₂R₂₃²] N
    /// ```
    pub fn from_rotation(rot: &RotationMatrix, n: usize) -> Self {
        let r = |k, l| rot.r(k, l);
        let a = rot.s_rate();
        let b = rot.t_rate();
        let c_i = a * r(1, 1) * r(1, 3) - b * r(2, 1) * r(2, 3);
        let c_j = a * r(1, 2) * r(1, 3) - b * r(2, 2) * r(2, 3);
        let f_i = a * (r(1, 1).powi(2) - r(1, 3).powi(2)) - b * (r(2, 1).powi(2) - r(2, 3).powi(2));
        let f_j = a * (r(1, 2).powi(2) - r(1, 3).powi(2)) - b * (r(2, 2).powi(2) - r(2, 3).powi(2));
        let f_n = a * r(1, 3).powi(2) - b * r(2, 3).powi(2);

        let lattice = TriangularLattice::new(n);
        let mut set = Self::zeros(n);
        let nf = n as f64;
        for site in lattice.sites() {
            let (i, j) = (site.i as f64, site.j as f64);
            let room = nf - i - j + 1.0;
            set.horizontal[site.j][site.i] = c_i * (i * room).sqrt();
            set.vertical[site.j][site.i] = c_j * (j * room).sqrt();
            set.field[site.j][site.i] = f_i * i + f_j * j + f_n * nf;
        }
        set
    }

    pub fn zeros(n: usize) -> Self {
        let table = vec![vec![0.0; n + 1]; n + 1];
        Self {
            lattice: TriangularLattice::new(n),
            horizontal: table.clone(),
            vertical: table.clone(),
            field: table,
        }
    }

    /// Validates shapes and finiteness, then zeroes every entry the lattice
    /// cannot carry (`I_{0,j}`, `J_{i,0}`, and anything with `i+j > N`).
    /// Zeroed entries are logged and returned.
    pub fn from_tables(file: CouplingFile) -> Result<(Self, Vec<BoundaryWarning>)> {
        let n = file.order;
        let mut warnings = Vec::new();
        let mut set = Self::zeros(n);
        for (name, src, dst) in [
            ("I", &file.horizontal, &mut set.horizontal),
            ("J", &file.vertical, &mut set.vertical),
            ("B", &file.field, &mut set.field),
        ] {
            if src.len() != n + 1 || src.iter().any(|row| row.len() != n + 1) {
                return Err(Error::ShapeMismatch(format!(
                    "table {name} must be {0}x{0} for N = {n}",
                    n + 1
                )));
            }
            for (j, row) in src.iter().enumerate() {
                for (i, &value) in row.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::NonFinite("coupling table"));
                    }
                    let allowed = i + j <= n
                        && !(name == "I" && i == 0)
                        && !(name == "J" && j == 0);
                    if allowed {
                        dst[j][i] = value;
                    } else if value != 0.0 {
                        let w = BoundaryWarning {
                            table: name,
                            site: Site::new(i, j),
                            value,
                        };
                        warn!("{w}");
                        warnings.push(w);
                    }
                }
            }
        }
        Ok((set, warnings))
    }

    pub fn read_json(path: &Path) -> Result<(Self, Vec<BoundaryWarning>)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<(Self, Vec<BoundaryWarning>)> {
        let file: CouplingFile = serde_json::from_str(text)?;
        Self::from_tables(file)
    }

    pub fn to_file(&self) -> CouplingFile {
        CouplingFile {
            order: self.lattice.order(),
            horizontal: self.horizontal.clone(),
            vertical: self.vertical.clone(),
            field: self.field.clone(),
        }
    }

    pub fn lattice(&self) -> &TriangularLattice {
        &self.lattice
    }

    /// `I_{i,j}`; zero off the lattice.
    pub fn horizontal(&self, site: Site) -> f64 {
        self.get(&self.horizontal, site)
    }

    /// `J_{i,j}`; zero off the lattice.
    pub fn vertical(&self, site: Site) -> f64 {
        self.get(&self.vertical, site)
    }

    /// `B_{i,j}`; zero off the lattice.
    pub fn field(&self, site: Site) -> f64 {
        self.get(&self.field, site)
    }

    fn get(&self, table: &Table, site: Site) -> f64 {
        if self.lattice.contains(site) {
            table[site.j][site.i]
        } else {
            0.0
        }
    }

    pub fn assemble(&self) -> HamiltonianMatrix {
        let lat = self.lattice;
        let mut h = DMatrix::zeros(lat.dim(), lat.dim());
        for (idx, site) in lat.sites().enumerate() {
            h[(idx, idx)] = self.field(site);
            if site.i > 0 {
                let left = lat.index_unchecked(site.i - 1, site.j);
                let v = self.horizontal(site);
                h[(left, idx)] = v;
                h[(idx, left)] = v;
            }
            if site.j > 0 {
                let below = lat.index_unchecked(site.i, site.j - 1);
                let v = self.vertical(site);
                h[(below, idx)] = v;
                h[(idx, below)] = v;
            }
        }
        HamiltonianMatrix { lattice: lat, entries: h }
    }
}

/// Dense, symmetric single-excitation Hamiltonian in lattice index order.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    lattice: TriangularLattice,
    entries: DMatrix<f64>,
}

impl HamiltonianMatrix {
    pub fn lattice(&self) -> &TriangularLattice {
        &self.lattice
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, a: Site, b: Site) -> Result<f64> {
        Ok(self.entries[(self.lattice.site_to_index(a)?, self.lattice.site_to_index(b)?)])
    }

    /// `max_{s,t} ‖H m_{s,t} − x_{s,t} m_{s,t}‖∞`, with `m_{s,t}` the
    /// `(s,t)` row of the transition matrix.
    pub fn eigen_residual(&self, table: &KrawtchoukTable, spectrum: &AnalyticSpectrum) -> Result<f64> {
        let dim = self.lattice.dim();
        for found in [table.lattice().dim(), spectrum.lattice().dim()] {
            if found != dim {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        let m = table.transition();
        let mut worst = 0.0f64;
        for (row, x) in spectrum.values().iter().enumerate() {
            let v = m.row(row).transpose();
            let r = &self.entries * &v - v * *x;
            worst = worst.max(r.amax());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn reference_couplings_match_closed_forms() {
        let rot = RotationMatrix::reference();
        for n in 0..7 {
            let c = CouplingSet::from_rotation(&rot, n);
            for site in c.lattice().sites() {
                let (i, j, nf) = (site.i as f64, site.j as f64, n as f64);
                let room = nf - i - j + 1.0;
                assert!((c.horizontal(site) + (i * room).sqrt() / 16.0).abs() < 1e-15);
                assert!((c.vertical(site) - (j * room).sqrt() / 16.0).abs() < 1e-15);
                assert!((c.field(site) + (j - i) / (8.0 * SQRT_2)).abs() < 1e-15);
            }
        }
        let c = CouplingSet::from_rotation(&rot, 2);
        assert!((c.horizontal(Site::new(1, 0)) + SQRT_2 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn order_zero_is_zero_matrix() {
        let h = CouplingSet::from_rotation(&RotationMatrix::reference(), 0).assemble();
        assert_eq!(h.entries().shape(), (1, 1));
        assert_eq!(h.entries()[(0, 0)], 0.0);
    }

    #[test]
    fn order_one_matrix() {
        let h = CouplingSet::from_rotation(&RotationMatrix::reference(), 1).assemble();
        let b = 1.0 / (8.0 * SQRT_2);
        // lattice order: (0,0), (1,0), (0,1)
        let expected = DMatrix::from_row_slice(3, 3, &[
            0.0, -1.0 / 16.0, 1.0 / 16.0,
            -1.0 / 16.0, b, 0.0,
            1.0 / 16.0, 0.0, -b,
        ]);
        assert!((h.entries() - expected).amax() < 1e-15);
    }

    #[test]
    fn boundary_entries_are_zeroed() {
        let n = 5;
        let mut file = CouplingSet::zeros(n).to_file();
        file.horizontal[5][0] = 3.0;
        file.vertical[0][2] = 1.5;
        file.field[4][4] = -1.0;
        file.field[1][1] = 0.25;
        let (set, warnings) = CouplingSet::from_tables(file).unwrap();
        assert_eq!(warnings.len(), 3);
        assert_eq!(warnings[0].site, Site::new(0, 5));
        assert_eq!(set.horizontal(Site::new(0, 5)), 0.0);
        assert_eq!(set.vertical(Site::new(2, 0)), 0.0);
        assert_eq!(set.field(Site::new(1, 1)), 0.25);
    }

    #[test]
    fn zero_tables_give_zero_matrix() {
        let (set, warnings) = CouplingSet::from_tables(CouplingSet::zeros(2).to_file()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(set.assemble().entries().amax(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut file = CouplingSet::zeros(3).to_file();
        file.field.pop();
        assert!(matches!(CouplingSet::from_tables(file), Err(Error::ShapeMismatch(_))));
        let mut file = CouplingSet::zeros(3).to_file();
        file.vertical[1].push(0.0);
        assert!(matches!(CouplingSet::from_tables(file), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn json_round_trip() {
        let set = CouplingSet::from_rotation(&RotationMatrix::reference(), 4);
        let text = serde_json::to_string(&set.to_file()).unwrap();
        let (back, warnings) = CouplingSet::from_json_str(&text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, set);
    }

    #[test]
    fn symmetric_and_five_point() {
        let rot = RotationMatrix::from_euler(0.3, 1.1, -0.7, false).unwrap();
        let h = CouplingSet::from_rotation(&rot, 6).assemble();
        let lat = *h.lattice();
        assert_eq!(h.entries(), &h.entries().transpose());
        for a in lat.sites() {
            for b in lat.sites() {
                let di = a.i.abs_diff(b.i);
                let dj = a.j.abs_diff(b.j);
                if di + dj > 1 {
                    assert_eq!(h.get(a, b).unwrap(), 0.0);
                }
            }
        }
    }
}
