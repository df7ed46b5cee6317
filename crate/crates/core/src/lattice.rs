//! Index arithmetic for the triangular domain `{(i,j) : i,j ≥ 0, i+j ≤ N}`.
//!
//! Sites are enumerated row by row in `j`, and by `i` within a row:
//! `index = j·(N+1) − j(j−1)/2 + i`. The same ordering labels the
//! eigenvalue grid `(s,t)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid label `(i, j)`. Serialized as `"i,j"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

impl Site {
    pub const ORIGIN: Site = Site { i: 0, j: 0 };

    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.i, self.j)
    }
}

/// Parses `"i,j"`. Negative coordinates parse as a domain error rather
/// than a syntax error.
impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::BadConfig(format!("expected a site as `i,j`, got `{s}`")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<i64>()
                .map_err(|_| Error::BadConfig(format!("bad site coordinate `{x}`")))
        };
        let (i, j) = (parse(a)?, parse(b)?);
        if i < 0 || j < 0 {
            return Err(Error::OutOfDomain { i, j, order: 0 });
        }
        Ok(Site::new(i as usize, j as usize))
    }
}

impl From<Site> for String {
    fn from(s: Site) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Site {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TriangularLattice {
    order: usize,
    dim: usize,
}

impl TriangularLattice {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            dim: (order + 1) * (order + 2) / 2,
        }
    }

    /// `N`
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of sites, `(N+1)(N+2)/2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, site: Site) -> bool {
        site.i + site.j <= self.order
    }

    fn out_of_domain(&self, site: Site) -> Error {
        Error::OutOfDomain {
            i: site.i as i64,
            j: site.j as i64,
            order: self.order,
        }
    }

    pub fn check(&self, site: Site) -> Result<Site> {
        if self.contains(site) {
            Ok(site)
        } else {
            Err(self.out_of_domain(site))
        }
    }

    pub fn site_to_index(&self, site: Site) -> Result<usize> {
        self.check(site)?;
        Ok(self.index_unchecked(site.i, site.j))
    }

    /// Caller guarantees `i + j <= N`.
    #[inline]
    pub(crate) fn index_unchecked(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + j <= self.order);
        j * (self.order + 1) + i - j * j.saturating_sub(1) / 2
    }

    pub fn index_to_site(&self, index: usize) -> Result<Site> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        let mut rest = index;
        let mut j = 0;
        loop {
            let row = self.order + 1 - j;
            if rest < row {
                return Ok(Site::new(rest, j));
            }
            rest -= row;
            j += 1;
        }
    }

    /// All sites in index order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..=self.order).flat_map(move |j| (0..=self.order - j).map(move |i| Site::new(i, j)))
    }

    /// Sites with `i + j = N`, ordered by decreasing `i`.
    pub fn hypotenuse(&self) -> impl Iterator<Item = Site> + '_ {
        (0..=self.order).rev().map(move |i| Site::new(i, self.order - i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_triangle_indices() {
        let l = TriangularLattice::new(2);
        assert_eq!(l.dim(), 6);
        assert_eq!(l.site_to_index(Site::new(0, 0)).unwrap(), 0);
        assert_eq!(l.site_to_index(Site::new(2, 0)).unwrap(), 2);
        assert_eq!(l.site_to_index(Site::new(0, 2)).unwrap(), 5);
        assert_eq!(l.index_to_site(0).unwrap(), Site::new(0, 0));
        assert_eq!(l.index_to_site(5).unwrap(), Site::new(0, 2));
    }

    #[test]
    fn enumeration_order_matches_index() {
        // independent enumeration of the N=2 triangle, row-major in j
        let expected = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)];
        let l = TriangularLattice::new(2);
        let got: Vec<_> = l.sites().map(|s| (s.i, s.j)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn out_of_domain() {
        let l = TriangularLattice::new(2);
        assert!(matches!(
            l.site_to_index(Site::new(2, 1)),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(l.index_to_site(6).is_err());
        assert!(matches!("-1,0".parse::<Site>(), Err(Error::OutOfDomain { .. })));
        assert!(matches!("1;0".parse::<Site>(), Err(Error::BadConfig(_))));
    }

    #[test]
    fn bijection_up_to_20() {
        for n in 0..=20 {
            let l = TriangularLattice::new(n);
            assert_eq!(l.dim(), (n + 1) * (n + 2) / 2);
            let mut seen = HashSet::new();
            for (k, site) in l.sites().enumerate() {
                let idx = l.site_to_index(site).unwrap();
                assert_eq!(idx, k);
                assert!(seen.insert(idx));
                assert_eq!(l.index_to_site(idx).unwrap(), site);
            }
            assert_eq!(seen.len(), l.dim());
            for idx in 0..l.dim() {
                let site = l.index_to_site(idx).unwrap();
                assert!(site.i + site.j <= n);
                assert_eq!(l.site_to_index(site).unwrap(), idx);
            }
        }
    }

    #[test]
    fn site_text_form() {
        let s: Site = " 3, 4".parse().unwrap();
        assert_eq!(s, Site::new(3, 4));
        assert_eq!(s.to_string(), "3,4");
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"3,4\"");
    }
}
