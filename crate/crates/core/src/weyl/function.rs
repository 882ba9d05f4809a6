use std::fmt::Write as _;
use std::fs;
use std::ops::Deref;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{Lattice, PhaseGrid};
use super::rep::RepDescriptor;
use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};
use crate::ops::C64;

/// Sampling domain of a phase-space function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// All of `Z_d^2`, row-major in `(a, b)`.
    Finite { d: usize },
    /// A lattice of a [`PhaseGrid`], row-major in `(q, p)`.
    Grid { grid: PhaseGrid, lattice: Lattice },
}

impl Domain {
    pub fn context(&self) -> GroupContext {
        match *self {
            Self::Finite { d } => GroupContext::Finite { d },
            Self::Grid { .. } => GroupContext::Plane,
        }
    }

    /// Points per axis.
    pub fn side_len(&self) -> usize {
        match *self {
            Self::Finite { d } => d,
            Self::Grid { grid, .. } => grid.n(),
        }
    }

    pub fn len(&self) -> usize {
        self.side_len() * self.side_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Haar weight carried by one sample point.
    pub fn haar_weight(&self) -> f64 {
        match *self {
            Self::Finite { .. } => 1.0,
            Self::Grid { grid, lattice } => grid.haar_weight(lattice),
        }
    }

    pub fn grid(&self) -> Option<(PhaseGrid, Lattice)> {
        match *self {
            Self::Grid { grid, lattice } => Some((grid, lattice)),
            Self::Finite { .. } => None,
        }
    }

    pub fn point(&self, idx: usize) -> GroupElement {
        let n = self.side_len();
        match *self {
            Self::Finite { .. } => GroupElement::Finite(idx / n, idx % n),
            Self::Grid { grid, lattice } => GroupElement::Plane(grid.coord(lattice, idx / n), grid.coord(lattice, idx % n)),
        }
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        let n = self.side_len();
        match (*self, *g) {
            (Self::Finite { d }, GroupElement::Finite(a, b)) if a < d && b < d => Some(a * d + b),
            (Self::Grid { grid, lattice }, GroupElement::Plane(q, p)) => {
                Some(grid.index_of(lattice, q)? * n + grid.index_of(lattice, p)?)
            }
            _ => None,
        }
    }

    /// Index of the inverse point, when it is sampled.
    pub fn inverse_index(&self, idx: usize) -> Option<usize> {
        let n = self.side_len();
        let (i, j) = (idx / n, idx % n);
        match self {
            Self::Finite { .. } => Some(((n - i) % n) * n + (n - j) % n),
            Self::Grid { .. } => (i > 0 && j > 0).then(|| (n - i) * n + (n - j)),
        }
    }

    pub fn check_same(&self, other: &Domain) -> Result<()> {
        if self != other {
            return Err(Error::DomainMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Complex-valued function sampled on a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFunction {
    domain: Domain,
    values: Vec<C64>,
}

impl PhaseFunction {
    pub fn new(domain: Domain, values: Vec<C64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch(values.len(), domain.len()));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Domain) -> Self {
        Self { domain, values: vec![C64::new(0.0, 0.0); domain.len()] }
    }

    pub fn from_fn(domain: Domain, f: impl Fn(GroupElement) -> C64) -> Self {
        let values = (0..domain.len()).map(|k| f(domain.point(k))).collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Value at row `i`, column `j`.
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.domain.side_len() + j]
    }

    pub fn value_at(&self, g: &GroupElement) -> Option<C64> {
        self.domain.index_of(g).map(|k| self.values[k])
    }

    /// Haar-weighted inner product `sum conj(f) g w`.
    pub fn inner(&self, other: &PhaseFunction) -> Result<C64> {
        self.domain.check_same(&other.domain)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.domain.haar_weight())
    }

    /// Haar-weighted L2 norm.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.domain.haar_weight()).sqrt()
    }

    /// Haar-weighted integral.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.domain.haar_weight()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &PhaseFunction) -> Result<f64> {
        self.domain.check_same(&other.domain)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { domain: self.domain, values: self.values.iter().map(|z| z * s).collect() }
    }

    /// `alpha self + beta other`.
    pub fn combine(&self, alpha: C64, other: &PhaseFunction, beta: C64) -> Result<Self> {
        self.domain.check_same(&other.domain)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Ok(Self { domain: self.domain, values })
    }

    pub fn conj(&self) -> Self {
        Self { domain: self.domain, values: self.values.iter().map(|z| z.conj()).collect() }
    }

    /// The involution `f -> conj(f(g^-1))`; unsampled partners map to zero.
    pub fn conj_reflect(&self) -> Self {
        let values = (0..self.values.len())
            .map(|k| self.domain.inverse_index(k).map_or(C64::new(0.0, 0.0), |r| self.values[r].conj()))
            .collect();
        Self { domain: self.domain, values }
    }

    /// Pointwise product with `m(g)`.
    pub fn multiplied(&self, m: impl Fn(GroupElement) -> C64) -> Self {
        let values = self.values.iter().enumerate().map(|(k, v)| v * m(self.domain.point(k))).collect();
        Self { domain: self.domain, values }
    }

    /// `x -> f(x - shift)` with the shift in whole samples; grids are zero-filled, `Z_d^2` wraps.
    pub fn translated(&self, shift: (i64, i64)) -> Self {
        let n = self.domain.side_len() as i64;
        let wrap = matches!(self.domain, Domain::Finite { .. });
        let mut out = Self::zeros(self.domain);
        for i in 0..n {
            for j in 0..n {
                let (mut si, mut sj) = (i - shift.0, j - shift.1);
                if wrap {
                    si = si.rem_euclid(n);
                    sj = sj.rem_euclid(n);
                } else if si < 0 || si >= n || sj < 0 || sj >= n {
                    continue;
                }
                out.values[(i * n + j) as usize] = self.values[(si * n + sj) as usize];
            }
        }
        out
    }

    /// CSV rows `index1,index2,re,im`.
    pub fn to_csv(&self) -> String {
        let n = self.domain.side_len();
        let mut out = String::from("index1,index2,re,im\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{:?},{:?}", k / n, k % n, v.re, v.im);
        }
        out
    }
}

/// Which transform produced a tomogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    FourierWigner,
    Wigner,
}

/// Phase-space image of an operator, tagged with its origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Tomogram {
    side: Side,
    source: RepDescriptor,
    function: PhaseFunction,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    side: Side,
    domain: &'a Domain,
    haar_weight: f64,
    source: &'a RepDescriptor,
    columns: [&'static str; 4],
}

impl Tomogram {
    pub fn new(side: Side, source: RepDescriptor, function: PhaseFunction) -> Self {
        Self { side, source, function }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn source(&self) -> &RepDescriptor {
        &self.source
    }

    pub fn function(&self) -> &PhaseFunction {
        &self.function
    }

    pub fn into_function(self) -> PhaseFunction {
        self.function
    }

    /// Same tag, new values.
    pub fn with_function(&self, function: PhaseFunction) -> Result<Self> {
        self.function.domain.check_same(&function.domain)?;
        Ok(Self { side: self.side, source: self.source.clone(), function })
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            side: self.side,
            domain: &self.function.domain,
            haar_weight: self.function.domain.haar_weight(),
            source: &self.source,
            columns: ["index1", "index2", "re", "im"],
        })
        .expect("sidecar serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`, returning both paths.
    pub fn export(&self, dir: &Path, stem: &str) -> std::io::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        fs::write(&csv, self.function.to_csv())?;
        fs::write(&json, self.sidecar_json())?;
        Ok((csv, json))
    }
}

impl Deref for Tomogram {
    type Target = PhaseFunction;
    fn deref(&self) -> &PhaseFunction {
        &self.function
    }
}
