//! Rectangular evaluation grids on the Weyl half plane.

use crate::error::{Error, Result};
use crate::spectral::WeylPoint;
use serde::Serialize;

/// An `nrho × nv` rectangular grid, `ρ` varying along the first index.
/// Grids live strictly inside the half plane (`ρ_min > 0`).
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Grid {
    pub rho_min: f64,
    pub v_min: f64,
    pub drho: f64,
    pub dv: f64,
    pub nrho: usize,
    pub nv: usize,
}

impl Grid {
    pub fn new(
        rho_min: f64,
        v_min: f64,
        drho: f64,
        dv: f64,
        nrho: usize,
        nv: usize,
    ) -> Result<Self> {
        if nrho == 0 || nv == 0 {
            return Err(Error::Config(
                "grid must have at least one point per axis".into(),
            ));
        }
        if (nrho > 1 && !(drho > 0.0)) || (nv > 1 && !(dv > 0.0)) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        if !(rho_min > 0.0) {
            return Err(Error::RhoAxis);
        }
        Ok(Grid {
            rho_min,
            v_min,
            drho,
            dv,
            nrho,
            nv,
        })
    }

    /// Inclusive ranges: `nrho` points from `rho.0` to `rho.1`, same for v.
    pub fn from_ranges(rho: (f64, f64, usize), v: (f64, f64, usize)) -> Result<Self> {
        let step = |lo: f64, hi: f64, n: usize| {
            if n > 1 {
                (hi - lo) / (n - 1) as f64
            } else {
                0.0
            }
        };
        Grid::new(
            rho.0,
            v.0,
            step(rho.0, rho.1, rho.2),
            step(v.0, v.1, v.2),
            rho.2,
            v.2,
        )
    }

    /// Parse the CLI grid syntax `rho0:rho1:n,v0:v1:m`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid must be rho0:rho1:n,v0:v1:m; got {text:?}"));
        let (rho_part, v_part) = text.split_once(',').ok_or_else(bad)?;
        let parse_axis = |part: &str| -> Result<(f64, f64, usize)> {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            Ok((
                fields[0].parse().map_err(|_| bad())?,
                fields[1].parse().map_err(|_| bad())?,
                fields[2].parse().map_err(|_| bad())?,
            ))
        };
        Grid::from_ranges(parse_axis(rho_part)?, parse_axis(v_part)?)
    }

    pub fn len(&self) -> usize {
        self.nrho * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho_min + self.drho * i as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_min + self.dv * j as f64
    }

    pub fn rho_max(&self) -> f64 {
        self.rho(self.nrho - 1)
    }

    pub fn v_max(&self) -> f64 {
        self.v(self.nv - 1)
    }

    /// Flat storage index of grid point `(i, j)`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nrho && j < self.nv);
        i * self.nv + j
    }

    pub fn point(&self, i: usize, j: usize) -> WeylPoint {
        WeylPoint {
            rho: self.rho(i),
            v: self.v(j),
        }
    }

    /// All points in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, WeylPoint)> + '_ {
        (0..self.nrho).flat_map(move |i| (0..self.nv).map(move |j| (i, j, self.point(i, j))))
    }
}
