//! Surveillance grid, UAV placement and the inter-UAV link model.

use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per side; the grid has `side * side` cells indexed row-major.
    pub side: usize,
    /// Cell edge length in meters.
    pub cell_size: f64,
    /// Hot cells that must be visited every frame.
    pub hot_cells: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            side: 5,
            cell_size: 20.0,
            hot_cells: vec![6, 12, 18],
        }
    }
}

impl GridConfig {
    pub fn new(side: usize, cell_size: f64, hot_cells: Vec<usize>) -> Result<Self> {
        let grid = GridConfig {
            side,
            cell_size,
            hot_cells,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn num_cells(&self) -> usize {
        self.side * self.side
    }

    /// Side length of the covered area in meters.
    pub fn extent(&self) -> f64 {
        self.side as f64 * self.cell_size
    }

    pub fn is_hot(&self, cell: usize) -> bool {
        self.hot_cells.contains(&cell)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::config("grid side must be >= 1"));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::config("cell size must be positive"));
        }
        let c = self.num_cells();
        for (idx, &h) in self.hot_cells.iter().enumerate() {
            if h >= c {
                return Err(Error::config(format!("hot cell {h} outside grid of {c} cells")));
            }
            if self.hot_cells[..idx].contains(&h) {
                return Err(Error::config(format!("hot cell {h} listed twice")));
            }
        }
        Ok(())
    }

    /// Checks the swarm size against the grid: `|hot| <= N <= C`.
    pub fn validate_swarm_size(&self, uavs: usize) -> Result<()> {
        if uavs == 0 {
            return Err(Error::config("swarm must contain at least one UAV"));
        }
        if uavs > self.num_cells() {
            return Err(Error::ImpossiblePlacement {
                uavs,
                cells: self.num_cells(),
            });
        }
        if self.hot_cells.len() > uavs {
            return Err(Error::infeasible(
                Constraint::HotCellCoverage,
                format!("{} hot cells need at least as many UAVs (got {uavs})", self.hot_cells.len()),
            ));
        }
        Ok(())
    }

    /// Center of `cell` in meters, row-major: `(x, y) = (col, row)` centers.
    pub fn cell_center(&self, cell: usize) -> Result<(f64, f64)> {
        if cell >= self.num_cells() {
            return Err(Error::contract(format!(
                "cell {cell} out of range for {} cells",
                self.num_cells()
            )));
        }
        let row = cell / self.side;
        let col = cell % self.side;
        Ok((
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        ))
    }

    /// Euclidean distance between two cell centers.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        let (xa, ya) = self.cell_center(a)?;
        let (xb, yb) = self.cell_center(b)?;
        Ok((xa - xb).hypot(ya - yb))
    }

    /// Whether `b` is one of the eight neighbours of `a` (or `a` itself).
    pub fn is_adjacent_or_same(&self, a: usize, b: usize) -> bool {
        let (ra, ca) = ((a / self.side) as isize, (a % self.side) as isize);
        let (rb, cb) = ((b / self.side) as isize, (b % self.side) as isize);
        (ra - rb).abs() <= 1 && (ca - cb).abs() <= 1
    }
}

/// Cell of every UAV at one time step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub cells: Vec<usize>,
}

impl Placement {
    pub fn new(cells: Vec<usize>) -> Self {
        Placement { cells }
    }

    pub fn num_uavs(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, uav: usize) -> usize {
        self.cells[uav]
    }

    /// UAV occupying `cell`, if any.
    pub fn occupant(&self, cell: usize) -> Option<usize> {
        self.cells.iter().position(|&c| c == cell)
    }

    /// One valid cell per UAV and at most one UAV per cell.
    pub fn validate(&self, grid: &GridConfig) -> Result<()> {
        let c = grid.num_cells();
        let mut seen = vec![false; c];
        for (uav, &cell) in self.cells.iter().enumerate() {
            if cell >= c {
                return Err(Error::infeasible(
                    Constraint::OneCellPerUav,
                    format!("UAV {uav} at cell {cell} outside grid of {c} cells"),
                ));
            }
            if seen[cell] {
                return Err(Error::infeasible(
                    Constraint::OneUavPerCell,
                    format!("cell {cell} holds more than one UAV"),
                ));
            }
            seen[cell] = true;
        }
        Ok(())
    }

    /// Every hot cell is occupied.
    pub fn validate_hot_cells(&self, grid: &GridConfig) -> Result<()> {
        for &h in &grid.hot_cells {
            if self.occupant(h).is_none() {
                return Err(Error::infeasible(
                    Constraint::HotCellCoverage,
                    format!("hot cell {h} is unoccupied"),
                ));
            }
        }
        Ok(())
    }

    /// One-hot occupancy over the grid.
    pub fn occupancy(&self, grid: &GridConfig) -> Vec<bool> {
        let mut occ = vec![false; grid.num_cells()];
        for &c in &self.cells {
            if c < occ.len() {
                occ[c] = true;
            }
        }
        occ
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Reference gain at 1 m.
    pub h0: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Thermal noise power in watts.
    pub noise_power: f64,
    /// Bandwidth in hertz.
    pub bandwidth: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            h0: 1e-3,
            tx_power: 0.1,
            noise_power: 7.9e-9,
            bandwidth: 1_000.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h0", self.h0),
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("radio parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Gain `h0 / d²` at distance `d` meters.
    pub fn gain_at(&self, distance: f64) -> f64 {
        self.h0 / (distance * distance)
    }

    /// Shannon rate in bit/s for a link with gain `gain`.
    pub fn rate_for_gain(&self, gain: f64) -> f64 {
        self.bandwidth * (1.0 + gain * self.tx_power / self.noise_power).log2()
    }

    /// Rate in bit/s between two distinct cells.
    pub fn rate_between_cells(&self, grid: &GridConfig, a: usize, b: usize) -> Result<f64> {
        let d = grid.distance(a, b)?;
        if d <= 0.0 {
            return Err(Error::infeasible(
                Constraint::OneUavPerCell,
                format!("link endpoints share cell {a}"),
            ));
        }
        Ok(self.rate_for_gain(self.gain_at(d)))
    }
}

/// Channel gain between UAVs `i` and `k` under `placement`.
pub fn channel_gain(placement: &Placement, i: usize, k: usize, radio: &RadioParams, grid: &GridConfig) -> Result<f64> {
    if i == k {
        return Err(Error::contract(format!("channel gain requested from UAV {i} to itself")));
    }
    let n = placement.num_uavs();
    if i >= n || k >= n {
        return Err(Error::contract(format!("UAV index out of range ({i}, {k}) for {n} UAVs")));
    }
    let (qi, qk) = (placement.cell_of(i), placement.cell_of(k));
    if qi == qk {
        return Err(Error::infeasible(
            Constraint::OneUavPerCell,
            format!("UAVs {i} and {k} are co-located in cell {qi}"),
        ));
    }
    Ok(radio.gain_at(grid.distance(qi, qk)?))
}

/// Achievable rate in bit/s from UAV `i` to UAV `k`.
pub fn data_rate(placement: &Placement, i: usize, k: usize, radio: &RadioParams, grid: &GridConfig) -> Result<f64> {
    let gain = channel_gain(placement, i, k, radio, grid)?;
    Ok(radio.rate_for_gain(gain))
}
