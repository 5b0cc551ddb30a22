//! Network area, small-cell grid and distance helpers.
//!
//! The area is the square `[0, L]²` with its origin at a corner. Cells are
//! indexed row-major: `index = row * cells_per_side + col`, where `row` comes
//! from the y coordinate. A point on a shared cell edge belongs to the cell
//! with the larger coordinate, so [`CellGrid::cell_of`] is total on the area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_to(&self, other: &Point2D) -> f64 {
        ground_distance(*self, *other)
    }
}

/// Ground (2D) distance between two points.
pub fn ground_distance(a: Point2D, b: Point2D) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Slant distance from a ground distance `r` and an altitude `h`.
pub fn euclidean_3d_distance(r: f64, h: f64) -> f64 {
    r.hypot(h)
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2D,
    pub max: Point2D,
}

impl Rect {
    pub fn new(min: Point2D, max: Point2D) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point2D) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    /// Containment with `slack` metres of tolerance outside the boundary.
    pub fn contains_with_margin(&self, p: Point2D, slack: f64) -> bool {
        p.x >= self.min.x - slack
            && p.x <= self.max.x + slack
            && p.y >= self.min.y - slack
            && p.y <= self.max.y + slack
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Whether the closed disc of `radius` around `c` fits inside.
    pub fn contains_disc(&self, c: Point2D, radius: f64, slack: f64) -> bool {
        c.x - radius >= self.min.x - slack
            && c.x + radius <= self.max.x + slack
            && c.y - radius >= self.min.y - slack
            && c.y + radius <= self.max.y + slack
    }
}

/// The `L × L` area split into square small cells of edge `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    side_length: f64,
    cell_edge: f64,
    cells_per_side: usize,
    inner_cell_ids: Vec<usize>,
}

impl CellGrid {
    /// Builds a `cells_per_side × cells_per_side` grid of `cell_edge` cells.
    pub fn new(cells_per_side: usize, cell_edge: f64, inner_cell_ids: Vec<usize>) -> Result<Self> {
        if cells_per_side == 0 {
            return Err(Error::InvalidGrid("grid needs at least one cell".into()));
        }
        if !(cell_edge.is_finite() && cell_edge > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell edge must be positive, got {cell_edge}"
            )));
        }
        let cells = cells_per_side * cells_per_side;
        if inner_cell_ids.is_empty() {
            return Err(Error::InvalidGrid("inner cell set is empty".into()));
        }
        if let Some(&bad) = inner_cell_ids.iter().find(|&&c| c >= cells) {
            return Err(Error::InvalidCell { index: bad, cells });
        }
        let mut inner_cell_ids = inner_cell_ids;
        inner_cell_ids.sort_unstable();
        inner_cell_ids.dedup();
        Ok(Self {
            side_length: cells_per_side as f64 * cell_edge,
            cell_edge,
            cells_per_side,
            inner_cell_ids,
        })
    }

    /// Grid whose inner set is the single centre cell (or the cell just past
    /// the middle for even sides).
    pub fn with_center_inner(cells_per_side: usize, cell_edge: f64) -> Result<Self> {
        let mid = cells_per_side / 2;
        Self::new(cells_per_side, cell_edge, vec![mid * cells_per_side + mid])
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn inner_cell_ids(&self) -> &[usize] {
        &self.inner_cell_ids
    }

    pub fn is_inner(&self, cell: usize) -> bool {
        self.inner_cell_ids.binary_search(&cell).is_ok()
    }

    pub fn area(&self) -> Rect {
        Rect::new(
            Point2D::new(0.0, 0.0),
            Point2D::new(self.side_length, self.side_length),
        )
    }

    pub fn cell_of(&self, p: Point2D) -> Result<usize> {
        if !p.is_finite() || !self.area().contains(p) {
            return Err(Error::OutOfArea {
                x: p.x,
                y: p.y,
                side: self.side_length,
            });
        }
        let last = self.cells_per_side - 1;
        let col = ((p.x / self.cell_edge).floor() as usize).min(last);
        let row = ((p.y / self.cell_edge).floor() as usize).min(last);
        Ok(row * self.cells_per_side + col)
    }

    pub fn cell_rect(&self, cell: usize) -> Result<Rect> {
        self.check_cell(cell)?;
        let row = cell / self.cells_per_side;
        let col = cell % self.cells_per_side;
        let min = Point2D::new(col as f64 * self.cell_edge, row as f64 * self.cell_edge);
        let max = Point2D::new(min.x + self.cell_edge, min.y + self.cell_edge);
        Ok(Rect::new(min, max))
    }

    pub fn cell_center(&self, cell: usize) -> Result<Point2D> {
        Ok(self.cell_rect(cell)?.center())
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.cell_count() {
            return Err(Error::InvalidCell {
                index: cell,
                cells: self.cell_count(),
            });
        }
        Ok(())
    }
}
