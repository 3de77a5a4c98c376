//! Cell binning of motion vectors into per-cell 8-bin orientation
//! histograms, and support-based pruning.

use std::f64::consts::{FRAC_PI_4, TAU};

use crate::error::{Error, Result};
use crate::flow::MotionVector;
use crate::frame::GrayFrame;
use crate::math::Vec2;

pub const ORIENTATION_BINS: usize = 8;

/// Partition of image space into `cells_x` x `cells_y` cells. Cell indices
/// are 1-based, matching the histogram notation used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub cells_x: usize,
    pub cells_y: usize,
    pub image_width: f64,
    pub image_height: f64,
}

impl GridSpec {
    pub fn new(cells_x: usize, cells_y: usize, image_width: f64, image_height: f64) -> Result<Self> {
        if cells_x == 0 || cells_y == 0 {
            return Err(Error::invalid("grid must have at least 1x1 cells"));
        }
        if image_width <= 0.0 || image_height <= 0.0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Ok(GridSpec {
            cells_x,
            cells_y,
            image_width,
            image_height,
        })
    }

    pub fn cell_width(&self) -> f64 {
        self.image_width / self.cells_x as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.image_height / self.cells_y as f64
    }

    /// 1-based cell index of an in-bounds position.
    pub fn cell_of(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if x < 0.0 || y < 0.0 || x >= self.image_width || y >= self.image_height {
            return Err(Error::invalid(format!(
                "position ({x}, {y}) outside {}x{} image",
                self.image_width, self.image_height
            )));
        }
        let i = ((x / self.cell_width()) as usize).min(self.cells_x - 1) + 1;
        let j = ((y / self.cell_height()) as usize).min(self.cells_y - 1) + 1;
        Ok((i, j))
    }

    /// Center of a 1-based cell.
    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            (i as f64 - 0.5) * self.cell_width(),
            (j as f64 - 0.5) * self.cell_height(),
        )
    }
}

/// Orientation bin of an angle in [0, 2π): k = floor(theta / (π/4)) + 1,
/// half-open bins, k in [1, 8].
pub fn bin_index(theta: f64) -> Result<usize> {
    if !(0.0..TAU).contains(&theta) {
        return Err(Error::invalid(format!("theta {theta} outside [0, 2π)")));
    }
    Ok(((theta / FRAC_PI_4) as usize + 1).min(ORIENTATION_BINS))
}

/// Orientation center of a 1-based bin.
pub fn bin_center(k: usize) -> f64 {
    (k as f64 - 0.5) * FRAC_PI_4
}

/// One cell's 8-bin histogram; member vectors are kept per bin so the
/// clustering stage can operate on them.
#[derive(Debug, Clone, Default)]
pub struct Cell {
    members: [Vec<MotionVector>; ORIENTATION_BINS],
}

impl Cell {
    /// Vector count of a 1-based bin.
    pub fn count(&self, k: usize) -> usize {
        self.members[k - 1].len()
    }

    pub fn counts(&self) -> [usize; ORIENTATION_BINS] {
        std::array::from_fn(|b| self.members[b].len())
    }

    /// Members of a 1-based bin.
    pub fn bin(&self, k: usize) -> &[MotionVector] {
        &self.members[k - 1]
    }

    pub fn total(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }
}

/// Grid of per-cell orientation histograms.
#[derive(Debug, Clone)]
pub struct CellHistogramField {
    grid: GridSpec,
    cells: Vec<Cell>,
}

impl CellHistogramField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Cell at 1-based indices.
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[(j - 1) * self.grid.cells_x + (i - 1)]
    }

    fn cell_mut(&mut self, i: usize, j: usize) -> &mut Cell {
        &mut self.cells[(j - 1) * self.grid.cells_x + (i - 1)]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(Cell::total).sum()
    }

    /// Iterate `(i, j, k, members)` over non-empty bins, in row-major cell
    /// order then bin order.
    pub fn iter_bins(&self) -> impl Iterator<Item = (usize, usize, usize, &[MotionVector])> {
        let cells_x = self.grid.cells_x;
        self.cells.iter().enumerate().flat_map(move |(idx, cell)| {
            let i = idx % cells_x + 1;
            let j = idx / cells_x + 1;
            (1..=ORIENTATION_BINS)
                .filter(move |&k| cell.count(k) > 0)
                .map(move |k| (i, j, k, cell.bin(k)))
        })
    }
}

/// Aggregate motion vectors into the cell/orientation histogram field.
/// Every vector lands in exactly one (cell, bin); an out-of-bounds vector is
/// an error naming the offender.
pub fn bin_vectors(vectors: &[MotionVector], grid: GridSpec) -> Result<CellHistogramField> {
    let mut field = CellHistogramField {
        grid,
        cells: vec![Cell::default(); grid.cells_x * grid.cells_y],
    };
    for v in vectors {
        let (i, j) = grid.cell_of(v.x, v.y).map_err(|_| {
            Error::invalid(format!(
                "vector at ({}, {}) t={} outside {}x{} image",
                v.x, v.y, v.t, grid.image_width, grid.image_height
            ))
        })?;
        let k = bin_index(v.theta)?;
        field.cell_mut(i, j).members[k - 1].push(*v);
    }
    Ok(field)
}

/// Empty every (cell, bin) with fewer than `min_support` members; all other
/// bins are copied unchanged.
pub fn prune(field: &CellHistogramField, min_support: usize) -> CellHistogramField {
    let mut out = field.clone();
    for cell in &mut out.cells {
        for bin in &mut cell.members {
            if bin.len() < min_support {
                bin.clear();
            }
        }
    }
    out
}

/// Debug overlay: per cell, draw an arrow for the dominant bin, brightness
/// scaled by support.
pub fn render_dominant_bins(field: &CellHistogramField) -> GrayFrame {
    let grid = field.grid();
    let mut img = GrayFrame::new(grid.image_width as usize, grid.image_height as usize);
    let max_count = field
        .iter_bins()
        .map(|(_, _, _, m)| m.len())
        .max()
        .unwrap_or(0);
    if max_count == 0 {
        return img;
    }
    let arm = 0.4 * grid.cell_width().min(grid.cell_height());
    for j in 1..=grid.cells_y {
        for i in 1..=grid.cells_x {
            let cell = field.cell(i, j);
            let (best_k, best_n) = (1..=ORIENTATION_BINS)
                .map(|k| (k, cell.count(k)))
                .max_by_key(|&(_, n)| n)
                .unwrap();
            if best_n == 0 {
                continue;
            }
            let center = grid.cell_center(i, j);
            let dir = Vec2::from_angle(bin_center(best_k));
            let value = (80.0 + 175.0 * best_n as f64 / max_count as f64) as u8;
            img.draw_arrow(center - dir * arm, center + dir * arm, value, 1.0);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mv(x: f64, y: f64, theta: f64) -> MotionVector {
        MotionVector::new(x, y, theta.cos() * 2.0, theta.sin() * 2.0, 1)
    }

    #[test]
    fn bin_index_edges() {
        assert_eq!(bin_index(0.0).unwrap(), 1);
        assert_eq!(bin_index(FRAC_PI_4).unwrap(), 2);
        // floor(7.9π/4 ÷ π/4) + 1 = 8.
        assert_eq!(bin_index(7.9 * PI / 4.0).unwrap(), 8);
        assert_eq!(bin_index(TAU - 1e-12).unwrap(), 8);
        assert!(bin_index(TAU).is_err());
        assert!(bin_index(-0.1).is_err());
    }

    #[test]
    fn cell_assignment_example() {
        let grid = GridSpec::new(40, 40, 400.0, 400.0).unwrap();
        assert_eq!(grid.cell_of(15.0, 5.0).unwrap(), (2, 1));
        assert_eq!(grid.cell_of(0.0, 0.0).unwrap(), (1, 1));
        assert_eq!(grid.cell_of(399.9, 399.9).unwrap(), (40, 40));
        assert!(grid.cell_of(400.0, 10.0).is_err());
    }

    #[test]
    fn empty_input_gives_zero_counts() {
        let grid = GridSpec::new(4, 4, 40.0, 40.0).unwrap();
        let field = bin_vectors(&[], grid).unwrap();
        assert_eq!(field.total(), 0);
        assert!(field.iter_bins().next().is_none());
    }

    #[test]
    fn opposite_bins_example() {
        let grid = GridSpec::new(4, 4, 40.0, 40.0).unwrap();
        let vectors = vec![mv(5.0, 5.0, 0.0), mv(6.0, 6.0, PI)];
        let field = bin_vectors(&vectors, grid).unwrap();
        assert_eq!(field.cell(1, 1).counts(), [1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn conservation_and_out_of_bounds() {
        let grid = GridSpec::new(8, 8, 80.0, 80.0).unwrap();
        let vectors: Vec<MotionVector> = (0..50)
            .map(|i| mv((i * 7 % 80) as f64, (i * 13 % 80) as f64, (i as f64 * 0.37) % TAU))
            .collect();
        let field = bin_vectors(&vectors, grid).unwrap();
        assert_eq!(field.total(), vectors.len());

        let mut bad = vectors.clone();
        bad.push(mv(81.0, 5.0, 0.0));
        let err = bin_vectors(&bad, grid).unwrap_err();
        assert!(err.to_string().contains("81"));
    }

    #[test]
    fn prune_cases() {
        let grid = GridSpec::new(2, 2, 20.0, 20.0).unwrap();
        let vectors = vec![mv(1.0, 1.0, 0.1), mv(2.0, 2.0, 0.1), mv(3.0, 3.0, 2.0)];
        let field = bin_vectors(&vectors, grid).unwrap();

        // min_support = 0 is the identity.
        let same = prune(&field, 0);
        assert_eq!(same.total(), field.total());

        // A 2-member bin dies under min_support = 3; input is untouched.
        let pruned = prune(&field, 3);
        assert_eq!(pruned.cell(1, 1).count(1), 0);
        assert_eq!(field.cell(1, 1).count(1), 2);

        // Every bin at or above the threshold survives unchanged.
        let kept = prune(&field, 1);
        assert_eq!(kept.total(), field.total());
    }

    #[test]
    fn rebinning_members_reproduces_field() {
        let grid = GridSpec::new(5, 3, 50.0, 33.0).unwrap();
        let vectors: Vec<MotionVector> = (0..40)
            .map(|i| mv((i * 11 % 50) as f64 + 0.5, (i * 5 % 33) as f64, (i as f64 * 0.7) % TAU))
            .collect();
        let field = bin_vectors(&vectors, grid).unwrap();
        let members: Vec<MotionVector> = field
            .iter_bins()
            .flat_map(|(_, _, _, m)| m.iter().copied())
            .collect();
        let refield = bin_vectors(&members, grid).unwrap();
        for j in 1..=3 {
            for i in 1..=5 {
                assert_eq!(refield.cell(i, j).counts(), field.cell(i, j).counts());
            }
        }
    }
}
