use std::f64::consts::FRAC_PI_3;

use super::OracleError;
use crate::mesh::LensModel;

/// Regular hexagonal sample lattice over an image.
///
/// Rows are `spacing·√3/2` apart starting at `y = 0`; odd rows are shifted
/// right by half a spacing. Neighbour slots follow the mesh layout
/// `[left, right, previous row ×2, next row ×2]`; missing neighbours hold
/// the sentinel index `points.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct HexGrid {
    pub spacing: f64,
    pub points: Vec<[f64; 2]>,
    pub neighbors: Vec<[usize; 6]>,
}

impl HexGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn row_pitch(spacing: f64) -> f64 {
    spacing * FRAC_PI_3.sin()
}

fn row_layout(width: f64, height: f64, spacing: f64) -> Vec<(f64, f64, usize)> {
    let pitch = row_pitch(spacing);
    let mut rows = Vec::new();
    let mut j = 0usize;
    loop {
        let y = j as f64 * pitch;
        if y > height - 1.0 {
            break;
        }
        let shift = if j % 2 == 1 { 0.5 * spacing } else { 0.0 };
        let count = if shift > width - 1.0 { 0 } else { ((width - 1.0 - shift) / spacing).floor() as usize + 1 };
        rows.push((y, shift, count));
        j += 1;
    }
    rows
}

/// Number of lattice points [`hexagonal_grid`] would produce.
pub fn hex_point_count(lens: &LensModel, spacing: f64) -> usize {
    let [w, h] = lens.resolution;
    row_layout(f64::from(w), f64::from(h), spacing).iter().map(|r| r.2).sum()
}

pub fn hexagonal_grid(lens: &LensModel, spacing: f64) -> Result<HexGrid, OracleError> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(OracleError::InvalidSpacing(spacing));
    }
    let [w, h] = lens.resolution;
    let rows = row_layout(f64::from(w), f64::from(h), spacing);
    let mut starts = Vec::with_capacity(rows.len());
    let mut total = 0;
    for row in &rows {
        starts.push(total);
        total += row.2;
    }

    let sentinel = total;
    // Index of column `col` in row `j`, where `col` may run off either end.
    let at = |j: Option<usize>, col: i64| -> usize {
        match j {
            Some(j) if j < rows.len() && col >= 0 && (col as usize) < rows[j].2 => starts[j] + col as usize,
            _ => sentinel,
        }
    };

    let mut points = Vec::with_capacity(total);
    let mut neighbors = Vec::with_capacity(total);
    for (j, &(y, shift, count)) in rows.iter().enumerate() {
        let odd = j % 2 == 1;
        for i in 0..count {
            points.push([shift + i as f64 * spacing, y]);
            let c = i as i64;
            // Columns of the two adjacent-row points straddling this one.
            let (a, b) = if odd { (c, c + 1) } else { (c - 1, c) };
            let prev = j.checked_sub(1);
            let next = Some(j + 1);
            neighbors.push([
                at(Some(j), c - 1),
                at(Some(j), c + 1),
                at(prev, a),
                at(prev, b),
                at(next, a),
                at(next, b),
            ]);
        }
    }
    Ok(HexGrid { spacing, points, neighbors })
}

/// Finds a lattice spacing whose point count is within 2% of `target`.
pub fn calibrate_hex_spacing(lens: &LensModel, target: usize) -> Result<f64, OracleError> {
    if target == 0 {
        return Err(OracleError::Calibration { target, best: 0 });
    }
    let [w, h] = lens.resolution;
    let area = f64::from(w) * f64::from(h);
    let estimate = (area / (target as f64 * row_pitch(1.0))).sqrt();
    let within = |count: usize| (count as f64 - target as f64).abs() <= 0.02 * target as f64;

    let mut lower = estimate / 4.0;
    let mut upper = estimate * 4.0;
    let mut best = (estimate, hex_point_count(lens, estimate));
    for _ in 0..200 {
        let mid = 0.5 * (lower + upper);
        let count = hex_point_count(lens, mid);
        if count.abs_diff(target) < best.1.abs_diff(target) {
            best = (mid, count);
        }
        if within(count) {
            return Ok(mid);
        }
        if count > target {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    if within(best.1) {
        Ok(best.0)
    } else {
        Err(OracleError::Calibration { target, best: best.1 })
    }
}
