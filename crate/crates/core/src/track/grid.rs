//! Uniform bucket grid over line segments.
//!
//! Used for nearest-segment queries (projection) and for walking rays cell by
//! cell (lidar). Each cell lists every segment whose padded bounding box
//! touches it, so a segment may appear in several cells.

#[derive(Debug, Clone)]
pub(crate) struct SegmentGrid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl SegmentGrid {
    pub(crate) fn build(segments: &[([f64; 2], [f64; 2])], cell: f64) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for (a, b) in segments {
            for p in [a, b] {
                for k in 0..2 {
                    min[k] = min[k].min(p[k]);
                    max[k] = max[k].max(p[k]);
                }
            }
        }
        let pad = cell;
        let origin = [min[0] - pad, min[1] - pad];
        let nx = (((max[0] + pad - origin[0]) / cell).ceil() as usize).max(1);
        let ny = (((max[1] + pad - origin[1]) / cell).ceil() as usize).max(1);
        let mut grid = SegmentGrid { origin, cell, nx, ny, cells: vec![Vec::new(); nx * ny] };
        let eps = 1e-6;
        for (idx, (a, b)) in segments.iter().enumerate() {
            let (i0, j0) = grid.cell_of([a[0].min(b[0]) - eps, a[1].min(b[1]) - eps]);
            let (i1, j1) = grid.cell_of([a[0].max(b[0]) + eps, a[1].max(b[1]) + eps]);
            for j in j0.max(0)..=j1.min(ny as i64 - 1) {
                for i in i0.max(0)..=i1.min(nx as i64 - 1) {
                    grid.cells[j as usize * nx + i as usize].push(idx as u32);
                }
            }
        }
        grid
    }

    pub(crate) fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Unclamped cell coordinates of a point.
    pub(crate) fn cell_of(&self, p: [f64; 2]) -> (i64, i64) {
        (((p[0] - self.origin[0]) / self.cell).floor() as i64, ((p[1] - self.origin[1]) / self.cell).floor() as i64)
    }

    pub(crate) fn contains_cell(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny
    }

    pub(crate) fn cell(&self, i: i64, j: i64) -> &[u32] {
        if self.contains_cell(i, j) {
            &self.cells[j as usize * self.nx + i as usize]
        } else {
            &[]
        }
    }

    /// Largest Chebyshev ring index that can still touch the grid from `(ci, cj)`.
    pub(crate) fn max_ring(&self, ci: i64, cj: i64) -> i64 {
        let dx = ci.abs().max((ci - self.nx as i64 + 1).abs());
        let dy = cj.abs().max((cj - self.ny as i64 + 1).abs());
        dx.max(dy)
    }

    /// Visits every in-grid cell at Chebyshev distance exactly `k` from `(ci, cj)`.
    pub(crate) fn for_ring(&self, ci: i64, cj: i64, k: i64, mut f: impl FnMut(&[u32])) {
        if k == 0 {
            f(self.cell(ci, cj));
            return;
        }
        for i in (ci - k)..=(ci + k) {
            f(self.cell(i, cj - k));
            f(self.cell(i, cj + k));
        }
        for j in (cj - k + 1)..=(cj + k - 1) {
            f(self.cell(ci - k, j));
            f(self.cell(ci + k, j));
        }
    }

    /// Walks the cells crossed by the ray `origin + t * dir` for `t` in
    /// `[0, t_max]` (Amanatides-Woo traversal). The callback receives the cell
    /// contents and the ray parameter at which the ray leaves that cell, and
    /// returns `false` to stop early.
    pub(crate) fn walk_ray(&self, origin: [f64; 2], dir: [f64; 2], t_max: f64, mut f: impl FnMut(&[u32], f64) -> bool) {
        let (mut i, mut j) = self.cell_of(origin);
        let step_i: i64 = if dir[0] > 0.0 { 1 } else { -1 };
        let step_j: i64 = if dir[1] > 0.0 { 1 } else { -1 };
        let boundary = |c: i64, step: i64, axis: usize| {
            let edge = if step > 0 { c + 1 } else { c };
            self.origin[axis] + edge as f64 * self.cell
        };
        let mut t_next_x = if dir[0] != 0.0 { (boundary(i, step_i, 0) - origin[0]) / dir[0] } else { f64::INFINITY };
        let mut t_next_y = if dir[1] != 0.0 { (boundary(j, step_j, 1) - origin[1]) / dir[1] } else { f64::INFINITY };
        let dt_x = if dir[0] != 0.0 { self.cell / dir[0].abs() } else { f64::INFINITY };
        let dt_y = if dir[1] != 0.0 { self.cell / dir[1].abs() } else { f64::INFINITY };
        loop {
            let exit = t_next_x.min(t_next_y);
            if !f(self.cell(i, j), exit) || exit > t_max {
                return;
            }
            if t_next_x < t_next_y {
                i += step_i;
                t_next_x += dt_x;
            } else {
                j += step_j;
                t_next_y += dt_y;
            }
            // Once outside the grid and heading away, nothing more can be hit.
            if (i < 0 && step_i < 0)
                || (j < 0 && step_j < 0)
                || (i >= self.nx as i64 && step_i > 0)
                || (j >= self.ny as i64 && step_j > 0)
            {
                return;
            }
        }
    }
}
