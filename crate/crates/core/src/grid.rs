//! Cell-centered finite-volume discretization of an interval or rectangle.
//!
//! Every operator here imposes homogeneous Neumann (no-flux) conditions by
//! ghost-cell reflection, so boundary fluxes vanish identically and the
//! volume-weighted sum of a divergence-form result telescopes to zero.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numfmt::{g17, parse_f64};

/// Uniform cell-centered grid on `[0, lx]` or `[0, lx] × [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    /// One-dimensional grid of `nx` cells on `[0, lx]`.
    pub fn line(nx: usize, lx: f64) -> Result<Self> {
        Self::new(1, nx, 1, lx, 1.0)
    }

    /// Two-dimensional grid of `nx × ny` cells on `[0, lx] × [0, ly]`.
    pub fn rect(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(2, nx, ny, lx, ly)
    }

    /// Generic constructor. For `dim == 1`, `ny` is forced to 1 and `ly`
    /// is kept only as a label (cell volume is `dx`).
    pub fn new(dim: usize, nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let ny = match dim {
            1 => 1,
            2 => ny,
            d => return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {d}"))),
        };
        if nx < 4 || (dim == 2 && ny < 4) {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per axis, got nx={nx} ny={ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got lx={lx} ly={ly}"
            )));
        }
        Ok(Self {
            dim,
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume: `dx` in 1D, `dx·dy` in 2D.
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.dx
        } else {
            self.dx * self.dy
        }
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            self.lx
        } else {
            self.lx * self.ly
        }
    }

    /// Smallest spacing over active axes.
    pub fn min_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }

    /// Largest spacing over active axes.
    pub fn max_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.dx
        } else {
            self.dx.max(self.dy)
        }
    }

    /// Row-major index of cell `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center x coordinate of column `i`.
    #[inline]
    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Cell-center y coordinate of row `j`.
    #[inline]
    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    /// The grid with every active axis refined by a factor of two.
    pub fn refined(&self) -> Self {
        Self::new(self.dim, self.nx * 2, self.ny * 2, self.lx, self.ly)
            .expect("refinement of a valid grid is valid")
    }
}

/// One scalar per cell, row-major (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at cell centers (`y` is the center of the single
    /// row in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.yc(j);
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Second-order Neumann Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let g = f.grid;
    let v = &f.values;
    let mut out = vec![0.0; g.len()];
    let idx2 = 1.0 / (g.dx * g.dx);
    for j in 0..g.ny {
        let row = j * g.nx;
        for i in 0..g.nx {
            let c = v[row + i];
            // reflected ghosts: missing neighbour contributes zero flux
            let left = if i > 0 { v[row + i - 1] - c } else { 0.0 };
            let right = if i + 1 < g.nx { v[row + i + 1] - c } else { 0.0 };
            out[row + i] = (left + right) * idx2;
        }
    }
    if g.dim == 2 {
        let idy2 = 1.0 / (g.dy * g.dy);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let c = v[k];
                let down = if j > 0 { v[k - g.nx] - c } else { 0.0 };
                let up = if j + 1 < g.ny { v[k + g.nx] - c } else { 0.0 };
                out[k] += (down + up) * idy2;
            }
        }
    }
    Field { grid: g, values: out }
}

/// Upwind flux-form discretization of `−∇·(u∇v)`.
///
/// The face velocity is the face-centered difference of `v`; `u` is taken
/// from the upwind cell. Boundary faces carry no flux.
pub fn haptotaxis_divergence(u: &Field, v: &Field) -> Field {
    let g = u.grid;
    debug_assert_eq!(g, v.grid);
    let (uv, vv) = (&u.values, &v.values);
    let mut out = vec![0.0; g.len()];
    let inv_dx = 1.0 / g.dx;
    for j in 0..g.ny {
        let row = j * g.nx;
        for i in 0..g.nx - 1 {
            let (l, r) = (row + i, row + i + 1);
            let flux = upwind_flux(uv[l], uv[r], (vv[r] - vv[l]) * inv_dx);
            out[l] -= flux * inv_dx;
            out[r] += flux * inv_dx;
        }
    }
    if g.dim == 2 {
        let inv_dy = 1.0 / g.dy;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                let (b, t) = (g.idx(i, j), g.idx(i, j + 1));
                let flux = upwind_flux(uv[b], uv[t], (vv[t] - vv[b]) * inv_dy);
                out[b] -= flux * inv_dy;
                out[t] += flux * inv_dy;
            }
        }
    }
    Field { grid: g, values: out }
}

#[inline]
fn upwind_flux(u_minus: f64, u_plus: f64, vel: f64) -> f64 {
    if vel >= 0.0 {
        u_minus * vel
    } else {
        u_plus * vel
    }
}

/// Largest absolute face velocity `|∂v|` over interior faces.
pub fn max_face_velocity(v: &Field) -> f64 {
    let g = v.grid;
    let vv = &v.values;
    let mut m: f64 = 0.0;
    for j in 0..g.ny {
        let row = j * g.nx;
        for i in 0..g.nx - 1 {
            m = m.max(((vv[row + i + 1] - vv[row + i]) / g.dx).abs());
        }
    }
    if g.dim == 2 {
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                m = m.max(((vv[k + g.nx] - vv[k]) / g.dy).abs());
            }
        }
    }
    m
}

/// Midpoint quadrature: sum of values times cell volume.
pub fn integrate(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

/// Pointwise `|∇v|⁴` with the gradient reconstructed at cell centers by
/// central differences against reflected ghosts, so the normal component
/// is halved at boundary cells and vanishes for Neumann-compatible data.
pub fn grad_quartic_density(v: &Field) -> Field {
    let g = v.grid;
    let vv = &v.values;
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let left = if i > 0 { vv[k - 1] } else { vv[k] };
            let right = if i + 1 < g.nx { vv[k + 1] } else { vv[k] };
            let gx = (right - left) / (2.0 * g.dx);
            let mut g2 = gx * gx;
            if g.dim == 2 {
                let down = if j > 0 { vv[k - g.nx] } else { vv[k] };
                let up = if j + 1 < g.ny { vv[k + g.nx] } else { vv[k] };
                let gy = (up - down) / (2.0 * g.dy);
                g2 += gy * gy;
            }
            out[k] = g2 * g2;
        }
    }
    Field { grid: g, values: out }
}

/// `∫|∇v|⁴` by midpoint quadrature of [`grad_quartic_density`].
pub fn grad_quartic_norm(v: &Field) -> f64 {
    integrate(&grad_quartic_density(v))
}

/// Exact reductions of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub min: f64,
    pub max: f64,
    pub sup_norm: f64,
    pub l1: f64,
    pub l2: f64,
}

pub fn field_norms(f: &Field) -> FieldNorms {
    let vol = f.grid.cell_volume();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sup: f64 = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for &x in &f.values {
        min = min.min(x);
        max = max.max(x);
        sup = sup.max(x.abs());
        l1 += x.abs();
        l2 += x * x;
    }
    FieldNorms {
        min,
        max,
        sup_norm: sup,
        l1: l1 * vol,
        l2: (l2 * vol).sqrt(),
    }
}

/// Writes a field snapshot: a `# grid ...` header line followed by one
/// value per line in row-major order at 17 significant digits.
pub fn write_snapshot<W: Write>(mut w: W, f: &Field, t: f64, name: &str) -> Result<()> {
    let g = &f.grid;
    let mut buf = String::with_capacity(24 * (g.len() + 4));
    writeln!(
        buf,
        "# grid dim={} nx={} ny={} lx={} ly={} t={} name={}",
        g.dim,
        g.nx,
        g.ny,
        g17(g.lx),
        g17(g.ly),
        g17(t),
        name
    )
    .expect("write to String");
    for &x in &f.values {
        buf.push_str(&g17(x));
        buf.push('\n');
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn save_snapshot(path: &Path, f: &Field, t: f64, name: &str) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), f, t, name)
}

/// Parsed snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub t: f64,
    pub name: String,
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot".into()))??;
    let body = header
        .strip_prefix("# grid ")
        .ok_or_else(|| Error::Parse(format!("bad snapshot header: {header}")))?;
    let mut dim = None;
    let mut nx = None;
    let mut ny = None;
    let mut lx = None;
    let mut ly = None;
    let mut t = None;
    let mut name = None;
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token: {tok}")))?;
        let bad = || Error::Parse(format!("bad header value: {tok}"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "nx" => nx = Some(v.parse::<usize>().map_err(|_| bad())?),
            "ny" => ny = Some(v.parse::<usize>().map_err(|_| bad())?),
            "lx" => lx = Some(parse_f64(v).ok_or_else(bad)?),
            "ly" => ly = Some(parse_f64(v).ok_or_else(bad)?),
            "t" => t = Some(parse_f64(v).ok_or_else(bad)?),
            "name" => name = Some(v.to_string()),
            _ => return Err(Error::Parse(format!("unknown header key: {k}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("snapshot header missing `{k}`"));
    let grid = Grid::new(
        dim.ok_or_else(|| missing("dim"))?,
        nx.ok_or_else(|| missing("nx"))?,
        ny.ok_or_else(|| missing("ny"))?,
        lx.ok_or_else(|| missing("lx"))?,
        ly.ok_or_else(|| missing("ly"))?,
    )?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_f64(&line).ok_or_else(|| Error::Parse(format!("bad value: {line}")))?);
    }
    Ok(Snapshot {
        field: Field::new(grid, values)?,
        t: t.ok_or_else(|| missing("t"))?,
        name: name.ok_or_else(|| missing("name"))?,
    })
}
