//! Cell-centered finite-volume assembly of `-div(sigma grad u)` on a uniform
//! square grid.
//!
//! Unknowns live at the centers of active cells. A link between two active
//! cells carries the conductance `1 / (phi / sigma_a + (1 - phi) / sigma_b)`
//! where `phi` is the fraction of the link inside the first material
//! (`phi = 1/2` gives the harmonic mean). A link from an active cell to an
//! inactive one is cut at the Dirichlet boundary: with `theta` the fraction of
//! the link inside the domain the conductance is `sigma / theta` and the
//! boundary datum is taken at the crossing point. Both choices keep the matrix
//! symmetric and diagonally dominant.

use super::CartesianGrid;
use crate::geometry::{segment_sphere_crossing, Ball, SceneConfig};
use crate::radial::ProblemKind;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// How conductivities are combined on links that cross a material interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FaceRule {
    /// Harmonic mean of the two cell-center values.
    Harmonic,
    /// Series resistance weighted by the exact crossing point on the link.
    #[default]
    LinkFraction,
}

/// How Dirichlet data enter next to the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Datum imposed at the center of the first exterior cell.
    Staircase,
    /// Datum imposed at the exact crossing of the link with the boundary.
    #[default]
    CutLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorOptions {
    pub face_rule: FaceRule,
    pub boundary_rule: BoundaryRule,
    /// Lower clamp on the cut fraction of boundary links.
    pub theta_min: f64,
    /// Minimum number of cells across the thinnest gap between cores and boundary.
    pub min_gap_cells: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            face_rule: FaceRule::default(),
            boundary_rule: BoundaryRule::default(),
            theta_min: 1e-8,
            min_gap_cells: 8.0,
        }
    }
}

/// Geometry and material description consumed by the assembly.
pub trait Medium {
    /// Whether the cell centered at `x` carries an unknown.
    fn is_unknown(&self, x: [f64; 2]) -> bool;
    fn conductivity(&self, x: [f64; 2]) -> f64;
    /// Fraction along `p -> q` where the Dirichlet boundary is crossed.
    fn boundary_fraction(&self, p: [f64; 2], q: [f64; 2]) -> Option<f64>;
    /// Fraction along `p -> q` where the conductivity jumps.
    fn interface_fraction(&self, p: [f64; 2], q: [f64; 2]) -> Option<f64>;
}

/// A scene seen by the boundary-heating (`Ibvp`) or whole-space (`Cauchy`) problem.
pub struct SceneMedium<'a> {
    pub scene: &'a SceneConfig,
    pub kind: ProblemKind,
}

impl Medium for SceneMedium<'_> {
    fn is_unknown(&self, x: [f64; 2]) -> bool {
        match self.kind {
            ProblemKind::Ibvp => self.scene.signed_distance(&x) > 0.0,
            ProblemKind::Cauchy => true,
        }
    }

    fn conductivity(&self, x: [f64; 2]) -> f64 {
        self.scene.sigma_at(&x)
    }

    fn boundary_fraction(&self, p: [f64; 2], q: [f64; 2]) -> Option<f64> {
        match self.kind {
            ProblemKind::Ibvp => self.scene.boundary_crossing(&p, &q),
            ProblemKind::Cauchy => None,
        }
    }

    fn interface_fraction(&self, p: [f64; 2], q: [f64; 2]) -> Option<f64> {
        let core = self.scene.core_crossing(&p, &q);
        match self.kind {
            ProblemKind::Ibvp => core,
            ProblemKind::Cauchy => [core, self.scene.boundary_crossing(&p, &q)].into_iter().flatten().reduce(f64::min),
        }
    }
}

/// A homogeneous disk with Dirichlet data on its circle.
pub struct DiskMedium<'a> {
    pub disk: &'a Ball,
    pub sigma: f64,
}

impl Medium for DiskMedium<'_> {
    fn is_unknown(&self, x: [f64; 2]) -> bool {
        self.disk.contains(&x)
    }

    fn conductivity(&self, _x: [f64; 2]) -> f64 {
        self.sigma
    }

    fn boundary_fraction(&self, p: [f64; 2], q: [f64; 2]) -> Option<f64> {
        segment_sphere_crossing(&p, &q, &self.disk.center, self.disk.radius)
    }

    fn interface_fraction(&self, _p: [f64; 2], _q: [f64; 2]) -> Option<f64> {
        None
    }
}

/// Link from an unknown to a Dirichlet location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLink {
    pub cell: usize,
    pub conductance: f64,
    /// Where the Dirichlet datum is evaluated.
    pub point: [f64; 2],
}

/// Symmetric positive definite five-point operator with Dirichlet links.
///
/// Row `i` of the matrix reads
/// `diag[i] u_i - sum over active neighbours of link * u_j`;
/// boundary links contribute only to `diag` and to the right-hand side.
#[derive(Debug, Clone)]
pub struct FluxOperator {
    pub grid: CartesianGrid,
    pub active: Vec<bool>,
    /// Conductance of the link between `(i, j)` and `(i + 1, j)`.
    pub east: Vec<f64>,
    /// Conductance of the link between `(i, j)` and `(i, j + 1)`.
    pub north: Vec<f64>,
    pub diag: Vec<f64>,
    pub boundary_links: Vec<BoundaryLink>,
    /// Conductivity sampled at cell centers.
    pub sigma: Vec<f64>,
}

impl FluxOperator {
    /// `y = K x` on active cells; inactive entries of `y` are zero.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_five_point(self.grid.nx, self.grid.ny, &self.active, &self.diag, &self.east, &self.north, x, y);
    }

    /// Right-hand side contribution of Dirichlet data `g`.
    pub fn boundary_rhs(&self, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.grid.len()];
        for link in &self.boundary_links {
            b[link.cell] += link.conductance * g(link.point);
        }
        b
    }

    /// Sum of all matrix entries of row `cell` counting boundary links as off-row.
    pub fn interior_row_sum(&self, cell: usize) -> f64 {
        let (i, j) = self.grid.coords(cell);
        let nx = self.grid.nx;
        let mut s = self.diag[cell] - self.east[cell] - self.north[cell];
        if i > 0 {
            s -= self.east[cell - 1];
        }
        if j > 0 {
            s -= self.north[cell - nx];
        }
        s - self
            .boundary_links
            .iter()
            .filter(|l| l.cell == cell)
            .map(|l| l.conductance)
            .sum::<f64>()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_five_point(
    nx: usize,
    ny: usize,
    active: &[bool],
    diag: &[f64],
    east: &[f64],
    north: &[f64],
    x: &[f64],
    y: &mut [f64],
) {
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let c = row + i;
            if !active[c] {
                y[c] = 0.0;
                continue;
            }
            let mut v = diag[c] * x[c];
            if i + 1 < nx {
                v -= east[c] * x[c + 1];
            }
            if i > 0 {
                v -= east[c - 1] * x[c - 1];
            }
            if j + 1 < ny {
                v -= north[c] * x[c + nx];
            }
            if j > 0 {
                v -= north[c - nx] * x[c - nx];
            }
            y[c] = v;
        }
    }
}

/// Assembles the operator of a scene for the given problem.
///
/// For the whole-space problem the outermost ring of cells is pinned.
pub fn build_operator(scene: &SceneConfig, grid: &CartesianGrid, kind: ProblemKind, options: OperatorOptions) -> Result<FluxOperator> {
    scene.validate()?;
    if scene.dimension != 2 {
        return Err(Error::InvalidDimension(scene.dimension));
    }
    check_gap_resolution(scene, grid.h, options.min_gap_cells)?;
    let medium = SceneMedium { scene, kind };
    assemble(&medium, grid, options, kind == ProblemKind::Cauchy)
}

fn check_gap_resolution(scene: &SceneConfig, h: f64, min_cells: f64) -> Result<()> {
    let radii = &scene.outer.radii;
    let mut gap = f64::INFINITY;
    for (i, c) in scene.cores.iter().enumerate() {
        let d = crate::geometry::distance(&c.center, &scene.outer.center);
        gap = gap.min(radii[radii.len() - 1] - d - c.radius);
        if let Some(inner) = scene.outer.inner_radius() {
            gap = gap.min(d - c.radius - inner);
        }
        for o in &scene.cores[i + 1..] {
            gap = gap.min(crate::geometry::distance(&c.center, &o.center) - c.radius - o.radius);
        }
    }
    if gap.is_finite() && gap < min_cells * h * (1.0 - 1e-9) {
        return Err(Error::UnderResolved(format!(
            "thinnest gap {gap} spans {:.2} cells, need {min_cells}",
            gap / h
        )));
    }
    Ok(())
}

/// Generic assembly over a [`Medium`].
pub fn assemble(medium: &dyn Medium, grid: &CartesianGrid, options: OperatorOptions, pin_ring: bool) -> Result<FluxOperator> {
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.len();
    let mut active = vec![false; n];
    let mut sigma = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.index(i, j);
            let x = grid.center(i, j);
            let on_ring = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
            active[c] = medium.is_unknown(x) && !(pin_ring && on_ring);
            if active[c] && on_ring {
                return Err(Error::InvalidArgument("domain touches the edge of the grid".into()));
            }
            sigma[c] = medium.conductivity(x);
        }
    }
    let mut east = vec![0.0; n];
    let mut north = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut boundary_links = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.index(i, j);
            let p = grid.center(i, j);
            let neighbours = [(i + 1 < nx, c + 1, 0usize), (j + 1 < ny, c + nx, 1usize)];
            for (exists, d, axis) in neighbours {
                if !exists {
                    continue;
                }
                let q = if axis == 0 { grid.center(i + 1, j) } else { grid.center(i, j + 1) };
                match (active[c], active[d]) {
                    (true, true) => {
                        let g = link_conductance(medium, options.face_rule, p, q, sigma[c], sigma[d]);
                        if axis == 0 {
                            east[c] = g;
                        } else {
                            north[c] = g;
                        }
                        diag[c] += g;
                        diag[d] += g;
                    }
                    (true, false) => {
                        let link = boundary_link(medium, options, c, p, q, sigma[c]);
                        diag[c] += link.conductance;
                        boundary_links.push(link);
                    }
                    (false, true) => {
                        let link = boundary_link(medium, options, d, q, p, sigma[d]);
                        diag[d] += link.conductance;
                        boundary_links.push(link);
                    }
                    (false, false) => {}
                }
            }
        }
    }
    boundary_links.sort_by_key(|l| l.cell);
    Ok(FluxOperator { grid: grid.clone(), active, east, north, diag, boundary_links, sigma })
}

fn link_conductance(medium: &dyn Medium, rule: FaceRule, p: [f64; 2], q: [f64; 2], sp: f64, sq: f64) -> f64 {
    if sp == sq {
        return sp;
    }
    let harmonic = 2.0 * sp * sq / (sp + sq);
    match rule {
        FaceRule::Harmonic => harmonic,
        FaceRule::LinkFraction => match medium.interface_fraction(p, q) {
            Some(phi) => 1.0 / (phi / sp + (1.0 - phi) / sq),
            None => harmonic,
        },
    }
}

fn boundary_link(medium: &dyn Medium, options: OperatorOptions, cell: usize, p: [f64; 2], q: [f64; 2], sigma: f64) -> BoundaryLink {
    let theta = match options.boundary_rule {
        BoundaryRule::Staircase => 1.0,
        BoundaryRule::CutLink => medium.boundary_fraction(p, q).unwrap_or(1.0).clamp(options.theta_min, 1.0),
    };
    let point = [p[0] + theta * (q[0] - p[0]), p[1] + theta * (q[1] - p[1])];
    BoundaryLink { cell, conductance: sigma / theta, point }
}
