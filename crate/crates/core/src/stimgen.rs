//! Parametric pop-out search arrays with pixel-exact target masks.
//!
//! Items are rasterized with hard edges: a pixel belongs to an item when its
//! center falls inside the item's shape. The target mask is exactly the set
//! of pixels painted by the target item (or, for density singletons, by the
//! items of the anomalous cluster).

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::DenseMap;

/// Bar and arc stroke thickness relative to item length.
pub const STROKE_ASPECT: f64 = 0.3;

pub const DEFAULT_CANVAS: (usize, usize) = (224, 224);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemShape {
    Bar,
    Circle,
    /// A stroke bent into a circular arc; `curvature` 0 is straight, 1 a half circle.
    CornerArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub color: [u8; 3],
    /// Degrees counter-clockwise from horizontal.
    pub orientation: f64,
    /// Item length as a fraction of the cell size.
    pub scale: f64,
    pub curvature: f64,
}

/// A target defined by local item spacing rather than appearance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityTarget {
    /// Cluster spacing relative to the regular grid pitch; below 1 is tighter.
    pub spacing: f64,
    /// Side length (in cells) of the square cluster; odd.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    /// `(rows, cols)`.
    pub grid: (usize, usize),
    /// `(height, width)` in pixels.
    pub canvas: (usize, usize),
    pub item_shape: ItemShape,
    pub distractor_params: ItemParams,
    pub target_params: ItemParams,
    /// `(row, col)`.
    pub target_cell: (usize, usize),
    /// Maximum displacement per axis as a fraction of the cell size.
    pub jitter: f64,
    pub seed: u64,
    pub background: [u8; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub image: RgbImage,
    pub target_mask: DenseMap,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cell_h: f64,
    cell_w: f64,
}

impl Geometry {
    fn new(spec: &StimulusSpec) -> Self {
        Self {
            cell_h: spec.canvas.0 as f64 / spec.grid.0 as f64,
            cell_w: spec.canvas.1 as f64 / spec.grid.1 as f64,
        }
    }

    fn cell_min(&self) -> f64 {
        self.cell_h.min(self.cell_w)
    }

    /// `(y, x)` of a cell center.
    fn center(&self, row: usize, col: usize) -> (f64, f64) {
        ((row as f64 + 0.5) * self.cell_h, (col as f64 + 0.5) * self.cell_w)
    }
}

/// Radius of the smallest circle around the item center containing the item.
fn extent(shape: ItemShape, p: &ItemParams, cell: f64) -> f64 {
    let len = p.scale * cell;
    let stroke = len * STROKE_ASPECT;
    match shape {
        ItemShape::Bar => (len / 2.0).hypot(stroke / 2.0),
        ItemShape::Circle => len / 2.0,
        ItemShape::CornerArc => len / 2.0 + stroke / 2.0,
    }
}

/// Whether offset `(dy, dx)` from the item center lies inside the item.
fn contains(shape: ItemShape, p: &ItemParams, cell: f64, dy: f64, dx: f64) -> bool {
    let len = p.scale * cell;
    let stroke = len * STROKE_ASPECT;
    let theta = p.orientation.to_radians();
    let (s, c) = theta.sin_cos();
    // image rows grow downwards, so the axis direction is (cos, -sin) in (x, y)
    let u = dx * c - dy * s;
    let v = dx * s + dy * c;
    match shape {
        ItemShape::Circle => u * u + v * v <= (len / 2.0) * (len / 2.0),
        ItemShape::Bar => u.abs() <= len / 2.0 && v.abs() <= stroke / 2.0,
        ItemShape::CornerArc if p.curvature <= 1e-9 => u.abs() <= len / 2.0 && v.abs() <= stroke / 2.0,
        ItemShape::CornerArc => {
            let span = p.curvature * std::f64::consts::PI;
            let radius = len / span;
            // arc midpoint at the item center, bending towards +v
            let (cu, cv) = (0.0, radius);
            let d = (u - cu).hypot(v - cv);
            let phi = (u - cu).atan2(cv - v);
            (d - radius).abs() <= stroke / 2.0 && phi.abs() <= span / 2.0
        }
    }
}

/// Paints one item; returns the painted pixel indices (row-major).
fn paint(img: &mut RgbImage, shape: ItemShape, p: &ItemParams, cell: f64, cy: f64, cx: f64) -> Vec<usize> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = extent(shape, p, cell).ceil() as i64 + 1;
    let mut painted = Vec::new();
    // snap the item center onto a pixel center so symmetric items cover odd spans
    let (y0, x0) = (cy.floor() as i64, cx.floor() as i64);
    let (cy, cx) = (y0 as f64 + 0.5, x0 as f64 + 0.5);
    for y in (y0 - r).max(0)..=(y0 + r).min(h - 1) {
        for x in (x0 - r).max(0)..=(x0 + r).min(w - 1) {
            let dy = y as f64 + 0.5 - cy;
            let dx = x as f64 + 0.5 - cx;
            if contains(shape, p, cell, dy, dx) {
                img.put_pixel(x as u32, y as u32, Rgb(p.color));
                painted.push((y * w + x) as usize);
            }
        }
    }
    painted
}

fn validate_params(p: &ItemParams, background: [u8; 3], role: &str) -> Result<()> {
    if !(p.scale > 0.0 && p.scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("{role} scale must be positive")));
    }
    if !(0.0..=1.0).contains(&p.curvature) {
        return Err(Error::InvalidConfig(format!("{role} curvature must lie in [0, 1]")));
    }
    if !p.orientation.is_finite() {
        return Err(Error::InvalidConfig(format!("{role} orientation must be finite")));
    }
    if p.color == background {
        return Err(Error::InvalidConfig(format!("{role} color equals the background")));
    }
    Ok(())
}

impl StimulusSpec {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.grid;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("grid must have at least one cell".into()));
        }
        if self.canvas.0 < rows || self.canvas.1 < cols {
            return Err(Error::InvalidConfig("canvas is smaller than the grid".into()));
        }
        if self.target_cell.0 >= rows || self.target_cell.1 >= cols {
            return Err(Error::InvalidConfig(format!(
                "target cell {:?} outside the {rows}x{cols} grid",
                self.target_cell
            )));
        }
        if !(0.0..=0.4).contains(&self.jitter) {
            return Err(Error::InvalidConfig("jitter must lie in [0, 0.4]".into()));
        }
        validate_params(&self.distractor_params, self.background, "distractor")?;
        validate_params(&self.target_params, self.background, "target")?;
        match self.density {
            Some(d) if d.spacing == 1.0 => return Err(Error::NoSingleton),
            Some(d) if !(d.spacing > 0.0 && d.spacing.is_finite()) => {
                return Err(Error::InvalidConfig("density spacing must be positive".into()));
            }
            Some(d) if d.cluster == 0 || d.cluster % 2 == 0 => {
                return Err(Error::InvalidConfig("density cluster size must be odd".into()));
            }
            None if self.target_params == self.distractor_params => return Err(Error::NoSingleton),
            _ => {}
        }
        let cell = Geometry::new(self).cell_min();
        for (role, p) in [("distractor", &self.distractor_params), ("target", &self.target_params)] {
            let need = extent(self.item_shape, p, cell) + self.jitter * cell;
            if need > cell / 2.0 {
                return Err(Error::ItemTooLarge(format!(
                    "{role} reaches {need:.2}px from its cell center but the half cell is {:.2}px",
                    cell / 2.0
                )));
            }
        }
        Ok(())
    }
}

fn blank(spec: &StimulusSpec) -> RgbImage {
    RgbImage::from_pixel(spec.canvas.1 as u32, spec.canvas.0 as u32, Rgb(spec.background))
}

fn mask_from(spec: &StimulusSpec, painted: &[usize]) -> Result<DenseMap> {
    let (h, w) = spec.canvas;
    let mut cells = vec![0.0; h * w];
    for &i in painted {
        cells[i] = 1.0;
    }
    DenseMap::from_vec(h, w, cells)
}

/// Renders a search array. Specs with a density target are delegated to
/// [`density_singleton`].
pub fn render(spec: &StimulusSpec) -> Result<Stimulus> {
    spec.validate()?;
    if spec.density.is_some() {
        return density_singleton(spec);
    }
    let geo = Geometry::new(spec);
    let cell = geo.cell_min();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut img = blank(spec);
    let mut target_pixels = Vec::new();
    for row in 0..spec.grid.0 {
        for col in 0..spec.grid.1 {
            let (jy, jx) = draw_jitter(&mut rng, spec.jitter * cell);
            let (cy, cx) = geo.center(row, col);
            if (row, col) == spec.target_cell {
                target_pixels = paint(&mut img, spec.item_shape, &spec.target_params, cell, cy + jy, cx + jx);
            } else {
                paint(&mut img, spec.item_shape, &spec.distractor_params, cell, cy + jy, cx + jx);
            }
        }
    }
    if target_pixels.is_empty() {
        return Err(Error::InvalidConfig("target item covers no pixel centers".into()));
    }
    Ok(Stimulus {
        target_mask: mask_from(spec, &target_pixels)?,
        image: img,
    })
}

fn draw_jitter(rng: &mut ChaCha8Rng, amplitude: f64) -> (f64, f64) {
    let y = rng.random_range(-1.0..=1.0) * amplitude;
    let x = rng.random_range(-1.0..=1.0) * amplitude;
    (y, x)
}

/// Renders an array whose target is a cluster of `cluster x cluster` items
/// centered on the target cell, spaced at `spacing` times the grid pitch.
/// Distractor cells overlapped by the cluster are left empty.
pub fn density_singleton(spec: &StimulusSpec) -> Result<Stimulus> {
    spec.validate()?;
    let density = spec
        .density
        .ok_or_else(|| Error::InvalidConfig("spec has no density target".into()))?;
    let geo = Geometry::new(spec);
    let cell = geo.cell_min();
    let half = (density.cluster / 2) as i64;
    let (tr, tc) = (spec.target_cell.0 as i64, spec.target_cell.1 as i64);
    if tr - half < 0 || tc - half < 0 || tr + half >= spec.grid.0 as i64 || tc + half >= spec.grid.1 as i64 {
        return Err(Error::ClusterOverflow(format!(
            "a {0}x{0} cluster around {1:?} leaves the grid",
            density.cluster, spec.target_cell
        )));
    }
    let item_extent = extent(spec.item_shape, &spec.target_params, cell);
    let jitter = spec.jitter * cell * density.spacing.min(1.0);
    let pitch = density.spacing * cell;
    if pitch < 2.0 * (item_extent + jitter) {
        return Err(Error::ClusterOverflow(format!(
            "cluster pitch {pitch:.2}px is too tight for items of radius {:.2}px",
            item_extent + jitter
        )));
    }
    let (cy, cx) = geo.center(spec.target_cell.0, spec.target_cell.1);
    let reach_y = half as f64 * density.spacing * geo.cell_h + item_extent + jitter;
    let reach_x = half as f64 * density.spacing * geo.cell_w + item_extent + jitter;
    if cy - reach_y < 0.0 || cx - reach_x < 0.0 || cy + reach_y > spec.canvas.0 as f64 || cx + reach_x > spec.canvas.1 as f64 {
        return Err(Error::ClusterOverflow("cluster leaves the canvas".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut img = blank(spec);
    let block = |r: usize, c: usize| (r as i64 - tr).abs() <= half && (c as i64 - tc).abs() <= half;
    let overlaps_cluster = |r: usize, c: usize| {
        let (y, x) = geo.center(r, c);
        let reach = extent(spec.item_shape, &spec.distractor_params, cell) + spec.jitter * cell;
        (y - cy).abs() < reach_y + reach && (x - cx).abs() < reach_x + reach
    };
    for row in 0..spec.grid.0 {
        for col in 0..spec.grid.1 {
            let (jy, jx) = draw_jitter(&mut rng, spec.jitter * cell);
            if block(row, col) || (density.spacing > 1.0 && overlaps_cluster(row, col)) {
                continue;
            }
            let (y, x) = geo.center(row, col);
            paint(&mut img, spec.item_shape, &spec.distractor_params, cell, y + jy, x + jx);
        }
    }
    let mut target_pixels = Vec::new();
    for dr in -half..=half {
        for dc in -half..=half {
            let (jy, jx) = draw_jitter(&mut rng, jitter);
            let y = cy + dr as f64 * density.spacing * geo.cell_h + jy;
            let x = cx + dc as f64 * density.spacing * geo.cell_w + jx;
            target_pixels.extend(paint(&mut img, spec.item_shape, &spec.target_params, cell, y, x));
        }
    }
    target_pixels.sort_unstable();
    Ok(Stimulus {
        target_mask: mask_from(spec, &target_pixels)?,
        image: img,
    })
}

/// Which feature makes the target pop out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopOutKind {
    Color,
    Orientation,
    Curvature,
    Density,
}

impl PopOutKind {
    pub const ALL: [PopOutKind; 4] = [PopOutKind::Color, PopOutKind::Orientation, PopOutKind::Curvature, PopOutKind::Density];

    pub fn label(self) -> &'static str {
        match self {
            PopOutKind::Color => "color",
            PopOutKind::Orientation => "orientation",
            PopOutKind::Curvature => "curvature",
            PopOutKind::Density => "density",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteItem {
    pub id: String,
    pub kind: PopOutKind,
    pub spec: StimulusSpec,
    pub stimulus: Stimulus,
}

pub const SUITE_PER_KIND: usize = 20;

const GRAY: [u8; 3] = [128, 128, 128];
const RED: [u8; 3] = [220, 30, 30];
const GREEN: [u8; 3] = [30, 180, 30];
const BLUE: [u8; 3] = [40, 60, 220];
const YELLOW: [u8; 3] = [230, 210, 40];
const WHITE: [u8; 3] = [235, 235, 235];
const BLACK: [u8; 3] = [20, 20, 20];

fn params(color: [u8; 3], orientation: f64, scale: f64, curvature: f64) -> ItemParams {
    ItemParams {
        color,
        orientation,
        scale,
        curvature,
    }
}

/// Builds the spec of suite member `i` of `kind`; positions and jitter
/// seeds come from `rng`.
fn suite_spec(kind: PopOutKind, i: usize, rng: &mut ChaCha8Rng) -> StimulusSpec {
    let grids = [(5, 5), (6, 6), (7, 7), (8, 8)];
    let mut grid = grids[i % grids.len()];
    let item_seed = rng.random::<u64>();
    let (distractor, target, shape, density) = match kind {
        PopOutKind::Color => {
            let pairs = [(GREEN, RED), (RED, GREEN), (YELLOW, BLUE), (BLUE, YELLOW), (GREEN, BLUE)];
            let (d, t) = pairs[i % pairs.len()];
            let orient = if i % 2 == 0 { 90.0 } else { 0.0 };
            (params(d, orient, 0.6, 0.0), params(t, orient, 0.6, 0.0), ItemShape::Bar, None)
        }
        PopOutKind::Orientation => {
            let pairs = [(90.0, 0.0), (0.0, 90.0), (90.0, 45.0), (45.0, 135.0), (0.0, 45.0)];
            let (d, t) = pairs[i % pairs.len()];
            let color = if i % 2 == 0 { WHITE } else { BLACK };
            (params(color, d, 0.6, 0.0), params(color, t, 0.6, 0.0), ItemShape::Bar, None)
        }
        PopOutKind::Curvature => {
            let (d, t) = if i % 2 == 0 { (0.0, 0.9) } else { (0.9, 0.0) };
            let orient = [0.0, 90.0, 180.0, 270.0][i % 4];
            let color = if i % 4 < 2 { WHITE } else { BLACK };
            (params(color, orient, 0.6, d), params(color, orient, 0.6, t), ItemShape::CornerArc, None)
        }
        PopOutKind::Density => {
            grid = [(7, 7), (8, 8), (9, 9)][i % 3];
            let color = if i % 2 == 0 { WHITE } else { BLACK };
            // dots: strokes this small would not survive morphological cleanup
            let p = params(color, 0.0, if i % 4 < 2 { 0.3 } else { 0.35 }, 0.0);
            let spacing = if i % 2 == 0 { 0.5 } else { 0.6 };
            (p, p, ItemShape::Circle, Some(DensityTarget { spacing, cluster: 3 }))
        }
    };
    let margin = usize::from(density.is_some());
    let target_cell = (
        rng.random_range(margin..grid.0 - margin),
        rng.random_range(margin..grid.1 - margin),
    );
    StimulusSpec {
        grid,
        canvas: DEFAULT_CANVAS,
        item_shape: shape,
        distractor_params: distractor,
        target_params: target,
        target_cell,
        jitter: if density.is_some() { 0.05 } else { 0.1 },
        seed: item_seed,
        background: GRAY,
        density,
    }
}

/// The fixed 80-stimulus catalog: 20 color, 20 orientation, 20 curvature
/// and 20 density singletons.
pub fn standard_suite(seed: u64) -> Result<Vec<SuiteItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(PopOutKind::ALL.len() * SUITE_PER_KIND);
    for kind in PopOutKind::ALL {
        for i in 0..SUITE_PER_KIND {
            let spec = suite_spec(kind, i, &mut rng);
            let stimulus = render(&spec)?;
            out.push(SuiteItem {
                id: format!("{}_{i:02}", kind.label()),
                kind,
                spec,
                stimulus,
            });
        }
    }
    Ok(out)
}
