//! Raster landscapes: thresholded feature pixels, exact Euclidean distance
//! transform and local principal-direction orientation.

use rayon::prelude::*;

use super::SegmentSet;
use crate::error::{invalid, Error, Result};
use crate::geom::{Sym2, Vec2};
use crate::grid::{DirectionField, GridSpec, ScalarField};

/// Default PCA window radius, in pixels.
pub const DEFAULT_WINDOW: f64 = 5.0;

/// 8-bit grayscale image, row-major with row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image must be non-empty"));
        }
        if pixels.len() != width * height {
            return Err(invalid(format!("expected {} pixels for {width}×{height}, got {}", width * height, pixels.len())));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    /// Grid with one node per pixel over the given physical bounds; the
    /// bottom image row maps to `y_min`.
    pub fn grid(&self, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<GridSpec> {
        GridSpec::new(self.width, self.height, x_min, x_max, y_min, y_max)
    }
}

/// Burns segments into a blank raster on `grid` (one pixel per node):
/// every node within half a pixel diagonal of a segment becomes a 255 pixel.
pub fn rasterize_segments(grid: &GridSpec, segs: &SegmentSet) -> Result<GrayImage> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let reach = 0.5 * grid.dx1().hypot(grid.dx2());
    let pixels: Vec<u8> = (0..n1 * n2)
        .into_par_iter()
        .map(|p| {
            let (col, row) = (p % n1, p / n1);
            let node = grid.node(col, n2 - 1 - row);
            if segs.segments().iter().any(|s| s.distance(node) <= reach) {
                255
            } else {
                0
            }
        })
        .collect();
    GrayImage::new(n1, n2, pixels)
}

/// Distance to the nearest feature pixel (`value ≥ threshold`) and the local
/// feature orientation at every node of `grid`.
///
/// The orientation is the major axis of the covariance of feature-pixel
/// positions within `window` pixels of the nearest feature pixel. Windows
/// with a single pixel or an isotropic spread get `(1, 0)` and are flagged.
pub fn fields_from_raster(image: &GrayImage, grid: &GridSpec, threshold: u8, window: f64) -> Result<(ScalarField, DirectionField)> {
    if grid.n1() != image.width || grid.n2() != image.height {
        return Err(Error::GridMismatch(format!(
            "raster is {}×{} but grid has {}×{} nodes",
            image.width,
            image.height,
            grid.n1(),
            grid.n2()
        )));
    }
    if !(window >= 0.0) {
        return Err(invalid(format!("window radius must be non-negative, got {window}")));
    }
    let (n1, n2) = (grid.n1(), grid.n2());
    // feature mask in node order
    let feature: Vec<bool> = (0..grid.len())
        .map(|idx| {
            let (j, k) = grid.coords(idx);
            image.get(j, n2 - 1 - k) >= threshold
        })
        .collect();
    if !feature.contains(&true) {
        return Err(Error::NoFeaturePixels { threshold });
    }

    let (dist_sq, site) = edt(&feature, n1, n2, grid.dx1(), grid.dx2());

    // one PCA per feature pixel that is somebody's nearest site
    let mut needed: Vec<usize> = site.clone();
    needed.sort_unstable();
    needed.dedup();
    let axes: Vec<(usize, Option<Vec2>)> =
        needed.par_iter().map(|&s| (s, window_axis(grid, &feature, s, window))).collect();
    let mut axis_of = vec![None; grid.len()];
    for (s, a) in axes {
        axis_of[s] = Some(a);
    }

    let distance = ScalarField { grid: *grid, values: dist_sq.iter().map(|d| d.sqrt()).collect() };
    let mut values = Vec::with_capacity(grid.len());
    let mut flagged = Vec::with_capacity(grid.len());
    for &s in &site {
        match axis_of[s].flatten() {
            Some(a) => {
                values.push(a);
                flagged.push(false);
            }
            None => {
                values.push(Vec2::E1);
                flagged.push(true);
            }
        }
    }
    Ok((distance, DirectionField { grid: *grid, values, flagged }))
}

fn window_axis(grid: &GridSpec, feature: &[bool], centre: usize, window: f64) -> Option<Vec2> {
    let (cj, ck) = grid.coords(centre);
    let r = window.floor() as isize;
    let w2 = window * window;
    let mut pts = Vec::new();
    for dk in -r..=r {
        for dj in -r..=r {
            if ((dj * dj + dk * dk) as f64) > w2 {
                continue;
            }
            let (j, k) = (cj as isize + dj, ck as isize + dk);
            if j < 0 || k < 0 || j as usize >= grid.n1() || k as usize >= grid.n2() {
                continue;
            }
            let idx = grid.index(j as usize, k as usize);
            if feature[idx] {
                pts.push(Vec2::new(dj as f64 * grid.dx1(), dk as f64 * grid.dx2()));
            }
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / n);
    let cov = pts.iter().fold(Sym2::new(0.0, 0.0, 0.0), |acc, &p| acc.add(&Sym2::outer(p - mean))).scale(1.0 / n);
    cov.principal_axis(1e-9).map(Vec2::axis_canonical)
}

/// Exact squared Euclidean distance transform with nearest-site indices,
/// for node spacings `h1`, `h2` (separable lower-envelope algorithm).
fn edt(feature: &[bool], n1: usize, n2: usize, h1: f64, h2: f64) -> (Vec<f64>, Vec<usize>) {
    // column pass: nearest feature in the same column
    let mut col_d = vec![f64::INFINITY; n1 * n2];
    let mut col_k = vec![usize::MAX; n1 * n2];
    for j in 0..n1 {
        let mut last: Option<usize> = None;
        for k in 0..n2 {
            if feature[k * n1 + j] {
                last = Some(k);
            }
            if let Some(l) = last {
                col_d[k * n1 + j] = ((k - l) as f64 * h2).powi(2);
                col_k[k * n1 + j] = l;
            }
        }
        last = None;
        for k in (0..n2).rev() {
            if feature[k * n1 + j] {
                last = Some(k);
            }
            if let Some(l) = last {
                let d = ((l - k) as f64 * h2).powi(2);
                if d < col_d[k * n1 + j] {
                    col_d[k * n1 + j] = d;
                    col_k[k * n1 + j] = l;
                }
            }
        }
    }

    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..n2)
        .into_par_iter()
        .map(|k| {
            let f = &col_d[k * n1..(k + 1) * n1];
            let (d, q) = lower_envelope(f, h1);
            let s = q.iter().map(|&j| col_k[k * n1 + j] * n1 + j).collect();
            (d, s)
        })
        .collect();
    let mut dist = Vec::with_capacity(n1 * n2);
    let mut site = Vec::with_capacity(n1 * n2);
    for (d, s) in rows {
        dist.extend(d);
        site.extend(s);
    }
    (dist, site)
}

/// `min_q f(q) + (h (j - q))²` for every `j`, with the minimizing `q`.
fn lower_envelope(f: &[f64], h: f64) -> (Vec<f64>, Vec<usize>) {
    let n = f.len();
    let h2 = h * h;
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    let cross = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + h2 * qf * qf) - (f[p] + h2 * pf * pf)) / (2.0 * h2 * (qf - pf))
    };
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        while let Some(&p) = v.last() {
            let s = cross(p, q);
            if s <= z[z.len() - 1] {
                v.pop();
                z.pop();
            } else {
                z.push(s);
                v.push(q);
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.clear();
            z.push(f64::NEG_INFINITY);
        }
    }
    z.push(f64::INFINITY);
    let mut out_d = vec![f64::INFINITY; n];
    let mut out_q = vec![usize::MAX; n];
    if v.is_empty() {
        return (out_d, out_q);
    }
    let mut i = 0;
    for j in 0..n {
        while z[i + 1] < j as f64 {
            i += 1;
        }
        let q = v[i];
        out_d[j] = f[q] + h2 * (j as f64 - q as f64).powi(2);
        out_q[j] = q;
    }
    (out_d, out_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{distance_direction_from_segments, Segment};

    fn brute(feature: &[bool], n1: usize, n2: usize, h1: f64, h2: f64) -> Vec<f64> {
        (0..n1 * n2)
            .map(|i| {
                let (j, k) = ((i % n1) as f64, (i / n1) as f64);
                (0..n1 * n2)
                    .filter(|&s| feature[s])
                    .map(|s| ((j - (s % n1) as f64) * h1).powi(2) + ((k - (s / n1) as f64) * h2).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn edt_matches_brute_force() {
        let (n1, n2) = (23, 17);
        // deterministic scatter
        let feature: Vec<bool> = (0..n1 * n2).map(|i| (i * 7919 + 13) % 97 < 3).collect();
        let (d, site) = edt(&feature, n1, n2, 0.3, 0.7);
        let want = brute(&feature, n1, n2, 0.3, 0.7);
        for i in 0..n1 * n2 {
            assert!((d[i] - want[i]).abs() < 1e-12, "node {i}: {} vs {}", d[i], want[i]);
            assert!(feature[site[i]]);
            let (sj, sk) = ((site[i] % n1) as f64, (site[i] / n1) as f64);
            let (j, k) = ((i % n1) as f64, (i / n1) as f64);
            let ds = ((j - sj) * 0.3).powi(2) + ((k - sk) * 0.7).powi(2);
            assert!((ds - d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_pixel_line() {
        let mut img = GrayImage::filled(11, 9, 0).unwrap();
        for row in 0..9 {
            img.set(4, row, 200);
        }
        let g = img.grid(0.0, 10.0, 0.0, 8.0).unwrap();
        let (d, dir) = fields_from_raster(&img, &g, 128, DEFAULT_WINDOW).unwrap();
        for idx in 0..g.len() {
            assert_eq!(dir.values[idx], Vec2::E2);
            assert_eq!(d.values[idx], (g.node_at(idx).x - 4.0).abs());
        }
        assert_eq!(dir.flagged_count(), 0);
    }

    #[test]
    fn all_feature_and_no_feature() {
        let img = GrayImage::filled(5, 5, 255).unwrap();
        let g = img.grid(0.0, 1.0, 0.0, 1.0).unwrap();
        let (d, _) = fields_from_raster(&img, &g, 10, 2.0).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        let blank = GrayImage::filled(5, 5, 9).unwrap();
        assert!(matches!(fields_from_raster(&blank, &g, 10, 2.0), Err(Error::NoFeaturePixels { threshold: 10 })));
    }

    #[test]
    fn single_pixel_window_is_flagged() {
        let mut img = GrayImage::filled(7, 7, 0).unwrap();
        img.set(3, 3, 255);
        let g = img.grid(-3.0, 3.0, -3.0, 3.0).unwrap();
        let (d, dir) = fields_from_raster(&img, &g, 255, 5.0).unwrap();
        assert_eq!(dir.flagged_count(), g.len());
        assert!(dir.values.iter().all(|&v| v == Vec2::E1));
        assert_eq!(d.at(0, 0), 18.0_f64.sqrt());
    }

    #[test]
    fn image_rows_run_top_down() {
        let mut img = GrayImage::filled(4, 3, 0).unwrap();
        img.set(0, 0, 255);
        img.set(1, 0, 255);
        let g = img.grid(0.0, 3.0, 0.0, 2.0).unwrap();
        let (d, _) = fields_from_raster(&img, &g, 255, 3.0).unwrap();
        // top image row sits at y = 2
        assert_eq!(d.at(0, 2), 0.0);
        assert_eq!(d.at(0, 0), 2.0);
    }

    #[test]
    fn l_shaped_corner_uses_mixed_window() {
        let mut img = GrayImage::filled(21, 21, 0).unwrap();
        // horizontal arm on row 10 (k = 10) from column 10 to 20, vertical arm on column 10 upward
        for c in 10..21 {
            img.set(c, 10, 255);
        }
        for r in 0..11 {
            img.set(10, r, 255);
        }
        let g = img.grid(0.0, 20.0, 0.0, 20.0).unwrap();
        let (_, dir) = fields_from_raster(&img, &g, 255, 3.0).unwrap();
        // node (12, 8) is nearest to the corner-adjacent pixel (12, 10);
        // its window holds listed pixels of both arms
        let centre = Vec2::new(12.0, 10.0);
        let mut pts = Vec::new();
        for c in 10..21 {
            pts.push(Vec2::new(c as f64, 10.0));
        }
        for k in 11..=20 {
            pts.push(Vec2::new(10.0, k as f64));
        }
        let inside: Vec<Vec2> = pts.into_iter().filter(|p| (*p - centre).norm_sq() <= 9.0).collect();
        let n = inside.len() as f64;
        let (mx, my) = (inside.iter().map(|p| p.x).sum::<f64>() / n, inside.iter().map(|p| p.y).sum::<f64>() / n);
        let sxx = inside.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / n;
        let syy = inside.iter().map(|p| (p.y - my).powi(2)).sum::<f64>() / n;
        let sxy = inside.iter().map(|p| (p.x - mx) * (p.y - my)).sum::<f64>() / n;
        let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let want = Vec2::from_angle(phi).axis_canonical();
        let got = dir.at(12, 8);
        assert!((got - want).norm() < 1e-12, "{got:?} vs {want:?}");
        assert!(got.x > 0.9 && got.y.abs() > 0.05);
    }

    #[test]
    fn grid_must_match_image() {
        let img = GrayImage::filled(5, 4, 255).unwrap();
        let g = GridSpec::square(5, 0.0, 1.0).unwrap();
        assert!(matches!(fields_from_raster(&img, &g, 1, 2.0), Err(Error::GridMismatch(_))));
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn angle_between(a: Vec2, b: Vec2) -> f64 {
            a.dot(b).abs().min(1.0).acos().to_degrees()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn raster_agrees_with_segments(ax in -0.9..0.9f64, ay in -0.9..0.9f64, th in 0.0..std::f64::consts::PI, len in 0.8..1.6f64) {
                let a = Vec2::new(ax, ay);
                let b = a + Vec2::from_angle(th) * len;
                let seg = Segment::new(a, b).unwrap();
                let segs = SegmentSet::new(vec![seg]);
                let g = GridSpec::square(81, -1.0, 1.0).unwrap();
                let img = rasterize_segments(&g, &segs).unwrap();
                prop_assume!(img.pixels().iter().filter(|&&p| p > 0).count() > 20);
                let window = 10.0;
                let (dr, gr) = fields_from_raster(&img, &g, 128, window).unwrap();
                let (ds, gs) = distance_direction_from_segments(&g, &segs).unwrap();
                let diag = (g.dx1().powi(2) + g.dx2().powi(2)).sqrt();
                // nodes whose foot point is within a PCA window of an end see a truncated line
                let u = (b - a) * (1.0 / len);
                let end_clear = (window + 2.0) * g.dx1();
                for idx in 0..g.len() {
                    let p = g.node_at(idx);
                    // the raster only covers the in-grid part of the segment
                    if p.x.abs() > 0.8 || p.y.abs() > 0.8 {
                        continue;
                    }
                    let clipped = (b.x.abs() > 1.0 || b.y.abs() > 1.0) && ds.values[idx] > 0.1;
                    if !clipped {
                        prop_assert!((dr.values[idx] - ds.values[idx]).abs() <= diag);
                    }
                    let foot = (p - a).dot(u);
                    let exit = |pos: f64, dir: f64| if dir > 0.0 { (1.0 - pos) / dir } else if dir < 0.0 { (-1.0 - pos) / dir } else { f64::INFINITY };
                    let end_in = len.min(exit(a.x, u.x)).min(exit(a.y, u.y));
                    if foot > end_clear && foot < end_in - end_clear && ds.values[idx] < 0.3 {
                        prop_assert!(angle_between(gr.values[idx], gs.values[idx]) <= 5.0,
                            "node {p:?}: {:?} vs {:?}", gr.values[idx], gs.values[idx]);
                    }
                }
            }
        }
    }
}
