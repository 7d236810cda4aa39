use std::collections::VecDeque;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::rng::{substream, Domain};

use super::geometry::{voronoi_cells, ConvexPolygon, Point, Rect};
use super::LayoutError;

/// Header of the layout CSV format.
pub const LAYOUT_CSV_HEADER: [&str; 4] = ["id", "x_km", "y_km", "in_cloud_group"];

/// RAP positions, their Voronoi cells and the cloud group.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout<T> {
    raps: Vec<Point<T>>,
    region: Rect<T>,
    cells: Vec<ConvexPolygon<T>>,
    areas: Vec<T>,
    cloud_group: Vec<usize>,
    /// Voronoi hop count from each cloud RAP to every RAP.
    hops: Vec<Vec<u32>>,
}

/// Tessellates `region` around `raps` and validates `cloud_group`.
pub fn build_layout<T: Real>(
    raps: Vec<Point<T>>,
    region: Rect<T>,
    cloud_group: Vec<usize>,
) -> Result<NetworkLayout<T>, LayoutError> {
    if !region.is_valid() {
        return Err(LayoutError::InvalidRegion);
    }
    if raps.len() < 2 {
        return Err(LayoutError::TooFewRaps(raps.len()));
    }
    if let Some(rap) = raps.iter().position(|&p| !region.contains(p)) {
        return Err(LayoutError::OutsideRegion { rap });
    }
    let tol = region.width().max(region.height()) * T::lit(1e-12);
    for i in 0..raps.len() {
        for j in i + 1..raps.len() {
            if raps[i].distance(raps[j]) <= tol {
                return Err(LayoutError::Duplicate {
                    first: i,
                    second: j,
                });
            }
        }
    }
    if cloud_group.is_empty() {
        return Err(LayoutError::EmptyCloudGroup);
    }
    for (k, &c) in cloud_group.iter().enumerate() {
        if c >= raps.len() {
            return Err(LayoutError::CloudIndex {
                index: c,
                n_total: raps.len(),
            });
        }
        if cloud_group[..k].contains(&c) {
            return Err(LayoutError::CloudDuplicate(c));
        }
    }
    let cells = voronoi_cells(&raps, &region);
    let areas = cells.iter().map(ConvexPolygon::area).collect();
    let adjacency = adjacency(&raps, &cells, &region);
    let hops = cloud_group
        .iter()
        .map(|&c| bfs_hops(&adjacency, c))
        .collect();
    Ok(NetworkLayout {
        raps,
        region,
        cells,
        areas,
        cloud_group,
        hops,
    })
}

/// Cells sharing an edge of positive length.
fn adjacency<T: Real>(
    raps: &[Point<T>],
    cells: &[ConvexPolygon<T>],
    region: &Rect<T>,
) -> Vec<Vec<usize>> {
    let tol = region.width().max(region.height()) * T::lit(1e-9);
    let n = raps.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            // Vertices of cell i lying on the (i, j) bisector.
            let on_bisector: Vec<Point<T>> = cells[i]
                .vertices
                .iter()
                .copied()
                .filter(|&v| (v.distance(raps[i]) - v.distance(raps[j])).abs() <= tol)
                .collect();
            let shares_edge = on_bisector
                .iter()
                .any(|&a| on_bisector.iter().any(|&b| a.distance(b) > tol));
            if shares_edge {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

fn bfs_hops(adj: &[Vec<usize>], start: usize) -> Vec<u32> {
    let mut hops = vec![u32::MAX; adj.len()];
    hops[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if hops[v] == u32::MAX {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }
    hops
}

impl<T: Real> NetworkLayout<T> {
    pub fn raps(&self) -> &[Point<T>] {
        &self.raps
    }

    pub fn region(&self) -> &Rect<T> {
        &self.region
    }

    pub fn cells(&self) -> &[ConvexPolygon<T>] {
        &self.cells
    }

    /// Cell areas in km².
    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    pub fn cloud_group(&self) -> &[usize] {
        &self.cloud_group
    }

    pub fn n_total(&self) -> usize {
        self.raps.len()
    }

    pub fn n_cloud(&self) -> usize {
        self.cloud_group.len()
    }

    pub fn in_cloud_group(&self, rap: usize) -> bool {
        self.cloud_group.contains(&rap)
    }

    /// Number of Voronoi hops between the `k`-th cloud RAP and `rap`.
    pub fn hops_from_cloud(&self, k: usize, rap: usize) -> u32 {
        self.hops[k][rap]
    }

    /// Index of the RAP nearest to `p`; ties go to the lower index.
    pub fn nearest_rap(&self, p: Point<T>) -> usize {
        let mut best = 0;
        let mut best_d = self.raps[0].distance_sq(p);
        for (i, &y) in self.raps.iter().enumerate().skip(1) {
            let d = y.distance_sq(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

impl NetworkLayout<f64> {
    /// Serializes positions and cloud membership as layout CSV.
    pub fn to_csv(&self) -> String {
        let mut out = LAYOUT_CSV_HEADER.join(",");
        out.push('\n');
        for (i, p) in self.raps.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                p.x,
                p.y,
                u8::from(self.in_cloud_group(i))
            ));
        }
        out
    }
}

/// Parses layout CSV rows and builds the layout over `region`.
///
/// Ids must be a permutation of `0..n`; rows may come in any order.
pub fn read_layout_csv<R: Read>(
    reader: R,
    region: Rect<f64>,
) -> Result<NetworkLayout<f64>, LayoutError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| LayoutError::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().ne(LAYOUT_CSV_HEADER) {
        return Err(LayoutError::Csv {
            row: 0,
            message: format!("expected header `{}`", LAYOUT_CSV_HEADER.join(",")),
        });
    }
    let mut rows: Vec<(usize, Point<f64>, bool)> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| LayoutError::Csv {
            row,
            message: e.to_string(),
        })?;
        let bad = |message: String| LayoutError::Csv { row, message };
        let id: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("id `{}` is not a nonnegative integer", &rec[0])))?;
        let x: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("x_km `{}` is not a number", &rec[1])))?;
        let y: f64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("y_km `{}` is not a number", &rec[2])))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad("coordinates must be finite".into()));
        }
        let flag = match &rec[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(bad(format!(
                    "in_cloud_group `{other}` is not 0/1/true/false"
                )))
            }
        };
        if !region.contains(Point::new(x, y)) {
            return Err(bad(format!(
                "RAP {id} at ({x}, {y}) lies outside the region"
            )));
        }
        rows.push((id, Point::new(x, y), flag));
    }
    let n = rows.len();
    let mut slots: Vec<Option<(Point<f64>, bool)>> = vec![None; n];
    for (k, &(id, p, flag)) in rows.iter().enumerate() {
        let row = k + 1;
        if id >= n {
            return Err(LayoutError::Csv {
                row,
                message: format!("id {id} out of range for {n} rows"),
            });
        }
        if slots[id].replace((p, flag)).is_some() {
            return Err(LayoutError::Csv {
                row,
                message: format!("id {id} appears twice"),
            });
        }
    }
    let slots: Vec<(Point<f64>, bool)> = slots.into_iter().flatten().collect();
    let cloud = slots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1)
        .map(|(i, _)| i)
        .collect();
    build_layout(slots.into_iter().map(|s| s.0).collect(), region, cloud).map_err(|e| match e {
        LayoutError::Duplicate { first, second } => {
            let row_of = |id| rows.iter().position(|r| r.0 == id).map_or(0, |k| k + 1);
            LayoutError::Csv {
                row: row_of(second),
                message: format!(
                    "RAP {second} duplicates the position of RAP {first} (row {})",
                    row_of(first)
                ),
            }
        }
        other => other,
    })
}

pub fn load_layout_csv(path: &Path, region: Rect<f64>) -> Result<NetworkLayout<f64>, LayoutError> {
    let file = std::fs::File::open(path)
        .map_err(|e| LayoutError::Io(format!("{}: {e}", path.display())))?;
    read_layout_csv(file, region)
}

/// Hard-core layout synthesizer: RAPs are dropped uniformly in a
/// `width_km x height_km` rectangle and rejected when closer than
/// `min_separation_km` to an earlier RAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticLayout {
    pub n_total: usize,
    pub n_cloud: usize,
    pub width_km: f64,
    pub height_km: f64,
    pub min_separation_km: f64,
    pub seed: u64,
}

impl Default for SyntheticLayout {
    fn default() -> Self {
        Self {
            n_total: 129,
            n_cloud: 8,
            width_km: 30.0,
            height_km: 20.0,
            min_separation_km: 1.2,
            seed: 2013,
        }
    }
}

impl SyntheticLayout {
    pub fn region(&self) -> Rect<f64> {
        Rect::new(0.0, 0.0, self.width_km, self.height_km)
    }
}

/// Draws a layout; the cloud group is the `n_cloud` RAPs nearest the region
/// centroid (ties by index).
pub fn synthesize_layout(synth: &SyntheticLayout) -> Result<NetworkLayout<f64>, LayoutError> {
    let region = synth.region();
    if !region.is_valid() {
        return Err(LayoutError::InvalidRegion);
    }
    if synth.n_cloud == 0 || synth.n_cloud > synth.n_total {
        return Err(LayoutError::Synthesis(format!(
            "cloud group of {} out of {} RAPs",
            synth.n_cloud, synth.n_total
        )));
    }
    if !(synth.min_separation_km >= 0.0) {
        return Err(LayoutError::Synthesis(
            "minimum separation must be nonnegative".into(),
        ));
    }
    let mut rng = substream(synth.seed, Domain::LayoutSynthesis, 0, 0);
    let min_sq = synth.min_separation_km * synth.min_separation_km;
    let max_attempts = 10_000 * synth.n_total.max(1);
    let mut raps: Vec<Point<f64>> = Vec::with_capacity(synth.n_total);
    let mut attempts = 0;
    while raps.len() < synth.n_total {
        attempts += 1;
        if attempts > max_attempts {
            return Err(LayoutError::Synthesis(format!(
                "placed only {} of {} RAPs with separation {} km",
                raps.len(),
                synth.n_total,
                synth.min_separation_km
            )));
        }
        let p = Point::new(
            rng.random::<f64>() * synth.width_km,
            rng.random::<f64>() * synth.height_km,
        );
        if raps
            .iter()
            .all(|q| q.distance_sq(p) >= min_sq && q.distance_sq(p) > 0.0)
        {
            raps.push(p);
        }
    }
    let centre = region.centroid();
    let mut order: Vec<usize> = (0..raps.len()).collect();
    order.sort_by(|&a, &b| {
        raps[a]
            .distance_sq(centre)
            .total_cmp(&raps[b].distance_sq(centre))
    });
    let mut cloud: Vec<usize> = order[..synth.n_cloud].to_vec();
    cloud.sort_unstable();
    build_layout(raps, region, cloud)
}
