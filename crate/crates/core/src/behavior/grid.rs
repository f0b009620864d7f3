use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::{BehaviorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridUnits {
    Seconds,
    Score,
    Events,
    Hz,
}

impl fmt::Display for GridUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridUnits::Seconds => "seconds",
            GridUnits::Score => "score",
            GridUnits::Events => "events",
            GridUnits::Hz => "hz",
        })
    }
}

impl FromStr for GridUnits {
    type Err = BehaviorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seconds" => Ok(GridUnits::Seconds),
            "score" => Ok(GridUnits::Score),
            "events" => Ok(GridUnits::Events),
            "hz" => Ok(GridUnits::Hz),
            other => Err(BehaviorError::MalformedGrid(format!("unknown units `{other}`"))),
        }
    }
}

/// A 2D histogram. `values[iy * nx + ix]` holds bin `(ix, iy)`; bins are
/// half-open except the last one on each axis, which includes its upper edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisGrid {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    values: Vec<f64>,
    masked: Vec<bool>,
    pub units: GridUnits,
    pub metadata: BTreeMap<String, String>,
}

impl AnalysisGrid {
    pub fn new(x_edges: Vec<f64>, y_edges: Vec<f64>, units: GridUnits) -> Result<Self> {
        for (axis, edges) in [("x", &x_edges), ("y", &y_edges)] {
            if edges.len() < 2 {
                return Err(BehaviorError::BadBins(format!("{axis} axis needs at least one bin")));
            }
            if !edges.iter().all(|e| e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(BehaviorError::BadBins(format!(
                    "{axis} edges must be finite and strictly increasing"
                )));
            }
        }
        let n = (x_edges.len() - 1) * (y_edges.len() - 1);
        Ok(Self {
            x_edges,
            y_edges,
            values: vec![0.0; n],
            masked: vec![false; n],
            units,
            metadata: BTreeMap::new(),
        })
    }

    /// Equal-width bins over `[lo, hi]` on each axis.
    pub fn uniform(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize, units: GridUnits) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(BehaviorError::BadBins("bin counts must be positive".into()));
        }
        Self::new(linspace(x.0, x.1, nx), linspace(y.0, y.1, ny), units)
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.y_edges
    }

    pub fn nx(&self) -> usize {
        self.x_edges.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx() + ix]
    }

    pub fn is_masked(&self, ix: usize, iy: usize) -> bool {
        self.masked[iy * self.nx() + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, value: f64) {
        let nx = self.nx();
        self.values[iy * nx + ix] = value;
    }

    pub fn add(&mut self, ix: usize, iy: usize, value: f64) {
        let nx = self.nx();
        self.values[iy * nx + ix] += value;
    }

    pub fn set_masked(&mut self, ix: usize, iy: usize, masked: bool) {
        let nx = self.nx();
        self.masked[iy * nx + ix] = masked;
    }

    pub fn bin_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        Some((find_bin(&self.x_edges, x)?, find_bin(&self.y_edges, y)?))
    }

    pub fn bin_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            0.5 * (self.x_edges[ix] + self.x_edges[ix + 1]),
            0.5 * (self.y_edges[iy] + self.y_edges[iy + 1]),
        )
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Bin with the largest value; ties go to the lowest flat index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.nx(), best / self.nx())
    }

    /// Writes the grid as CSV: `units`, `x_edges`, `y_edges` and `meta` rows,
    /// then `ix,iy,value,masked` for every bin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["units", &self.units.to_string()])?;
        let mut row = vec!["x_edges".to_string()];
        row.extend(self.x_edges.iter().map(f64::to_string));
        w.write_record(&row)?;
        let mut row = vec!["y_edges".to_string()];
        row.extend(self.y_edges.iter().map(f64::to_string));
        w.write_record(&row)?;
        for (k, v) in &self.metadata {
            w.write_record(["meta", k, v])?;
        }
        w.write_record(["ix", "iy", "value", "masked"])?;
        for iy in 0..self.ny() {
            for ix in 0..self.nx() {
                w.write_record([
                    ix.to_string(),
                    iy.to_string(),
                    self.get(ix, iy).to_string(),
                    u8::from(self.is_masked(ix, iy)).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let bad = |m: &str| BehaviorError::MalformedGrid(m.to_string());
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let mut units = None;
        let mut x_edges = None;
        let mut y_edges = None;
        let mut metadata = BTreeMap::new();
        let mut records = r.records();
        loop {
            let rec = records.next().ok_or_else(|| bad("missing bin table"))??;
            match rec.get(0) {
                Some("units") => units = Some(rec.get(1).ok_or_else(|| bad("units value"))?.parse()?),
                Some("x_edges") => x_edges = Some(rec.iter().skip(1).map(num).collect::<Result<Vec<_>>>()?),
                Some("y_edges") => y_edges = Some(rec.iter().skip(1).map(num).collect::<Result<Vec<_>>>()?),
                Some("meta") if rec.len() == 3 => {
                    metadata.insert(rec[1].to_string(), rec[2].to_string());
                }
                Some("ix") => break,
                _ => return Err(bad("unexpected row before bin table")),
            }
        }
        let mut grid = Self::new(
            x_edges.ok_or_else(|| bad("missing x_edges"))?,
            y_edges.ok_or_else(|| bad("missing y_edges"))?,
            units.ok_or_else(|| bad("missing units"))?,
        )?;
        grid.metadata = metadata;
        let mut seen = 0;
        for rec in records {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(bad("bin rows need 4 fields"));
            }
            let ix: usize = rec[0].parse().map_err(|_| bad("bad ix"))?;
            let iy: usize = rec[1].parse().map_err(|_| bad("bad iy"))?;
            if ix >= grid.nx() || iy >= grid.ny() {
                return Err(bad("bin index out of range"));
            }
            grid.set(ix, iy, num(&rec[2])?);
            grid.set_masked(ix, iy, &rec[3] == "1");
            seen += 1;
        }
        if seen != grid.values.len() {
            return Err(bad("bin table is incomplete"));
        }
        Ok(grid)
    }

    /// Renders a heatmap with `scale` pixels per bin, y increasing upward.
    /// Masked bins are drawn gray.
    pub fn render_png(&self, scale: u32) -> Result<Vec<u8>> {
        let scale = scale.max(1);
        let (nx, ny) = (self.nx() as u32, self.ny() as u32);
        let max = self
            .values
            .iter()
            .zip(&self.masked)
            .filter(|(_, m)| !**m)
            .map(|(v, _)| *v)
            .fold(0.0f64, f64::max);
        let img = image::RgbImage::from_fn(nx * scale, ny * scale, |px, py| {
            let ix = (px / scale) as usize;
            let iy = (ny - 1 - py / scale) as usize;
            if self.is_masked(ix, iy) {
                return image::Rgb([128, 128, 128]);
            }
            let t = if max > 0.0 { self.get(ix, iy) / max } else { 0.0 };
            image::Rgb(heat(t))
        });
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| BehaviorError::Render(e.to_string()))?;
        Ok(out.into_inner())
    }
}

/// Black to red to yellow to white.
fn heat(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * 3.0;
    let c = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(t), c(t - 1.0), c(t - 2.0)]
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + step * i as f64 })
        .collect()
}

fn find_bin(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[n]) {
        return None;
    }
    // first edge strictly greater than v, minus one
    let i = edges.partition_point(|e| *e <= v);
    Some(i.saturating_sub(1).min(n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_edges() {
        let g = AnalysisGrid::uniform((0.0, 10.0), 5, (0.0, 4.0), 2, GridUnits::Seconds).unwrap();
        assert_eq!(g.bin_of(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.bin_of(2.0, 2.0), Some((1, 1)));
        assert_eq!(g.bin_of(10.0, 4.0), Some((4, 1)));
        assert_eq!(g.bin_of(10.0001, 1.0), None);
        assert_eq!(g.bin_of(-0.1, 1.0), None);
        assert_eq!(g.bin_of(f64::NAN, 1.0), None);
        assert_eq!(g.bin_center(4, 1), (9.0, 3.0));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(AnalysisGrid::new(vec![0.0, 0.0], vec![0.0, 1.0], GridUnits::Hz).is_err());
        assert!(AnalysisGrid::new(vec![0.0], vec![0.0, 1.0], GridUnits::Hz).is_err());
        assert!(AnalysisGrid::uniform((0.0, 1.0), 0, (0.0, 1.0), 1, GridUnits::Hz).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut g = AnalysisGrid::uniform((-1.5, 1.5), 3, (0.0, 2.0), 2, GridUnits::Hz).unwrap();
        g.add(1, 0, 0.1 + 0.2);
        g.set(2, 1, 1e-17);
        g.set_masked(0, 1, true);
        g.metadata.insert("masked_bins".into(), "1".into());
        let text = g.to_csv_string();
        assert!(text.starts_with("units,hz\nx_edges,-1.5,-0.5,0.5,1.5\ny_edges,0,1,2\n"));
        let back = AnalysisGrid::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn png_has_expected_size() {
        let mut g = AnalysisGrid::uniform((0.0, 1.0), 4, (0.0, 1.0), 3, GridUnits::Score).unwrap();
        g.set(3, 2, 2.0);
        let png = g.render_png(5).unwrap();
        let img = image::load_from_memory(&png).unwrap().into_rgb8();
        assert_eq!(img.dimensions(), (20, 15));
        // hottest bin is top-right and white
        assert_eq!(img.get_pixel(19, 0).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(0, 14).0, [0, 0, 0]);
    }
}
