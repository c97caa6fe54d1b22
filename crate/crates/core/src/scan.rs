//! Angular exactness scans and relaxation boundaries for planar problems.
//!
//! Linear objectives `f_θ = cos θ · x₁ + sin θ · x₂` are scanned on a
//! uniform angle grid; each angle is certified independently and results
//! are merged in angle order. The boundary of the first-order projection of
//! the relaxation is traced through its support points: the minimizers of
//! `−⟨u_θ, (y₁, y₂)⟩`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::exactness::{Certifier, Classification, Tolerances};
use crate::poly::Polynomial;
use crate::relaxation::{Pop, Sense};

/// Width of a transition bracket after bisection, in degrees.
pub const BISECTION_WIDTH: f64 = 0.01;

pub const SCAN_HEADER: [&str; 4] = ["theta_deg", "v_relax", "v_oracle", "classification"];
pub const BOUNDARY_HEADER: [&str; 4] = ["theta_deg", "y1", "y2", "status"];

/// `cos θ · x₁ + sin θ · x₂` for `θ` in degrees.
pub fn linear_objective(theta_deg: f64) -> Polynomial {
    let t = theta_deg.to_radians();
    Polynomial::linear(&[0.0, t.cos(), t.sin()]).expect("finite coefficients")
}

/// `θ_k = k · 360 / count` degrees.
pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 * 360.0 / count as f64).collect()
}

fn check_planar(pop: &Pop) -> Result<()> {
    if pop.n != 2 {
        return Err(Error::Invalid(format!("angular scans need n = 2, got n = {}", pop.n)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRecord {
    pub theta_deg: f64,
    pub v_relax: f64,
    /// Grid-oracle value, absent when the POP has no bounding box.
    pub v_oracle: Option<f64>,
    /// Discretization bound of the grid oracle.
    #[serde(skip)]
    pub oracle_error: Option<f64>,
    pub classification: Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularScan {
    pub order: u32,
    pub records: Vec<ScanRecord>,
}

impl AngularScan {
    pub fn angles(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.theta_deg).collect()
    }

    pub fn count(&self, class: Classification) -> usize {
        self.records.iter().filter(|r| r.classification == class).count()
    }

    /// Maximal runs of consecutive non-exact angles as `(first, last)`
    /// pairs in degrees; a run crossing 0° is reported once, wrapping.
    pub fn non_exact_intervals(&self) -> Vec<(f64, f64)> {
        let bad: Vec<bool> = self.records.iter().map(|r| r.classification != Classification::Exact).collect();
        let n = bad.len();
        if n == 0 || !bad.iter().any(|&b| b) {
            return Vec::new();
        }
        if bad.iter().all(|&b| b) {
            return vec![(self.records[0].theta_deg, self.records[n - 1].theta_deg)];
        }
        // start scanning just after an exact angle so that runs never split
        let start = (0..n).find(|&i| !bad[i]).expect("some angle is exact");
        let mut out = Vec::new();
        let mut run: Option<(usize, usize)> = None;
        for step in 1..=n {
            let i = (start + step) % n;
            match (bad[i], run) {
                (true, None) => run = Some((i, i)),
                (true, Some((a, _))) => run = Some((a, i)),
                (false, Some((a, b))) => {
                    out.push((self.records[a].theta_deg, self.records[b].theta_deg));
                    run = None;
                }
                (false, None) => {}
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

/// Angular exactness scan of `pop` at order `r` over `num_angles` angles.
pub fn exactness_scan(pop: &Pop, r: u32, num_angles: usize, tols: Tolerances) -> Result<AngularScan> {
    check_planar(pop)?;
    scan_with(&Certifier::new(pop, r, tols)?, num_angles)
}

/// [`exactness_scan`] over a prepared [`Certifier`].
pub fn scan_with(certifier: &Certifier<'_>, num_angles: usize) -> Result<AngularScan> {
    check_planar(certifier.pop())?;
    if num_angles == 0 {
        return Err(Error::Invalid("a scan needs at least one angle".into()));
    }
    // build the shared grid once before fanning out
    certifier.grid()?;
    let records = uniform_angles(num_angles)
        .into_par_iter()
        .map(|theta| {
            let f = linear_objective(theta);
            let cert = certifier.certify(&f)?;
            let oracle = certifier.oracle(&f)?;
            Ok(ScanRecord {
                theta_deg: theta,
                v_relax: cert.v_relax,
                v_oracle: oracle.as_ref().map(|o| o.value),
                oracle_error: oracle.as_ref().map(|o| o.error_bound),
                classification: cert.classification,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngularScan { order: certifier.order(), records })
}

/// A bracket `[lo, hi]` (degrees) across which the exactness changes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub lo: f64,
    pub hi: f64,
    pub lo_class: Classification,
    pub hi_class: Classification,
}

/// Bisects every exact / non-exact change between neighbouring scan angles
/// (cyclically) down to brackets of width [`BISECTION_WIDTH`].
pub fn refine_transitions(certifier: &Certifier<'_>, scan: &AngularScan) -> Result<Vec<Transition>> {
    let n = scan.records.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let exact = |c: Classification| c == Classification::Exact;
    let pairs: Vec<(f64, Classification, f64, Classification)> = (0..n)
        .filter_map(|i| {
            let a = &scan.records[i];
            let b = &scan.records[(i + 1) % n];
            let hi = if i + 1 == n { b.theta_deg + 360.0 } else { b.theta_deg };
            (exact(a.classification) != exact(b.classification)).then_some((
                a.theta_deg,
                a.classification,
                hi,
                b.classification,
            ))
        })
        .collect();
    pairs
        .into_par_iter()
        .map(|(mut lo, mut lo_class, mut hi, mut hi_class)| {
            while hi - lo > BISECTION_WIDTH {
                let mid = 0.5 * (lo + hi);
                let c = certifier.certify(&linear_objective(mid))?.classification;
                if exact(c) == exact(lo_class) {
                    lo = mid;
                    lo_class = c;
                } else {
                    hi = mid;
                    hi_class = c;
                }
            }
            Ok(Transition { lo, hi, lo_class, hi_class })
        })
        .collect()
}

/// Outcome of one support-point solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryStatus {
    Optimal,
    Unbounded,
    Infeasible,
    NumericalTrouble,
}

impl BoundaryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Unbounded => "unbounded",
            Self::Infeasible => "infeasible",
            Self::NumericalTrouble => "numerical_trouble",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Optimal, Self::Unbounded, Self::Infeasible, Self::NumericalTrouble]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub theta_deg: f64,
    /// Support point `(y₁, y₂)`, absent unless the solve was optimal.
    pub point: Option<[f64; 2]>,
    pub status: BoundaryStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPolyline {
    pub order: u32,
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryPolyline {
    /// Support points of the optimal directions, in angle order.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        self.points.iter().filter_map(|p| p.point).collect()
    }
}

/// Support points of `{y ∈ R(g)ʳ : y₀ = 1}` projected onto `(y₁, y₂)`.
pub fn relaxation_boundary(pop: &Pop, r: u32, num_angles: usize) -> Result<BoundaryPolyline> {
    check_planar(pop)?;
    boundary_with(&Certifier::new(pop, r, Tolerances::default())?, num_angles)
}

/// [`relaxation_boundary`] over a prepared [`Certifier`].
pub fn boundary_with(certifier: &Certifier<'_>, num_angles: usize) -> Result<BoundaryPolyline> {
    check_planar(certifier.pop())?;
    let points = uniform_angles(num_angles)
        .into_par_iter()
        .map(|theta| {
            let f = linear_objective(theta).scale(-1.0);
            let (point, status) = match certifier.solve(&f) {
                Ok(o) if o.solver_status == SolveStatus::Optimal => {
                    (Some([o.candidate[0], o.candidate[1]]), BoundaryStatus::Optimal)
                }
                Ok(_) => (None, BoundaryStatus::NumericalTrouble),
                Err(Error::RelaxationUnbounded) => (None, BoundaryStatus::Unbounded),
                Err(Error::RelaxationInfeasible) => (None, BoundaryStatus::Infeasible),
                Err(e) => return Err(e),
            };
            Ok(BoundaryPoint { theta_deg: theta, point, status })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryPolyline { order: certifier.order(), points })
}

/// Fixed-width float format: 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Invalid(format!("line {line}: '{s}' is not a number")))
}

fn parse_optional(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_float(s, line).map(Some)
    }
}

fn format_optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_scan_csv_to<W: Write>(scan: &AngularScan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER)?;
    for r in &scan.records {
        w.write_record([
            format_float(r.theta_deg),
            format_float(r.v_relax),
            format_optional(r.v_oracle),
            r.classification.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scan_csv(scan: &AngularScan, path: &Path) -> Result<()> {
    write_scan_csv_to(scan, BufWriter::new(File::create(path)?))
}

/// Parses a scan CSV; the order is not stored in the file and is taken
/// from the caller.
pub fn read_scan_csv(text: &str, order: u32) -> Result<AngularScan> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    if rd.headers()?.iter().ne(SCAN_HEADER) {
        return Err(Error::Invalid("unexpected scan CSV header".into()));
    }
    let mut records = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let class = Classification::parse(&rec[3])
            .ok_or_else(|| Error::Invalid(format!("line {line}: unknown classification '{}'", &rec[3])))?;
        records.push(ScanRecord {
            theta_deg: parse_float(&rec[0], line)?,
            v_relax: parse_float(&rec[1], line)?,
            v_oracle: parse_optional(&rec[2], line)?,
            oracle_error: None,
            classification: class,
        });
    }
    Ok(AngularScan { order, records })
}

pub fn write_boundary_csv_to<W: Write>(poly: &BoundaryPolyline, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDARY_HEADER)?;
    for p in &poly.points {
        w.write_record([
            format_float(p.theta_deg),
            format_optional(p.point.map(|q| q[0])),
            format_optional(p.point.map(|q| q[1])),
            p.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_boundary_csv(poly: &BoundaryPolyline, path: &Path) -> Result<()> {
    write_boundary_csv_to(poly, BufWriter::new(File::create(path)?))
}

pub fn read_boundary_csv(text: &str, order: u32) -> Result<BoundaryPolyline> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    if rd.headers()?.iter().ne(BOUNDARY_HEADER) {
        return Err(Error::Invalid("unexpected boundary CSV header".into()));
    }
    let mut points = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let status = BoundaryStatus::parse(&rec[3])
            .ok_or_else(|| Error::Invalid(format!("line {line}: unknown status '{}'", &rec[3])))?;
        let point = match (parse_optional(&rec[1], line)?, parse_optional(&rec[2], line)?) {
            (Some(a), Some(b)) => Some([a, b]),
            (None, None) => None,
            _ => return Err(Error::Invalid(format!("line {line}: incomplete support point"))),
        };
        points.push(BoundaryPoint { theta_deg: parse_float(&rec[0], line)?, point, status });
    }
    Ok(BoundaryPolyline { order, points })
}

/// Points of a coarse grid over the POP's box that satisfy the inequality
/// constraints and, within the grid slack, the equations; `(a, b)` pairs.
pub fn feasible_samples(pop: &Pop, resolution: usize) -> Result<Vec<[f64; 2]>> {
    check_planar(pop)?;
    let Some(bounds) = &pop.bounds else { return Ok(Vec::new()) };
    let has_eq = pop.constraints.iter().any(|c| c.sense == Sense::Eq);
    let grid = crate::exactness::FeasibleGrid::new(pop, bounds, resolution)?;
    Ok(grid
        .points()
        .filter(|p| has_eq || pop.violation(p).is_ok_and(|v| v == 0.0))
        .map(|p| [p[0], p[1]])
        .collect())
}

/// Stroke color of a ray per classification.
pub fn ray_color(c: Classification) -> &'static str {
    match c {
        Classification::Exact => "#1f77b4",
        Classification::ValueExactDualUnattained => "#ff7f0e",
        Classification::NotExact => "#d62728",
        Classification::Undetermined => "#7f7f7f",
    }
}

/// Renders the boundary polyline, feasible samples and one ray per scan
/// angle (colored by classification) as an SVG 1.1 document.
pub fn render_svg(scan: &AngularScan, boundary: &BoundaryPolyline, samples: &[[f64; 2]]) -> String {
    let vertices = boundary.vertices();
    let extent = vertices
        .iter()
        .chain(samples)
        .fold(0.0f64, |a, p| a.max(p[0].abs()).max(p[1].abs()))
        .max(1.0);
    let ray_len = 1.1 * extent;
    let half = 1.2 * extent;
    let size = 2.0 * half;
    // data y points up, SVG y points down
    let stroke = size / 400.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        format_float(-half),
        format_float(-half),
        format_float(size),
        format_float(size)
    );
    let _ = writeln!(s, r#"<g id="rays" stroke-width="{}">"#, format_float(stroke));
    for r in &scan.records {
        let t = r.theta_deg.to_radians();
        let _ = writeln!(
            s,
            r#"<line class="ray" data-theta="{}" data-classification="{}" stroke="{}" x1="0" y1="0" x2="{}" y2="{}"/>"#,
            format_float(r.theta_deg),
            r.classification.as_str(),
            ray_color(r.classification),
            format_float(ray_len * t.cos()),
            format_float(-ray_len * t.sin())
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="samples" fill="#555555">"##);
    for p in samples {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="{}"/>"#,
            format_float(p[0]),
            format_float(-p[1]),
            format_float(stroke)
        );
    }
    let _ = writeln!(s, "</g>");
    if !vertices.is_empty() {
        let mut pts = String::new();
        for v in vertices.iter().chain(vertices.first()) {
            let _ = write!(pts, "{},{} ", format_float(v[0]), format_float(-v[1]));
        }
        let _ = writeln!(
            s,
            r##"<polyline id="boundary" fill="#bbbbbb" fill-opacity="0.5" stroke="#333333" stroke-width="{}" points="{}"/>"##,
            format_float(stroke),
            pts.trim_end()
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

pub fn write_svg(scan: &AngularScan, boundary: &BoundaryPolyline, samples: &[[f64; 2]], path: &Path) -> Result<()> {
    if scan.order != boundary.order && !scan.records.is_empty() && !boundary.points.is_empty() {
        return Err(Error::Invalid(format!(
            "scan order {} and boundary order {} differ",
            scan.order, boundary.order
        )));
    }
    std::fs::write(path, render_svg(scan, boundary, samples))?;
    Ok(())
}
