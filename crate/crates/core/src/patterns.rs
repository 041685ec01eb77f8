//! Windows, multitype point patterns, CSV ingestion and intensity estimates.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Axis-aligned box observation window in 1, 2 or 3 dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if !(1..=3).contains(&d) || upper.len() != d {
            return Err(Error::Domain(format!(
                "window needs matching corners of dimension 1..=3, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for j in 0..d {
            if !lower[j].is_finite() || !upper[j].is_finite() || upper[j] <= lower[j] {
                return Err(Error::Domain(format!(
                    "window axis {j}: need finite lower < upper, got [{}, {}]",
                    lower[j], upper[j]
                )));
            }
        }
        Ok(Window { lower, upper })
    }

    /// `[0, side]^d`.
    pub fn square(side: f64, d: usize) -> Result<Self> {
        Window::new(vec![0.0; d], vec![side; d])
    }

    /// Parses `x0 x1 [y0 y1 [z0 z1]]` (commas or whitespace).
    pub fn parse_bounds(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad window bound '{s}'")))
            })
            .collect::<Result<_>>()?;
        if vals.is_empty() || !vals.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "window needs lower/upper pairs per axis, got {} numbers",
                vals.len()
            )));
        }
        let lower = vals.iter().step_by(2).copied().collect();
        let upper = vals.iter().skip(1).step_by(2).copied().collect();
        Window::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn sides(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.side(j)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.side(j)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// Distance from an interior point to the nearest face.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for j in 0..self.dim() {
            d = d.min(x[j] - self.lower[j]).min(self.upper[j] - x[j]);
        }
        d
    }

    /// Window grown by `margin` on every side.
    pub fn dilate(&self, margin: f64) -> Result<Window> {
        Window::new(
            self.lower.iter().map(|v| v - margin).collect(),
            self.upper.iter().map(|v| v + margin).collect(),
        )
    }

    /// Bounds in the `x0 x1 y0 y1` layout of the CSV comment.
    pub fn bounds_string(&self) -> String {
        let mut s = String::new();
        for j in 0..self.dim() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{} {}", self.lower[j], self.upper[j]);
        }
        s
    }
}

/// Points with type labels on a window. Coordinates are stored flat,
/// `d` values per point; type indices refer to the registry.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTypePattern {
    window: Window,
    coords: Vec<f64>,
    types: Vec<usize>,
    registry: Vec<String>,
}

fn location_key(x: &[f64]) -> [u64; 3] {
    let mut key = [0u64; 3];
    for (k, v) in key.iter_mut().zip(x) {
        // +0.0 and -0.0 denote the same location
        *k = if *v == 0.0 { 0 } else { v.to_bits() };
    }
    key
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) || label.trim() != label {
        return Err(Error::Domain(format!("invalid type label '{label}'")));
    }
    Ok(())
}

impl MultiTypePattern {
    /// Empty pattern with a fixed registry.
    pub fn empty(window: Window, registry: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for label in &registry {
            check_label(label)?;
            if !seen.insert(label.as_str()) {
                return Err(Error::Domain(format!("duplicate type label '{label}' in registry")));
            }
        }
        Ok(MultiTypePattern { window, coords: Vec::new(), types: Vec::new(), registry })
    }

    /// Builds a pattern from labelled points, registering types in first-appearance order.
    pub fn from_points<S: AsRef<str>>(
        window: Window,
        points: impl IntoIterator<Item = (Vec<f64>, S)>,
    ) -> Result<Self> {
        let mut p = MultiTypePattern::empty(window, Vec::new())?;
        for (x, label) in points {
            p.push_unchecked_simplicity(&x, label.as_ref())?;
        }
        p.check_simplicity()?;
        Ok(p)
    }

    /// Builds a pattern from per-type flat coordinate blocks, in registry order.
    pub fn from_blocks(window: Window, blocks: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let d = window.dim();
        let registry: Vec<String> = blocks.iter().map(|b| b.0.clone()).collect();
        let mut p = MultiTypePattern::empty(window, registry)?;
        for (t, (_, flat)) in blocks.into_iter().enumerate() {
            if flat.len() % d != 0 {
                return Err(Error::Shape(format!("coordinate block length {} not a multiple of {d}", flat.len())));
            }
            for x in flat.chunks_exact(d) {
                if !p.window.contains(x) {
                    return Err(Error::Domain(format!("point {x:?} outside window")));
                }
            }
            p.types.extend(std::iter::repeat_n(t, flat.len() / d));
            p.coords.extend(flat);
        }
        p.check_simplicity()?;
        Ok(p)
    }

    fn push_unchecked_simplicity(&mut self, x: &[f64], label: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("point of dimension {} in {}-d window", x.len(), self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {x:?}")));
        }
        if !self.window.contains(x) {
            return Err(Error::Domain(format!("point {x:?} outside window [{}]", self.window.bounds_string())));
        }
        let t = match self.type_index(label) {
            Some(t) => t,
            None => {
                check_label(label)?;
                self.registry.push(label.to_string());
                self.registry.len() - 1
            }
        };
        self.coords.extend_from_slice(x);
        self.types.push(t);
        Ok(())
    }

    fn check_simplicity(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.len());
        for i in 0..self.len() {
            if !seen.insert(location_key(self.point(i))) {
                return Err(Error::Simplicity { line: 0, coords: self.point(i).to_vec() });
            }
        }
        Ok(())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn registry(&self) -> &[String] {
        &self.registry
    }

    pub fn type_index(&self, label: &str) -> Option<usize> {
        self.registry.iter().position(|l| l == label)
    }

    pub fn require_type(&self, label: &str) -> Result<usize> {
        self.type_index(label).ok_or_else(|| {
            Error::Config(format!("type '{label}' not in pattern (types: {})", self.registry.join(", ")))
        })
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn type_of(&self, i: usize) -> usize {
        self.types[i]
    }

    /// Flat coordinates of all points of one type.
    pub fn coords_of(&self, t: usize) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::new();
        for (i, &ti) in self.types.iter().enumerate() {
            if ti == t {
                out.extend_from_slice(&self.coords[i * d..(i + 1) * d]);
            }
        }
        out
    }

    pub fn count_of(&self, t: usize) -> usize {
        self.types.iter().filter(|&&ti| ti == t).count()
    }

    /// Same points on a different (containing) window.
    pub fn with_window(&self, window: Window) -> Result<Self> {
        if window.dim() != self.dim() {
            return Err(Error::Shape("window dimension mismatch".into()));
        }
        for i in 0..self.len() {
            if !window.contains(self.point(i)) {
                return Err(Error::Domain(format!("point {:?} outside new window", self.point(i))));
            }
        }
        Ok(MultiTypePattern { window, ..self.clone() })
    }
}

/// Per-type intensity estimates `n_X / |W|`, in registry order.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityEstimates {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl IntensityEstimates {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i])
    }
}

pub fn estimate_intensities(pattern: &MultiTypePattern) -> IntensityEstimates {
    let vol = pattern.window().volume();
    let mut counts = vec![0usize; pattern.registry().len()];
    for i in 0..pattern.len() {
        counts[pattern.type_of(i)] += 1;
    }
    IntensityEstimates {
        labels: pattern.registry().to_vec(),
        values: counts.iter().map(|&c| c as f64 / vol).collect(),
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Parses pattern CSV text. An explicit `window` wins over a `# window:` comment.
pub fn parse_pattern_csv(
    text: &str,
    window: Option<Window>,
    registry: Option<Vec<String>>,
) -> Result<MultiTypePattern> {
    let mut embedded: Option<Window> = None;
    let mut header: Option<usize> = None;
    let mut rows: Vec<(usize, Vec<f64>, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("window:") {
                embedded = Some(Window::parse_bounds(rest).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(d) = header else {
            let d = fields.len().saturating_sub(1);
            let ok = (1..=3).contains(&d)
                && fields[..d].iter().zip(AXES).all(|(f, a)| f.eq_ignore_ascii_case(a))
                && fields[d].eq_ignore_ascii_case("type");
            if !ok {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected header x[,y[,z]],type, got '{line}'"),
                });
            }
            header = Some(d);
            continue;
        };
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, got {}", d + 1, fields.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for f in &fields[..d] {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => x.push(v),
                _ => {
                    return Err(Error::Parse { line: line_no, msg: format!("bad coordinate '{f}'") })
                }
            }
        }
        if fields[d].is_empty() {
            return Err(Error::Parse { line: line_no, msg: "empty type label".into() });
        }
        rows.push((line_no, x, fields[d].to_string()));
    }
    let window = window.or(embedded).ok_or_else(|| {
        Error::Config("no window given: add a '# window: x0 x1 y0 y1' comment or pass --window".into())
    })?;
    if let Some(d) = header {
        if d != window.dim() {
            return Err(Error::Shape(format!("{d}-d header with {}-d window", window.dim())));
        }
    }
    let mut pattern = MultiTypePattern::empty(window, registry.clone().unwrap_or_default())?;
    let mut seen = HashSet::with_capacity(rows.len());
    for (line_no, x, label) in rows {
        if registry.is_some() && pattern.type_index(&label).is_none() {
            return Err(Error::Parse { line: line_no, msg: format!("type '{label}' not in registry") });
        }
        pattern.push_unchecked_simplicity(&x, &label).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("line {line_no}: {msg}")),
            Error::Shape(msg) | Error::Config(msg) => Error::Parse { line: line_no, msg },
            other => other,
        })?;
        if !seen.insert(location_key(&x)) {
            return Err(Error::Simplicity { line: line_no, coords: x });
        }
    }
    Ok(pattern)
}

pub fn load_pattern_csv(
    path: &Path,
    window: Option<Window>,
    registry: Option<Vec<String>>,
) -> Result<MultiTypePattern> {
    let text = std::fs::read_to_string(path)?;
    parse_pattern_csv(&text, window, registry)
}

/// CSV text with a window comment, optional extra comment lines, header and rows.
pub fn format_pattern_csv(pattern: &MultiTypePattern, comments: &[String]) -> String {
    let d = pattern.dim();
    let mut s = String::with_capacity(32 * pattern.len() + 64);
    let _ = writeln!(s, "# window: {}", pattern.window().bounds_string());
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str(&AXES[..d].join(","));
    s.push_str(",type\n");
    for i in 0..pattern.len() {
        for v in pattern.point(i) {
            let _ = write!(s, "{v},");
        }
        s.push_str(&pattern.registry()[pattern.type_of(i)]);
        s.push('\n');
    }
    s
}

pub fn write_pattern_csv(pattern: &MultiTypePattern, path: &Path, comments: &[String]) -> Result<()> {
    std::fs::write(path, format_pattern_csv(pattern, comments))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win() -> Window {
        Window::square(10.0, 2).unwrap()
    }

    #[test]
    fn load_two_points() {
        let text = "x,y,type\n1,1,X\n2,2,Y\n";
        let p = parse_pattern_csv(text, Some(win()), None).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.registry(), &["X".to_string(), "Y".to_string()]);
    }

    #[test]
    fn empty_body() {
        let p = parse_pattern_csv("# window: 0 10 0 10\nx,y,type\n", None, None).unwrap();
        assert_eq!(p.len(), 0);
        assert_eq!(p.registry().len(), 0);
    }

    #[test]
    fn duplicate_location_rejected() {
        let text = "x,y,type\n1,1,X\n1,1,Y\n";
        match parse_pattern_csv(text, Some(win()), None) {
            Err(Error::Simplicity { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected simplicity error, got {other:?}"),
        }
    }

    #[test]
    fn negative_zero_is_same_location() {
        let text = "x,y,type\n0,1,X\n-0,1,Y\n";
        assert!(matches!(
            parse_pattern_csv(text, Some(win()), None),
            Err(Error::Simplicity { .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "# window: 0 10 0 10\nx,y,type\n1,1,X\n1,abc,Y\n";
        match parse_pattern_csv(text, None, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn outside_window_is_domain_error() {
        let text = "x,y,type\n11,1,X\n";
        assert!(matches!(parse_pattern_csv(text, Some(win()), None), Err(Error::Domain(_))));
    }

    #[test]
    fn missing_window_is_config_error() {
        assert!(matches!(parse_pattern_csv("x,y,type\n1,1,X\n", None, None), Err(Error::Config(_))));
    }

    #[test]
    fn intensities() {
        let w = Window::square(300.0, 2).unwrap();
        let pts: Vec<(Vec<f64>, &str)> =
            (0..900).map(|i| (vec![(i % 30) as f64 * 10.0, (i / 30) as f64 * 10.0], "X")).collect();
        let p = MultiTypePattern::from_points(w, pts).unwrap();
        let lam = estimate_intensities(&p);
        assert!((lam.values[0] - 0.01).abs() < 1e-15);

        let w = Window::square(200.0, 2).unwrap();
        let pts: Vec<(Vec<f64>, &str)> =
            (0..4000).map(|i| (vec![(i % 80) as f64 * 2.5, (i / 80) as f64 * 4.0], "A")).collect();
        let p = MultiTypePattern::from_points(w, pts).unwrap();
        assert!((estimate_intensities(&p).values[0] - 0.1).abs() < 1e-15);

        let p = MultiTypePattern::empty(Window::square(1.0, 2).unwrap(), vec!["X".into()]).unwrap();
        assert_eq!(estimate_intensities(&p).values, vec![0.0]);
    }

    #[test]
    fn one_and_three_dimensional_headers() {
        let p = parse_pattern_csv("# window: 0 5\nx,type\n1.5,A\n", None, None).unwrap();
        assert_eq!(p.dim(), 1);
        let p = parse_pattern_csv("# window: 0 1 0 1 0 1\nx,y,z,type\n0.5,0.5,0.5,A\n", None, None).unwrap();
        assert_eq!(p.dim(), 3);
    }
}
